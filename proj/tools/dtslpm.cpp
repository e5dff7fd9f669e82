#include "dtslpm/cli.hpp"

int main(int argc, char** argv) { return dtslpm::cli_main(argc, argv); }
