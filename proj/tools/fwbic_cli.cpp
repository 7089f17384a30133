#include "fwbic/cli_io.hpp"
int main(int argc, char **argv) { return fwbic::run_cli(argc, argv); }
