// Command line entry point. The actual verb implementations live in
// vecsim/cli.hpp so tests can drive them in-process.

#include "vecsim/cli.hpp"

int main(int argc, char** argv) { return vecsim::run_cli(argc, argv); }
