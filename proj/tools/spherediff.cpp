#include "spherediff/cli.hpp"

int main(int argc, char** argv) { return spherediff::run_cli(argc, argv); }
