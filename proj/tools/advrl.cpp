#include "advrl/io/cli.hpp"

int main(int argc, char** argv) { return advrl::run_cli(argc, argv); }
