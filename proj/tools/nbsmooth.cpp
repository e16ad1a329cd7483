#include <iostream>

#include "nbsmooth/cli.hpp"

int main(int argc, char** argv) { return nbs::run_cli(argc, argv, std::cout, std::cerr); }
