#include <iostream>

#include "ssal/cli.hpp"

int main(int argc, char** argv) { return ssal::run_cli(argc, argv, std::cout, std::cerr); }
