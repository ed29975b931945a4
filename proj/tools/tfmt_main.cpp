#include <iostream>

#include "tfmt/cli.hpp"

int main(int argc, char** argv) { return tfmt::run_cli(argc, argv, std::cout, std::cerr); }
