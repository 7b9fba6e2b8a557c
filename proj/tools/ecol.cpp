#include <iostream>

#include "ecol/cli.hpp"

int main(int argc, char** argv) { return ecol::cli::run(argc, argv, std::cout, std::cerr); }
