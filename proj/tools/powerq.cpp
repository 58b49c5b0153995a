#include "powerq/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return powerq::cli::run(argc, argv, std::cout, std::cerr); }
