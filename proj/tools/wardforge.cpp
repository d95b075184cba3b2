#include <iostream>

#include "scenario.hpp"

int main(int argc, char** argv) { return wardforge::cli::run_cli(argc, argv, std::cout, std::cerr); }
