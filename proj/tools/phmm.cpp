#include <iostream>

#include "phmm/cli.hpp"

int main(int argc, char** argv) { return phmm::run_cli(argc, argv, std::cout, std::cerr); }
