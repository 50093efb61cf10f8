#include "lateiv/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return lateiv::run_cli(argc, argv, std::cout, std::cerr); }
