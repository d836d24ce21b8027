#include <iostream>

#include "esd/cli.hpp"

int main(int argc, char** argv) { return esd::run_cli(argc, argv, std::cout, std::cerr); }
