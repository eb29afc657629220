#include <iostream>

#include "statns/commands.hpp"

int main(int argc, char** argv) { return statns::run_cli(argc, argv, std::cout, std::cerr); }
