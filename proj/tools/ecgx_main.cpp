#include <iostream>

#include "ecgx/cli.hpp"

int main(int argc, char** argv) { return ecgx::run_cli(argc, argv, std::cout, std::cerr); }
