#include <iostream>

#include "refx/cli.hpp"

int main(int argc, char** argv) { return refx::cli_main(argc, argv, std::cout, std::cerr); }
