#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return bsdiag::app::run_cli(argc, argv, std::cout, std::cerr); }
