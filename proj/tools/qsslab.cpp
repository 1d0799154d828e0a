#include <iostream>

#include "qss/cli.hpp"

int main(int argc, char** argv) { return qss::cli::run_cli(argc, argv, std::cout, std::cerr); }
