#include <iostream>

#include "cogstat/cli.hpp"

int main(int argc, char** argv) { return cogstat::cli::run(argc, argv, std::cout, std::cerr); }
