#include <iostream>

#include "pdgrav/cli.hpp"

int main(int argc, char** argv) { return pdgrav::cli::run(argc, argv, std::cout, std::cerr); }
