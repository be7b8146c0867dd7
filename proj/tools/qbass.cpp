#include "qbass/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return qbass::cli::run(argc, argv, std::cout, std::cerr); }
