#include <iostream>

#include "qrmux/cli.hpp"

int main(int argc, char** argv) { return qrmux::cli::run(argc, argv, std::cout, std::cerr); }
