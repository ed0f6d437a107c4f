#include <iostream>

#include "tlsspec/cli.hpp"

int main(int argc, char** argv) { return tlsspec::cli::run(argc, argv, std::cout, std::cerr); }
