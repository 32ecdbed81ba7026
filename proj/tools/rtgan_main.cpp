#include <iostream>

#include "rtgan/cli.hpp"

int main(int argc, char** argv) { return rtgan::cli_main(argc, argv, std::cout, std::cerr); }
