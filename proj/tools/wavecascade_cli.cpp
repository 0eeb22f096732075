#include <iostream>

#include "wavecascade/cli.hpp"

int main(int argc, char** argv) { return wavecascade::run_cli(argc, argv, std::cout, std::cerr); }
