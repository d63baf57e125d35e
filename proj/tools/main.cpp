#include <iostream>

#include "vlscene/cli.hpp"

int main(int argc, char** argv) { return vlscene::cli_main(argc, argv, std::cout, std::cerr); }
