#include <iostream>

#include "ydl/cli_io.hpp"

int main(int argc, char** argv) { return ydl::run_cli(argc, argv, std::cout, std::cerr); }
