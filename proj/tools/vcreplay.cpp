#include <iostream>

#include "vcreplay/cli.hpp"

int main(int argc, char **argv) { return vcreplay::cli::main_entry(argc, argv, std::cout, std::cerr); }
