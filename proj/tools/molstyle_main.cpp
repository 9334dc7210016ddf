#include <iostream>

#include "molstyle/cli.hpp"

int main(int argc, char** argv) { return molstyle::cli::run(argc, argv, std::cout, std::cerr); }
