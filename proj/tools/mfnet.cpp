#include "mfnet/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mfnet::run_cli(argc, argv, std::cout, std::cerr); }
