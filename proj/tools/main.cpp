#include <iostream>

#include "camadapt/cli.hpp"

int main(int argc, char** argv) { return camadapt::dispatch(argc, argv, std::cout, std::cerr); }
