#include <iostream>

#include "refract/cli.hpp"

int main(int argc, char** argv) { return refract::cli::dispatch(argc, argv, std::cout, std::cerr); }
