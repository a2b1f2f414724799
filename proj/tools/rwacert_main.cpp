#include <iostream>

#include "rwacert/cli.hpp"

int main(int argc, char** argv) { return rwacert::cli::run(argc, argv, std::cout, std::cerr); }
