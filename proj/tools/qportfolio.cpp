#include <iostream>

#include "qportfolio/cli.hpp"

int main(int argc, char** argv) { return qportfolio::run_command(argc, argv, std::cout, std::cerr); }
