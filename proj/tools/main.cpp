#include <iostream>
#include <string>
#include <vector>

#include "carroll_forge/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return carrollforge::run_command(args, std::cout, std::cerr);
}
