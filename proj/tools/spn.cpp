#include <iostream>

#include "minispn/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return minispn::run_cli(args, std::cout, std::cerr);
}
