#include <iostream>
#include <string>
#include <vector>

#include "ddtsr/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ddtsr::cli::run(args, std::cout, std::cerr);
}
