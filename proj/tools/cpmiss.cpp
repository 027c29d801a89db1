#include "cpmiss/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return cpmiss::cli::run(argc, argv, std::cout, std::cerr);
}
