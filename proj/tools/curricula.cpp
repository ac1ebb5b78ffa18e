#include "curricula/pipeline.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return curricula::run_cli(argc, argv, std::cout, std::cerr);
}
