#include <iostream>

#include "oscr/cli.hpp"

int main(int argc, char** argv) {
    return oscr::cli_main({argv, argv + argc}, std::cout, std::cerr);
}
