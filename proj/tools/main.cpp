#include <iostream>
#include <string>
#include <vector>

#include "tutoreval/cli/dispatch.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return tutoreval::cli::dispatch(args, std::cout, std::cerr);
}
