#include "vizproxy/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    auto r = vizproxy::runCommand(args);
    std::cout << r.out;
    if (!r.err.empty()) std::cerr << r.err << "\n";
    return r.exitCode;
}
