#include <string>
#include <vector>

#include "molang/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return molang::run_cli(args);
}
