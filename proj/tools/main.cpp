#include <string>
#include <vector>

#include "motionflow/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return motionflow::run_cli(args);
}
