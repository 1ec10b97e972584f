#include <string>
#include <vector>

#include "srnkit/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return srnkit::cli::run(args);
}
