#include "switchcot/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return switchcot::cli::run(args).exit_code;
}
