// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include "sgc_cli.hpp"

int main(int argc, char** argv) {
    return sgc::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
