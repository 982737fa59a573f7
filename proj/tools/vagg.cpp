// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "vagg/cli.hpp"

int main(int argc, char** argv) { return vagg::run_cli(argc, argv, std::cout, std::cerr); }
