// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "axllm/cli.hpp"

int main(int argc, char** argv) { return axllm::run_cli(argc, argv, std::cout, std::cerr); }
