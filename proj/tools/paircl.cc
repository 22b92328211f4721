// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "paircl/cli.h"

int main(int argc, char** argv) { return paircl::run(argc, argv, std::cout, std::cerr); }
