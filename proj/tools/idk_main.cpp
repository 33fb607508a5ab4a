// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "idk/cli.hpp"

int main(int argc, char** argv) {
  return idk::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
