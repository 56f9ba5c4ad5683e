// SPDX-License-Identifier: Apache-2.0
#include "exam/cli.hpp"

int main(int argc, char **argv) { return exam::cli::main(argc, argv); }
