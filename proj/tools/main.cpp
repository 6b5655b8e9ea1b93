// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

int main(int argc, char** argv) { return twoi::cli::run_cli(argc, argv); }
