#pragma once

#include <string>
#include <vector>

namespace kft::cli {

// Parses argv (program name excluded) and executes one subcommand. Library
// errors are printed to stderr as "error (<category>): <message>" and mapped
// to exit status 1; usage problems exit 2; success exits 0.
int run_command(const std::vector<std::string>& args);

}  // namespace kft::cli
