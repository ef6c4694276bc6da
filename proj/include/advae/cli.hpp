#pragma once

#include <iostream>
#include <string>

#include "advae/eval.hpp"

namespace advae::cli {

// Full command-line entry point; returns the process exit status. Streams
// are injected so the repl and outputs are testable in-process.
int run_cli(int argc, const char* const* argv, std::istream& in = std::cin,
            std::ostream& out = std::cout, std::ostream& err = std::cerr);

// Disentanglement report JSON, shared between subcommands and tests.
void save_report_json(const eval::DisentanglementReport& report,
                      const std::string& checkpoint_id, const std::string& path);
eval::DisentanglementReport load_report_json(const std::string& path,
                                             std::string* checkpoint_id = nullptr);

}  // namespace advae::cli
