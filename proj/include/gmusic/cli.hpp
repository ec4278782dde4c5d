#pragma once

#include <iosfwd>

namespace gmusic {

// Entry point of the command-line tool. Returns 0 on success, 1 on a parse
// or validation error (including a non-separated refusal) and 2 on a
// numerical failure. Diagnostics go to `err`, data to files or `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace gmusic
