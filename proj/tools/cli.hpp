#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace layermix::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kIo = 3,
  kNumerical = 4,
  kPartial = 5,
};

// Entry point shared by the binary and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Splits a --schemes value on commas, re-attaching bare layer indices to the
// preceding wavg entry: "layer:1,wavg:0,1,avg" -> {"layer:1", "wavg:0,1", "avg"}.
std::vector<std::string> split_schemes(const std::string& csv);

}  // namespace layermix::cli
