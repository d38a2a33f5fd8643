#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace attdmm::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kNumeric = 4,
  kCheckFailed = 5,
};

// args excludes the program name: {"gen", "--records", "100", ...}.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace attdmm::cli
