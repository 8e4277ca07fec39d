#pragma once

#include "pf/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pf {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitBadConfig = 2,
  kExitUnstable = 3,  // training divergence or oracle blow-up
  kExitCorruptDump = 4,
  kExitUnderResolved = 5,
  kExitGridMismatch = 6,
};

int exit_code_for(ErrorKind kind);

/// `explicit_dir` if set, else $PF_OUTPUT_DIR, else the working directory.
std::filesystem::path resolve_output_dir(const std::filesystem::path& explicit_dir);

struct TrainArgs {
  std::filesystem::path config;             // empty: defaults only
  std::vector<std::string> overrides;       // key=value, applied after the file
  std::filesystem::path out;
  bool quiet = false;
};

struct AnalyzeArgs {
  std::filesystem::path dump;
  std::filesystem::path out;
  bool svg = true;
  std::uint64_t seed = 0;
};

struct KernelArgs {
  double nu = 0.01 / kPi;
  Index n = 100;
  double h = 0;          // absolute width; when 0, h_cells * dx is used
  double h_cells = 3.0;
  std::string u_field = "sin";  // zero | sin | path to a t,x,u snapshot CSV
  std::filesystem::path out;
};

struct OracleArgs {
  double nu = 0.01 / kPi;
  Index n = 1024;
  double cfl = 0.4;
  std::vector<double> times{0.5};
  std::string advection = "burgers";  // burgers | none
  std::filesystem::path out;
};

struct CompareArgs {
  std::filesystem::path dump;
  std::vector<std::filesystem::path> snapshots;
  std::filesystem::path out;
};

/// Each command writes its files plus manifest.json into the output
/// directory, reports to `log`, and returns an exit code. Library errors are
/// mapped through exit_code_for and never escape.
int cmd_train(const TrainArgs& args, std::ostream& log);
int cmd_analyze(const AnalyzeArgs& args, std::ostream& log);
int cmd_kernel(const KernelArgs& args, std::ostream& log);
int cmd_oracle(const OracleArgs& args, std::ostream& log);
int cmd_compare(const CompareArgs& args, std::ostream& log);

}  // namespace pf
