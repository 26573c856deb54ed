#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace signsgd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out = "out";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

struct SweepOptions {
  RunOptions run;
  std::vector<double> alphas;
  std::vector<std::string> rules;
  // Use each rule's published learning rate, momentum and decay.
  bool paper_defaults = false;
};

struct VerifyOptions {
  std::optional<std::filesystem::path> grid;
  std::filesystem::path out = "out";
};

struct GradientCheckOptions {
  std::optional<std::filesystem::path> config;
  std::size_t points = 20;
  double step = 1e-6;
  double tolerance = 1e-5;
  std::uint64_t seed = 8005;
};

struct ReportOptions {
  std::vector<std::filesystem::path> run_dirs;
  std::filesystem::path out = "out";
  double threshold = 0.5;
};

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify_bounds(const VerifyOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gradient_check(const GradientCheckOptions& opts, std::ostream& out, std::ostream& err);
int cmd_report(const ReportOptions& opts, std::ostream& out, std::ostream& err);

/// Full command line entry point; argv[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace signsgd::cli
