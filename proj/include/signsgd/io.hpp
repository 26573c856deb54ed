#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "signsgd/simulation.hpp"
#include "signsgd/theory.hpp"

namespace signsgd {

/// Header: step,loss,accuracy,eta,sign_agreement,zero_fraction
std::string metrics_csv(const RunRecord& rec);
nlohmann::json run_summary(const RunRecord& rec);

/// Writes metrics.csv and summary.json into `dir`, creating it if needed.
void write_run(const std::filesystem::path& dir, const RunRecord& rec);

/// Header: check,family,snr,workers,alpha,p,observed,std_error,bound,margin,status
std::string bounds_csv(const std::vector<BoundCheck>& rows);
nlohmann::json bounds_summary(const std::vector<BoundCheck>& rows);

struct ReportRow {
  std::string run;
  std::string rule;
  std::string strategy;
  double alpha = 0.0;
  std::size_t workers = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  std::optional<std::size_t> steps_to_threshold;
};

/// Reads summary.json and metrics.csv from a run directory. The threshold is
/// relative: first recorded step whose loss is <= threshold * initial loss.
ReportRow read_report_row(const std::filesystem::path& run_dir, double relative_threshold);

/// Header: run,rule,strategy,alpha,workers,initial_loss,final_loss,final_accuracy,steps_to_threshold
/// An unreached threshold leaves the last column empty.
std::string report_csv(const std::vector<ReportRow>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace signsgd
