#include "signsgd/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "signsgd/config.hpp"

namespace signsgd {
namespace {

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string metrics_csv(const RunRecord& rec) {
  std::string out = "step,loss,accuracy,eta,sign_agreement,zero_fraction\n";
  for (const RoundMetrics& m : rec.metrics) {
    out += std::to_string(m.step) + ',' + format_double(m.loss) + ',' + format_double(m.accuracy) +
           ',' + format_double(m.eta) + ',' + format_double(m.sign_agreement) + ',' +
           format_double(m.zero_fraction) + '\n';
  }
  return out;
}

nlohmann::json run_summary(const RunRecord& rec) {
  nlohmann::json config = nlohmann::json::object();
  const KeyValueConfig echo = from_experiment(rec.config);
  for (const auto& [section, entries] : echo.sections()) {
    for (const auto& [key, value] : entries) config[section][key] = value;
  }

  nlohmann::json j;
  j["config"] = config;
  j["byzantine_count"] = rec.byzantine_count;
  j["initial_loss"] = number_or_null(rec.initial_loss);
  j["initial_accuracy"] = number_or_null(rec.initial_accuracy);
  if (!rec.metrics.empty()) {
    const RoundMetrics& last = rec.metrics.back();
    j["final"] = {{"step", last.step},
                  {"loss", number_or_null(last.loss)},
                  {"accuracy", number_or_null(last.accuracy)},
                  {"eta", last.eta},
                  {"sign_agreement", last.sign_agreement},
                  {"zero_fraction", last.zero_fraction}};
  }
  j["recorded_steps"] = rec.metrics.size();
  j["warnings"] = rec.warnings;
  j["wall_time_s"] = rec.wall_time_s;
  return j;
}

void write_run(const std::filesystem::path& dir, const RunRecord& rec) {
  std::filesystem::create_directories(dir);
  write_text(dir / "metrics.csv", metrics_csv(rec));
  write_text(dir / "summary.json", run_summary(rec).dump(2) + "\n");
}

std::string bounds_csv(const std::vector<BoundCheck>& rows) {
  std::string out = "check,family,snr,workers,alpha,p,observed,std_error,bound,margin,status\n";
  for (const BoundCheck& r : rows) {
    const bool vote = r.check == "cantelli";
    out += r.check + ',' + r.family + ',' + (vote ? "" : format_double(r.snr)) + ',' +
           (vote ? std::to_string(r.workers) : "") + ',' + (vote ? format_double(r.alpha) : "") +
           ',' + (vote ? format_double(r.p) : "") + ',' + format_double(r.observed) + ',' +
           format_double(r.std_error) + ',' + format_double(r.bound) + ',' +
           format_double(r.margin) + ',' + std::string(to_string(r.status)) + '\n';
  }
  return out;
}

nlohmann::json bounds_summary(const std::vector<BoundCheck>& rows) {
  std::size_t pass = 0, fail = 0, inadmissible = 0;
  nlohmann::json violations = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const BoundCheck& r = rows[i];
    switch (r.status) {
      case CheckStatus::kPass: ++pass; break;
      case CheckStatus::kInadmissible: ++inadmissible; break;
      case CheckStatus::kFail:
        ++fail;
        violations.push_back({{"row", i},
                              {"check", r.check},
                              {"family", r.family},
                              {"snr", r.snr},
                              {"workers", r.workers},
                              {"alpha", r.alpha},
                              {"p", r.p},
                              {"observed", r.observed},
                              {"bound", r.bound}});
        break;
    }
  }
  return {{"passed", fail == 0},
          {"rows", rows.size()},
          {"pass", pass},
          {"fail", fail},
          {"inadmissible", inadmissible},
          {"violations", violations}};
}

ReportRow read_report_row(const std::filesystem::path& run_dir, double relative_threshold) {
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(read_text(run_dir / "summary.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigParse, run_dir.string() + "/summary.json: " + e.what());
  }
  auto num = [](const nlohmann::json& v) {
    return v.is_number() ? v.get<double>() : std::nan("");
  };

  ReportRow row;
  try {
    const auto& cfg = summary.at("config");
    row.run = run_dir.filename().string();
    if (row.run.empty()) row.run = run_dir.parent_path().filename().string();
    row.rule = cfg.at("optimizer").at("rule").get<std::string>();
    row.strategy = cfg.at("adversary").at("strategy").get<std::string>();
    row.alpha = parse_double(cfg.at("adversary").at("alpha").get<std::string>());
    row.workers = static_cast<std::size_t>(parse_unsigned(cfg.at("run").at("workers").get<std::string>()));
    row.initial_loss = num(summary.at("initial_loss"));
    row.final_loss = num(summary.at("final").at("loss"));
    row.final_accuracy = num(summary.at("final").at("accuracy"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigParse, run_dir.string() + "/summary.json: " + e.what());
  }

  std::istringstream csv(read_text(run_dir / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  if (line.rfind("step,loss", 0) != 0) {
    throw Error(ErrorKind::kConfigParse, run_dir.string() + "/metrics.csv: unexpected header");
  }
  const double target = relative_threshold * row.initial_loss;
  while (std::getline(csv, line)) {
    const auto cells = split_csv_line(line);
    if (cells.size() < 2) throw Error(ErrorKind::kConfigParse, "malformed metrics row: " + line);
    if (parse_double(cells[1]) <= target) {
      row.steps_to_threshold = static_cast<std::size_t>(parse_unsigned(cells[0]));
      break;
    }
  }
  return row;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out =
      "run,rule,strategy,alpha,workers,initial_loss,final_loss,final_accuracy,steps_to_threshold\n";
  for (const ReportRow& r : rows) {
    out += r.run + ',' + r.rule + ',' + r.strategy + ',' + format_double(r.alpha) + ',' +
           std::to_string(r.workers) + ',' + format_double(r.initial_loss) + ',' +
           format_double(r.final_loss) + ',' + format_double(r.final_accuracy) + ',' +
           (r.steps_to_threshold ? std::to_string(*r.steps_to_threshold) : "") + '\n';
  }
  return out;
}

}  // namespace signsgd
