#include "commands.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "signsgd/config.hpp"
#include "signsgd/io.hpp"
#include "signsgd/simulation.hpp"
#include "signsgd/theory.hpp"

namespace signsgd::cli {
namespace {

// Exit-2 failure with a machine-readable error JSON on stderr (and in the
// output directory when one is known).
int report_error(const Error& e, std::ostream& err, const std::filesystem::path* out_dir) {
  const nlohmann::json doc = {
      {"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}}};
  err << doc.dump() << '\n';
  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    if (!ec) {
      try {
        write_text(*out_dir / "error.json", doc.dump(2) + "\n");
      } catch (const Error&) {
      }
    }
  }
  return kExitUsage;
}

ExperimentConfig load_experiment(const RunOptions& opts) {
  KeyValueConfig kv = KeyValueConfig::load(opts.config);
  for (const std::string& o : opts.overrides) kv.apply_override(o);
  if (opts.seed) kv.set("run", "seed", std::to_string(*opts.seed));
  return to_experiment(kv);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

BoundGrid load_grid(const std::filesystem::path& path) {
  const KeyValueConfig kv = KeyValueConfig::load(path);
  for (const auto& [section, entries] : kv.sections()) {
    for (const auto& [key, _] : entries) {
      const std::string name = section + "." + key;
      if (name != "lemma.families" && name != "lemma.snr" && name != "lemma.samples" &&
          name != "vote.workers" && name != "vote.p" && name != "vote.alpha" &&
          name != "run.seed") {
        throw Error(ErrorKind::kConfigInvalid, "unknown grid key " + name);
      }
    }
  }
  BoundGrid g;
  auto list = [&](const char* section, const char* key) {
    const std::string* v = kv.find(section, key);
    return v ? split_list(*v) : std::vector<std::string>{};
  };
  try {
    for (const auto& f : list("lemma", "families")) g.families.push_back(parse_noise_family(f));
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfigInvalid, e.what());
  }
  for (const auto& s : list("lemma", "snr")) g.snrs.push_back(parse_double(s));
  for (const auto& m : list("vote", "workers")) {
    g.workers.push_back(static_cast<std::size_t>(parse_unsigned(m)));
  }
  for (const auto& p : list("vote", "p")) g.ps.push_back(parse_double(p));
  for (const auto& a : list("vote", "alpha")) g.alphas.push_back(parse_double(a));
  if (const std::string* v = kv.find("lemma", "samples")) g.samples = parse_unsigned(*v);
  if (const std::string* v = kv.find("run", "seed")) g.seed = parse_unsigned(*v);

  for (double s : g.snrs) {
    if (!(s > 0.0)) throw Error(ErrorKind::kConfigInvalid, "lemma.snr values must be > 0");
  }
  for (double p : g.ps) {
    if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::kConfigInvalid, "vote.p values in (0, 1]");
  }
  for (double a : g.alphas) {
    if (!(a >= 0.0 && a < 1.0)) throw Error(ErrorKind::kConfigInvalid, "vote.alpha in [0, 1)");
  }
  for (std::size_t m : g.workers) {
    if (m == 0) throw Error(ErrorKind::kConfigInvalid, "vote.workers values must be >= 1");
  }
  if (g.samples < 1000) throw Error(ErrorKind::kConfigInvalid, "lemma.samples must be >= 1000");
  return g;
}

// Central differences on the mean loss; returns the worst relative error.
double fd_relative_error(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
                         double step) {
  const DenseVector analytic = grad(spec, params, data);
  double diff2 = 0.0, norm2 = 0.0;
  DenseVector probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + step;
    const double up = loss(spec, probe, data);
    probe[i] = params[i] - step;
    const double down = loss(spec, probe, data);
    probe[i] = params[i];
    const double numeric = (up - down) / (2.0 * step);
    diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
    norm2 += std::max(numeric * numeric, analytic[i] * analytic[i]);
  }
  return std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-12);
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_experiment(opts);
    const RunRecord rec = run_experiment(cfg);
    write_run(opts.out, rec);
    for (const std::string& w : rec.warnings) err << "warning: " << w << '\n';
    const RoundMetrics& last = rec.metrics.back();
    out << "run: " << to_string(cfg.optimizer.rule) << " alpha=" << format_double(cfg.alpha)
        << " f=" << rec.byzantine_count << " initial_loss=" << format_double(rec.initial_loss)
        << " final_loss=" << format_double(last.loss)
        << " final_accuracy=" << format_double(last.accuracy) << " -> " << opts.out.string()
        << '\n';
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err, &opts.out);
  }
}

int cmd_sweep(const SweepOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (opts.alphas.empty() || opts.rules.empty()) {
      throw Error(ErrorKind::kConfigInvalid, "sweep needs non-empty --alphas and --rules");
    }
    const ExperimentConfig base = load_experiment(opts.run);
    std::vector<OptimizerConfig> optimizers;
    for (const std::string& name : opts.rules) {
      Rule rule;
      try {
        rule = parse_rule(name);
      } catch (const Error& e) {
        throw Error(ErrorKind::kConfigInvalid, e.what());
      }
      OptimizerConfig o = base.optimizer;
      if (opts.paper_defaults) {
        const OptimizerConfig paper = paper_optimizer(rule, base.data.kind == DataSource::Kind::kIdx);
        o.eta = paper.eta;
        o.beta = paper.beta;
        o.decay_factor = paper.decay_factor;
        o.decay_every = paper.decay_every;
      }
      o.rule = rule;
      if (rule == Rule::kSignSgd) o.beta = 0.0;
      optimizers.push_back(o);
    }
    for (double alpha : opts.alphas) {
      for (const OptimizerConfig& o : optimizers) {
        ExperimentConfig probe = base;
        probe.alpha = alpha;
        probe.optimizer = o;
        probe.validate();
      }
    }

    const auto records = run_sweep(base, opts.alphas, optimizers);
    for (const RunRecord& rec : records) {
      const std::string name = "alpha-" + format_double(rec.config.alpha) + "_" +
                               std::string(to_string(rec.config.optimizer.rule));
      write_run(opts.run.out / name, rec);
      out << name << ": final_loss=" << format_double(rec.metrics.back().loss)
          << " final_accuracy=" << format_double(rec.metrics.back().accuracy) << '\n';
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err, &opts.run.out);
  }
}

int cmd_verify_bounds(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const BoundGrid grid = opts.grid ? load_grid(*opts.grid) : BoundGrid::standard();
    if (grid.empty()) throw Error(ErrorKind::kConfigInvalid, "bound grid is empty");
    const auto rows = verify_bounds(grid);
    if (rows.empty()) throw Error(ErrorKind::kConfigInvalid, "bound grid produced no checks");

    std::filesystem::create_directories(opts.out);
    write_text(opts.out / "bounds.csv", bounds_csv(rows));
    const nlohmann::json summary = bounds_summary(rows);
    write_text(opts.out / "bounds_summary.json", summary.dump(2) + "\n");

    out << "verify-bounds: " << summary["pass"] << " pass, " << summary["fail"] << " fail, "
        << summary["inadmissible"] << " inadmissible\n";
    if (summary["fail"].get<std::size_t>() > 0) {
      for (const auto& v : summary["violations"]) err << "violated: " << v.dump() << '\n';
      return kExitCheckFailed;
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err, &opts.out);
  }
}

int cmd_gradient_check(const GradientCheckOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    std::vector<ModelSpec> specs;
    if (opts.config) {
      ExperimentConfig cfg = load_experiment(RunOptions{*opts.config, {}, {}, {}});
      specs.push_back(cfg.model);
    } else {
      specs.push_back({ModelKind::kLinearRegression, 6, 0, 0});
      specs.push_back({ModelKind::kLogisticRegression, 8, 0, 2});
      specs.push_back({ModelKind::kMlp, 4, 5, 3});
    }

    bool ok = true;
    for (const ModelSpec& spec : specs) {
      spec.validate();
      RngStream rng(opts.seed, static_cast<std::uint64_t>(spec.kind));
      double worst = 0.0;
      for (std::size_t point = 0; point < opts.points; ++point) {
        Dataset data;
        data.rows = 12;
        data.cols = spec.input_dim;
        data.num_classes = spec.is_classification() ? spec.num_classes : 0;
        data.features.resize(data.rows * data.cols);
        for (double& v : data.features) v = rng.normal();
        for (std::size_t i = 0; i < data.rows; ++i) {
          data.labels.push_back(spec.is_classification()
                                    ? static_cast<double>(rng.uniform_index(spec.num_classes))
                                    : rng.normal());
        }
        DenseVector params(spec.param_dim());
        for (double& v : params) v = rng.normal();
        worst = std::max(worst, fd_relative_error(spec, params, data, opts.step));
      }
      const bool pass = worst < opts.tolerance;
      ok = ok && pass;
      out << "gradient-check " << to_string(spec.kind) << " d=" << spec.param_dim()
          << " worst_rel_error=" << format_double(worst) << (pass ? " PASS" : " FAIL") << '\n';
    }
    return ok ? kExitOk : kExitCheckFailed;
  } catch (const Error& e) {
    return report_error(e, err, nullptr);
  }
}

int cmd_report(const ReportOptions& opts, std::ostream& out, std::ostream& err) {
  std::vector<ReportRow> rows;
  for (const auto& dir : opts.run_dirs) {
    try {
      rows.push_back(read_report_row(dir, opts.threshold));
    } catch (const Error& e) {
      err << "warning: skipping " << dir.string() << ": " << e.what() << '\n';
    }
  }
  try {
    if (rows.empty()) throw Error(ErrorKind::kConfigInvalid, "no valid run directories");
    std::filesystem::create_directories(opts.out);
    write_text(opts.out / "report.csv", report_csv(rows));
    out << "report: " << rows.size() << " run(s) -> " << (opts.out / "report.csv").string() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err, nullptr);
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sign-based distributed SGD under blind and Byzantine workers"};
  app.require_subcommand(1);

  RunOptions run;
  std::string seed_text;
  auto add_run_flags = [&](CLI::App* sub, RunOptions& o) {
    sub->add_option("--config", o.config, "experiment config (INI or summary.json)")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--set", o.overrides, "override, e.g. optimizer.eta=1e-4")->take_all();
    sub->add_option("--seed", seed_text, "run seed");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
  add_run_flags(run_cmd, run);

  SweepOptions sweep;
  std::string alphas_text, rules_text;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid over adversary fraction and rule");
  add_run_flags(sweep_cmd, sweep.run);
  sweep_cmd->add_option("--alphas", alphas_text, "comma-separated adversary fractions")->required();
  sweep_cmd->add_option("--rules", rules_text, "comma-separated rules")->required();
  sweep_cmd->add_flag("--paper-defaults", sweep.paper_defaults,
                      "use each rule's published eta, beta and decay");

  VerifyOptions verify;
  std::string grid_path;
  CLI::App* verify_cmd = app.add_subcommand("verify-bounds", "check sign-error and vote bounds");
  verify_cmd->add_option("--config,--grid", grid_path, "grid config (defaults to the standard grid)");
  verify_cmd->add_option("--out", verify.out, "output directory");

  GradientCheckOptions gc;
  std::string gc_config;
  CLI::App* gc_cmd = app.add_subcommand("gradient-check", "finite-difference gradient check");
  gc_cmd->add_option("--config", gc_config, "experiment config whose model is checked");
  gc_cmd->add_option("--points", gc.points, "random points per model");
  gc_cmd->add_option("--seed", gc.seed, "seed");

  ReportOptions report;
  CLI::App* report_cmd = app.add_subcommand("report", "tabulate run directories");
  report_cmd->add_option("runs", report.run_dirs, "run directories")->required();
  report_cmd->add_option("--out", report.out, "output directory");
  report_cmd->add_option("--threshold", report.threshold,
                         "steps-to-threshold: loss <= threshold * initial loss");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto parse_seed = [&](RunOptions& o) {
      if (!seed_text.empty()) o.seed = parse_unsigned(seed_text);
    };
    if (*run_cmd) {
      parse_seed(run);
      return cmd_run(run, out, err);
    }
    if (*sweep_cmd) {
      parse_seed(sweep.run);
      for (const auto& a : split_list(alphas_text)) sweep.alphas.push_back(parse_double(a));
      sweep.rules = split_list(rules_text);
      return cmd_sweep(sweep, out, err);
    }
    if (*verify_cmd) {
      if (!grid_path.empty()) verify.grid = grid_path;
      return cmd_verify_bounds(verify, out, err);
    }
    if (*gc_cmd) {
      if (!gc_config.empty()) gc.config = gc_config;
      return cmd_gradient_check(gc, out, err);
    }
    return cmd_report(report, out, err);
  } catch (const Error& e) {
    return report_error(e, err, nullptr);
  }
}

}  // namespace signsgd::cli
