#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "signsgd/adversaries.hpp"
#include "signsgd/models.hpp"
#include "signsgd/optimizers.hpp"

namespace signsgd {

struct DataSource {
  enum class Kind { kSynthetic, kIdx };
  Kind kind = Kind::kSynthetic;
  std::size_t n_samples = 2000;
  double noise_level = 0.0;
  std::filesystem::path images;
  std::filesystem::path labels;
};

struct ExperimentConfig {
  ModelSpec model;
  DataSource data;
  OptimizerConfig optimizer;
  std::size_t workers = 15;
  Strategy strategy = Strategy::kNone;
  double alpha = 0.0;
  std::size_t iterations = 300;
  std::uint64_t seed = 8005;
  std::size_t eval_every = 10;
  // Honest workers of a round are spread over this many threads.
  std::size_t threads = 1;
  // Keep one parameter replica per worker and check they never diverge.
  bool track_replicas = false;
  // Optional per-worker sign-correctness estimate used for the admissibility warning.
  std::optional<double> p_estimate;

  /// f = round(alpha * M), half away from zero.
  std::size_t byzantine_count() const;
  AdversarySpec adversary() const { return {strategy, byzantine_count()}; }

  /// Throws kConfigInvalid on a bad config; returns non-fatal warnings.
  std::vector<std::string> validate() const;
};

struct RoundMetrics {
  std::size_t step = 0;  // updates applied so far
  double loss = 0.0;
  double accuracy = 0.0;  // NaN for regression models
  double eta = 0.0;       // learning rate of the update that produced this step
  double sign_agreement = 0.0;
  double zero_fraction = 0.0;

  bool operator==(const RoundMetrics&) const = default;
};

struct RunRecord {
  ExperimentConfig config;
  std::size_t byzantine_count = 0;
  double initial_loss = 0.0;
  double initial_accuracy = 0.0;
  std::vector<RoundMetrics> metrics;
  DenseVector final_params;
  double wall_time_s = 0.0;
  std::vector<std::string> warnings;
};

// Stream ids for non-worker randomness; worker m uses stream id m.
inline constexpr std::uint64_t kDataStream = 0xDA7A000000000000ULL;
inline constexpr std::uint64_t kInitStream = 0x1A17000000000000ULL;

Dataset load_dataset(const ExperimentConfig& cfg);

RunRecord run_experiment(const ExperimentConfig& cfg);
RunRecord run_experiment(const ExperimentConfig& cfg, const Dataset& data);

/// One run per (alpha, rule) pair in row-major order (alpha outer). The first
/// round(alpha * M) workers are the adversaries in every run.
std::vector<RunRecord> run_sweep(const ExperimentConfig& base, std::span<const double> alphas,
                                 std::span<const OptimizerConfig> rules);
/// Same, keeping the base optimizer settings and swapping only the rule
/// (signsgd forces beta = 0).
std::vector<RunRecord> run_sweep(const ExperimentConfig& base, std::span<const double> alphas,
                                 std::span<const Rule> rules);

}  // namespace signsgd
