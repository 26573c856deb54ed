#pragma once

#include <span>
#include <string_view>
#include <variant>

#include "signsgd/core.hpp"

namespace signsgd {

enum class Rule { kDistSgd, kSignSgd, kSignum };

std::string_view to_string(Rule rule);
Rule parse_rule(std::string_view name);
inline bool is_sign_rule(Rule r) noexcept { return r != Rule::kDistSgd; }

struct OptimizerConfig {
  Rule rule = Rule::kSignum;
  double eta = 1e-4;
  double beta = 0.9;
  double weight_decay = 0.0;
  std::size_t batch_size = 32;
  // eta_t = eta / decay_factor^floor(step / decay_every)
  double decay_factor = 10.0;
  std::size_t decay_every = 30;

  /// Throws kInvalidArgument; signsgd additionally requires beta == 0.
  void validate() const;
};

/// Learning rates, momentum and decay used for the published runs.
OptimizerConfig paper_optimizer(Rule rule, bool mnist = false);

struct WorkerState {
  DenseVector momentum;

  WorkerState() = default;
  explicit WorkerState(std::size_t dim) : momentum(dim) {}
};

/// What a worker pushes to the server: signs for the sign rules, the raw
/// stochastic gradient for distributed SGD.
using WorkerMessage = std::variant<SignVector, DenseVector>;

/// Updates v <- (1 - beta) g + beta v and returns sg(v); dist-sgd returns g.
WorkerMessage worker_message(const OptimizerConfig& cfg, WorkerState& state,
                             const DenseVector& stochastic_grad);

/// Majority vote sg(sum of signs). Tied coordinates come back as 0.
SignVector server_aggregate_signs(std::span<const SignVector> messages);

/// Coordinate-wise mean, summed left to right in message order.
DenseVector server_aggregate_sgd(std::span<const DenseVector> messages);

double effective_eta(const OptimizerConfig& cfg, std::size_t step);

/// x - eta_t (direction + lambda x).
DenseVector apply_update(const OptimizerConfig& cfg, const DenseVector& x,
                         const DenseVector& direction, std::size_t step);
DenseVector apply_update(const OptimizerConfig& cfg, const DenseVector& x,
                         const SignVector& direction, std::size_t step);

struct TheoremHyperparams {
  double eta;
  std::size_t batch_size;
};

/// eta = sqrt((f0 - f*) / (||L||_1 K)), n = K.
TheoremHyperparams theorem_hyperparams(double f0, double fstar, double l1_smoothness,
                                       std::size_t iterations);

}  // namespace signsgd
