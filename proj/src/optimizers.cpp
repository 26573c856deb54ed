#include "signsgd/optimizers.hpp"

#include <cmath>
#include <string>

namespace signsgd {

std::string_view to_string(Rule rule) {
  switch (rule) {
    case Rule::kDistSgd: return "dist-sgd";
    case Rule::kSignSgd: return "signsgd";
    case Rule::kSignum: return "signum";
  }
  return "unknown";
}

Rule parse_rule(std::string_view name) {
  if (name == "dist-sgd" || name == "sgd") return Rule::kDistSgd;
  if (name == "signsgd") return Rule::kSignSgd;
  if (name == "signum") return Rule::kSignum;
  throw Error(ErrorKind::kInvalidArgument, "unknown optimizer rule '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorKind::kInvalidArgument, "learning rate must be > 0");
  }
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "momentum must lie in [0, 1)");
  }
  if (rule == Rule::kSignSgd && beta != 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "signsgd is signum with beta = 0");
  }
  if (!(weight_decay >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "weight decay must be >= 0");
  if (batch_size == 0) throw Error(ErrorKind::kInvalidArgument, "batch size must be >= 1");
  if (!(decay_factor >= 1.0)) throw Error(ErrorKind::kInvalidArgument, "decay factor must be >= 1");
  if (decay_every == 0) throw Error(ErrorKind::kInvalidArgument, "decay interval must be >= 1");
}

OptimizerConfig paper_optimizer(Rule rule, bool mnist) {
  OptimizerConfig cfg;
  cfg.rule = rule;
  cfg.decay_factor = 10.0;
  cfg.decay_every = 30;
  switch (rule) {
    case Rule::kDistSgd:
      cfg.eta = 1e-3;
      cfg.beta = 0.0;
      break;
    case Rule::kSignSgd:
      cfg.eta = mnist ? 1e-5 : 1e-4;
      cfg.beta = 0.0;
      break;
    case Rule::kSignum:
      cfg.eta = mnist ? 1e-5 : 1e-4;
      cfg.beta = 0.9;
      break;
  }
  return cfg;
}

WorkerMessage worker_message(const OptimizerConfig& cfg, WorkerState& state,
                             const DenseVector& stochastic_grad) {
  if (cfg.rule == Rule::kDistSgd) return stochastic_grad;
  if (state.momentum.empty()) state.momentum = DenseVector(stochastic_grad.size());
  require_same_size(stochastic_grad.size(), state.momentum.size(), "worker momentum");

  DenseVector& v = state.momentum;
  const double keep = cfg.rule == Rule::kSignSgd ? 0.0 : cfg.beta;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = (1.0 - keep) * stochastic_grad[i] + keep * v[i];
  }
  return sign(v);
}

SignVector server_aggregate_signs(std::span<const SignVector> messages) {
  const auto votes = sum_signs_exact(messages);
  std::vector<std::int8_t> out(votes.size());
  for (std::size_t i = 0; i < votes.size(); ++i) {
    out[i] = static_cast<std::int8_t>((votes[i] > 0) - (votes[i] < 0));
  }
  return SignVector(std::move(out));
}

DenseVector server_aggregate_sgd(std::span<const DenseVector> messages) {
  if (messages.empty()) throw Error(ErrorKind::kEmptyInput, "server_aggregate_sgd: no messages");
  DenseVector total(messages.front().size());
  for (const DenseVector& m : messages) total += m;
  total *= 1.0 / static_cast<double>(messages.size());
  return total;
}

double effective_eta(const OptimizerConfig& cfg, std::size_t step) {
  const auto decays = static_cast<double>(step / cfg.decay_every);
  return cfg.eta / std::pow(cfg.decay_factor, decays);
}

DenseVector apply_update(const OptimizerConfig& cfg, const DenseVector& x,
                         const DenseVector& direction, std::size_t step) {
  require_same_size(direction.size(), x.size(), "apply_update");
  const double eta_t = effective_eta(cfg, step);
  DenseVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] - eta_t * (direction[i] + cfg.weight_decay * x[i]);
  }
  return out;
}

DenseVector apply_update(const OptimizerConfig& cfg, const DenseVector& x,
                         const SignVector& direction, std::size_t step) {
  return apply_update(cfg, x, direction.as_dense(), step);
}

TheoremHyperparams theorem_hyperparams(double f0, double fstar, double l1_smoothness,
                                       std::size_t iterations) {
  if (!(f0 > fstar)) throw Error(ErrorKind::kInvalidArgument, "need f0 > f*");
  if (!(l1_smoothness > 0.0)) throw Error(ErrorKind::kInvalidArgument, "need ||L||_1 > 0");
  if (iterations == 0) throw Error(ErrorKind::kInvalidArgument, "need K >= 1");
  const double k = static_cast<double>(iterations);
  return {std::sqrt((f0 - fstar) / (l1_smoothness * k)), iterations};
}

}  // namespace signsgd
