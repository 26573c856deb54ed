#include "signsgd/simulation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace signsgd {
namespace {

// Phase one of a round: every worker that computes a gradient. Blind
// adversaries invert theirs before the momentum update.
void honest_phase(const ExperimentConfig& cfg, const Dataset& data, const DenseVector& x,
                  std::size_t first_worker, std::size_t blind_count,
                  std::vector<RngStream>& streams, std::vector<WorkerState>& states,
                  std::vector<WorkerMessage>& out) {
  const std::size_t m_count = cfg.workers;
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      const Batch batch = sample_batch(streams[m], data.rows, cfg.optimizer.batch_size);
      DenseVector g = grad(cfg.model, x, data, batch);
      if (m < blind_count) g = blind_invert(g);
      out[m] = worker_message(cfg.optimizer, states[m], g);
    }
  };

  const std::size_t active = m_count - first_worker;
  const std::size_t threads = std::min<std::size_t>(std::max<std::size_t>(cfg.threads, 1), active);
  if (threads <= 1) {
    work(first_worker, m_count);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (active + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = first_worker + t * chunk;
    const std::size_t e = std::min(m_count, b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
}

void fill_sign_stats(const DenseVector& direction, const DenseVector& true_grad, RoundMetrics& r) {
  std::size_t agree = 0;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < direction.size(); ++i) {
    if (sign_of(direction[i]) == sign_of(true_grad[i])) ++agree;
    if (direction[i] == 0.0) ++zeros;
  }
  const auto d = static_cast<double>(direction.size());
  r.sign_agreement = static_cast<double>(agree) / d;
  r.zero_fraction = static_cast<double>(zeros) / d;
}

double maybe_accuracy(const ModelSpec& spec, const DenseVector& x, const Dataset& data) {
  return spec.is_classification() ? accuracy(spec, x, data)
                                  : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::size_t ExperimentConfig::byzantine_count() const {
  return static_cast<std::size_t>(std::round(alpha * static_cast<double>(workers)));
}

std::vector<std::string> ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kConfigInvalid, what); };
  try {
    model.validate();
    optimizer.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  if (workers == 0) fail("run.workers must be >= 1");
  if (iterations == 0) fail("run.iterations must be >= 1");
  if (eval_every == 0) fail("run.eval_every must be >= 1");
  if (!(alpha >= 0.0 && alpha < 1.0)) fail("adversary.alpha must lie in [0, 1)");
  if (data.kind == DataSource::Kind::kSynthetic) {
    if (data.n_samples == 0) fail("data.n_samples must be >= 1");
    if (!(data.noise_level >= 0.0)) fail("data.noise must be >= 0");
  } else if (data.images.empty() || data.labels.empty()) {
    fail("idx data needs data.images and data.labels");
  }
  try {
    adversary().validate(optimizer.rule, workers);
  } catch (const Error& e) {
    fail(e.what());
  }

  std::vector<std::string> warnings;
  if (strategy == Strategy::kNone && alpha > 0.0) {
    warnings.push_back("adversary.alpha > 0 with strategy none: all workers are honest");
  }
  if (strategy != Strategy::kNone && byzantine_count() == 0) {
    warnings.push_back("adversary strategy set but round(alpha * M) = 0");
  }
  if (p_estimate) {
    const double p = *p_estimate;
    if (!(p > 0.0 && p <= 1.0)) fail("adversary.p_estimate must lie in (0, 1]");
    if (alpha >= 1.0 - 1.0 / (2.0 * p)) {
      warnings.push_back("alpha >= 1 - 1/(2p): majority-vote convergence guarantee does not apply");
    }
  }
  return warnings;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.data.kind == DataSource::Kind::kIdx) {
    Dataset d = load_idx(cfg.data.images, cfg.data.labels);
    if (cfg.model.kind == ModelKind::kLogisticRegression && d.num_classes != 2) {
      throw Error(ErrorKind::kConfigInvalid, "logistic regression needs binary IDX labels");
    }
    return d;
  }
  const ModelKind gen = cfg.model.kind == ModelKind::kLinearRegression
                            ? ModelKind::kLinearRegression
                            : ModelKind::kLogisticRegression;
  RngStream rng(cfg.seed, kDataStream);
  return generate_synthetic(rng, gen, cfg.model.input_dim, cfg.data.n_samples, cfg.data.noise_level)
      .data;
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, load_dataset(cfg));
}

RunRecord run_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg;
  rec.warnings = cfg.validate();
  data.validate();
  if (cfg.model.is_classification() && cfg.model.kind == ModelKind::kMlp &&
      data.num_classes > cfg.model.num_classes) {
    throw Error(ErrorKind::kConfigInvalid, "dataset has more classes than model.num_classes");
  }

  const std::size_t m_count = cfg.workers;
  const std::size_t f = cfg.byzantine_count();
  const Strategy strategy = f == 0 ? Strategy::kNone : cfg.strategy;
  const bool byzantine = is_byzantine(strategy);
  const std::size_t blind_count = strategy == Strategy::kBlindInvert ? f : 0;
  const std::size_t first_computing = byzantine ? f : 0;
  rec.byzantine_count = f;

  RngStream init_rng(cfg.seed, kInitStream);
  DenseVector x = init_params(cfg.model, init_rng);
  const std::size_t dim = x.size();
  std::vector<DenseVector> replicas;
  if (cfg.track_replicas) replicas.assign(m_count, x);

  std::vector<RngStream> streams;
  streams.reserve(m_count);
  for (std::size_t m = 0; m < m_count; ++m) streams.emplace_back(cfg.seed, m);
  std::vector<WorkerState> states(m_count, WorkerState(dim));
  std::vector<WorkerMessage> phase_one(m_count);

  rec.initial_loss = loss(cfg.model, x, data);
  rec.initial_accuracy = maybe_accuracy(cfg.model, x, data);

  const bool sign_rule = is_sign_rule(cfg.optimizer.rule);
  std::vector<SignVector> sign_msgs;
  std::vector<DenseVector> dense_msgs;

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const bool record = (t + 1) % cfg.eval_every == 0 || t + 1 == cfg.iterations;
    honest_phase(cfg, data, x, first_computing, blind_count, streams, states, phase_one);

    DenseVector true_grad;
    if (record || strategy == Strategy::kByzOpposeTrueSign) true_grad = grad(cfg.model, x, data);

    // Arrival order at the server: phase-one messages, then the Byzantines.
    DenseVector direction;
    if (sign_rule) {
      sign_msgs.clear();
      for (std::size_t m = first_computing; m < m_count; ++m) {
        sign_msgs.push_back(std::get<SignVector>(phase_one[m]));
      }
      if (byzantine) {
        std::vector<SignVector> byz;
        if (strategy == Strategy::kByzOpposeTrueSign) {
          byz = byz_oppose_true_sign(true_grad, f);
        } else {
          const auto variant = strategy == Strategy::kByzColludePaper ? CollusionVariant::kPaper
                                                                      : CollusionVariant::kZeroing;
          const HonestSignSum honest = sign_msgs.empty() ? HonestSignSum(dim, 0)
                                                         : sum_signs_exact(sign_msgs);
          byz = byz_collude_signs(honest, f, variant).messages;
        }
        sign_msgs.insert(sign_msgs.end(), byz.begin(), byz.end());
      }
      direction = server_aggregate_signs(sign_msgs).as_dense();
    } else {
      dense_msgs.clear();
      for (std::size_t m = first_computing; m < m_count; ++m) {
        dense_msgs.push_back(std::get<DenseVector>(phase_one[m]));
      }
      if (byzantine) {
        auto byz = byz_inverse_sum(cfg.optimizer.rule, dense_msgs, f, dim);
        dense_msgs.insert(dense_msgs.end(), byz.begin(), byz.end());
      }
      direction = server_aggregate_sgd(dense_msgs);
    }

    x = apply_update(cfg.optimizer, x, direction, t);
    if (cfg.track_replicas) {
      for (DenseVector& replica : replicas) {
        replica = apply_update(cfg.optimizer, replica, direction, t);
        if (replica != x) throw Error(ErrorKind::kInvalidArgument, "worker replicas diverged");
      }
    }

    if (record) {
      RoundMetrics row;
      row.step = t + 1;
      row.loss = loss(cfg.model, x, data);
      row.accuracy = maybe_accuracy(cfg.model, x, data);
      row.eta = effective_eta(cfg.optimizer, t);
      fill_sign_stats(direction, true_grad, row);
      rec.metrics.push_back(row);
    }
  }

  rec.final_params = std::move(x);
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<RunRecord> run_sweep(const ExperimentConfig& base, std::span<const double> alphas,
                                 std::span<const OptimizerConfig> rules) {
  if (alphas.empty() || rules.empty()) {
    throw Error(ErrorKind::kConfigInvalid, "sweep grids must be non-empty");
  }
  const Dataset data = load_dataset(base);
  std::vector<RunRecord> out;
  out.reserve(alphas.size() * rules.size());
  for (double alpha : alphas) {
    for (const OptimizerConfig& opt : rules) {
      ExperimentConfig cfg = base;
      cfg.alpha = alpha;
      cfg.optimizer = opt;
      out.push_back(run_experiment(cfg, data));
    }
  }
  return out;
}

std::vector<RunRecord> run_sweep(const ExperimentConfig& base, std::span<const double> alphas,
                                 std::span<const Rule> rules) {
  std::vector<OptimizerConfig> opts;
  for (Rule r : rules) {
    OptimizerConfig o = base.optimizer;
    o.rule = r;
    if (r == Rule::kSignSgd) o.beta = 0.0;
    opts.push_back(o);
  }
  return run_sweep(base, alphas, opts);
}

}  // namespace signsgd
