#include "signsgd/theory.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

namespace signsgd {
namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;
constexpr double kSqrt2 = std::numbers::sqrt2;

void check_vote_args(std::size_t workers, double alpha, double p) {
  if (workers == 0) throw Error(ErrorKind::kInvalidArgument, "need M >= 1 workers");
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "p must lie in (0, 1]");
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "alpha must lie in [0, 1)");
  }
}

void require_admissible(double alpha, double p) {
  if (!vote_admissible(alpha, p)) {
    throw Error(ErrorKind::kInadmissible,
                "requires alpha < 1 - 1/(2p) (honest majority in expectation); got alpha=" +
                    std::to_string(alpha) + ", p=" + std::to_string(p));
  }
}

double sqrt_l_gap(const BoundInputs& in) {
  return std::sqrt(l1_norm(in.smoothness) * (in.f0 - in.fstar));
}

}  // namespace

double lemma1_bound(double snr) {
  if (!(snr >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "signal-to-noise ratio must be >= 0");
  if (snr > 2.0 / kSqrt3) return 2.0 / 9.0 / (snr * snr);
  return 0.5 - snr / (2.0 * kSqrt3);
}

double lemma1bis_bound(double snr) {
  if (!(snr > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "lemma1bis needs S > 0 (1/(2S^2) undefined at 0)");
  }
  return 1.0 / (2.0 * snr * snr);
}

std::string_view to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::kGaussian: return "gaussian";
    case NoiseFamily::kLaplace: return "laplace";
    case NoiseFamily::kShiftedBernoulli: return "shifted-bernoulli";
  }
  return "unknown";
}

NoiseFamily parse_noise_family(std::string_view name) {
  for (NoiseFamily f : {NoiseFamily::kGaussian, NoiseFamily::kLaplace,
                        NoiseFamily::kShiftedBernoulli}) {
    if (to_string(f) == name) return f;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown noise family '" + std::string(name) + "'");
}

double NoiseModel::sample(RngStream& rng) const {
  switch (family) {
    case NoiseFamily::kGaussian: return mean + sigma * rng.normal();
    case NoiseFamily::kLaplace: return mean + rng.laplace(sigma / kSqrt2);
    case NoiseFamily::kShiftedBernoulli: return rng.bernoulli(0.5) ? mean + sigma : mean - sigma;
  }
  return mean;
}

NoiseModel noise_with_snr(NoiseFamily family, double snr, double mean) {
  if (!(snr > 0.0) || !std::isfinite(snr)) {
    throw Error(ErrorKind::kInvalidArgument, "signal-to-noise ratio must be positive and finite");
  }
  if (mean == 0.0) throw Error(ErrorKind::kInvalidArgument, "noise mean must be non-zero");
  return {family, mean, std::abs(mean) / snr};
}

McEstimate mc_sign_error(const NoiseModel& noise, std::size_t samples, RngStream& rng) {
  if (samples < 1000) throw Error(ErrorKind::kInvalidArgument, "need at least 1000 samples");
  if (noise.mean == 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "sign error is undefined for a zero-mean target");
  }
  const std::int8_t target = sign_of(noise.mean);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    if (sign_of(noise.sample(rng)) != target) ++wrong;
  }
  const auto n = static_cast<double>(samples);
  const double p = static_cast<double>(wrong) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

std::size_t honest_count(std::size_t workers, double alpha) {
  return static_cast<std::size_t>(std::round((1.0 - alpha) * static_cast<double>(workers)));
}

double vote_failure_exact(std::size_t workers, double alpha, double p) {
  check_vote_args(workers, alpha, p);
  const std::size_t n = honest_count(workers, alpha);
  const std::size_t k_max = std::min(workers / 2, n);  // k <= M/2 for integer k
  if (p == 1.0) return n <= workers / 2 ? 1.0 : 0.0;

  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
  std::vector<double> terms;
  terms.reserve(k_max + 1);
  for (std::size_t k = 0; k <= k_max; ++k) {
    const auto kd = static_cast<double>(k);
    const auto rest = static_cast<double>(n - k);
    terms.push_back(log_n_fact - std::lgamma(kd + 1.0) - std::lgamma(rest + 1.0) + kd * log_p +
                    rest * log_q);
  }
  const double peak = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - peak);
  return std::min(1.0, std::exp(peak + std::log(s)));
}

double cantelli_bound(std::size_t workers, double alpha, double p) {
  check_vote_args(workers, alpha, p);
  require_admissible(alpha, p);
  const double healthy = 1.0 - alpha;
  return 0.5 * std::sqrt(p * (1.0 - p) * healthy) /
         ((p * healthy - 0.5) * std::sqrt(static_cast<double>(workers)));
}

CantelliChain cantelli_chain(std::size_t workers, double alpha, double p,
                             std::optional<double> snr) {
  check_vote_args(workers, alpha, p);
  require_admissible(alpha, p);
  const double m = static_cast<double>(workers);
  const double healthy = 1.0 - alpha;
  const double gap = p * healthy - 0.5;

  CantelliChain c{};
  c.exact_tail = vote_failure_exact(workers, alpha, p);
  const double mean_gap = gap * m;  // E(Z^g) - M/2
  const double var = healthy * m * p * (1.0 - p);
  c.cantelli = var == 0.0 ? 0.0 : 1.0 / (1.0 + mean_gap * mean_gap / var);
  c.closed_form = cantelli_bound(workers, alpha, p);
  c.relaxed = 0.5 * std::sqrt(1.0 - p) / (gap * std::sqrt(m));
  if (snr) c.with_snr = 1.0 / (2.0 * kSqrt2) / gap / (*snr * std::sqrt(m));
  return c;
}

void BoundInputs::validate() const {
  require_same_size(sigma.size(), smoothness.size(), "sigma vs smoothness");
  for (double s : sigma) {
    if (!(s >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "sigma entries must be >= 0");
  }
  for (double l : smoothness) {
    if (!(l >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "smoothness entries must be >= 0");
  }
  if (!(f0 >= fstar)) throw Error(ErrorKind::kInvalidArgument, "need f0 >= f*");
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "p must lie in (0, 1]");
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "alpha must lie in [0, 1)");
  }
  if (workers == 0 || iterations == 0) {
    throw Error(ErrorKind::kInvalidArgument, "need M >= 1 and K >= 1");
  }
}

double rate_bound_thm2(const BoundInputs& in) {
  in.validate();
  if (!(in.alpha < 0.5)) {
    throw Error(ErrorKind::kInadmissible, "blind-adversary rate needs alpha < 1/2");
  }
  const double noise = l1_norm(in.sigma) / std::sqrt(static_cast<double>(in.workers)) /
                       (1.0 - 2.0 * in.alpha);
  const double bracket = noise + sqrt_l_gap(in);
  return 4.0 / std::sqrt(in.total_calls()) * bracket * bracket;
}

double rate_bound_thm2bis(const BoundInputs& in) {
  in.validate();
  require_admissible(in.alpha, in.p);
  const double noise = 1.0 / (2.0 * kSqrt2) / (in.p * (1.0 - in.alpha) - 0.5) *
                       l1_norm(in.sigma) / std::sqrt(static_cast<double>(in.workers));
  const double bracket = noise + sqrt_l_gap(in);
  return 4.0 / std::sqrt(in.total_calls()) * bracket * bracket;
}

SignAccuracy estimate_p(const DenseVector& true_grad, const GradientOracle& oracle,
                        std::size_t samples, RngStream& rng, double floor) {
  if (samples == 0) throw Error(ErrorKind::kInvalidArgument, "need at least one sample");
  SignAccuracy out;
  for (std::size_t i = 0; i < true_grad.size(); ++i) {
    if (std::abs(true_grad[i]) > floor) out.coordinates.push_back(i);
  }
  if (out.coordinates.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "every gradient coordinate is below the floor");
  }

  std::vector<std::size_t> matches(out.coordinates.size(), 0);
  for (std::size_t s = 0; s < samples; ++s) {
    const DenseVector g = oracle(rng);
    require_same_size(g.size(), true_grad.size(), "estimate_p oracle");
    for (std::size_t j = 0; j < out.coordinates.size(); ++j) {
      const std::size_t i = out.coordinates[j];
      if (sign_of(g[i]) == sign_of(true_grad[i])) ++matches[j];
    }
  }
  double total = 0.0;
  for (std::size_t m : matches) {
    const double frac = static_cast<double>(m) / static_cast<double>(samples);
    out.per_coordinate.push_back(frac);
    total += frac;
  }
  out.p = total / static_cast<double>(matches.size());
  return out;
}

SignAccuracy estimate_p(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
                        std::size_t batch_size, std::size_t samples, RngStream& rng,
                        double floor) {
  const DenseVector full = grad(spec, params, data);
  if (batch_size == data.rows) {
    return estimate_p(full, [&](RngStream&) { return full; }, samples, rng, floor);
  }
  return estimate_p(
      full,
      [&](RngStream& r) { return grad(spec, params, data, sample_batch(r, data.rows, batch_size)); },
      samples, rng, floor);
}

DenseVector estimate_sigma(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
                           std::size_t batch_size, std::size_t samples, RngStream& rng) {
  if (samples < 1000) throw Error(ErrorKind::kInvalidArgument, "need at least 1000 minibatches");
  // Welford accumulation.
  DenseVector mean(spec.param_dim());
  DenseVector m2(spec.param_dim());
  for (std::size_t s = 0; s < samples; ++s) {
    const DenseVector g = grad(spec, params, data, sample_batch(rng, data.rows, batch_size));
    const double count = static_cast<double>(s + 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double delta = g[i] - mean[i];
      mean[i] += delta / count;
      m2[i] += delta * (g[i] - mean[i]);
    }
  }
  DenseVector sigma(m2.size());
  for (std::size_t i = 0; i < m2.size(); ++i) {
    sigma[i] = std::sqrt(m2[i] / static_cast<double>(samples - 1));
  }
  return sigma;
}

BoundGrid BoundGrid::standard() {
  BoundGrid g;
  g.families = {NoiseFamily::kGaussian, NoiseFamily::kLaplace, NoiseFamily::kShiftedBernoulli};
  g.snrs = {0.25, 0.5, 1.0, 2.0 / kSqrt3, 2.0, 4.0};
  g.samples = 100000;
  g.workers = {11, 51, 101, 501};
  g.ps = {0.6, 0.75, 0.9, 0.99};
  g.alphas = {0.0, 0.1, 0.2, 0.3};
  return g;
}

bool BoundGrid::empty() const {
  const bool no_lemma = families.empty() || snrs.empty();
  const bool no_vote = workers.empty() || ps.empty() || alphas.empty();
  return no_lemma && no_vote;
}

std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass: return "pass";
    case CheckStatus::kFail: return "fail";
    case CheckStatus::kInadmissible: return "inadmissible";
  }
  return "unknown";
}

std::vector<BoundCheck> verify_bounds(const BoundGrid& grid) {
  std::vector<BoundCheck> rows;
  std::uint64_t stream = 0;
  for (NoiseFamily family : grid.families) {
    for (double snr : grid.snrs) {
      RngStream rng(grid.seed, stream++);
      const McEstimate mc = mc_sign_error(noise_with_snr(family, snr), grid.samples, rng);

      auto add = [&](const char* check, double bound) {
        BoundCheck row;
        row.check = check;
        row.family = std::string(to_string(family));
        row.snr = snr;
        row.observed = mc.estimate;
        row.std_error = mc.std_error;
        row.bound = bound;
        row.margin = bound + 3.0 * mc.std_error - mc.estimate;
        row.status = row.margin >= 0.0 ? CheckStatus::kPass : CheckStatus::kFail;
        rows.push_back(row);
      };
      add("lemma1bis", std::min(1.0, lemma1bis_bound(snr)));
      if (family != NoiseFamily::kShiftedBernoulli) add("lemma1", lemma1_bound(snr));
    }
  }

  for (std::size_t m : grid.workers) {
    for (double p : grid.ps) {
      for (double alpha : grid.alphas) {
        BoundCheck row;
        row.check = "cantelli";
        row.workers = m;
        row.alpha = alpha;
        row.p = p;
        row.observed = vote_failure_exact(m, alpha, p);
        if (!vote_admissible(alpha, p)) {
          row.bound = std::numeric_limits<double>::quiet_NaN();
          row.margin = std::numeric_limits<double>::quiet_NaN();
          row.status = CheckStatus::kInadmissible;
        } else {
          row.bound = cantelli_bound(m, alpha, p);
          row.margin = row.bound - row.observed;
          row.status = row.margin >= 0.0 ? CheckStatus::kPass : CheckStatus::kFail;
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace signsgd
