#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "signsgd/core.hpp"
#include "signsgd/models.hpp"

namespace signsgd {

// ---------------------------------------------------------------------------
// Single-coordinate sign-error bounds
// ---------------------------------------------------------------------------

/// Unimodal symmetric noise: 2/(9 S^2) for S > 2/sqrt(3), else 1/2 - S/(2 sqrt 3).
double lemma1_bound(double snr);

/// Chebyshev-style bound 1/(2 S^2). Not capped; vacuous (> 1/2) for S < 1.
double lemma1bis_bound(double snr);

enum class NoiseFamily { kGaussian, kLaplace, kShiftedBernoulli };

std::string_view to_string(NoiseFamily f);
NoiseFamily parse_noise_family(std::string_view name);

/// Additive noise around `mean` with variance sigma^2.
///
/// gaussian and laplace are unimodal and symmetric. shifted-bernoulli is the
/// two-point law mean +/- sigma with equal weights: symmetric but bimodal, so
/// it satisfies the Chebyshev-style bound while breaking the unimodal one.
struct NoiseModel {
  NoiseFamily family = NoiseFamily::kGaussian;
  double mean = 1.0;
  double sigma = 1.0;

  double sample(RngStream& rng) const;
  double snr() const { return std::abs(mean) / sigma; }
};

/// Noise of the given family whose signal-to-noise ratio |mean|/sigma is `snr`.
NoiseModel noise_with_snr(NoiseFamily family, double snr, double mean = 1.0);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Fraction of draws whose sign differs from sg(mean), with binomial standard error.
McEstimate mc_sign_error(const NoiseModel& noise, std::size_t samples, RngStream& rng);

// ---------------------------------------------------------------------------
// Majority-vote failure probability
// ---------------------------------------------------------------------------

/// Honest workers round((1 - alpha) M), half away from zero.
std::size_t honest_count(std::size_t workers, double alpha);

/// P(Binomial(round((1-alpha)M), p) <= M/2), summed in log space.
double vote_failure_exact(std::size_t workers, double alpha, double p);

/// (1/2) sqrt(p(1-p)(1-alpha)) / ((p(1-alpha) - 1/2) sqrt(M)).
/// Throws kInadmissible unless alpha < 1 - 1/(2p).
double cantelli_bound(std::size_t workers, double alpha, double p);

/// Every link of the failure-probability chain, in order. Each value bounds
/// the previous one whenever the chain's premises hold.
struct CantelliChain {
  double exact_tail;        // P(Z^g <= M/2), binomial
  double cantelli;          // 1 / (1 + (E - M/2)^2 / Var)
  double closed_form;       // after 1 + x^2 >= 2x; equals cantelli_bound
  double relaxed;           // after p(1 - alpha) <= 1
  std::optional<double> with_snr;  // after 1 - p <= 1/(2 S^2), when S is given
};

CantelliChain cantelli_chain(std::size_t workers, double alpha, double p,
                             std::optional<double> snr = std::nullopt);

inline bool vote_admissible(double alpha, double p) { return p * (1.0 - alpha) > 0.5; }

// ---------------------------------------------------------------------------
// Convergence-rate right-hand sides
// ---------------------------------------------------------------------------

struct BoundInputs {
  DenseVector sigma;       // per-coordinate noise scale
  DenseVector smoothness;  // per-coordinate L_i
  double f0 = 1.0;
  double fstar = 0.0;
  double snr = 1.0;
  double p = 1.0;
  std::size_t workers = 1;
  double alpha = 0.0;
  std::size_t iterations = 1;

  /// Stochastic gradient calls per worker, K^2.
  double total_calls() const {
    const auto k = static_cast<double>(iterations);
    return k * k;
  }
  void validate() const;
};

/// 4/sqrt(N) [ 1/(1-2 alpha) ||sigma||_1/sqrt(M) + sqrt(||L||_1 (f0 - f*)) ]^2, alpha < 1/2.
double rate_bound_thm2(const BoundInputs& in);

/// 4/sqrt(N) [ 1/(2 sqrt 2) 1/(p(1-alpha) - 1/2) ||sigma||_1/sqrt(M)
///             + sqrt(||L||_1 (f0 - f*)) ]^2, alpha < 1 - 1/(2p).
double rate_bound_thm2bis(const BoundInputs& in);

// ---------------------------------------------------------------------------
// Empirical p and sigma
// ---------------------------------------------------------------------------

inline constexpr double kGradientFloor = 1e-8;

struct SignAccuracy {
  double p = 0.0;                          // mean over measured coordinates
  std::vector<std::size_t> coordinates;    // coordinates with |g_i| above the floor
  std::vector<double> per_coordinate;      // matching P(sg(g~_i) = sg(g_i))
};

using GradientOracle = std::function<DenseVector(RngStream&)>;

/// Monte Carlo P(sg(g~) = sg(g)) for an arbitrary stochastic gradient oracle.
SignAccuracy estimate_p(const DenseVector& true_grad, const GradientOracle& oracle,
                        std::size_t samples, RngStream& rng, double floor = kGradientFloor);

/// Minibatches of size n drawn with replacement. When n equals the dataset
/// size the full batch is used, so g~ = g and p = 1.
SignAccuracy estimate_p(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
                        std::size_t batch_size, std::size_t samples, RngStream& rng,
                        double floor = kGradientFloor);

/// Per-coordinate standard deviation of size-n minibatch gradients, from the
/// unbiased sample variance over `samples` (>= 1000) minibatches.
DenseVector estimate_sigma(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
                           std::size_t batch_size, std::size_t samples, RngStream& rng);

// ---------------------------------------------------------------------------
// Grid verification
// ---------------------------------------------------------------------------

struct BoundGrid {
  std::vector<NoiseFamily> families;
  std::vector<double> snrs;
  std::size_t samples = 100000;
  std::vector<std::size_t> workers;
  std::vector<double> ps;
  std::vector<double> alphas;
  std::uint64_t seed = 8005;

  /// The verification grid used by the acceptance suite.
  static BoundGrid standard();
  bool empty() const;
};

enum class CheckStatus { kPass, kFail, kInadmissible };
std::string_view to_string(CheckStatus s);

struct BoundCheck {
  std::string check;   // lemma1, lemma1bis, cantelli
  std::string family;  // noise family, empty for cantelli rows
  double snr = 0.0;
  std::size_t workers = 0;
  double alpha = 0.0;
  double p = 0.0;
  double observed = 0.0;  // MC error rate or exact binomial tail
  double std_error = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound + 3 std_error - observed
  CheckStatus status = CheckStatus::kPass;
};

/// Lemma 1bis on every family, Lemma 1 on gaussian/laplace only, and the
/// exact-tail vs Cantelli comparison on every (M, p, alpha) point.
std::vector<BoundCheck> verify_bounds(const BoundGrid& grid);

}  // namespace signsgd
