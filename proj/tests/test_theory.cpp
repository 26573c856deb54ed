#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "signsgd/theory.hpp"

using namespace signsgd;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

BoundInputs inputs() {
  BoundInputs in;
  in.sigma = DenseVector{0.5, 1.0, 2.0};
  in.smoothness = DenseVector{1.0, 1.0, 2.0};
  in.f0 = 1.5;
  in.fstar = 0.0;
  in.p = 0.9;
  in.workers = 15;
  in.alpha = 0.2;
  in.iterations = 100;
  return in;
}

}  // namespace

TEST_CASE("lemma1_bound") {
  CHECK(lemma1_bound(0.0) == 0.5);
  CHECK(lemma1_bound(2.0) == doctest::Approx(1.0 / 18.0).epsilon(1e-15));
  const double s = 2.0 / std::sqrt(3.0);
  const double quadratic = 2.0 / 9.0 / (s * s);
  const double linear = 0.5 - s / (2.0 * std::sqrt(3.0));
  CHECK(std::abs(quadratic - 1.0 / 6.0) < 1e-12);
  CHECK(std::abs(linear - 1.0 / 6.0) < 1e-12);
  CHECK(std::abs(lemma1_bound(s) - 1.0 / 6.0) < 1e-12);
  CHECK_THROWS_AS(lemma1_bound(-0.1), Error);

  double prev = lemma1_bound(0.0);
  for (double x = 0.01; x < 10.0; x += 0.01) {
    const double b = lemma1_bound(x);
    CHECK(b <= prev + 1e-15);
    CHECK(b <= lemma1bis_bound(x));
    prev = b;
  }
}

TEST_CASE("lemma1bis_bound") {
  CHECK(lemma1bis_bound(1.0) == 0.5);
  CHECK(lemma1bis_bound(2.0) == 0.125);
  CHECK(lemma1bis_bound(0.25) == 8.0);
  CHECK(kind_of([] { lemma1bis_bound(0.0); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("noise models have the requested variance and snr") {
  for (NoiseFamily fam : {NoiseFamily::kGaussian, NoiseFamily::kLaplace, NoiseFamily::kShiftedBernoulli}) {
    const NoiseModel nm = noise_with_snr(fam, 2.0);
    CHECK(nm.snr() == doctest::Approx(2.0));
    RngStream rng(51, static_cast<std::uint64_t>(fam));
    const int n = 200000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = nm.sample(rng);
      s1 += x;
      s2 += x * x;
    }
    const double mean = s1 / n, var = s2 / n - mean * mean;
    CHECK(mean == doctest::Approx(nm.mean).epsilon(0.01));
    CHECK(var == doctest::Approx(nm.sigma * nm.sigma).epsilon(0.03));
  }
  CHECK(parse_noise_family("shifted-bernoulli") == NoiseFamily::kShiftedBernoulli);
}

TEST_CASE("mc_sign_error against the gaussian cdf") {
  RngStream rng(52, 0);
  const auto est = mc_sign_error(noise_with_snr(NoiseFamily::kGaussian, 1.0), 100000, rng);
  CHECK(std::abs(est.estimate - oracle::normal_cdf(-1.0)) <= 4.0 * est.std_error);
  CHECK(oracle::normal_cdf(-1.0) == doctest::Approx(0.1587).epsilon(1e-3));
  CHECK(est.estimate < lemma1bis_bound(1.0));

  const auto far = mc_sign_error(noise_with_snr(NoiseFamily::kGaussian, 50.0), 10000, rng);
  CHECK(far.estimate == 0.0);

  const auto lap = mc_sign_error(noise_with_snr(NoiseFamily::kLaplace, 2.0), 100000, rng);
  CHECK(lap.estimate <= lemma1_bound(2.0) + 3.0 * lap.std_error);
  // Laplace with variance sigma^2 has scale sigma/sqrt 2: P(error) = exp(-S sqrt 2)/2.
  CHECK(std::abs(lap.estimate - 0.5 * std::exp(-2.0 * std::sqrt(2.0))) <= 4.0 * lap.std_error);

  CHECK_THROWS_AS(mc_sign_error(noise_with_snr(NoiseFamily::kGaussian, 1.0), 999, rng), Error);
  CHECK_THROWS_AS(mc_sign_error(NoiseModel{NoiseFamily::kGaussian, 0.0, 1.0}, 1000, rng), Error);
}

TEST_CASE("vote_failure_exact") {
  CHECK(vote_failure_exact(3, 0.0, 0.9) == doctest::Approx(0.028).epsilon(1e-12));
  CHECK(vote_failure_exact(3, 0.0, 0.9) ==
        doctest::Approx(oracle::binomial_cdf(3, 1, 0.9)).epsilon(1e-12));
  for (std::size_t m : {1u, 3u, 11u, 51u, 101u}) {
    for (double a : {0.0, 0.1, 0.3, 0.45}) CHECK(vote_failure_exact(m, a, 1.0) == 0.0);
  }
  // Hand sums on small grids: honest count round((1 - alpha) M), threshold floor(M / 2).
  CHECK(vote_failure_exact(11, 0.2, 0.75) ==
        doctest::Approx(oracle::binomial_cdf(9, 5, 0.75)).epsilon(1e-12));
  CHECK(vote_failure_exact(10, 0.0, 0.6) ==
        doctest::Approx(oracle::binomial_cdf(10, 5, 0.6)).epsilon(1e-12));
  CHECK(honest_count(15, 0.5) == 8);  // 7.5 rounds away from zero
  CHECK(honest_count(11, 0.3) == 8);

  // Large M stays finite in log space.
  const double big = vote_failure_exact(10001, 0.1, 0.6);
  CHECK(std::isfinite(big));
  CHECK(big >= 0.0);
  CHECK_THROWS_AS(vote_failure_exact(11, 0.1, 0.0), Error);
  CHECK_THROWS_AS(vote_failure_exact(11, 1.0, 0.9), Error);
}

TEST_CASE("exact tail is non-increasing along odd M") {
  // No rounding at alpha = 0: every odd M.
  for (double p : {0.6, 0.75, 0.9, 0.99}) {
    double prev = 1.0;
    for (std::size_t m = 1; m <= 501; m += 2) {
      const double v = vote_failure_exact(m, 0.0, p);
      CHECK(v <= prev);
      prev = v;
    }
  }
  // Along the verification grid for every admissible (p, alpha).
  for (double p : {0.6, 0.75, 0.9, 0.99}) {
    for (double a : {0.0, 0.1, 0.2, 0.3}) {
      if (!vote_admissible(a, p)) continue;
      double prev = 1.0;
      for (std::size_t m : {11u, 51u, 101u, 501u}) {
        const double v = vote_failure_exact(m, a, p);
        CHECK(v <= prev);
        prev = v;
      }
    }
  }
}

TEST_CASE("rounding the honest count breaks monotonicity between neighbouring odd M") {
  // M = 5: round(4.5) = 5 honest, fail if <= 2 correct. M = 7: round(6.3) = 6
  // honest, fail if <= 3 correct. Six honest voters with threshold 3 fail more often.
  CHECK(honest_count(5, 0.1) == 5);
  CHECK(honest_count(7, 0.1) == 6);
  CHECK(vote_failure_exact(5, 0.1, 0.9) == doctest::Approx(oracle::binomial_cdf(5, 2, 0.9)).epsilon(1e-12));
  CHECK(vote_failure_exact(7, 0.1, 0.9) == doctest::Approx(oracle::binomial_cdf(6, 3, 0.9)).epsilon(1e-12));
  CHECK(vote_failure_exact(7, 0.1, 0.9) > vote_failure_exact(5, 0.1, 0.9));
}

TEST_CASE("cantelli_bound") {
  CHECK(cantelli_bound(11, 0.1, 1.0) == 0.0);
  const double expect = 0.5 * std::sqrt(0.9 * 0.1 * 0.9) / (0.31 * 10.0);
  CHECK(cantelli_bound(100, 0.1, 0.9) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(0.0459).epsilon(1e-3));
  CHECK(vote_failure_exact(100, 0.1, 0.9) <= cantelli_bound(100, 0.1, 0.9));
  CHECK(cantelli_bound(25, 0.2, 0.8) / cantelli_bound(100, 0.2, 0.8) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(kind_of([] { cantelli_bound(11, 0.5, 0.9); }) == ErrorKind::kInadmissible);
  CHECK(kind_of([] { cantelli_bound(11, 0.0, 0.5); }) == ErrorKind::kInadmissible);
}

TEST_CASE("cantelli chain is ordered") {
  for (std::size_t m : {11u, 51u, 101u, 501u}) {
    for (double p : {0.6, 0.75, 0.9, 0.99}) {
      for (double a : {0.0, 0.1, 0.2, 0.3}) {
        if (!vote_admissible(a, p)) continue;
        // Convert p into the snr that makes 1 - p equal 1/(2 S^2).
        const double snr = 1.0 / std::sqrt(2.0 * (1.0 - p));
        const auto c = cantelli_chain(m, a, p, snr);
        CHECK(c.exact_tail <= c.cantelli);
        CHECK(c.cantelli <= c.closed_form * (1.0 + 1e-12));
        CHECK(c.closed_form <= c.relaxed * (1.0 + 1e-12));
        REQUIRE(c.with_snr.has_value());
        CHECK(c.relaxed <= *c.with_snr * (1.0 + 1e-12));
        CHECK(c.closed_form == doctest::Approx(cantelli_bound(m, a, p)).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("rate_bound_thm2") {
  BoundInputs in = inputs();
  in.alpha = 0.0;
  in.sigma = DenseVector(3);
  // sigma = 0: 4 ||L||_1 (f0 - f*) / sqrt(N), sqrt(N) = K.
  CHECK(rate_bound_thm2(in) == doctest::Approx(4.0 * 4.0 * 1.5 / 100.0).epsilon(1e-14));

  in = inputs();
  const double base = rate_bound_thm2(in);
  in.iterations *= 2;
  CHECK(rate_bound_thm2(in) == doctest::Approx(base / 2.0).epsilon(1e-14));

  in = inputs();
  in.smoothness = DenseVector(3);
  in.alpha = 0.0;
  const double at0 = std::sqrt(rate_bound_thm2(in));
  in.alpha = 0.25;
  CHECK(std::sqrt(rate_bound_thm2(in)) == doctest::Approx(2.0 * at0).epsilon(1e-14));

  in.alpha = 0.5;
  CHECK(kind_of([&] { rate_bound_thm2(in); }) == ErrorKind::kInadmissible);
}

TEST_CASE("rate_bound_thm2bis") {
  BoundInputs in = inputs();
  in.p = 1.0;
  in.alpha = 0.0;
  in.smoothness = DenseVector(3);
  const double sigma_l1 = 3.5, root_m = std::sqrt(15.0);
  const double coef = std::sqrt(2.0) / 2.0;
  CHECK(rate_bound_thm2bis(in) ==
        doctest::Approx(4.0 / 100.0 * std::pow(coef * sigma_l1 / root_m, 2)).epsilon(1e-14));

  in = inputs();
  in.sigma = DenseVector(3);
  BoundInputs plain = in;
  CHECK(std::abs(rate_bound_thm2bis(in) - rate_bound_thm2(plain)) < 1e-12);

  in = inputs();
  const double edge = 1.0 - 1.0 / (2.0 * in.p);
  double prev = 0.0;
  for (double gap : {1e-1, 1e-2, 1e-4, 1e-6}) {
    in.alpha = edge - gap;
    const double v = rate_bound_thm2bis(in);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(prev > 1e6);
  in.alpha = edge;
  CHECK(kind_of([&] { rate_bound_thm2bis(in); }) == ErrorKind::kInadmissible);
}

TEST_CASE("rate_bound_thm2bis is monotone in M, p and alpha") {
  BoundInputs in = inputs();
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m : {3u, 7u, 15u, 31u, 101u}) {
    in.workers = m;
    CHECK(rate_bound_thm2bis(in) < prev);
    prev = rate_bound_thm2bis(in);
  }
  in = inputs();
  prev = std::numeric_limits<double>::infinity();
  for (double p : {0.7, 0.8, 0.9, 0.99}) {
    in.p = p;
    CHECK(rate_bound_thm2bis(in) < prev);
    prev = rate_bound_thm2bis(in);
  }
  in = inputs();
  prev = 0.0;
  for (double a : {0.0, 0.1, 0.2, 0.3}) {
    in.alpha = a;
    CHECK(rate_bound_thm2bis(in) > prev);
    prev = rate_bound_thm2bis(in);
  }
}

TEST_CASE("bound inputs validation") {
  BoundInputs in = inputs();
  in.f0 = -1.0;
  CHECK_THROWS_AS(in.validate(), Error);
  in = inputs();
  in.p = 0.0;
  CHECK_THROWS_AS(in.validate(), Error);
  in = inputs();
  in.sigma = DenseVector{-1.0, 0.0, 0.0};
  CHECK_THROWS_AS(in.validate(), Error);
}

TEST_CASE("estimate_p with a controlled gaussian oracle") {
  const DenseVector g{0.5, -1.0, 2.0, 0.0};
  const double sigma = 1.0;
  const std::size_t n_prime = 4;
  const GradientOracle oracle_fn = [&](RngStream& r) {
    DenseVector out = g;
    for (double& v : out) {
      double noise = 0.0;
      for (std::size_t i = 0; i < n_prime; ++i) noise += sigma * r.normal();
      v += noise / static_cast<double>(n_prime);
    }
    return out;
  };
  RngStream rng(53, 0);
  const std::size_t samples = 20000;
  const auto acc = estimate_p(g, oracle_fn, samples, rng);
  REQUIRE(acc.coordinates == std::vector<std::size_t>{0, 1, 2});
  double expect_mean = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double s = std::abs(g[acc.coordinates[k]]) / sigma;
    const double expect = 1.0 - oracle::normal_cdf(-s * std::sqrt(static_cast<double>(n_prime)));
    const double se = std::sqrt(expect * (1.0 - expect) / samples);
    CHECK(std::abs(acc.per_coordinate[k] - expect) <= 4.0 * se + 1e-12);
    expect_mean += expect / 3.0;
  }
  CHECK(acc.p == doctest::Approx(expect_mean).epsilon(0.01));

  CHECK(kind_of([&] { estimate_p(DenseVector(3), oracle_fn, 10, rng); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("estimate_p on a model") {
  RngStream data_rng(54, 0);
  const ModelSpec spec{ModelKind::kLogisticRegression, 5, 0, 2};
  const auto syn = generate_synthetic(data_rng, ModelKind::kLogisticRegression, 5, 400, 0.0);
  const DenseVector params(spec.param_dim());

  RngStream rng(55, 0);
  CHECK(estimate_p(spec, params, syn.data, 400, 50, rng).p == 1.0);

  // Larger batches should not lower p on average across seeds.
  double small_total = 0.0, large_total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream a(seed, 1), b(seed, 2);
    small_total += estimate_p(spec, params, syn.data, 4, 400, a).p;
    large_total += estimate_p(spec, params, syn.data, 64, 400, b).p;
  }
  CHECK(large_total >= small_total);
}

TEST_CASE("estimate_sigma matches the full-data spread scaled by batch size") {
  RngStream data_rng(56, 0);
  const ModelSpec spec{ModelKind::kLinearRegression, 3, 0, 0};
  const auto syn = generate_synthetic(data_rng, ModelKind::kLinearRegression, 3, 500, 0.5);
  const DenseVector params(spec.param_dim());

  // Per-sample gradient spread around the full gradient, computed directly.
  const DenseVector full = grad(spec, params, syn.data);
  std::vector<double> var(spec.param_dim(), 0.0);
  for (std::size_t i = 0; i < syn.data.rows; ++i) {
    const DenseVector gi = grad(spec, params, syn.data, Batch{{i}});
    for (std::size_t j = 0; j < gi.size(); ++j) var[j] += (gi[j] - full[j]) * (gi[j] - full[j]);
  }
  RngStream rng(57, 0);
  const std::size_t n = 16;
  const DenseVector est = estimate_sigma(spec, params, syn.data, n, 20000, rng);
  for (std::size_t j = 0; j < var.size(); ++j) {
    const double expect = std::sqrt(var[j] / syn.data.rows / n);
    CHECK(est[j] == doctest::Approx(expect).epsilon(0.03));
  }
  CHECK_THROWS_AS(estimate_sigma(spec, params, syn.data, n, 999, rng), Error);
}

TEST_CASE("verify_bounds on the standard grid") {
  const auto rows = verify_bounds(BoundGrid::standard());
  std::size_t lemma1 = 0, lemma1bis = 0, cantelli = 0, inadmissible = 0;
  for (const auto& r : rows) {
    CHECK(r.status != CheckStatus::kFail);
    if (r.check == "lemma1") ++lemma1;
    if (r.check == "lemma1bis") ++lemma1bis;
    if (r.check == "cantelli") ++cantelli;
    if (r.status == CheckStatus::kInadmissible) {
      ++inadmissible;
      CHECK(!vote_admissible(r.alpha, r.p));
    }
  }
  CHECK(lemma1 == 2 * 6);
  CHECK(lemma1bis == 3 * 6);
  CHECK(cantelli == 4 * 4 * 4);
  CHECK(inadmissible > 0);
}

TEST_CASE("verify_bounds marks inadmissible points instead of failing them") {
  BoundGrid grid;
  grid.workers = {11};
  grid.ps = {0.6};
  grid.alphas = {0.0, 0.3};
  const auto rows = verify_bounds(grid);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].status == CheckStatus::kPass);
  CHECK(rows[1].status == CheckStatus::kInadmissible);
  CHECK(BoundGrid{}.empty());
}

TEST_CASE("a skewed two-point law can break the 1/(2 S^2) bound") {
  // Two points m - a and m + b with weights q and 1 - q, mean m, sd 1/2, so
  // S = 2 and the bound is 1/8. The low point sits below zero, so the sign
  // is wrong with probability q = 0.15. This is why the shipped two-point
  // family is the symmetric one.
  const double q = 0.15;
  const double sd = 0.5;
  const double a = sd * std::sqrt((1.0 - q) / q), b = sd * std::sqrt(q / (1.0 - q));
  const double m = 1.0;
  CHECK(q * (m - a) + (1.0 - q) * (m + b) == doctest::Approx(m));
  CHECK(q * a * a + (1.0 - q) * b * b == doctest::Approx(sd * sd));
  const double error = m - a <= 0.0 ? q : 0.0;
  CHECK(error == q);
  CHECK(error > lemma1bis_bound(m / sd));
}
