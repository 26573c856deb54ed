#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "signsgd/core.hpp"

using namespace signsgd;

TEST_CASE("sign follows sg(0) = 0") {
  CHECK(sign(DenseVector{3.5, -0.1, 0.0}) == SignVector{1, -1, 0});
  CHECK(sign(DenseVector(5)) == SignVector(5));
  CHECK(sign(DenseVector{-0.0}) == SignVector{0});
}

TEST_CASE("sign rejects non-finite entries and names the coordinate") {
  const DenseVector v{1.0, std::numeric_limits<double>::quiet_NaN()};
  try {
    sign(v);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNonFinite);
    CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
  }
  CHECK_THROWS_AS(sign(DenseVector{std::numeric_limits<double>::infinity()}), Error);
}

TEST_CASE("sign is idempotent and odd") {
  RngStream rng(1, 2);
  for (int trial = 0; trial < 100; ++trial) {
    DenseVector v(7);
    for (double& x : v) x = rng.uniform() < 0.2 ? 0.0 : rng.normal();
    const SignVector s = sign(v);
    CHECK(sign(s.as_dense()) == s);
    CHECK(sign(-v) == -s);
  }
}

TEST_CASE("SignVector enforces its value set") {
  CHECK_THROWS_AS(SignVector(std::vector<std::int8_t>{0, 2}), Error);
  CHECK_THROWS_AS((SignVector{1, -2}), Error);
}

TEST_CASE("sum_signs") {
  const std::vector<SignVector> msgs{{1, 1}, {1, -1}, {-1, -1}};
  CHECK(sum_signs(msgs) == DenseVector{1.0, -1.0});

  const std::vector<SignVector> one{{1, 0, -1}};
  CHECK(sum_signs(one) == DenseVector{1.0, 0.0, -1.0});

  const SignVector s{1, -1, 0, 1};
  const std::vector<SignVector> copies(9, s);
  CHECK(sum_signs(copies) == 9.0 * s.as_dense());

  CHECK_THROWS_AS(sum_signs(std::vector<SignVector>{}), Error);
  const std::vector<SignVector> ragged{{1, 1}, {1}};
  try {
    sum_signs(ragged);
    FAIL("expected mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionMismatch);
  }
}

TEST_CASE("sum_signs is permutation invariant") {
  RngStream rng(3, 0);
  std::vector<SignVector> msgs;
  for (int m = 0; m < 6; ++m) {
    std::vector<std::int8_t> v(4);
    for (auto& x : v) x = static_cast<std::int8_t>(static_cast<int>(rng.uniform_index(3)) - 1);
    msgs.emplace_back(v);
  }
  const DenseVector reference = sum_signs(msgs);
  std::sort(msgs.begin(), msgs.end(), [](const SignVector& a, const SignVector& b) {
    return std::lexicographical_compare(a.values().begin(), a.values().end(), b.values().begin(),
                                        b.values().end());
  });
  do {
    CHECK(sum_signs(msgs) == reference);
  } while (std::next_permutation(msgs.begin(), msgs.end(), [](const SignVector& a, const SignVector& b) {
    return std::lexicographical_compare(a.values().begin(), a.values().end(), b.values().begin(),
                                        b.values().end());
  }));
}

TEST_CASE("l1_norm") {
  CHECK(l1_norm(DenseVector{1, -2, 3}) == 6.0);
  CHECK(l1_norm(DenseVector(4)) == 0.0);

  RngStream rng(11, 0);
  for (int trial = 0; trial < 50; ++trial) {
    DenseVector v(10);
    for (double& x : v) x = rng.normal();
    const double c = 4.0 * rng.normal();
    double direct = 0.0;
    for (double x : v) direct += std::abs(c * x);
    CHECK(l1_norm(c * v) == doctest::Approx(std::abs(c) * l1_norm(v)).epsilon(1e-12));
    CHECK(l1_norm(c * v) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("DenseVector arithmetic rejects mismatched lengths") {
  DenseVector a(3), b(4);
  CHECK_THROWS_AS(a += b, Error);
  CHECK_THROWS_AS(a - b, Error);
}

TEST_CASE("RngStream determinism and independence") {
  RngStream a(8005, 3), b(8005, 3), c(8005, 4), d(8006, 3);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_stream |= x != c.next_u64();
    differs_seed |= x != d.next_u64();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
}

TEST_CASE("RngStream draws from distinct streams are uncorrelated") {
  RngStream a(8005, 0), b(8005, 1);
  const int n = 100000;
  double sxy = 0.0, sx = 0.0, sy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal(), y = b.normal();
    sxy += x * y;
    sx += x;
    sy += y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  // Standard error of the sample covariance of independent unit normals is 1/sqrt(n).
  CHECK(std::abs(cov) < 4.0 / std::sqrt(n));
}

TEST_CASE("RngStream distributions have the right moments") {
  RngStream rng(5, 5);
  const int n = 200000;
  double mu = 0, m2 = 0, lap_m2 = 0, u_mean = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    mu += z;
    m2 += z * z;
    const double l = rng.laplace(1.0);
    lap_m2 += l * l;
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    u_mean += u;
  }
  CHECK(mu / n == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
  CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(lap_m2 / n == doctest::Approx(2.0).epsilon(0.03));  // Var(Laplace(b)) = 2 b^2
  CHECK(u_mean / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK_THROWS_AS(rng.uniform_index(0), Error);
}
