#include <doctest.h>

#include <cstdlib>

#include "oracles.hpp"
#include "signsgd/adversaries.hpp"

using namespace signsgd;

namespace {

std::int64_t byzantine_total(const CollusionResult& r) {
  std::int64_t total = 0;
  for (const auto& m : r.messages) total += m[0];
  return total;
}

int server_sign(std::int64_t honest, const CollusionResult& r) {
  const std::int64_t t = honest + byzantine_total(r);
  return (t > 0) - (t < 0);
}

int sg(std::int64_t v) { return (v > 0) - (v < 0); }

}  // namespace

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::kNone, Strategy::kBlindInvert, Strategy::kByzColludePaper,
                     Strategy::kByzColludeZeroing, Strategy::kByzOpposeTrueSign, Strategy::kByzInverseSum}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("krum"), Error);
}

TEST_CASE("adversary spec validation") {
  CHECK_NOTHROW((AdversarySpec{Strategy::kByzInverseSum, 1}.validate(Rule::kDistSgd, 3)));
  CHECK_THROWS_AS((AdversarySpec{Strategy::kByzInverseSum, 1}.validate(Rule::kSignum, 3)), Error);
  CHECK_THROWS_AS((AdversarySpec{Strategy::kByzColludeZeroing, 1}.validate(Rule::kDistSgd, 3)), Error);
  CHECK_THROWS_AS((AdversarySpec{Strategy::kBlindInvert, 4}.validate(Rule::kSignum, 3)), Error);
}

TEST_CASE("blind_invert") {
  CHECK(blind_invert(DenseVector{1, -2, 0}) == DenseVector{-1, 2, 0});
  const DenseVector g{0.5, -7, 3};
  CHECK(blind_invert(blind_invert(g)) == g);
  CHECK(sign(blind_invert(g)) == -sign(g));
}

TEST_CASE("collusion examples") {
  const std::int64_t two[] = {2}, one[] = {1}, three[] = {3};

  auto r = byz_collude_signs(two, 2, CollusionVariant::kZeroing);
  CHECK(byzantine_total(r) == -2);
  CHECK(server_sign(2, r) == 0);

  r = byz_collude_signs(one, 2, CollusionVariant::kZeroing);
  CHECK(byzantine_total(r) == -2);
  CHECK(server_sign(1, r) == -1);

  r = byz_collude_signs(three, 1, CollusionVariant::kZeroing);
  CHECK(byzantine_total(r) == -1);
  CHECK(server_sign(3, r) == 1);

  r = byz_collude_signs(two, 2, CollusionVariant::kPaper);
  CHECK(byzantine_total(r) == 0);
  CHECK(server_sign(2, r) == 1);

  CHECK_THROWS_AS(byz_collude_signs(two, 0, CollusionVariant::kZeroing), Error);
}

TEST_CASE("collusion alternates starting with -1 on a zero honest sum") {
  const std::int64_t zero[] = {0};
  for (auto variant : {CollusionVariant::kPaper, CollusionVariant::kZeroing}) {
    const auto r = byz_collude_signs(zero, 3, variant);
    REQUIRE(r.messages.size() == 3);
    CHECK(r.messages[0][0] == -1);
    CHECK(r.messages[1][0] == 1);
    CHECK(r.messages[2][0] == -1);
  }
}

TEST_CASE("collusion invariants for every f <= 6 and |s| <= 10") {
  for (std::size_t f = 1; f <= 6; ++f) {
    for (std::int64_t s = -10; s <= 10; ++s) {
      for (auto variant : {CollusionVariant::kPaper, CollusionVariant::kZeroing}) {
        const std::int64_t honest[] = {s};
        const auto r = byz_collude_signs(honest, f, variant);
        REQUIRE(r.messages.size() == f);
        CHECK(r.summed[0] == static_cast<double>(byzantine_total(r)));
        const int out = server_sign(s, r);
        const auto abs_s = static_cast<std::size_t>(std::llabs(s));
        if (abs_s > f) {
          CHECK(out == sg(s));
        } else if (variant == CollusionVariant::kZeroing) {
          if (s != 0) {
            CHECK((out == 0 || out == -sg(s)));
            CHECK(out == ((f - abs_s) % 2 == 0 ? 0 : -sg(s)));
          } else {
            CHECK((out == 0 || out == -1));
          }
        }
      }
    }
  }
}

TEST_CASE("summed form works across several coordinates") {
  const std::int64_t honest[] = {5, -1, 0, 2, -4};
  const auto r = byz_collude_signs(honest, 3, CollusionVariant::kZeroing);
  DenseVector sum(5);
  for (const auto& m : r.messages) sum += m.as_dense();
  CHECK(sum == r.summed);
}

TEST_CASE("byz_inverse_sum") {
  const std::vector<DenseVector> honest{{1, 2}, {3, 4}};
  const auto attack = byz_inverse_sum(Rule::kDistSgd, honest, 1, 2);
  REQUIRE(attack.size() == 1);
  CHECK(attack[0] == DenseVector{-4, -6});

  std::vector<DenseVector> all = honest;
  all.insert(all.end(), attack.begin(), attack.end());
  CHECK(server_aggregate_sgd(all) == DenseVector{0, 0});

  OptimizerConfig cfg;
  cfg.rule = Rule::kDistSgd;
  cfg.beta = 0.0;
  CHECK(apply_update(cfg, DenseVector{0.3, -1}, server_aggregate_sgd(all), 0) == DenseVector{0.3, -1});

  const auto none = byz_inverse_sum(Rule::kDistSgd, std::vector<DenseVector>{}, 3, 2);
  REQUIRE(none.size() == 3);
  for (const auto& v : none) CHECK(v == DenseVector(2));

  CHECK_THROWS_AS(byz_inverse_sum(Rule::kSignum, honest, 1, 2), Error);
}

TEST_CASE("byz_inverse_sum cancels exactly on awkward floating point values") {
  RngStream rng(41, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<DenseVector> honest;
    const std::size_t m = 1 + rng.uniform_index(8);
    for (std::size_t i = 0; i < m; ++i) {
      DenseVector g(4);
      for (double& v : g) v = rng.normal() * std::pow(10.0, static_cast<double>(rng.uniform_index(12)) - 6.0);
      honest.push_back(g);
    }
    const std::size_t f = 1 + rng.uniform_index(3);
    const auto attack = byz_inverse_sum(Rule::kDistSgd, honest, f, 4);
    auto all = honest;
    all.insert(all.end(), attack.begin(), attack.end());
    CHECK(server_aggregate_sgd(all) == DenseVector(4));
  }
}

TEST_CASE("byz_oppose_true_sign") {
  const auto msgs = byz_oppose_true_sign(DenseVector{1, -1}, 3);
  REQUIRE(msgs.size() == 3);
  for (const auto& m : msgs) CHECK(m == SignVector{-1, 1});
  for (const auto& m : byz_oppose_true_sign(DenseVector(2), 2)) CHECK(m == SignVector(2));

  // f > M/2 with noiseless honest workers: the opposition wins every nonzero coordinate.
  const DenseVector g{0.5, -2, 0, 3};
  const std::size_t workers = 7, f = 4;
  std::vector<std::vector<int>> votes;
  for (std::size_t i = 0; i < workers - f; ++i) {
    const SignVector s = sign(g);
    votes.emplace_back(s.values().begin(), s.values().end());
  }
  for (const auto& m : byz_oppose_true_sign(g, f)) votes.emplace_back(m.values().begin(), m.values().end());
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(oracle::brute_majority(votes, j) == -sign_of(g[j]));
}
