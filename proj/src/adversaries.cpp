#include "signsgd/adversaries.hpp"

#include <cstdlib>
#include <string>

namespace signsgd {
namespace {

std::int8_t sg(std::int64_t v) { return static_cast<std::int8_t>((v > 0) - (v < 0)); }

// Votes of the f colluders on one coordinate, in worker order.
void collude_coordinate(std::int64_t s, std::size_t f, CollusionVariant variant,
                        std::vector<std::int8_t>& votes) {
  votes.assign(f, 0);
  const auto abs_s = static_cast<std::size_t>(std::llabs(s));

  if (abs_s > f) {
    votes.assign(f, static_cast<std::int8_t>(-sg(s)));
    return;
  }

  // Leading block of fixed votes, then an alternating tail.
  std::size_t fixed = 0;
  std::int8_t fixed_vote = 0;
  std::int8_t first_alt = -1;
  if (variant == CollusionVariant::kPaper) {
    // Taken literally, s = 0 would make every colluder send -1; both variants
    // alternate there instead.
    fixed = s == 0 ? 0 : f - abs_s;
    fixed_vote = s >= 0 ? -1 : 1;
    first_alt = s >= 0 ? -1 : 1;
  } else {
    fixed = abs_s;
    fixed_vote = static_cast<std::int8_t>(-sg(s));
    first_alt = s == 0 ? -1 : static_cast<std::int8_t>(-sg(s));
  }

  for (std::size_t k = 0; k < fixed; ++k) votes[k] = fixed_vote;
  for (std::size_t k = fixed; k < f; ++k) {
    votes[k] = (k - fixed) % 2 == 0 ? first_alt : static_cast<std::int8_t>(-first_alt);
  }
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kNone: return "none";
    case Strategy::kBlindInvert: return "blind-invert";
    case Strategy::kByzColludePaper: return "byz-collude-paper";
    case Strategy::kByzColludeZeroing: return "byz-collude-zeroing";
    case Strategy::kByzOpposeTrueSign: return "byz-oppose-true-sign";
    case Strategy::kByzInverseSum: return "byz-inverse-sum";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::kNone, Strategy::kBlindInvert, Strategy::kByzColludePaper,
                     Strategy::kByzColludeZeroing, Strategy::kByzOpposeTrueSign,
                     Strategy::kByzInverseSum}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown adversary strategy '" + std::string(name) + "'");
}

void AdversarySpec::validate(Rule rule, std::size_t workers) const {
  if (byzantine_count > workers) {
    throw Error(ErrorKind::kInvalidArgument, "more adversaries than workers");
  }
  if (strategy == Strategy::kByzInverseSum && rule != Rule::kDistSgd) {
    throw Error(ErrorKind::kInvalidArgument, "byz-inverse-sum attacks dist-sgd only");
  }
  if (is_byzantine(strategy) && strategy != Strategy::kByzInverseSum && rule == Rule::kDistSgd) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(to_string(strategy)) + " needs a sign-based rule");
  }
}

DenseVector blind_invert(const DenseVector& stochastic_grad) { return -stochastic_grad; }

CollusionResult byz_collude_signs(std::span<const std::int64_t> honest_sum, std::size_t f,
                                  CollusionVariant variant) {
  if (f == 0) throw Error(ErrorKind::kInvalidArgument, "collusion needs f >= 1 (use strategy none)");
  const std::size_t dim = honest_sum.size();

  std::vector<std::vector<std::int8_t>> per_worker(f, std::vector<std::int8_t>(dim, 0));
  CollusionResult out;
  out.summed = DenseVector(dim);
  std::vector<std::int8_t> votes;
  for (std::size_t i = 0; i < dim; ++i) {
    collude_coordinate(honest_sum[i], f, variant, votes);
    std::int64_t total = 0;
    for (std::size_t k = 0; k < f; ++k) {
      per_worker[k][i] = votes[k];
      total += votes[k];
    }
    out.summed[i] = static_cast<double>(total);
  }
  out.messages.reserve(f);
  for (auto& w : per_worker) out.messages.emplace_back(std::move(w));
  return out;
}

std::vector<DenseVector> byz_inverse_sum(Rule rule, std::span<const DenseVector> honest_grads,
                                         std::size_t f, std::size_t dim) {
  if (rule != Rule::kDistSgd) {
    throw Error(ErrorKind::kInvalidArgument, "inverse-sum attack applies to dist-sgd only");
  }
  if (f == 0) throw Error(ErrorKind::kInvalidArgument, "inverse-sum attack needs f >= 1");
  std::vector<DenseVector> out(f, DenseVector(dim));
  for (const DenseVector& g : honest_grads) out.front() += g;
  out.front() *= -1.0;
  return out;
}

std::vector<SignVector> byz_oppose_true_sign(const DenseVector& true_grad, std::size_t f) {
  return std::vector<SignVector>(f, -sign(true_grad));
}

}  // namespace signsgd
