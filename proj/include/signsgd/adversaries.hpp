#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "signsgd/core.hpp"
#include "signsgd/optimizers.hpp"

namespace signsgd {

enum class Strategy {
  kNone,
  kBlindInvert,
  kByzColludePaper,
  kByzColludeZeroing,
  kByzOpposeTrueSign,
  kByzInverseSum,
};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

/// Strategies that observe the honest messages of the round before answering.
inline bool is_byzantine(Strategy s) noexcept {
  return s != Strategy::kNone && s != Strategy::kBlindInvert;
}

struct AdversarySpec {
  Strategy strategy = Strategy::kNone;
  std::size_t byzantine_count = 0;

  /// Checks f <= M and that the strategy matches the aggregation rule.
  void validate(Rule rule, std::size_t workers) const;
};

/// Per-coordinate sum of the honest workers' signs.
using HonestSignSum = std::vector<std::int64_t>;

enum class CollusionVariant {
  kPaper,    // the rule exactly as worded: f - s send -1, the rest alternate
  kZeroing,  // min(|s|, f) cancel the honest sum, the rest alternate
};

struct CollusionResult {
  std::vector<SignVector> messages;  // one per Byzantine worker
  DenseVector summed;                // what a single "Byzantine server" would push
};

DenseVector blind_invert(const DenseVector& stochastic_grad);

/// Colluding sign attack. Coordinates with |s| > f can't be flipped and every
/// Byzantine simply votes -sg(s). Otherwise the variant decides; on s = 0 both
/// alternate -1, +1, ... starting with -1.
CollusionResult byz_collude_signs(std::span<const std::int64_t> honest_sum, std::size_t f,
                                  CollusionVariant variant);

/// The first Byzantine pushes -(sum of honest gradients), the others zeros.
/// The honest sum is accumulated left to right, the same order the server
/// uses when the honest messages arrive first, so the mean is exactly zero.
std::vector<DenseVector> byz_inverse_sum(Rule rule, std::span<const DenseVector> honest_grads,
                                         std::size_t f, std::size_t dim);

/// Every Byzantine votes against the true gradient sign.
std::vector<SignVector> byz_oppose_true_sign(const DenseVector& true_grad, std::size_t f);

}  // namespace signsgd
