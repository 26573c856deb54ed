#include "signsgd/core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace signsgd {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kBadMagic: return "bad-magic";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kCountMismatch: return "count-mismatch";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kConfigNotFound: return "config-not-found";
    case ErrorKind::kConfigParse: return "config-parse";
    case ErrorKind::kConfigInvalid: return "config-invalid";
    case ErrorKind::kInadmissible: return "inadmissible";
  }
  return "unknown";
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::kDimensionMismatch, std::string(what) + ": length " +
                                                   std::to_string(a) + " vs " +
                                                   std::to_string(b));
  }
}

DenseVector& DenseVector::operator+=(const DenseVector& other) {
  require_same_size(size(), other.size(), "DenseVector +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

DenseVector& DenseVector::operator-=(const DenseVector& other) {
  require_same_size(size(), other.size(), "DenseVector -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

DenseVector& DenseVector::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

bool DenseVector::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

SignVector::SignVector(std::vector<std::int8_t> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] < -1 || values_[i] > 1) {
      throw Error(ErrorKind::kInvalidArgument,
                  "sign entry " + std::to_string(i) + " outside {-1, 0, +1}");
    }
  }
}

SignVector::SignVector(std::initializer_list<int> values) {
  values_.reserve(values.size());
  for (int v : values) {
    if (v < -1 || v > 1) throw Error(ErrorKind::kInvalidArgument, "sign entry outside {-1, 0, +1}");
    values_.push_back(static_cast<std::int8_t>(v));
  }
}

SignVector SignVector::operator-() const {
  SignVector out(size());
  for (std::size_t i = 0; i < size(); ++i) out.values_[i] = static_cast<std::int8_t>(-values_[i]);
  return out;
}

DenseVector SignVector::as_dense() const {
  DenseVector out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = values_[i];
  return out;
}

std::int8_t sign_of(double x) noexcept {
  if (x > 0.0) return 1;
  if (x < 0.0) return -1;
  return 0;
}

SignVector sign(const DenseVector& v) {
  std::vector<std::int8_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorKind::kNonFinite, "sign: non-finite entry at coordinate " + std::to_string(i));
    }
    out[i] = sign_of(v[i]);
  }
  return SignVector(std::move(out));
}

std::vector<std::int64_t> sum_signs_exact(std::span<const SignVector> signs) {
  if (signs.empty()) throw Error(ErrorKind::kEmptyInput, "sum_signs: empty message list");
  const std::size_t dim = signs.front().size();
  std::vector<std::int64_t> total(dim, 0);
  for (const SignVector& s : signs) {
    require_same_size(s.size(), dim, "sum_signs");
    for (std::size_t i = 0; i < dim; ++i) total[i] += s[i];
  }
  return total;
}

DenseVector sum_signs(std::span<const SignVector> signs) {
  const auto exact = sum_signs_exact(signs);
  DenseVector out(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) out[i] = static_cast<double>(exact[i]);
  return out;
}

double l1_norm(const DenseVector& v) {
  if (!v.all_finite()) throw Error(ErrorKind::kNonFinite, "l1_norm: non-finite entry");
  double total = 0.0;
  for (double x : v) total += std::abs(x);
  return total;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL))) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorKind::kInvalidArgument, "uniform_index: bound must be >= 1");
  // Rejection on the top of the range keeps every residue equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform_open()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

double RngStream::laplace(double scale) {
  const double u = uniform_open() - 0.5;
  return u < 0.0 ? scale * std::log1p(2.0 * u) : -scale * std::log1p(-2.0 * u);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

}  // namespace signsgd
