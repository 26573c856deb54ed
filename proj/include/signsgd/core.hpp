#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include "signsgd/error.hpp"

namespace signsgd {

/// Fixed-length real vector carrying parameters, gradients and momentum.
///
/// The length is set at construction; every binary operation checks that both
/// operands agree and throws `ErrorKind::kDimensionMismatch` otherwise.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) {}
  DenseVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }

  DenseVector& operator+=(const DenseVector& other);
  DenseVector& operator-=(const DenseVector& other);
  DenseVector& operator*=(double scale);

  friend DenseVector operator+(DenseVector a, const DenseVector& b) { return a += b; }
  friend DenseVector operator-(DenseVector a, const DenseVector& b) { return a -= b; }
  friend DenseVector operator*(double s, DenseVector v) { return v *= s; }
  friend DenseVector operator-(DenseVector v) { return v *= -1.0; }

  bool operator==(const DenseVector&) const = default;

  bool all_finite() const noexcept;

 private:
  std::vector<double> values_;
};

/// Coordinate-wise signs in {-1, 0, +1}.
class SignVector {
 public:
  SignVector() = default;
  explicit SignVector(std::size_t dim) : values_(dim, 0) {}
  // Throws kInvalidArgument if any entry is outside {-1, 0, +1}.
  explicit SignVector(std::vector<std::int8_t> values);
  SignVector(std::initializer_list<int> values);

  std::size_t size() const noexcept { return values_.size(); }
  std::int8_t operator[](std::size_t i) const { return values_[i]; }
  std::span<const std::int8_t> values() const noexcept { return values_; }

  bool operator==(const SignVector&) const = default;

  SignVector operator-() const;
  DenseVector as_dense() const;

 private:
  std::vector<std::int8_t> values_;
};

void require_same_size(std::size_t a, std::size_t b, const char* what);

/// sg(x) with sg(0) = 0; exact comparison against zero, no tolerance.
std::int8_t sign_of(double x) noexcept;

/// Throws kNonFinite naming the first non-finite coordinate.
SignVector sign(const DenseVector& v);

/// Exact integer coordinate sums of the votes.
std::vector<std::int64_t> sum_signs_exact(std::span<const SignVector> signs);
DenseVector sum_signs(std::span<const SignVector> signs);

double l1_norm(const DenseVector& v);

/// Reproducible random stream identified by (seed, stream id).
///
/// The engine is a std::mt19937_64 whose seed is a SplitMix64 mix of both
/// identifiers, so each worker or subsystem owns an independent stream and
/// execution order across streams never changes any draw. Distributions are
/// implemented here rather than taken from <random> because the standard
/// distributions are implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1); never returns 0.
  double uniform_open();
  /// Unbiased uniform integer in [0, bound), bound >= 1.
  std::uint64_t uniform_index(std::uint64_t bound);
  double normal();
  double laplace(double scale);
  bool bernoulli(double p);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace signsgd
