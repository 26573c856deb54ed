#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "signsgd/core.hpp"

namespace signsgd {

/// Row-major feature matrix plus labels.
///
/// Regression datasets have `num_classes == 0` and real-valued labels;
/// classification labels are class indices stored as doubles.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<double> labels;
  std::size_t num_classes = 0;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * cols, cols);
  }
  bool is_classification() const noexcept { return num_classes > 0; }

  /// Throws kDimensionMismatch / kInvalidArgument when the invariants fail.
  void validate() const;
};

enum class ModelKind { kLinearRegression, kLogisticRegression, kMlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Parameter layout is a single flat vector:
///   linear / logistic : w[0..input_dim), b
///   mlp               : W1 (hidden x input, row-major), W2 (classes x hidden,
///                       row-major), b1 (hidden), b2 (classes)
struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 32;
  std::size_t num_classes = 2;

  std::size_t param_dim() const;
  bool is_classification() const noexcept { return kind != ModelKind::kLinearRegression; }
  void validate() const;
};

struct Batch {
  std::vector<std::size_t> indices;
  std::size_t size() const noexcept { return indices.size(); }
};

Batch full_batch(const Dataset& data);

/// Mean per-sample loss: squared error for linear regression, cross-entropy
/// otherwise. Always >= 0.
double loss(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
            const Batch& batch);
double loss(const ModelSpec& spec, const DenseVector& params, const Dataset& data);

DenseVector grad(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
                 const Batch& batch);
DenseVector grad(const ModelSpec& spec, const DenseVector& params, const Dataset& data);

/// n indices drawn uniformly with replacement from [0, n_data).
Batch sample_batch(RngStream& rng, std::size_t n_data, std::size_t n);

/// Binary logistic predicts class 1 when sigmoid(z) >= 0.5 (z >= 0); the MLP
/// takes the argmax with ties going to the lowest class index.
double accuracy(const ModelSpec& spec, const DenseVector& params, const Dataset& data);

/// Zeros for linear models; scaled Gaussian weights and zero biases for the MLP.
DenseVector init_params(const ModelSpec& spec, RngStream& rng);

struct SyntheticData {
  Dataset data;
  DenseVector true_params;  // in the model's layout; bias is zero
};

/// Standard-normal features and weights. Linear labels are Xw + noise * N(0,1);
/// logistic labels are Bernoulli(sigmoid(Xw)). `noise_level` is ignored for
/// logistic data.
SyntheticData generate_synthetic(RngStream& rng, ModelKind kind, std::size_t input_dim,
                                 std::size_t n_data, double noise_level);

/// Big-endian IDX reader: images magic 0x00000803 (count, rows, cols), labels
/// magic 0x00000801 (count). Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

void write_idx_images(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

}  // namespace signsgd
