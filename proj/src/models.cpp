#include "signsgd/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace signsgd {
namespace {

void check_params(const ModelSpec& spec, const DenseVector& params, const Dataset& data) {
  require_same_size(params.size(), spec.param_dim(), "model parameters");
  require_same_size(data.cols, spec.input_dim, "dataset columns vs model input");
  if (spec.is_classification() && !data.is_classification()) {
    throw Error(ErrorKind::kInvalidArgument, "classification model on a regression dataset");
  }
}

void check_batch(const Batch& batch, const Dataset& data) {
  if (batch.indices.empty()) throw Error(ErrorKind::kEmptyInput, "empty batch");
  for (std::size_t idx : batch.indices) {
    if (idx >= data.rows) {
      throw Error(ErrorKind::kInvalidArgument, "batch index " + std::to_string(idx) + " out of range");
    }
  }
}

// Shared by label generation and the loss so a noiseless fit is exact.
double linear_predictor(std::span<const double> w, double bias, std::span<const double> x) {
  double z = bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
  return z;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct MlpView {
  std::size_t in, hid, out;
  std::span<const double> w1, w2, b1, b2;

  MlpView(const ModelSpec& spec, std::span<const double> p)
      : in(spec.input_dim), hid(spec.hidden_dim), out(spec.num_classes) {
    std::size_t off = 0;
    w1 = p.subspan(off, hid * in);
    off += hid * in;
    w2 = p.subspan(off, out * hid);
    off += out * hid;
    b1 = p.subspan(off, hid);
    off += hid;
    b2 = p.subspan(off, out);
  }

  void forward(std::span<const double> x, std::vector<double>& h, std::vector<double>& logits) const {
    h.assign(hid, 0.0);
    for (std::size_t k = 0; k < hid; ++k) {
      double a = b1[k];
      for (std::size_t j = 0; j < in; ++j) a += w1[k * in + j] * x[j];
      h[k] = std::tanh(a);
    }
    logits.assign(out, 0.0);
    for (std::size_t c = 0; c < out; ++c) {
      double a = b2[c];
      for (std::size_t k = 0; k < hid; ++k) a += w2[c * hid + k] * h[k];
      logits[c] = a;
    }
  }
};

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::size_t class_index(double label, std::size_t num_classes) {
  const auto c = static_cast<std::size_t>(label);
  if (label < 0.0 || static_cast<double>(c) != label || c >= num_classes) {
    throw Error(ErrorKind::kInvalidArgument, "label outside [0, num_classes)");
  }
  return c;
}

// Adds the sample's loss to *loss_acc and its gradient to *grad_acc (if set).
void accumulate_sample(const ModelSpec& spec, std::span<const double> p, std::span<const double> x,
                       double y, double* loss_acc, std::span<double> grad_acc) {
  switch (spec.kind) {
    case ModelKind::kLinearRegression: {
      const double r = linear_predictor(p.first(spec.input_dim), p[spec.input_dim], x) - y;
      if (loss_acc) *loss_acc += r * r;
      if (!grad_acc.empty()) {
        for (std::size_t j = 0; j < spec.input_dim; ++j) grad_acc[j] += 2.0 * r * x[j];
        grad_acc[spec.input_dim] += 2.0 * r;
      }
      return;
    }
    case ModelKind::kLogisticRegression: {
      const double z = linear_predictor(p.first(spec.input_dim), p[spec.input_dim], x);
      if (loss_acc) *loss_acc += softplus(z) - y * z;
      if (!grad_acc.empty()) {
        const double r = sigmoid(z) - y;
        for (std::size_t j = 0; j < spec.input_dim; ++j) grad_acc[j] += r * x[j];
        grad_acc[spec.input_dim] += r;
      }
      return;
    }
    case ModelKind::kMlp: {
      const MlpView net(spec, p);
      std::vector<double> h, logits;
      net.forward(x, h, logits);
      const std::size_t target = class_index(y, spec.num_classes);
      const double lse = log_sum_exp(logits);
      if (loss_acc) *loss_acc += lse - logits[target];
      if (grad_acc.empty()) return;

      const std::size_t off_w2 = net.hid * net.in;
      const std::size_t off_b1 = off_w2 + net.out * net.hid;
      const std::size_t off_b2 = off_b1 + net.hid;
      std::vector<double> dpre(net.hid, 0.0);
      for (std::size_t c = 0; c < net.out; ++c) {
        const double dl = std::exp(logits[c] - lse) - (c == target ? 1.0 : 0.0);
        grad_acc[off_b2 + c] += dl;
        for (std::size_t k = 0; k < net.hid; ++k) {
          grad_acc[off_w2 + c * net.hid + k] += dl * h[k];
          dpre[k] += dl * net.w2[c * net.hid + k];
        }
      }
      for (std::size_t k = 0; k < net.hid; ++k) {
        const double d = dpre[k] * (1.0 - h[k] * h[k]);
        grad_acc[off_b1 + k] += d;
        for (std::size_t j = 0; j < net.in; ++j) grad_acc[k * net.in + j] += d * x[j];
      }
      return;
    }
  }
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error(ErrorKind::kTruncated, "truncated IDX header in " + path.string());
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

void Dataset::validate() const {
  require_same_size(features.size(), rows * cols, "dataset feature matrix");
  require_same_size(labels.size(), rows, "dataset labels vs rows");
  if (num_classes > 0) {
    for (double y : labels) class_index(y, num_classes);
  }
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinearRegression: return "linear-regression";
    case ModelKind::kLogisticRegression: return "logistic-regression";
    case ModelKind::kMlp: return "mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "linear-regression" || name == "linear") return ModelKind::kLinearRegression;
  if (name == "logistic-regression" || name == "logistic") return ModelKind::kLogisticRegression;
  if (name == "mlp") return ModelKind::kMlp;
  throw Error(ErrorKind::kInvalidArgument, "unknown model kind '" + std::string(name) + "'");
}

std::size_t ModelSpec::param_dim() const {
  switch (kind) {
    case ModelKind::kLinearRegression:
    case ModelKind::kLogisticRegression:
      return input_dim + 1;
    case ModelKind::kMlp:
      return hidden_dim * input_dim + num_classes * hidden_dim + hidden_dim + num_classes;
  }
  return 0;
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw Error(ErrorKind::kInvalidArgument, "model input_dim must be >= 1");
  if (kind == ModelKind::kLogisticRegression && num_classes != 2) {
    throw Error(ErrorKind::kInvalidArgument, "logistic regression is binary (num_classes = 2)");
  }
  if (kind == ModelKind::kMlp && (hidden_dim == 0 || num_classes < 2)) {
    throw Error(ErrorKind::kInvalidArgument, "mlp needs hidden_dim >= 1 and num_classes >= 2");
  }
}

Batch full_batch(const Dataset& data) {
  Batch b;
  b.indices.resize(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) b.indices[i] = i;
  return b;
}

double loss(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
            const Batch& batch) {
  check_params(spec, params, data);
  check_batch(batch, data);
  double total = 0.0;
  for (std::size_t idx : batch.indices) {
    accumulate_sample(spec, params.values(), data.row(idx), data.labels[idx], &total, {});
  }
  return total / static_cast<double>(batch.size());
}

double loss(const ModelSpec& spec, const DenseVector& params, const Dataset& data) {
  return loss(spec, params, data, full_batch(data));
}

DenseVector grad(const ModelSpec& spec, const DenseVector& params, const Dataset& data,
                 const Batch& batch) {
  check_params(spec, params, data);
  check_batch(batch, data);
  DenseVector g(params.size());
  for (std::size_t idx : batch.indices) {
    accumulate_sample(spec, params.values(), data.row(idx), data.labels[idx], nullptr, g.values());
  }
  g *= 1.0 / static_cast<double>(batch.size());
  return g;
}

DenseVector grad(const ModelSpec& spec, const DenseVector& params, const Dataset& data) {
  return grad(spec, params, data, full_batch(data));
}

Batch sample_batch(RngStream& rng, std::size_t n_data, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "batch size must be >= 1");
  if (n_data == 0) throw Error(ErrorKind::kEmptyInput, "cannot sample from an empty dataset");
  Batch b;
  b.indices.resize(n);
  for (auto& idx : b.indices) idx = static_cast<std::size_t>(rng.uniform_index(n_data));
  return b;
}

double accuracy(const ModelSpec& spec, const DenseVector& params, const Dataset& data) {
  if (!spec.is_classification()) {
    throw Error(ErrorKind::kInvalidArgument, "accuracy is undefined for regression models");
  }
  check_params(spec, params, data);
  if (data.rows == 0) throw Error(ErrorKind::kEmptyInput, "accuracy on an empty dataset");

  std::size_t correct = 0;
  std::vector<double> h, logits;
  for (std::size_t i = 0; i < data.rows; ++i) {
    std::size_t predicted = 0;
    if (spec.kind == ModelKind::kLogisticRegression) {
      const double z = linear_predictor(params.values().first(spec.input_dim),
                                        params[spec.input_dim], data.row(i));
      predicted = z >= 0.0 ? 1 : 0;
    } else {
      MlpView(spec, params.values()).forward(data.row(i), h, logits);
      predicted = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                           logits.begin());
    }
    if (static_cast<double>(predicted) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows);
}

DenseVector init_params(const ModelSpec& spec, RngStream& rng) {
  DenseVector p(spec.param_dim());
  if (spec.kind != ModelKind::kMlp) return p;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(spec.hidden_dim));
  const std::size_t n1 = spec.hidden_dim * spec.input_dim;
  const std::size_t n2 = spec.num_classes * spec.hidden_dim;
  for (std::size_t i = 0; i < n1; ++i) p[i] = s1 * rng.normal();
  for (std::size_t i = n1; i < n1 + n2; ++i) p[i] = s2 * rng.normal();
  return p;
}

SyntheticData generate_synthetic(RngStream& rng, ModelKind kind, std::size_t input_dim,
                                 std::size_t n_data, double noise_level) {
  if (n_data == 0) throw Error(ErrorKind::kInvalidArgument, "synthetic dataset needs N >= 1");
  if (input_dim == 0) throw Error(ErrorKind::kInvalidArgument, "synthetic dataset needs dim >= 1");
  if (kind == ModelKind::kMlp) {
    throw Error(ErrorKind::kInvalidArgument,
                "synthetic data is generated as linear or logistic; train the mlp on logistic data");
  }

  SyntheticData out;
  out.true_params = DenseVector(input_dim + 1);
  for (std::size_t j = 0; j < input_dim; ++j) out.true_params[j] = rng.normal();

  Dataset& d = out.data;
  d.rows = n_data;
  d.cols = input_dim;
  d.num_classes = kind == ModelKind::kLogisticRegression ? 2 : 0;
  d.features.resize(n_data * input_dim);
  for (double& v : d.features) v = rng.normal();
  d.labels.resize(n_data);

  const auto w = out.true_params.values().first(input_dim);
  for (std::size_t i = 0; i < n_data; ++i) {
    const double z = linear_predictor(w, 0.0, d.row(i));
    if (kind == ModelKind::kLinearRegression) {
      d.labels[i] = noise_level == 0.0 ? z : z + noise_level * rng.normal();
    } else {
      d.labels[i] = rng.bernoulli(sigmoid(z)) ? 1.0 : 0.0;
    }
  }
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  std::ifstream images = open_binary(images_path);
  std::ifstream labels = open_binary(labels_path);

  if (read_be32(images, images_path) != kIdxImagesMagic) {
    throw Error(ErrorKind::kBadMagic, "bad IDX image magic in " + images_path.string());
  }
  const std::uint32_t count = read_be32(images, images_path);
  const std::uint32_t rows = read_be32(images, images_path);
  const std::uint32_t cols = read_be32(images, images_path);

  if (read_be32(labels, labels_path) != kIdxLabelsMagic) {
    throw Error(ErrorKind::kBadMagic, "bad IDX label magic in " + labels_path.string());
  }
  const std::uint32_t label_count = read_be32(labels, labels_path);
  if (label_count != count) {
    throw Error(ErrorKind::kCountMismatch, "IDX image count " + std::to_string(count) +
                                               " != label count " + std::to_string(label_count));
  }

  Dataset d;
  d.rows = count;
  d.cols = std::size_t{rows} * cols;
  std::vector<unsigned char> pixels(d.rows * d.cols);
  if (!images.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
    throw Error(ErrorKind::kTruncated, "truncated IDX image data in " + images_path.string());
  }
  std::vector<unsigned char> raw_labels(count);
  if (!labels.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(count))) {
    throw Error(ErrorKind::kTruncated, "truncated IDX label data in " + labels_path.string());
  }

  d.features.resize(pixels.size());
  std::transform(pixels.begin(), pixels.end(), d.features.begin(),
                 [](unsigned char px) { return static_cast<double>(px) / 255.0; });
  d.labels.assign(raw_labels.begin(), raw_labels.end());
  const unsigned char max_label =
      raw_labels.empty() ? 0 : *std::max_element(raw_labels.begin(), raw_labels.end());
  d.num_classes = std::max<std::size_t>(2, std::size_t{max_label} + 1);
  return d;
}

void write_idx_images(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t cols,
                      std::span<const std::uint8_t> pixels) {
  const std::size_t per_image = std::size_t{rows} * cols;
  if (per_image == 0 || pixels.size() % per_image != 0) {
    throw Error(ErrorKind::kInvalidArgument, "pixel buffer is not a whole number of images");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(pixels.size() / per_image));
  write_be32(out, rows);
  write_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

}  // namespace signsgd
