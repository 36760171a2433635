#pragma once

#include "mctrack/errors.hpp"
#include "mctrack/geometry.hpp"
#include "mctrack/io.hpp"
#include "mctrack/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mctrack {

// ---------------------------------------------------------------------------
// Hand-crafted appearance features
// ---------------------------------------------------------------------------

/// Interleaved 8-bit pixel patch, `channels` values per pixel.
struct PixelPatch {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;  // size = width * height * channels
};

/// Concatenated per-channel intensity histograms, each channel L1-normalized
/// to sum 1. Dimension = channels * bins_per_channel.
inline FeatureVector histogram_features(const PixelPatch& patch,
                                        int bins_per_channel = 32) {
  if (patch.width <= 0 || patch.height <= 0 || patch.channels <= 0 ||
      bins_per_channel <= 0) {
    throw std::invalid_argument("histogram_features: empty patch");
  }
  const std::size_t expected = static_cast<std::size_t>(patch.width) *
                               patch.height * patch.channels;
  if (patch.data.size() != expected) {
    throw std::invalid_argument("histogram_features: data size mismatch");
  }
  FeatureVector out =
      FeatureVector::Zero(static_cast<Eigen::Index>(patch.channels) *
                          bins_per_channel);
  const int pixels = patch.width * patch.height;
  for (int p = 0; p < pixels; ++p) {
    for (int c = 0; c < patch.channels; ++c) {
      const int value = patch.data[static_cast<std::size_t>(p) * patch.channels + c];
      const int bin = value * bins_per_channel / 256;
      out(c * bins_per_channel + bin) += 1.0;
    }
  }
  out /= static_cast<double>(pixels);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding model
// ---------------------------------------------------------------------------

/// One or two affine maps with tanh between them; the output is
/// L2-normalized when `normalize` is set (zero vectors pass through).
struct EmbeddingModel {
  std::vector<Eigen::MatrixXd> weights;  // 1 or 2 layers
  std::vector<Eigen::VectorXd> biases;   // one per layer
  bool normalize = true;

  int input_dim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.front().cols());
  }
  int embed_dim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.back().rows());
  }
};

namespace detail {

inline void validate_model(const EmbeddingModel& model) {
  if (model.weights.empty() || model.weights.size() > 2 ||
      model.weights.size() != model.biases.size()) {
    throw std::invalid_argument("embedding model: expected 1 or 2 layers");
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    if (model.biases[l].size() != model.weights[l].rows()) {
      throw std::invalid_argument("embedding model: bias/weight shape mismatch");
    }
    if (!model.weights[l].allFinite() || !model.biases[l].allFinite()) {
      throw std::invalid_argument("embedding model: non-finite parameters");
    }
  }
  if (model.weights.size() == 2 &&
      model.weights[0].rows() != model.weights[1].cols()) {
    throw std::invalid_argument("embedding model: layer shape mismatch");
  }
  if (model.embed_dim() < 2) {
    throw std::invalid_argument("embedding model: embed_dim must be >= 2");
  }
}

}  // namespace detail

/// Fresh model with uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] parameters.
/// `hidden_dim` <= 0 selects the single-layer shape.
inline EmbeddingModel make_embedding_model(int input_dim, int embed_dim,
                                           int hidden_dim, std::uint64_t seed,
                                           bool normalize = true) {
  if (input_dim < 1 || embed_dim < 2) {
    throw std::invalid_argument("make_embedding_model: bad dimensions");
  }
  std::mt19937_64 rng(seed);
  EmbeddingModel model;
  model.normalize = normalize;
  std::vector<std::pair<int, int>> shapes;  // (rows, cols)
  if (hidden_dim > 0) {
    shapes = {{hidden_dim, input_dim}, {embed_dim, hidden_dim}};
  } else {
    shapes = {{embed_dim, input_dim}};
  }
  for (const auto& [rows, cols] : shapes) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        w(r, c) = detail::uniform_range(rng, -bound, bound);
      }
    }
    Eigen::VectorXd b(rows);
    for (int r = 0; r < rows; ++r) {
      b(r) = detail::uniform_range(rng, -bound, bound);
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  detail::validate_model(model);
  return model;
}

/// Deterministic forward pass.
inline Eigen::VectorXd embed(const EmbeddingModel& model,
                             const Eigen::VectorXd& x) {
  detail::validate_model(model);
  if (x.size() != model.input_dim()) {
    throw std::invalid_argument("embed: input dimension mismatch");
  }
  Eigen::VectorXd z = model.weights[0] * x + model.biases[0];
  if (model.weights.size() == 2) {
    z = (model.weights[1] * z.array().tanh().matrix()) + model.biases[1];
  }
  if (model.normalize) {
    const double n = z.norm();
    if (n >= 1e-12) z /= n;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Triplet loss and its gradient
// ---------------------------------------------------------------------------

struct Triplet {
  FeatureVector anchor;
  FeatureVector positive;
  FeatureVector negative;
};

/// max(0, ||f(a)-f(p)||^2 - ||f(a)-f(n)||^2 + margin).
inline double triplet_loss(const EmbeddingModel& model, const Triplet& t,
                           double margin) {
  const Eigen::VectorXd fa = embed(model, t.anchor);
  const Eigen::VectorXd fp = embed(model, t.positive);
  const Eigen::VectorXd fn = embed(model, t.negative);
  const double value =
      (fa - fp).squaredNorm() - (fa - fn).squaredNorm() + margin;
  return std::max(0.0, value);
}

/// Mean triplet loss over a batch.
inline double batch_loss(const EmbeddingModel& model,
                         const std::vector<Triplet>& batch, double margin) {
  if (batch.empty()) {
    throw std::invalid_argument("batch_loss: empty batch");
  }
  double total = 0.0;
  for (const Triplet& t : batch) total += triplet_loss(model, t, margin);
  return total / static_cast<double>(batch.size());
}

/// Parameter-shaped container (gradients, AdaGrad accumulators).
struct ModelGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

inline ModelGradient zero_gradient(const EmbeddingModel& model) {
  ModelGradient g;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(),
                                              model.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }
  return g;
}

namespace detail {

/// Forward pass retaining intermediates for backprop.
struct ForwardTrace {
  Eigen::VectorXd input;
  Eigen::VectorXd hidden;      // tanh(a1), two-layer models only
  Eigen::VectorXd projection;  // pre-normalization output z
  Eigen::VectorXd output;      // f(x)
};

inline ForwardTrace embed_trace(const EmbeddingModel& model,
                                const Eigen::VectorXd& x) {
  ForwardTrace tr;
  tr.input = x;
  Eigen::VectorXd z = model.weights[0] * x + model.biases[0];
  if (model.weights.size() == 2) {
    tr.hidden = z.array().tanh().matrix();
    z = model.weights[1] * tr.hidden + model.biases[1];
  }
  tr.projection = z;
  tr.output = z;
  if (model.normalize) {
    const double n = z.norm();
    if (n >= 1e-12) tr.output = z / n;
  }
  return tr;
}

/// Accumulates d(loss)/d(params) for one sample given d(loss)/d(f(x)).
inline void backprop_sample(const EmbeddingModel& model, const ForwardTrace& tr,
                            Eigen::VectorXd grad_output, ModelGradient& grad) {
  Eigen::VectorXd dz = std::move(grad_output);
  if (model.normalize) {
    const double n = tr.projection.norm();
    if (n >= 1e-12) {
      // f = z/|z|  =>  df/dz = (I - f f^T) / |z|
      dz = (dz - tr.output * tr.output.dot(dz)) / n;
    }
  }
  if (model.weights.size() == 2) {
    grad.weights[1] += dz * tr.hidden.transpose();
    grad.biases[1] += dz;
    Eigen::VectorXd dh = model.weights[1].transpose() * dz;
    dz = (dh.array() * (1.0 - tr.hidden.array().square())).matrix();
  }
  grad.weights[0] += dz * tr.input.transpose();
  grad.biases[0] += dz;
}

}  // namespace detail

/// Exact gradient of the mean batch loss w.r.t. every model parameter.
/// Inactive triplets (hinged to zero) contribute nothing.
inline ModelGradient triplet_loss_grad(const EmbeddingModel& model,
                                       const std::vector<Triplet>& batch,
                                       double margin) {
  detail::validate_model(model);
  if (batch.empty()) {
    throw std::invalid_argument("triplet_loss_grad: empty batch");
  }
  ModelGradient grad = zero_gradient(model);
  for (const Triplet& t : batch) {
    const detail::ForwardTrace ta = detail::embed_trace(model, t.anchor);
    const detail::ForwardTrace tp = detail::embed_trace(model, t.positive);
    const detail::ForwardTrace tn = detail::embed_trace(model, t.negative);
    const double value = (ta.output - tp.output).squaredNorm() -
                         (ta.output - tn.output).squaredNorm() + margin;
    if (value <= 0.0) continue;
    // d/dfa = 2(fa-fp) - 2(fa-fn); d/dfp = -2(fa-fp); d/dfn = 2(fa-fn)
    const Eigen::VectorXd dap = 2.0 * (ta.output - tp.output);
    const Eigen::VectorXd dan = 2.0 * (ta.output - tn.output);
    detail::backprop_sample(model, ta, dap - dan, grad);
    detail::backprop_sample(model, tp, -dap, grad);
    detail::backprop_sample(model, tn, dan, grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t l = 0; l < grad.weights.size(); ++l) {
    grad.weights[l] *= inv;
    grad.biases[l] *= inv;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Triplet mining
// ---------------------------------------------------------------------------

struct LabeledFeature {
  FeatureVector feature;
  int label = 0;
};

enum class MiningStrategy { kRandom, kBatchHard };

inline MiningStrategy parse_mining_strategy(const std::string& name) {
  if (name == "random") return MiningStrategy::kRandom;
  if (name == "batch-hard") return MiningStrategy::kBatchHard;
  throw ConfigError("unknown mining strategy: " + name);
}

/// One triplet per eligible anchor (a sample whose label has at least one
/// other sample, provided a different label exists in the batch). Random
/// mining draws the positive and negative uniformly; batch-hard picks the
/// farthest positive and nearest negative under the current model.
inline std::vector<Triplet> mine_triplets(
    const std::vector<LabeledFeature>& batch, const EmbeddingModel& model,
    MiningStrategy strategy, std::mt19937_64& rng) {
  std::vector<Triplet> out;
  if (batch.size() < 3) return out;

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    by_label[batch[i].label].push_back(i);
  }
  if (by_label.size() < 2) return out;

  std::vector<Eigen::VectorXd> embedded;
  if (strategy == MiningStrategy::kBatchHard) {
    embedded.reserve(batch.size());
    for (const LabeledFeature& s : batch) {
      embedded.push_back(embed(model, s.feature));
    }
  }

  for (std::size_t a = 0; a < batch.size(); ++a) {
    const std::vector<std::size_t>& same = by_label[batch[a].label];
    if (same.size() < 2) continue;

    std::size_t positive = a;
    std::size_t negative = batch.size();
    if (strategy == MiningStrategy::kRandom) {
      std::vector<std::size_t> pos_pool;
      for (std::size_t i : same) {
        if (i != a) pos_pool.push_back(i);
      }
      std::vector<std::size_t> neg_pool;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].label != batch[a].label) neg_pool.push_back(i);
      }
      positive = pos_pool[detail::uniform_below(rng, pos_pool.size())];
      negative = neg_pool[detail::uniform_below(rng, neg_pool.size())];
    } else {
      double worst_pos = -1.0;
      double best_neg = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (i == a) continue;
        const double d = (embedded[a] - embedded[i]).norm();
        if (batch[i].label == batch[a].label) {
          if (d > worst_pos) {
            worst_pos = d;
            positive = i;
          }
        } else if (d < best_neg) {
          best_neg = d;
          negative = i;
        }
      }
    }
    out.push_back(Triplet{batch[a].feature, batch[positive].feature,
                          batch[negative].feature});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  double margin = 0.2;
  double learning_rate = 0.001;
  int batch_size = 16;
  int epochs = 100;
  std::uint64_t seed = 0;
  MiningStrategy mining = MiningStrategy::kRandom;
};

struct FitResult {
  EmbeddingModel model;
  std::vector<double> loss_history;  // per-epoch mean batch loss
};

/// Epochs of shuffle -> mine -> gradient step with per-parameter adaptive
/// learning rates (accumulated squared gradients). Batches that yield no
/// valid triplet are skipped; an epoch with no usable batch records loss 0.
inline FitResult fit(EmbeddingModel model,
                     const std::vector<LabeledFeature>& dataset,
                     const TrainConfig& cfg) {
  detail::validate_model(model);
  if (cfg.margin < 0.0) throw ConfigError("fit: margin must be >= 0");
  if (cfg.learning_rate < 0.0) throw ConfigError("fit: negative learning rate");
  if (cfg.batch_size < 3) throw ConfigError("fit: batch_size must be >= 3");
  if (cfg.epochs < 0) throw ConfigError("fit: negative epoch count");
  {
    std::map<int, int> counts;
    for (const LabeledFeature& s : dataset) counts[s.label] += 1;
    if (counts.size() < 2) {
      throw DataError("fit: training data needs at least two identities");
    }
    for (const LabeledFeature& s : dataset) {
      if (s.feature.size() != model.input_dim()) {
        throw DataError("fit: feature dimension does not match model input");
      }
    }
  }

  std::mt19937_64 rng(cfg.seed);
  ModelGradient accum = zero_gradient(model);  // AdaGrad sum of squares
  constexpr double kAdaEps = 1e-10;

  FitResult result;
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::shuffle(order, rng);
    double epoch_loss = 0.0;
    int used_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<LabeledFeature> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(dataset[order[i]]);
      }
      const std::vector<Triplet> triplets =
          mine_triplets(batch, model, cfg.mining, rng);
      if (triplets.empty()) continue;

      const double loss = batch_loss(model, triplets, cfg.margin);
      if (!std::isfinite(loss)) {
        throw DataError("fit: non-finite loss at epoch " +
                        std::to_string(epoch));
      }
      epoch_loss += loss;
      used_batches += 1;

      const ModelGradient grad = triplet_loss_grad(model, triplets, cfg.margin);
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        accum.weights[l].array() += grad.weights[l].array().square();
        model.weights[l].array() -=
            cfg.learning_rate * grad.weights[l].array() /
            (accum.weights[l].array().sqrt() + kAdaEps);
        accum.biases[l].array() += grad.biases[l].array().square();
        model.biases[l].array() -= cfg.learning_rate * grad.biases[l].array() /
                                   (accum.biases[l].array().sqrt() + kAdaEps);
      }
    }
    result.loss_history.push_back(
        used_batches > 0 ? epoch_loss / used_batches : 0.0);
  }
  result.model = std::move(model);
  return result;
}

/// Mean embedding distance within identities vs across identities; the
/// midpoint is a usable cross-camera match threshold.
struct EmbeddingSeparation {
  double mean_intra = 0.0;
  double mean_inter = 0.0;
  double suggested_threshold() const { return 0.5 * (mean_intra + mean_inter); }
};

inline EmbeddingSeparation embedding_separation(
    const EmbeddingModel& model, const std::vector<LabeledFeature>& dataset) {
  std::vector<Eigen::VectorXd> embedded;
  embedded.reserve(dataset.size());
  for (const LabeledFeature& s : dataset) {
    embedded.push_back(embed(model, s.feature));
  }
  double intra = 0.0, inter = 0.0;
  std::int64_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = i + 1; j < dataset.size(); ++j) {
      const double d = (embedded[i] - embedded[j]).norm();
      if (dataset[i].label == dataset[j].label) {
        intra += d;
        n_intra += 1;
      } else {
        inter += d;
        n_inter += 1;
      }
    }
  }
  EmbeddingSeparation sep;
  sep.mean_intra = n_intra > 0 ? intra / static_cast<double>(n_intra) : 0.0;
  sep.mean_inter = n_inter > 0 ? inter / static_cast<double>(n_inter) : 0.0;
  return sep;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct ModelCheckpoint {
  EmbeddingModel model;
  std::optional<double> suggested_max_dist;
};

/// Text checkpoint: header, layer shapes, then parameters printed with
/// enough digits that reloading reproduces every double bit-exactly.
inline void save_checkpoint(const std::string& path,
                            const ModelCheckpoint& checkpoint) {
  detail::validate_model(checkpoint.model);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  const EmbeddingModel& m = checkpoint.model;
  out << "mctrack-model 1\n";
  out << "normalize " << (m.normalize ? 1 : 0) << "\n";
  out << "layers " << m.weights.size() << "\n";
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    out << "layer " << m.weights[l].rows() << " " << m.weights[l].cols()
        << "\n";
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) {
        if (c) out << " ";
        out << detail::format_exact(m.weights[l](r, c));
      }
      out << "\n";
    }
    for (Eigen::Index r = 0; r < m.biases[l].size(); ++r) {
      if (r) out << " ";
      out << detail::format_exact(m.biases[l](r));
    }
    out << "\n";
  }
  if (checkpoint.suggested_max_dist.has_value()) {
    out << "max_dist " << detail::format_exact(*checkpoint.suggested_max_dist)
        << "\n";
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  const auto fail = [&path](const std::string& why) -> DataError {
    return DataError("bad checkpoint " + path + ": " + why);
  };
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "mctrack-model" || version != 1) {
    throw fail("unrecognized header");
  }
  ModelCheckpoint cp;
  int normalize = 0;
  std::size_t layers = 0;
  if (!(in >> word >> normalize) || word != "normalize") {
    throw fail("missing normalize flag");
  }
  cp.model.normalize = normalize != 0;
  if (!(in >> word >> layers) || word != "layers" || layers < 1 || layers > 2) {
    throw fail("bad layer count");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> word >> rows >> cols) || word != "layer" || rows < 1 ||
        cols < 1) {
      throw fail("bad layer shape");
    }
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(in >> w(r, c))) throw fail("truncated weights");
      }
    }
    Eigen::VectorXd b(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!(in >> b(r))) throw fail("truncated biases");
    }
    cp.model.weights.push_back(std::move(w));
    cp.model.biases.push_back(std::move(b));
  }
  if (in >> word) {
    double value = 0.0;
    if (word != "max_dist" || !(in >> value)) throw fail("trailing content");
    cp.suggested_max_dist = value;
  }
  detail::validate_model(cp.model);
  return cp;
}

}  // namespace mctrack
