#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "psyseg/features.hpp"

namespace psyseg::embedding {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Feedforward network: standardised input -> tanh hidden layers -> linear
/// output -> L2 normalisation onto the unit sphere.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;

  /// `sizes` = {input, hidden..., output}; Xavier-uniform weights, zero biases.
  static EmbeddingModel create(const std::vector<int>& sizes, std::uint64_t seed);
  static EmbeddingModel create_default(std::uint64_t seed);  // 92 -> 64 -> 32 -> 16

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  std::vector<int> sizes() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Fixed input standardisation x' = (x - mean) .* scale. Not trained.
  void set_standardization(const Eigen::MatrixXd& feature_rows);
  const Eigen::VectorXd& input_mean() const { return input_mean_; }
  const Eigen::VectorXd& input_scale() const { return input_scale_; }

  Eigen::VectorXd embed(const FeatureVector& x) const;
  /// Embeds every row; returns one unit vector per row.
  Eigen::MatrixXd embed_rows(const Eigen::MatrixXd& feature_rows) const;

  std::size_t parameter_count() const;
  bool all_finite() const;

  nlohmann::json to_json() const;
  static EmbeddingModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path, const nlohmann::json& config_echo = {}) const;
  static EmbeddingModel load(const std::filesystem::path& path);

  bool operator==(const EmbeddingModel& o) const;

 private:
  std::vector<DenseLayer> layers_;
  Eigen::VectorXd input_mean_;
  Eigen::VectorXd input_scale_;
};

/// Activations of one forward pass over a column batch.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] = standardised input, then per-layer outputs (pre-normalisation last)
  Eigen::MatrixXd output;                    // unit columns
  Eigen::VectorXd norms;
};

ForwardCache forward(const EmbeddingModel& model, const Eigen::MatrixXd& input_columns);

/// Parameter-shaped gradient.
struct ModelGradient {
  std::vector<DenseLayer> layers;

  static ModelGradient zeros_like(const EmbeddingModel& model);
  double squared_norm() const;
  ModelGradient& operator+=(const ModelGradient& o);
  ModelGradient& operator*=(double s);
};

/// Back-propagates dL/d(output) (d x n, one column per cached sample).
ModelGradient backward(const EmbeddingModel& model, const ForwardCache& cache, const Eigen::MatrixXd& d_output);

}  // namespace psyseg::embedding
