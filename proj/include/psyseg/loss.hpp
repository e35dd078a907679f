#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "psyseg/model.hpp"
#include "psyseg/query.hpp"

namespace psyseg::embedding {

/// Below this separation a distance is treated as non-differentiable (gradient 0).
inline constexpr double kDistanceGuard = 1e-12;

struct TrainingConfig {
  double margin = 0.2;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainingConfig& c);
TrainingConfig training_config_from_json(const nlohmann::json& j);

/// max(0, |a-p| - |a-n| + m)
double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n, double margin);

/// The two hinge arguments of the dual-triplet loss.
struct DualTripletTerms {
  double first = 0;   // |p1-p2| - |p1-n| + m
  double second = 0;  // |p1-p2| - |p2-n| + m
  double loss() const { return std::max(0.0, first) + std::max(0.0, second); }
};

DualTripletTerms dual_triplet_terms(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, const Eigen::VectorXd& n,
                                    double margin);

/// [|p1-p2| - |p1-n| + m]_+ + [|p1-p2| - |p2-n| + m]_+
double dual_triplet_loss(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, const Eigen::VectorXd& n,
                         double margin);

/// (p1, p2, n) patch ids: the chosen option is the negative, the others keep query order.
std::array<int, 3> positives_and_negative(const query::QueryResponse& r);

struct BatchLoss {
  double mean_loss = 0;
  ModelGradient gradient;  // of the mean loss
};

/// Mean dual-triplet loss over `batch` and its analytic gradient w.r.t. every
/// model parameter. `features` holds one row per patch.
BatchLoss loss_gradient(const EmbeddingModel& model, std::span<const query::QueryResponse> batch,
                        const Eigen::MatrixXd& features, const TrainingConfig& config);

/// Mean loss only (no gradient).
double batch_loss(const EmbeddingModel& model, std::span<const query::QueryResponse> batch,
                  const Eigen::MatrixXd& features, double margin);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingResult {
  EmbeddingModel model;
  std::vector<double> epoch_losses;  // mean batch loss per epoch, measured before each update
};

/// Seeded, shuffled mini-batch SGD with momentum.
TrainingResult train(EmbeddingModel model, std::span<const query::QueryResponse> responses,
                     const Eigen::MatrixXd& features, const TrainingConfig& config);

}  // namespace psyseg::embedding
