#include "psyseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "psyseg/seed.hpp"

namespace psyseg::embedding {

using nlohmann::json;

void TrainingConfig::validate() const {
  if (!(margin > 0)) throw std::invalid_argument("training: margin must be > 0");
  if (!(learning_rate >= 0)) throw std::invalid_argument("training: learning rate must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("training: momentum must lie in [0, 1)");
  if (batch_size < 1 || epochs < 0) throw std::invalid_argument("training: batch size >= 1 and epochs >= 0");
}

json to_json(const TrainingConfig& c) {
  return {{"margin", c.margin},         {"learning_rate", c.learning_rate}, {"momentum", c.momentum},
          {"batch_size", c.batch_size}, {"epochs", c.epochs},               {"seed", c.seed}};
}

TrainingConfig training_config_from_json(const json& j) {
  TrainingConfig c;
  c.margin = j.value("margin", c.margin);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n, double margin) {
  return std::max(0.0, (a - p).norm() - (a - n).norm() + margin);
}

DualTripletTerms dual_triplet_terms(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, const Eigen::VectorXd& n,
                                    double margin) {
  if (p1.size() != p2.size() || p1.size() != n.size())
    throw std::invalid_argument("dual_triplet_loss: dimension mismatch");
  const double d12 = (p1 - p2).norm();
  return {d12 - (p1 - n).norm() + margin, d12 - (p2 - n).norm() + margin};
}

double dual_triplet_loss(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2, const Eigen::VectorXd& n,
                         double margin) {
  return dual_triplet_terms(p1, p2, n, margin).loss();
}

std::array<int, 3> positives_and_negative(const query::QueryResponse& r) {
  static constexpr int kOthers[3][2] = {{1, 2}, {0, 2}, {0, 1}};
  return {r.query[kOthers[r.choice][0]], r.query[kOthers[r.choice][1]], r.query[r.choice]};
}

namespace {

struct BatchLayout {
  std::vector<int> patches;                 // unique patch ids, first-seen order
  std::vector<std::array<int, 3>> columns;  // (p1, p2, n) column indices per response
};

BatchLayout layout(std::span<const query::QueryResponse> batch, Eigen::Index patch_count) {
  BatchLayout out;
  std::unordered_map<int, int> column_of;
  for (const auto& r : batch) {
    if (!r.query.valid() || r.choice < 0 || r.choice > 2)
      throw std::invalid_argument("loss_gradient: response needs three distinct patches and a choice in {0,1,2}");
    const auto ids = positives_and_negative(r);
    std::array<int, 3> cols{};
    for (int k = 0; k < 3; ++k) {
      if (ids[k] < 0 || ids[k] >= patch_count) throw std::invalid_argument("loss_gradient: patch id out of range");
      auto [it, inserted] = column_of.try_emplace(ids[k], static_cast<int>(out.patches.size()));
      if (inserted) out.patches.push_back(ids[k]);
      cols[k] = it->second;
    }
    out.columns.push_back(cols);
  }
  return out;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& features, const std::vector<int>& patches) {
  Eigen::MatrixXd x(features.cols(), static_cast<Eigen::Index>(patches.size()));
  for (std::size_t i = 0; i < patches.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = features.row(patches[i]).transpose();
  return x;
}

// d|u-v|/du, zero inside the guard radius.
Eigen::VectorXd unit_difference(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  Eigen::VectorXd diff = u - v;
  const double d = diff.norm();
  if (d < kDistanceGuard) return Eigen::VectorXd::Zero(u.size());
  return diff / d;
}

}  // namespace

BatchLoss loss_gradient(const EmbeddingModel& model, std::span<const query::QueryResponse> batch,
                        const Eigen::MatrixXd& features, const TrainingConfig& config) {
  if (batch.empty()) throw std::invalid_argument("loss_gradient: empty batch");
  const auto lay = layout(batch, features.rows());
  const ForwardCache cache = forward(model, gather(features, lay.patches));
  const Eigen::MatrixXd& y = cache.output;

  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(y.rows(), y.cols());
  double total = 0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& cols : lay.columns) {
    const Eigen::VectorXd p1 = y.col(cols[0]), p2 = y.col(cols[1]), n = y.col(cols[2]);
    const auto terms = dual_triplet_terms(p1, p2, n, config.margin);
    total += terms.loss();
    if (terms.first <= 0 && terms.second <= 0) continue;
    const Eigen::VectorXd u12 = unit_difference(p1, p2);
    if (terms.first > 0) {
      const Eigen::VectorXd u1n = unit_difference(p1, n);
      d_out.col(cols[0]) += scale * (u12 - u1n);
      d_out.col(cols[1]) -= scale * u12;
      d_out.col(cols[2]) += scale * u1n;
    }
    if (terms.second > 0) {
      const Eigen::VectorXd u2n = unit_difference(p2, n);
      d_out.col(cols[0]) += scale * u12;
      d_out.col(cols[1]) += scale * (-u12 - u2n);
      d_out.col(cols[2]) += scale * u2n;
    }
  }
  return {total * scale, backward(model, cache, d_out)};
}

double batch_loss(const EmbeddingModel& model, std::span<const query::QueryResponse> batch,
                  const Eigen::MatrixXd& features, double margin) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const auto lay = layout(batch, features.rows());
  const Eigen::MatrixXd y = forward(model, gather(features, lay.patches)).output;
  double total = 0;
  for (const auto& cols : lay.columns)
    total += dual_triplet_loss(y.col(cols[0]), y.col(cols[1]), y.col(cols[2]), margin);
  return total / static_cast<double>(batch.size());
}

TrainingResult train(EmbeddingModel model, std::span<const query::QueryResponse> responses,
                     const Eigen::MatrixXd& features, const TrainingConfig& config) {
  config.validate();
  if (responses.empty()) throw std::invalid_argument("train: no responses");
  TrainingResult result;
  ModelGradient velocity = ModelGradient::zeros_like(model);
  std::vector<std::size_t> order(responses.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<query::QueryResponse> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, {static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(responses[order[i]]);
      auto step = loss_gradient(model, batch, features, config);
      if (!std::isfinite(step.mean_loss) || !std::isfinite(step.gradient.squared_norm()))
        throw TrainingError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      epoch_loss += step.mean_loss;
      ++batches;
      auto& layers = model.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& v = velocity.layers[l];
        v.weight = config.momentum * v.weight - config.learning_rate * step.gradient.layers[l].weight;
        v.bias = config.momentum * v.bias - config.learning_rate * step.gradient.layers[l].bias;
        layers[l].weight += v.weight;
        layers[l].bias += v.bias;
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  if (!model.all_finite()) throw TrainingError("training produced non-finite parameters");
  result.model = std::move(model);
  return result;
}

}  // namespace psyseg::embedding
