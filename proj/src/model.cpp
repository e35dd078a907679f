#include "psyseg/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "psyseg/seed.hpp"

namespace psyseg::embedding {

using nlohmann::json;

EmbeddingModel EmbeddingModel::create(const std::vector<int>& sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("model needs at least input and output sizes");
  EmbeddingModel m;
  std::mt19937_64 rng(derive_seed(seed, {0x6d6f64656cULL}));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    if (in < 1 || out < 1) throw std::invalid_argument("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    m.layers_.push_back(std::move(layer));
  }
  m.input_mean_ = Eigen::VectorXd::Zero(sizes.front());
  m.input_scale_ = Eigen::VectorXd::Ones(sizes.front());
  return m;
}

EmbeddingModel EmbeddingModel::create_default(std::uint64_t seed) { return create({kFeatureDim, 64, 32, 16}, seed); }

std::vector<int> EmbeddingModel::sizes() const {
  std::vector<int> s{input_dim()};
  for (const auto& l : layers_) s.push_back(static_cast<int>(l.weight.rows()));
  return s;
}

void EmbeddingModel::set_standardization(const Eigen::MatrixXd& rows) {
  if (rows.cols() != input_dim()) throw std::invalid_argument("standardization: feature dimension mismatch");
  if (rows.rows() == 0) throw std::invalid_argument("standardization: no samples");
  input_mean_ = rows.colwise().mean().transpose();
  input_scale_.resize(input_dim());
  for (int c = 0; c < input_dim(); ++c) {
    const double var = (rows.col(c).array() - input_mean_(c)).square().mean();
    input_scale_(c) = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
}

ForwardCache forward(const EmbeddingModel& model, const Eigen::MatrixXd& input) {
  if (input.rows() != model.input_dim())
    throw std::invalid_argument("embed: feature dimension " + std::to_string(input.rows()) + " != model input " +
                                std::to_string(model.input_dim()));
  ForwardCache cache;
  const auto& layers = model.layers();
  cache.activations.reserve(layers.size() + 1);
  cache.activations.push_back(
      ((input.colwise() - model.input_mean()).array().colwise() * model.input_scale().array()).matrix());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = (layers[l].weight * cache.activations.back()).colwise() + layers[l].bias;
    if (l + 1 < layers.size()) z = z.array().tanh().matrix();
    cache.activations.push_back(std::move(z));
  }
  const Eigen::MatrixXd& z = cache.activations.back();
  cache.norms = z.colwise().norm().transpose();
  cache.output.resize(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (cache.norms(j) > 0) {
      cache.output.col(j) = z.col(j) / cache.norms(j);
    } else {
      cache.output.col(j).setZero();
      cache.output(0, j) = 1.0;  // degenerate zero vector maps to the first axis
    }
  }
  return cache;
}

Eigen::VectorXd EmbeddingModel::embed(const FeatureVector& x) const {
  if (x.size() != input_dim())
    throw std::invalid_argument("embed: feature dimension " + std::to_string(x.size()) + " != model input " +
                                std::to_string(input_dim()));
  return forward(*this, x).output.col(0);
}

Eigen::MatrixXd EmbeddingModel::embed_rows(const Eigen::MatrixXd& rows) const {
  return forward(*this, rows.transpose()).output.transpose();
}

ModelGradient backward(const EmbeddingModel& model, const ForwardCache& cache, const Eigen::MatrixXd& d_output) {
  const auto& layers = model.layers();
  ModelGradient grad = ModelGradient::zeros_like(model);
  // Through y = z / |z|: dz = (g - y (y.g)) / |z|.
  Eigen::MatrixXd delta(d_output.rows(), d_output.cols());
  for (Eigen::Index j = 0; j < d_output.cols(); ++j) {
    if (cache.norms(j) > 0) {
      const auto y = cache.output.col(j);
      delta.col(j) = (d_output.col(j) - y * y.dot(d_output.col(j))) / cache.norms(j);
    } else {
      delta.col(j).setZero();
    }
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& in = cache.activations[l];
    grad.layers[l].weight.noalias() = delta * in.transpose();
    grad.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    delta = (layers[l].weight.transpose() * delta).cwiseProduct((1.0 - in.array().square()).matrix());
  }
  return grad;
}

ModelGradient ModelGradient::zeros_like(const EmbeddingModel& model) {
  ModelGradient g;
  for (const auto& l : model.layers())
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  return g;
}

double ModelGradient::squared_norm() const {
  double s = 0;
  for (const auto& l : layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

ModelGradient& ModelGradient::operator+=(const ModelGradient& o) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += o.layers[l].weight;
    layers[l].bias += o.layers[l].bias;
  }
  return *this;
}

ModelGradient& ModelGradient::operator*=(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

std::size_t EmbeddingModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool EmbeddingModel::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

bool EmbeddingModel::operator==(const EmbeddingModel& o) const {
  if (layers_.size() != o.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (layers_[l].weight != o.layers_[l].weight || layers_[l].bias != o.layers_[l].bias) return false;
  return input_mean_ == o.input_mean_ && input_scale_ == o.input_scale_;
}

namespace {
std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

json EmbeddingModel::to_json() const {
  json j{{"format", "psyseg-model-1"}, {"activation", "tanh"}, {"output", "l2-normalized"}};
  j["input_mean"] = to_vec(input_mean_);
  j["input_scale"] = to_vec(input_scale_);
  j["layers"] = json::array();
  for (const auto& l : layers_) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    j["layers"].push_back({{"in", l.weight.cols()}, {"out", l.weight.rows()}, {"weight", w}, {"bias", to_vec(l.bias)}});
  }
  return j;
}

EmbeddingModel EmbeddingModel::from_json(const json& j) {
  if (j.value("format", "") != "psyseg-model-1") throw std::runtime_error("model.json: unknown format tag");
  EmbeddingModel m;
  for (const auto& lj : j.at("layers")) {
    const int in = lj.at("in"), out = lj.at("out");
    const auto w = lj.at("weight").get<std::vector<double>>();
    const auto b = lj.at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(in) * out || b.size() != static_cast<std::size_t>(out))
      throw std::runtime_error("model.json: layer array sizes disagree with shape");
    DenseLayer layer{Eigen::MatrixXd(out, in), from_vec(b)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r) * in + c];
    if (!m.layers_.empty() && m.layers_.back().weight.rows() != in)
      throw std::runtime_error("model.json: consecutive layer shapes do not chain");
    m.layers_.push_back(std::move(layer));
  }
  if (m.layers_.empty()) throw std::runtime_error("model.json: no layers");
  m.input_mean_ = from_vec(j.at("input_mean").get<std::vector<double>>());
  m.input_scale_ = from_vec(j.at("input_scale").get<std::vector<double>>());
  if (m.input_mean_.size() != m.input_dim() || m.input_scale_.size() != m.input_dim())
    throw std::runtime_error("model.json: standardization size mismatch");
  return m;
}

void EmbeddingModel::save(const std::filesystem::path& path, const json& config_echo) const {
  json j = to_json();
  if (!config_echo.is_null()) j["config"] = config_echo;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return from_json(json::parse(in));
}

}  // namespace psyseg::embedding
