#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "psyseg/evaluation.hpp"
#include "psyseg/hierarchy.hpp"
#include "psyseg/image.hpp"
#include "psyseg/loss.hpp"
#include "psyseg/model.hpp"
#include "psyseg/oracle.hpp"
#include "psyseg/query.hpp"
#include "psyseg/selection.hpp"
#include "psyseg/slic.hpp"
#include "psyseg/synthetic.hpp"

namespace psyseg::session {

enum class Variant { Random, Active, ActiveEnhance };
const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

enum class AnnotatorMode { Oracle, Interactive };

struct SessionConfig {
  // Image source: a PNG path, or the synthetic generator when empty.
  std::string image_path;
  imaging::SyntheticSpec synthetic = imaging::SyntheticSpec::desk_scale();
  // Ground truth: explicit oracle.json, else the synthetic participant (1 = colour-first, 2 = texture-first).
  std::string oracle_path;
  int participant = 1;

  int superpixels = 300;
  double compactness = 10.0;
  double context_scale = 3.0;

  embedding::TrainingConfig training;
  query::QueryEngineConfig query;
  hierarchy::ClusteringConfig clustering;
  std::vector<int> quotas = std::vector<int>(10, 250);

  AnnotatorMode mode = AnnotatorMode::Oracle;
  oracle::OracleConfig oracle;
  std::uint64_t seed = 1;
  Variant variant = Variant::ActiveEnhance;
  bool render = true;
  bool parallel = true;

  int iterations() const { return static_cast<int>(quotas.size()); }
  bool synthetic_image() const { return image_path.empty(); }
  /// Query settings with the variant applied (random: no filtering; active: no enhancement).
  query::QueryEngineConfig effective_query() const;
  void validate() const;
};

/// Quota schedules: "synthetic" 10x800, "histology" 1500+9x1000, "aerial" 600+4x400.
std::vector<int> quota_preset(const std::string& name);

nlohmann::json to_json(const SessionConfig& c);
SessionConfig session_config_from_json(const nlohmann::json& j);

class QuotaNotMet : public std::runtime_error {
 public:
  explicit QuotaNotMet(int remaining);
  int remaining() const { return remaining_; }

 private:
  int remaining_;
};

struct PendingQuery {
  std::string id;
  query::TripletQuery query;
  bool answered = false;
};

enum class Phase { Collecting, Ready, Complete };
const char* to_string(Phase p);

/// One annotation session rooted at a directory. Not thread-safe; callers
/// serialise mutations.
class Session {
 public:
  /// Loads or generates the image, computes superpixels and descriptors,
  /// writes every initial artefact and opens the first iteration.
  static Session create(const std::filesystem::path& dir, const SessionConfig& config);
  /// Restores a session from disk, replaying responses.jsonl.
  static Session open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const SessionConfig& config() const { return config_; }
  int iteration() const { return iteration_; }
  Phase phase() const;
  int quota() const;
  int answered_this_iteration() const;
  int remaining() const { return std::max(0, quota() - answered_this_iteration()); }
  std::size_t answered_total() const;

  const imaging::Image& image() const { return image_; }
  const imaging::SuperpixelMap& superpixels() const { return superpixels_; }
  const Eigen::MatrixXd& features() const { return features_; }
  const embedding::EmbeddingModel& model() const { return model_; }
  const kernels::PointMatrix& embeddings() const { return embeddings_; }
  const std::optional<hierarchy::HierarchyTree>& tree() const { return tree_; }
  const std::optional<oracle::GroundTruthHierarchy>& ground_truth() const { return truth_; }
  const std::vector<query::QueryResponse>& responses() const { return responses_; }
  const std::vector<PendingQuery>& pending() const { return pending_; }
  const std::vector<evaluation::EvaluationReport>& reports() const { return reports_; }

  /// First unanswered pending query; nullopt once the quota is met.
  std::optional<PendingQuery> next_query();
  /// Records an answer and appends it to responses.jsonl before returning.
  /// Returns false when `query_id` was already answered.
  bool record_response(const std::string& query_id, int choice, query::ResponseSource source, std::int64_t ts);
  /// Closes the current iteration: enhance, train, cluster, evaluate, render.
  /// Throws QuotaNotMet while answers are missing.
  void iterate();
  /// Oracle mode: answers the current iteration's queries and closes it.
  void run_iteration();
  /// Oracle mode: runs every remaining iteration.
  void run_all();

  std::filesystem::path overlay_path(int level) const;
  void render();

 private:
  Session() = default;
  void open_iteration();
  void refresh_embeddings();
  void save_state() const;
  std::int64_t next_logical_ts() const;

  std::filesystem::path dir_;
  SessionConfig config_;
  int iteration_ = 0;
  imaging::Image image_;
  imaging::SuperpixelMap superpixels_;
  Eigen::MatrixXd features_;
  embedding::EmbeddingModel model_;
  kernels::PointMatrix embeddings_;
  std::optional<hierarchy::HierarchyTree> tree_;
  std::optional<oracle::GroundTruthHierarchy> truth_;
  std::vector<query::QueryResponse> responses_;
  std::vector<PendingQuery> pending_;
  nlohmann::json selection_stats_;  // how the current iteration's queries were drawn
  std::vector<evaluation::EvaluationReport> reports_;
};

}  // namespace psyseg::session
