#include "psyseg/session.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "psyseg/features.hpp"
#include "psyseg/seed.hpp"
#include "psyseg/viz.hpp"

namespace psyseg::session {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream tags for derive_seed(master, {iteration, tag, ...}).
enum : std::uint64_t {
  kCandidates = 1,
  kEnhance = 2,
  kOracle = 3,
  kTrain = 4,
  kCluster = 5,
  kInitModel = 0xffff,
};

constexpr int kCandidateRounds = 4;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

// Write-then-rename so a crash never leaves a torn file behind.
void write_json(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(1) << '\n';
  }
  fs::rename(tmp, path);
}

json spec_to_json(const imaging::SyntheticSpec& s) {
  json colors = json::array();
  for (const auto& c : s.colors) colors.push_back({c.r, c.g, c.b});
  return {{"width", s.width},
          {"height", s.height},
          {"grid_rows", s.grid_rows},
          {"grid_cols", s.grid_cols},
          {"colors", colors},
          {"foreground_scale", s.foreground_scale},
          {"stripe_period", s.stripe_period},
          {"stripe_width", s.stripe_width},
          {"dot_radius", s.dot_radius},
          {"dot_coverage", s.dot_coverage},
          {"triangle_side", s.triangle_side},
          {"triangle_coverage", s.triangle_coverage},
          {"rotate_triangles", s.rotate_triangles},
          {"seed", s.seed}};
}

imaging::SyntheticSpec spec_from_json(const json& j) {
  imaging::SyntheticSpec s;
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.grid_rows = j.value("grid_rows", s.grid_rows);
  s.grid_cols = j.value("grid_cols", s.grid_cols);
  if (j.contains("colors")) {
    const auto& c = j.at("colors");
    if (!c.is_array() || c.size() != 3) throw std::invalid_argument("synthetic.colors must list 3 RGB triples");
    for (int i = 0; i < 3; ++i)
      s.colors[i] = {c[i].at(0).get<std::uint8_t>(), c[i].at(1).get<std::uint8_t>(), c[i].at(2).get<std::uint8_t>()};
  }
  s.foreground_scale = j.value("foreground_scale", s.foreground_scale);
  s.stripe_period = j.value("stripe_period", s.stripe_period);
  s.stripe_width = j.value("stripe_width", s.stripe_width);
  s.dot_radius = j.value("dot_radius", s.dot_radius);
  s.dot_coverage = j.value("dot_coverage", s.dot_coverage);
  s.triangle_side = j.value("triangle_side", s.triangle_side);
  s.triangle_coverage = j.value("triangle_coverage", s.triangle_coverage);
  s.rotate_triangles = j.value("rotate_triangles", s.rotate_triangles);
  s.seed = j.value("seed", s.seed);
  return s;
}

json features_to_json(const Eigen::MatrixXd& f) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    std::vector<double> row(f.cols());
    for (Eigen::Index c = 0; c < f.cols(); ++c) row[c] = f(i, c);
    rows.push_back(std::move(row));
  }
  return {{"format", "psyseg-features-1"}, {"dim", f.cols()}, {"rows", rows}};
}

Eigen::MatrixXd features_from_json(const json& j) {
  const auto& rows = j.at("rows");
  const int dim = j.at("dim").get<int>();
  Eigen::MatrixXd f(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = rows[i].get<std::vector<double>>();
    if (static_cast<int>(row.size()) != dim) throw std::runtime_error("features.json: ragged row");
    for (int c = 0; c < dim; ++c) f(static_cast<Eigen::Index>(i), c) = row[c];
  }
  return f;
}

std::string query_id(int iteration, std::size_t index) {
  return "q" + std::to_string(iteration) + "-" + std::to_string(index);
}

}  // namespace

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Random: return "random";
    case Variant::Active: return "active";
    case Variant::ActiveEnhance: return "active+enhance";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "random") return Variant::Random;
  if (s == "active") return Variant::Active;
  if (s == "active+enhance") return Variant::ActiveEnhance;
  throw std::invalid_argument("unknown variant '" + s + "' (random | active | active+enhance)");
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Collecting: return "collecting";
    case Phase::Ready: return "ready";
    case Phase::Complete: return "complete";
  }
  return "?";
}

QuotaNotMet::QuotaNotMet(int remaining)
    : std::runtime_error("quota not reached: " + std::to_string(remaining) + " remaining"), remaining_(remaining) {}

std::vector<int> quota_preset(const std::string& name) {
  if (name == "synthetic") return std::vector<int>(10, 800);
  if (name == "histology") {
    std::vector<int> q(10, 1000);
    q[0] = 1500;
    return q;
  }
  if (name == "aerial") {
    std::vector<int> q(5, 400);
    q[0] = 600;
    return q;
  }
  throw std::invalid_argument("unknown quota preset '" + name + "' (synthetic | histology | aerial)");
}

query::QueryEngineConfig SessionConfig::effective_query() const {
  query::QueryEngineConfig q = query;
  q.parallel = parallel;
  if (variant == Variant::Random) q.active = false;
  if (variant != Variant::ActiveEnhance) q.enhancement_factor = 1.0;
  return q;
}

void SessionConfig::validate() const {
  if (quotas.empty()) throw std::invalid_argument("config: iterations must be >= 1");
  for (int q : quotas)
    if (q < 1) throw std::invalid_argument("config: per-iteration quotas must be >= 1");
  if (superpixels < 2) throw std::invalid_argument("config: superpixels must be >= 2");
  if (!(compactness > 0)) throw std::invalid_argument("config: compactness must be positive");
  if (!(context_scale >= 1)) throw std::invalid_argument("config: context_scale must be >= 1");
  if (participant != 1 && participant != 2) throw std::invalid_argument("config: participant must be 1 or 2");
  if (mode == AnnotatorMode::Oracle && !synthetic_image() && oracle_path.empty())
    throw std::invalid_argument("config: oracle mode on a user image needs an oracle file");
  if (!(oracle.error_rate >= 0 && oracle.error_rate <= 1))
    throw std::invalid_argument("config: oracle error rate must lie in [0, 1]");
  training.validate();
  query.validate();
  clustering.validate();
}

json to_json(const SessionConfig& c) {
  json j{{"format", "psyseg-session-1"},
         {"superpixels", c.superpixels},
         {"compactness", c.compactness},
         {"context_scale", c.context_scale},
         {"training", embedding::to_json(c.training)},
         {"query", query::to_json(c.query)},
         {"clustering", hierarchy::to_json(c.clustering)},
         {"quotas", c.quotas},
         {"mode", c.mode == AnnotatorMode::Oracle ? "oracle" : "interactive"},
         {"oracle_error_rate", c.oracle.error_rate},
         {"seed", c.seed},
         {"variant", to_string(c.variant)},
         {"render", c.render},
         {"parallel", c.parallel}};
  if (c.synthetic_image()) {
    j["synthetic"] = spec_to_json(c.synthetic);
  } else {
    j["image"] = c.image_path;
  }
  if (!c.oracle_path.empty()) j["oracle"] = c.oracle_path;
  j["participant"] = c.participant;
  return j;
}

SessionConfig session_config_from_json(const json& j) {
  SessionConfig c;
  c.image_path = j.value("image", std::string{});
  if (j.contains("synthetic")) c.synthetic = spec_from_json(j.at("synthetic"));
  c.oracle_path = j.value("oracle", std::string{});
  c.participant = j.value("participant", c.participant);
  c.superpixels = j.value("superpixels", c.superpixels);
  c.compactness = j.value("compactness", c.compactness);
  c.context_scale = j.value("context_scale", c.context_scale);
  if (j.contains("training")) c.training = embedding::training_config_from_json(j.at("training"));
  if (j.contains("query")) c.query = query::query_config_from_json(j.at("query"));
  if (j.contains("clustering")) c.clustering = hierarchy::clustering_config_from_json(j.at("clustering"));
  if (j.contains("quotas")) {
    const auto& q = j.at("quotas");
    if (q.is_string()) {
      c.quotas = quota_preset(q.get<std::string>());
    } else if (q.is_number_integer()) {
      c.quotas.assign(static_cast<std::size_t>(j.value("iterations", 10)), q.get<int>());
    } else {
      c.quotas = q.get<std::vector<int>>();
    }
  } else if (j.contains("iterations")) {
    c.quotas.assign(j.at("iterations").get<std::size_t>(), c.quotas.front());
  }
  const std::string mode = j.value("mode", std::string{"oracle"});
  if (mode == "oracle") {
    c.mode = AnnotatorMode::Oracle;
  } else if (mode == "interactive") {
    c.mode = AnnotatorMode::Interactive;
  } else {
    throw std::invalid_argument("config: mode must be 'oracle' or 'interactive'");
  }
  c.oracle.error_rate = j.value("oracle_error_rate", c.oracle.error_rate);
  c.seed = j.value("seed", c.seed);
  c.variant = variant_from_string(j.value("variant", std::string{to_string(c.variant)}));
  c.render = j.value("render", c.render);
  c.parallel = j.value("parallel", c.parallel);
  c.validate();
  return c;
}

Session Session::create(const fs::path& dir, const SessionConfig& config) {
  config.validate();
  fs::create_directories(dir);
  if (fs::exists(dir / "state.json")) throw std::runtime_error("session already exists in " + dir.string());

  Session s;
  s.dir_ = dir;
  s.config_ = config;

  std::optional<imaging::SyntheticImage> synthetic;
  if (config.synthetic_image()) {
    synthetic = imaging::generate_synthetic(config.synthetic);
    s.image_ = synthetic->image;
  } else {
    s.image_ = imaging::load_image(config.image_path);
  }

  imaging::SlicParams slic;
  slic.target_count = config.superpixels;
  slic.compactness = config.compactness;
  slic.parallel = config.parallel;
  s.superpixels_ = imaging::slic(s.image_, slic);
  s.features_ = embedding::describe_all(s.image_, s.superpixels_, config.context_scale);

  if (!config.oracle_path.empty()) {
    s.truth_ = oracle::load_oracle(config.oracle_path);
    if (s.truth_->patch_labels.empty() && synthetic) {
      s.truth_->patch_labels = oracle::majority_labels(synthetic->truth.labels, s.superpixels_.labels.labels,
                                                      s.superpixels_.count(), s.truth_->tree.class_count());
    }
    if (static_cast<int>(s.truth_->patch_labels.size()) != s.superpixels_.count())
      throw std::invalid_argument("oracle file labels " + std::to_string(s.truth_->patch_labels.size()) +
                                  " patches but the image has " + std::to_string(s.superpixels_.count()));
  } else if (synthetic) {
    oracle::GroundTruthHierarchy h;
    h.tree = config.participant == 1 ? synthetic->color_first : synthetic->texture_first;
    h.patch_labels = oracle::majority_labels(synthetic->truth.labels, s.superpixels_.labels.labels,
                                             s.superpixels_.count(), h.tree.class_count());
    s.truth_ = std::move(h);
  }

  s.model_ = embedding::EmbeddingModel::create_default(derive_seed(config.seed, {kInitModel}));
  s.model_.set_standardization(s.features_);
  s.refresh_embeddings();

  write_json(dir / "config.json", to_json(config));
  imaging::save_image(s.image_, dir / "image.png");
  if (synthetic) imaging::save_label_png(synthetic->truth, dir / "truth.png");
  imaging::save_superpixels(s.superpixels_, dir);
  write_json(dir / "features.json", features_to_json(s.features_));
  if (s.truth_) oracle::save_oracle(*s.truth_, dir / "oracle.json");
  s.model_.save(dir / "model.json", embedding::to_json(config.training));
  std::ofstream(dir / "responses.jsonl", std::ios::app).close();

  s.open_iteration();
  s.save_state();
  return s;
}

Session Session::open(const fs::path& dir) {
  Session s;
  s.dir_ = dir;
  s.config_ = session_config_from_json(read_json(dir / "config.json"));
  s.image_ = imaging::load_image(dir / "image.png");
  s.superpixels_ = imaging::load_superpixels(dir);
  s.features_ = features_from_json(read_json(dir / "features.json"));
  if (fs::exists(dir / "oracle.json")) s.truth_ = oracle::load_oracle(dir / "oracle.json");
  s.model_ = embedding::EmbeddingModel::load(dir / "model.json");
  if (fs::exists(dir / "hierarchy.json")) s.tree_ = hierarchy::HierarchyTree::load(dir / "hierarchy.json");
  s.responses_ = query::load_responses(dir / "responses.jsonl");
  s.refresh_embeddings();

  const json state = read_json(dir / "state.json");
  s.iteration_ = state.at("iteration").get<int>();
  s.selection_stats_ = state.value("selection", json{});
  for (int i = 0; i < s.iteration_; ++i) {
    const fs::path p = dir / "reports" / ("report_" + std::to_string(i) + ".json");
    if (fs::exists(p)) s.reports_.push_back(evaluation::report_from_json(read_json(p)));
  }
  std::set<std::array<int, 3>> answered;
  for (const auto& r : s.responses_)
    if (r.iteration == s.iteration_ && r.source != query::ResponseSource::Enhanced) answered.insert(r.query.key());
  for (const auto& p : state.at("pending")) {
    PendingQuery q{p.at("id").get<std::string>(),
                   query::TripletQuery(p.at("a").get<int>(), p.at("b").get<int>(), p.at("c").get<int>())};
    q.answered = answered.count(q.query.key()) > 0;
    s.pending_.push_back(std::move(q));
  }
  return s;
}

Phase Session::phase() const {
  if (iteration_ >= config_.iterations()) return Phase::Complete;
  return remaining() == 0 ? Phase::Ready : Phase::Collecting;
}

int Session::quota() const {
  return iteration_ < config_.iterations() ? config_.quotas[iteration_] : 0;
}

int Session::answered_this_iteration() const {
  return static_cast<int>(std::count_if(pending_.begin(), pending_.end(), [](const auto& p) { return p.answered; }));
}

std::size_t Session::answered_total() const {
  return static_cast<std::size_t>(std::count_if(responses_.begin(), responses_.end(), [](const auto& r) {
    return r.source != query::ResponseSource::Enhanced;
  }));
}

void Session::refresh_embeddings() {
  embeddings_ = model_.embed_rows(features_);
}

std::int64_t Session::next_logical_ts() const { return static_cast<std::int64_t>(responses_.size()); }

void Session::open_iteration() {
  pending_.clear();
  if (iteration_ >= config_.iterations()) return;
  const int want = quota();
  const auto qcfg = config_.effective_query();

  std::set<std::array<int, 3>> taken;
  for (const auto& r : responses_) taken.insert(r.query.key());

  const query::NeighborTable neighbors =
      qcfg.active ? query::neighborhoods(embeddings_, qcfg.k, config_.parallel) : query::NeighborTable{};
  const hierarchy::HierarchyTree* tree = qcfg.active && tree_ ? &*tree_ : nullptr;
  const int budget = qcfg.candidate_multiplier * want;

  std::vector<query::TripletQuery> chosen, spare;
  int drawn = 0, confident = 0, ambiguous = 0, rounds = 0;
  for (int round = 0; round < kCandidateRounds && static_cast<int>(chosen.size()) < want; ++round) {
    auto candidates = query::generate_candidates(tree, superpixels_.count(), budget,
                                                 derive_seed(config_.seed, {static_cast<std::uint64_t>(iteration_),
                                                                            kCandidates, static_cast<std::uint64_t>(round)}));
    std::erase_if(candidates, [&](const auto& q) { return !taken.insert(q.key()).second; });
    ++rounds;
    drawn += static_cast<int>(candidates.size());
    if (candidates.empty()) continue;
    if (!qcfg.active) {
      chosen.insert(chosen.end(), candidates.begin(), candidates.end());
      continue;
    }
    const auto sel = query::select_queries(candidates, responses_, neighbors, qcfg);
    chosen.insert(chosen.end(), sel.accepted.begin(), sel.accepted.end());
    for (const auto& [q, reason] : sel.rejected) {
      spare.push_back(q);
      ++(reason == query::RejectReason::Confident ? confident : ambiguous);
    }
  }
  const int accepted = static_cast<int>(std::min<std::size_t>(chosen.size(), static_cast<std::size_t>(want)));
  // Filters too strict for the quota: top up with rejected candidates in draw order.
  for (std::size_t i = 0; static_cast<int>(chosen.size()) < want && i < spare.size(); ++i) chosen.push_back(spare[i]);
  if (static_cast<int>(chosen.size()) < want)
    throw std::runtime_error("cannot draw " + std::to_string(want) + " distinct queries from " +
                             std::to_string(superpixels_.count()) + " patches");
  chosen.resize(static_cast<std::size_t>(want));
  selection_stats_ = {{"rounds", rounds},
                      {"candidates", drawn},
                      {"rejected_confident", confident},
                      {"rejected_ambiguous", ambiguous},
                      {"accepted", accepted},
                      {"filled_from_rejected", want - accepted}};
  for (std::size_t i = 0; i < chosen.size(); ++i) pending_.push_back({query_id(iteration_, i), chosen[i], false});
}

std::optional<PendingQuery> Session::next_query() {
  if (phase() != Phase::Collecting) return std::nullopt;
  for (const auto& p : pending_)
    if (!p.answered) return p;
  return std::nullopt;
}

bool Session::record_response(const std::string& id, int choice, query::ResponseSource source, std::int64_t ts) {
  if (choice < 0 || choice > 2) throw std::invalid_argument("choice must be 0, 1 or 2");
  const auto it = std::find_if(pending_.begin(), pending_.end(), [&](const auto& p) { return p.id == id; });
  if (it == pending_.end()) throw std::out_of_range("unknown query id '" + id + "'");
  if (it->answered) return false;
  const query::QueryResponse r{it->query, choice, source, iteration_, ts};
  query::append_responses(dir_ / "responses.jsonl", {r});
  responses_.push_back(r);
  it->answered = true;
  return true;
}

void Session::run_iteration() {
  if (!truth_) throw std::logic_error("oracle answers need a ground-truth hierarchy");
  if (phase() == Phase::Complete) return;
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    if (pending_[i].answered) continue;
    const auto seed = derive_seed(config_.seed, {static_cast<std::uint64_t>(iteration_), kOracle, i});
    const int choice = oracle::answer(*truth_, pending_[i].query, seed, config_.oracle);
    record_response(pending_[i].id, choice, query::ResponseSource::Oracle, next_logical_ts());
  }
  iterate();
}

void Session::run_all() {
  while (phase() != Phase::Complete) run_iteration();
}

void Session::iterate() {
  if (phase() == Phase::Complete) throw std::logic_error("session is complete");
  if (remaining() > 0) throw QuotaNotMet(remaining());
  const auto it = static_cast<std::uint64_t>(iteration_);
  const auto qcfg = config_.effective_query();

  // A crash after the enhanced batch was logged must not enhance twice on resume.
  const bool enhanced_already = std::any_of(responses_.begin(), responses_.end(), [&](const auto& r) {
    return r.iteration == iteration_ && r.source == query::ResponseSource::Enhanced;
  });
  if (qcfg.enhancement_factor > 1.0 && !enhanced_already) {
    std::vector<query::QueryResponse> fresh;
    for (const auto& r : responses_)
      if (r.iteration == iteration_ && r.source != query::ResponseSource::Enhanced) fresh.push_back(r);
    const auto neighbors = query::neighborhoods(embeddings_, qcfg.k, config_.parallel);
    auto enhanced = query::enhance_responses(fresh, neighbors, qcfg.enhancement_factor,
                                             derive_seed(config_.seed, {it, kEnhance}), responses_, iteration_);
    for (std::size_t i = 0; i < enhanced.size(); ++i) enhanced[i].ts = next_logical_ts() + static_cast<std::int64_t>(i);
    query::append_responses(dir_ / "responses.jsonl", enhanced);
    responses_.insert(responses_.end(), enhanced.begin(), enhanced.end());
  }

  auto tcfg = config_.training;
  tcfg.seed = derive_seed(config_.seed, {it, kTrain});
  auto trained = embedding::train(std::move(model_), responses_, features_, tcfg);
  model_ = std::move(trained.model);
  refresh_embeddings();

  auto ccfg = config_.clustering;
  ccfg.seed = derive_seed(config_.seed, {it, kCluster});
  ccfg.parallel = config_.parallel;
  tree_ = hierarchy::build_hierarchy(embeddings_, ccfg);

  if (truth_) {
    evaluation::annotate_purity(*tree_, truth_->patch_labels);
    const std::size_t answered = answered_total();
    auto report = evaluation::evaluate(*tree_, truth_->patch_labels, iteration_, answered,
                                       responses_.size() - answered, to_string(config_.variant), to_json(config_));
    report.epoch_losses = trained.epoch_losses;
    report.selection = selection_stats_;
    fs::create_directories(dir_ / "reports");
    write_json(dir_ / "reports" / ("report_" + std::to_string(iteration_) + ".json"), evaluation::to_json(report));
    reports_.push_back(std::move(report));
    evaluation::write_curve(dir_ / "curve.csv", reports_);
  }

  model_.save(dir_ / "model.json", embedding::to_json(config_.training));
  tree_->save(dir_ / "hierarchy.json");
  ++iteration_;
  if (config_.render) render();
  open_iteration();
  save_state();
}

fs::path Session::overlay_path(int level) const {
  return dir_ / ("segmentation_L" + std::to_string(level) + ".png");
}

void Session::render() {
  if (!tree_) return;
  std::vector<viz::PaletteAssignment> palettes;
  for (int level = 0; level <= tree_->depth(); ++level) {
    palettes.push_back(viz::make_palette(*tree_, level));
    imaging::save_image(viz::render_overlay(image_, superpixels_, *tree_, level, palettes.back()),
                        overlay_path(level));
  }
  write_json(dir_ / "palette.json", viz::to_json(palettes));
}

void Session::save_state() const {
  json pending = json::array();
  for (const auto& p : pending_) pending.push_back({{"id", p.id}, {"a", p.query[0]}, {"b", p.query[1]}, {"c", p.query[2]}});
  write_json(dir_ / "state.json", {{"format", "psyseg-state-1"},
                                   {"iteration", iteration_},
                                   {"selection", selection_stats_},
                                   {"pending", pending}});
}

}  // namespace psyseg::session
