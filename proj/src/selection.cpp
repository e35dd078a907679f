#include "psyseg/selection.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace psyseg::query {

using nlohmann::json;

void QueryEngineConfig::validate() const {
  if (k < 0) throw std::invalid_argument("query engine: k must be >= 0");
  if (!(tau_conf > 1.0 / 3.0 && tau_conf < 1.0)) throw std::invalid_argument("query engine: tau_conf must lie in (1/3, 1)");
  if (!(tau_var > 0)) throw std::invalid_argument("query engine: tau_var must be > 0");
  if (min_evidence < 0) throw std::invalid_argument("query engine: min_evidence must be >= 0");
  if (candidate_multiplier < 1) throw std::invalid_argument("query engine: candidate multiplier must be >= 1");
  if (!(enhancement_factor >= 1.0)) throw std::invalid_argument("query engine: enhancement factor must be >= 1");
}

json to_json(const QueryEngineConfig& c) {
  return {{"k", c.k},
          {"tau_conf", c.tau_conf},
          {"tau_var", c.tau_var},
          {"min_evidence", c.min_evidence},
          {"candidate_multiplier", c.candidate_multiplier},
          {"enhancement_factor", c.enhancement_factor},
          {"active", c.active}};
}

QueryEngineConfig query_config_from_json(const json& j) {
  QueryEngineConfig c;
  c.k = j.value("k", c.k);
  c.tau_conf = j.value("tau_conf", c.tau_conf);
  c.tau_var = j.value("tau_var", c.tau_var);
  c.min_evidence = j.value("min_evidence", c.min_evidence);
  c.candidate_multiplier = j.value("candidate_multiplier", c.candidate_multiplier);
  c.enhancement_factor = j.value("enhancement_factor", c.enhancement_factor);
  c.active = j.value("active", c.active);
  c.validate();
  return c;
}

NeighborTable neighborhoods(const kernels::PointMatrix& embeddings, int k, bool parallel) {
  auto knn = parallel ? kernels::parallel::knn(embeddings, k) : kernels::serial::knn(embeddings, k);
  for (std::size_t i = 0; i < knn.size(); ++i) knn[i].insert(knn[i].begin(), static_cast<int>(i));
  return knn;
}

namespace {

constexpr int kPermutations[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

bool member(const std::vector<int>& set, int x) { return std::find(set.begin(), set.end(), x) != set.end(); }

// Option of `q` that the response's chosen patch maps to, or -1 if no match.
int matched_option(const TripletQuery& q, const QueryResponse& r, const NeighborTable& nb) {
  for (const auto& perm : kPermutations) {
    // perm[j]: option of q receiving response patch j
    if (member(nb[q[perm[0]]], r.query[0]) && member(nb[q[perm[1]]], r.query[1]) &&
        member(nb[q[perm[2]]], r.query[2]))
      return perm[r.choice];
  }
  return -1;
}

void check_ids(const TripletQuery& q, const NeighborTable& nb) {
  for (int p : q.patches)
    if (p < 0 || p >= static_cast<int>(nb.size())) throw std::invalid_argument("query names a patch without embedding");
}

// patch -> indices of responses containing it
std::vector<std::vector<int>> index_by_patch(std::span<const QueryResponse> answered, std::size_t patches) {
  std::vector<std::vector<int>> idx(patches);
  for (std::size_t i = 0; i < answered.size(); ++i)
    for (int p : answered[i].query.patches)
      if (p >= 0 && static_cast<std::size_t>(p) < patches) idx[p].push_back(static_cast<int>(i));
  return idx;
}

EvidenceCounts indexed_evidence(const TripletQuery& q, std::span<const QueryResponse> answered,
                                const NeighborTable& nb, const std::vector<std::vector<int>>& by_patch) {
  // Any match has a patch inside N_k(a); visiting each such response once suffices.
  std::vector<int> cand;
  for (int p : nb[q[0]]) cand.insert(cand.end(), by_patch[p].begin(), by_patch[p].end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  EvidenceCounts m{0, 0, 0};
  for (int i : cand) {
    const int opt = matched_option(q, answered[i], nb);
    if (opt >= 0) ++m[opt];
  }
  return m;
}

}  // namespace

EvidenceCounts similar_query_evidence(const TripletQuery& q, std::span<const QueryResponse> answered,
                                      const NeighborTable& neighbors) {
  check_ids(q, neighbors);
  EvidenceCounts m{0, 0, 0};
  for (const auto& r : answered) {
    bool in_range = true;
    for (int p : r.query.patches) in_range &= p >= 0 && p < static_cast<int>(neighbors.size());
    if (!in_range) continue;
    const int opt = matched_option(q, r, neighbors);
    if (opt >= 0) ++m[opt];
  }
  return m;
}

EvidenceCounts similar_query_evidence(const TripletQuery& q, std::span<const QueryResponse> answered,
                                      const kernels::PointMatrix& embeddings, int k) {
  return similar_query_evidence(q, answered, neighborhoods(embeddings, k));
}

const char* to_string(RejectReason r) { return r == RejectReason::Confident ? "confident" : "ambiguous"; }

CandidateVerdict judge(const EvidenceCounts& evidence, const QueryEngineConfig& config) {
  CandidateVerdict v;
  v.evidence = evidence;
  v.posterior = posterior_update(kUniformPrior, evidence);
  const auto mean = posterior_mean(v.posterior);
  if (*std::max_element(mean.begin(), mean.end()) > config.tau_conf) {
    v.accepted = false;
    v.reason = RejectReason::Confident;
    return v;
  }
  const int total = evidence[0] + evidence[1] + evidence[2];
  const auto var = posterior_variance(v.posterior);
  if (total >= config.min_evidence && *std::max_element(var.begin(), var.end()) > config.tau_var) {
    v.accepted = false;
    v.reason = RejectReason::Ambiguous;
  }
  return v;
}

SelectionResult select_queries(std::span<const TripletQuery> candidates, std::span<const QueryResponse> answered,
                               const NeighborTable& neighbors, const QueryEngineConfig& config) {
  if (candidates.empty()) throw std::invalid_argument("select_queries: no candidates");
  std::vector<QueryResponse> evidence_pool;
  for (const auto& r : answered)
    if (r.source != ResponseSource::Enhanced) evidence_pool.push_back(r);
  const auto by_patch = index_by_patch(evidence_pool, neighbors.size());
  for (const auto& q : candidates) check_ids(q, neighbors);

  std::vector<CandidateVerdict> verdicts(candidates.size());
  const auto n = static_cast<long long>(candidates.size());
#pragma omp parallel for schedule(dynamic, 16) if (config.parallel)
  for (long long i = 0; i < n; ++i)
    verdicts[i] = judge(indexed_evidence(candidates[i], evidence_pool, neighbors, by_patch), config);

  SelectionResult out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (verdicts[i].accepted)
      out.accepted.push_back(candidates[i]);
    else
      out.rejected.emplace_back(candidates[i], verdicts[i].reason);
  }
  return out;
}

std::vector<QueryResponse> enhance_responses(std::span<const QueryResponse> answered, const NeighborTable& neighbors,
                                             double factor, std::uint64_t seed,
                                             std::span<const QueryResponse> existing, int iteration) {
  if (!(factor >= 1.0)) throw std::invalid_argument("enhance_responses: factor must be >= 1");
  std::vector<QueryResponse> sources;
  for (const auto& r : answered)
    if (r.source != ResponseSource::Enhanced) sources.push_back(r);
  std::vector<QueryResponse> out;
  if (sources.empty()) return out;
  const auto wanted = static_cast<std::size_t>(std::ceil((factor - 1.0) * static_cast<double>(sources.size()) - 1e-9));

  std::set<std::array<int, 3>> taken;
  for (const auto& r : answered) taken.insert(r.query.key());
  for (const auto& r : existing) taken.insert(r.query.key());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_source(0, sources.size() - 1);
  for (std::size_t slot = 0; slot < wanted; ++slot) {
    for (int attempt = 0; attempt < kEnhanceAttempts; ++attempt) {
      const QueryResponse& src = sources[pick_source(rng)];
      std::array<int, 3> p{};
      bool changed = false;
      for (int j = 0; j < 3; ++j) {
        const auto& nb = neighbors.at(src.query[j]);
        p[j] = nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)];
        changed |= p[j] != src.query[j];
      }
      if (!changed || p[0] == p[1] || p[1] == p[2] || p[0] == p[2]) continue;
      TripletQuery q(p[0], p[1], p[2]);
      if (!taken.insert(q.key()).second) continue;
      out.push_back(QueryResponse{q, src.choice, ResponseSource::Enhanced, iteration, 0});
      break;
    }
  }
  return out;
}

}  // namespace psyseg::query
