#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyseg/dirichlet.hpp"
#include "psyseg/kernels.hpp"
#include "psyseg/query.hpp"

namespace psyseg::query {

struct QueryEngineConfig {
  int k = 2;                  // neighbours per option
  double tau_conf = 0.75;     // reject when some option's expected pick probability exceeds this
  double tau_var = 0.02;      // reject when evidence is ample yet some marginal variance exceeds this
  int min_evidence = 6;
  int candidate_multiplier = 5;     // candidate budget = multiplier x quota
  double enhancement_factor = 2.0;  // total training responses = factor x answered
  bool active = true;               // false: uniform candidates, no filtering
  bool parallel = true;

  void validate() const;
};

nlohmann::json to_json(const QueryEngineConfig& c);
QueryEngineConfig query_config_from_json(const nlohmann::json& j);

/// N_k(x) for every patch: x itself followed by its k nearest patches in embedding space.
using NeighborTable = std::vector<std::vector<int>>;

NeighborTable neighborhoods(const kernels::PointMatrix& embeddings, int k, bool parallel = true);

/// Counts, per option of `q`, how often matching answered responses picked the
/// patch assigned to that option. A response matches when its patches map
/// one-to-one onto (N_k(a), N_k(b), N_k(c)).
EvidenceCounts similar_query_evidence(const TripletQuery& q, std::span<const QueryResponse> answered,
                                      const NeighborTable& neighbors);
EvidenceCounts similar_query_evidence(const TripletQuery& q, std::span<const QueryResponse> answered,
                                      const kernels::PointMatrix& embeddings, int k);

enum class RejectReason { Confident, Ambiguous };
const char* to_string(RejectReason r);

struct CandidateVerdict {
  EvidenceCounts evidence{};
  DirichletPosterior posterior;
  bool accepted = true;
  RejectReason reason = RejectReason::Confident;
};

/// Filters one candidate given its evidence.
CandidateVerdict judge(const EvidenceCounts& evidence, const QueryEngineConfig& config);

struct SelectionResult {
  std::vector<TripletQuery> accepted;  // candidate order preserved
  std::vector<std::pair<TripletQuery, RejectReason>> rejected;
};

/// Enhanced responses in `answered` are ignored as evidence.
SelectionResult select_queries(std::span<const TripletQuery> candidates, std::span<const QueryResponse> answered,
                               const NeighborTable& neighbors, const QueryEngineConfig& config);

/// Synthesises ceil((factor - 1) * |answered|) responses by substituting each
/// patch of a random answered response with a member of its neighbourhood,
/// keeping the choice index. Triplets already present in `existing` or
/// `answered` are not re-emitted.
std::vector<QueryResponse> enhance_responses(std::span<const QueryResponse> answered, const NeighborTable& neighbors,
                                             double factor, std::uint64_t seed,
                                             std::span<const QueryResponse> existing = {}, int iteration = 0);

inline constexpr int kEnhanceAttempts = 10;

}  // namespace psyseg::query
