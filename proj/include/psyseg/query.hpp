#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace psyseg::hierarchy {
class HierarchyTree;
}

namespace psyseg::query {

/// A 3AFC question over three distinct patches.
struct TripletQuery {
  std::array<int, 3> patches{};

  TripletQuery() = default;
  TripletQuery(int a, int b, int c);

  int operator[](int i) const { return patches[i]; }
  bool valid() const;
  /// Sorted patch ids; equal keys mean the same unordered triplet.
  std::array<int, 3> key() const;
  bool operator==(const TripletQuery&) const = default;
};

enum class ResponseSource { Human, Oracle, Enhanced };

const char* to_string(ResponseSource s);
ResponseSource source_from_string(const std::string& s);

struct QueryResponse {
  TripletQuery query;
  int choice = 0;
  ResponseSource source = ResponseSource::Oracle;
  int iteration = 0;
  std::int64_t ts = 0;  // wall-clock ms for human answers, logical sequence number otherwise

  int chosen_patch() const { return query[choice]; }
  bool operator==(const QueryResponse&) const = default;
};

nlohmann::json to_json(const QueryResponse& r);
QueryResponse response_from_json(const nlohmann::json& j);

/// Appends one line per response and flushes to stable storage before returning.
void append_responses(const std::filesystem::path& path, const std::vector<QueryResponse>& responses);
std::vector<QueryResponse> load_responses(const std::filesystem::path& path);

/// Candidate triplets: uniform when `tree` is null, otherwise an equal budget share
/// per hierarchy level drawn within nodes proportionally to node size.
std::vector<TripletQuery> generate_candidates(const hierarchy::HierarchyTree* tree, int patch_count,
                                              int budget, std::uint64_t seed);

}  // namespace psyseg::query
