#include "psyseg/query.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include <fcntl.h>
#include <unistd.h>

#include "psyseg/hierarchy.hpp"
#include "psyseg/seed.hpp"

namespace psyseg::query {

using nlohmann::json;

TripletQuery::TripletQuery(int a, int b, int c) : patches{a, b, c} {
  if (!valid()) throw std::invalid_argument("triplet query needs three distinct non-negative patch ids");
}

bool TripletQuery::valid() const {
  return patches[0] >= 0 && patches[1] >= 0 && patches[2] >= 0 && patches[0] != patches[1] &&
         patches[1] != patches[2] && patches[0] != patches[2];
}

std::array<int, 3> TripletQuery::key() const {
  auto k = patches;
  std::sort(k.begin(), k.end());
  return k;
}

const char* to_string(ResponseSource s) {
  switch (s) {
    case ResponseSource::Human: return "human";
    case ResponseSource::Oracle: return "oracle";
    case ResponseSource::Enhanced: return "enhanced";
  }
  return "?";
}

ResponseSource source_from_string(const std::string& s) {
  if (s == "human") return ResponseSource::Human;
  if (s == "oracle") return ResponseSource::Oracle;
  if (s == "enhanced") return ResponseSource::Enhanced;
  throw std::invalid_argument("unknown response source '" + s + "'");
}

json to_json(const QueryResponse& r) {
  return {{"a", r.query[0]}, {"b", r.query[1]}, {"c", r.query[2]}, {"choice", r.choice},
          {"source", to_string(r.source)}, {"iteration", r.iteration}, {"ts", r.ts}};
}

QueryResponse response_from_json(const json& j) {
  QueryResponse r;
  r.query = TripletQuery(j.at("a").get<int>(), j.at("b").get<int>(), j.at("c").get<int>());
  r.choice = j.at("choice").get<int>();
  if (r.choice < 0 || r.choice > 2) throw std::invalid_argument("response choice must be 0, 1 or 2");
  r.source = source_from_string(j.at("source").get<std::string>());
  r.iteration = j.value("iteration", 0);
  r.ts = j.value("ts", std::int64_t{0});
  return r;
}

void append_responses(const std::filesystem::path& path, const std::vector<QueryResponse>& responses) {
  if (responses.empty()) return;
  std::string buf;
  for (const auto& r : responses) {
    buf += to_json(r).dump();
    buf += '\n';
  }
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw std::runtime_error("cannot open " + path.string() + " for append");
  std::size_t off = 0;
  while (off < buf.size()) {
    const ssize_t w = ::write(fd, buf.data() + off, buf.size() - off);
    if (w < 0) {
      ::close(fd);
      throw std::runtime_error("write failed on " + path.string());
    }
    off += static_cast<std::size_t>(w);
  }
  ::fsync(fd);
  ::close(fd);
}

std::vector<QueryResponse> load_responses(const std::filesystem::path& path) {
  std::vector<QueryResponse> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(response_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      // A torn final line (crash mid-append) is dropped; anything earlier is corruption.
      if (in.peek() == EOF) break;
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

struct CandidateSink {
  std::set<std::array<int, 3>> seen;
  std::vector<TripletQuery> out;

  bool add(const TripletQuery& q) {
    if (!seen.insert(q.key()).second) return false;
    out.push_back(q);
    return true;
  }
};

TripletQuery draw_three(const std::vector<int>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const int a = pool[pick(rng)];
  int b, c;
  do b = pool[pick(rng)];
  while (b == a);
  do c = pool[pick(rng)];
  while (c == a || c == b);
  return {a, b, c};
}

long long triplets_in(long long n) { return n < 3 ? 0 : n * (n - 1) * (n - 2) / 6; }

}  // namespace

std::vector<TripletQuery> generate_candidates(const hierarchy::HierarchyTree* tree, int patch_count, int budget,
                                              std::uint64_t seed) {
  if (patch_count < 3) throw std::invalid_argument("generate_candidates: need at least 3 patches");
  if (budget < 0) throw std::invalid_argument("generate_candidates: negative budget");
  std::mt19937_64 rng(seed);
  CandidateSink sink;

  if (tree == nullptr) {
    std::vector<int> all(static_cast<std::size_t>(patch_count));
    for (int i = 0; i < patch_count; ++i) all[i] = i;
    const long long target = std::min<long long>(budget, triplets_in(patch_count));
    while (static_cast<long long>(sink.out.size()) < target) sink.add(draw_three(all, rng));
    return sink.out;
  }
  if (tree->patch_count() != patch_count) throw std::invalid_argument("generate_candidates: tree/patch count mismatch");

  // Levels with at least one node that can host a triplet.
  std::vector<std::vector<int>> levels;
  for (int l = 0; l <= tree->depth(); ++l) {
    std::vector<int> eligible;
    for (int id : tree->nodes_at_level(l))
      if (tree->node(id).members.size() >= 3) eligible.push_back(id);
    if (!eligible.empty()) levels.push_back(std::move(eligible));
  }
  const int nlev = static_cast<int>(levels.size());
  for (int li = 0; li < nlev; ++li) {
    const auto& nodes = levels[li];
    const int share = budget / nlev + (li < budget % nlev ? 1 : 0);
    long long capacity = 0;
    std::vector<double> weights;
    for (int id : nodes) {
      const auto m = static_cast<long long>(tree->node(id).members.size());
      capacity += triplets_in(m);
      weights.push_back(static_cast<double>(m));
    }
    std::discrete_distribution<std::size_t> pick_node(weights.begin(), weights.end());
    const std::size_t before = sink.out.size();
    const long long want = std::min<long long>(share, capacity);
    // Attempt cap guards against triplets already taken by an earlier level.
    long long attempts = 0;
    const long long max_attempts = 50LL * std::max<long long>(want, 1) + 1000;
    while (static_cast<long long>(sink.out.size() - before) < want && attempts++ < max_attempts)
      sink.add(draw_three(tree->node(nodes[pick_node(rng)]).members, rng));
  }
  // Interleave levels so a quota smaller than the budget still sees every level.
  std::shuffle(sink.out.begin(), sink.out.end(), rng);
  return sink.out;
}

}  // namespace psyseg::query
