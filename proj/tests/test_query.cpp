#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "psyseg/dirichlet.hpp"
#include "psyseg/hierarchy.hpp"
#include "psyseg/query.hpp"
#include "psyseg/selection.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace psyseg;
using namespace psyseg::query;
using doctest::Approx;

using testing::sample_dirichlet;

namespace {

QueryResponse resp(int a, int b, int c, int choice, ResponseSource s = ResponseSource::Oracle) {
  return QueryResponse{TripletQuery(a, b, c), choice, s, 0, 0};
}

kernels::PointMatrix random_points(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  kernels::PointMatrix p(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) p(i, j) = g(rng);
  return p;
}

hierarchy::HierarchyNode node(int id, int parent, int level, std::vector<int> members) {
  hierarchy::HierarchyNode n;
  n.id = id;
  n.parent = parent;
  n.level = level;
  n.members = std::move(members);
  return n;
}

// Root over 100 patches with four level-1 clusters of 25.
std::vector<hierarchy::HierarchyNode> four_clusters() {
  std::vector<int> all(100);
  for (int i = 0; i < 100; ++i) all[i] = i;
  std::vector<hierarchy::HierarchyNode> nodes{node(0, -1, 0, all)};
  for (int c = 0; c < 4; ++c) {
    std::vector<int> m;
    for (int i = 0; i < 25; ++i) m.push_back(c * 25 + i);
    nodes.push_back(node(c + 1, 0, 1, m));
    nodes[0].children.push_back(c + 1);
  }
  return nodes;
}

int within_cluster(const std::vector<TripletQuery>& qs) {
  return static_cast<int>(std::count_if(qs.begin(), qs.end(), [](const TripletQuery& q) {
    return q[0] / 25 == q[1] / 25 && q[1] / 25 == q[2] / 25;
  }));
}

}  // namespace

TEST_CASE("triplet keys identify unordered sets") {
  CHECK(TripletQuery(5, 1, 3).key() == std::array<int, 3>{1, 3, 5});
  CHECK(TripletQuery(5, 1, 3).valid());
  CHECK_THROWS_AS(TripletQuery(1, 1, 3), std::invalid_argument);
  CHECK_THROWS_AS(TripletQuery(-1, 2, 3), std::invalid_argument);
}

TEST_CASE("responses.jsonl appends and reloads") {
  const auto dir = testing::scratch_dir("responses");
  std::vector<QueryResponse> rs{resp(1, 2, 3, 0), resp(4, 5, 6, 2, ResponseSource::Enhanced)};
  rs[1].iteration = 3;
  rs[1].ts = 17;
  append_responses(dir / "responses.jsonl", {rs[0]});
  append_responses(dir / "responses.jsonl", {rs[1]});
  CHECK(load_responses(dir / "responses.jsonl") == rs);
  CHECK(response_from_json(to_json(rs[1])) == rs[1]);
}

TEST_CASE("uniform candidates: distinct triplets over valid ids") {
  const auto qs = generate_candidates(nullptr, 10, 100, 1);
  CHECK(qs.size() == 100);
  std::set<std::array<int, 3>> keys;
  for (const auto& q : qs) {
    CHECK(q.valid());
    for (int p : q.patches) CHECK(p < 10);
    keys.insert(q.key());
  }
  CHECK(keys.size() == 100);
  CHECK(generate_candidates(nullptr, 10, 100, 1) == qs);
  CHECK_THROWS_AS(generate_candidates(nullptr, 2, 5, 1), std::invalid_argument);
}

TEST_CASE("tree candidates split the budget equally across levels") {
  const hierarchy::HierarchyTree tree(four_clusters());
  const auto qs = generate_candidates(&tree, 100, 100, 3);
  CHECK(qs.size() == 100);
  std::set<std::array<int, 3>> keys;
  for (const auto& q : qs) keys.insert(q.key());
  CHECK(keys.size() == 100);
  // 50 come from inside a cluster by construction; root draws land inside one ~6% of the time.
  const int inside = within_cluster(qs);
  CHECK(inside >= 50);
  CHECK(inside <= 62);
}

TEST_CASE("levels whose nodes are all too small are skipped") {
  auto nodes = four_clusters();
  // Split every cluster into pairs and a singleton: no level-2 node can host a triplet.
  for (int c = 0; c < 4; ++c) {
    const auto members = nodes[c + 1].members;
    for (std::size_t i = 0; i < members.size(); i += 2) {
      std::vector<int> m{members[i]};
      if (i + 1 < members.size()) m.push_back(members[i + 1]);
      const int id = static_cast<int>(nodes.size());
      nodes.push_back(node(id, c + 1, 2, m));
      nodes[c + 1].children.push_back(id);
    }
  }
  const hierarchy::HierarchyTree tree(std::move(nodes));
  const auto qs = generate_candidates(&tree, 100, 100, 3);
  CHECK(qs.size() == 100);
  const int inside = within_cluster(qs);
  CHECK(inside >= 50);
  CHECK(inside <= 62);
}

TEST_CASE("dirichlet density worked examples and normalisation") {
  CHECK(dirichlet_density(kUniformPrior, {0.2, 0.3, 0.5}) == Approx(2.0));
  CHECK(dirichlet_density(kUniformPrior, {0.7, 0.1, 0.2}) == Approx(2.0));
  CHECK(dirichlet_density({{2, 1, 1}}, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == Approx(2.0));
  CHECK_THROWS_AS(dirichlet_density(kUniformPrior, {0.5, 0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(dirichlet_density(kUniformPrior, {-0.1, 0.6, 0.5}), std::invalid_argument);

  // Uniform points on the simplex; its area in (theta1, theta2) coordinates is 1/2.
  std::mt19937_64 rng(12);
  const DirichletPosterior d{{2.0, 3.5, 1.5}};
  double sum = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += dirichlet_density(d, sample_dirichlet(kUniformPrior, rng));
  CHECK(std::abs(0.5 * sum / n - 1.0) < 0.01);
}

TEST_CASE("posterior update, mean and variance closed forms") {
  CHECK(posterior_update(kUniformPrior, {0, 0, 0}) == kUniformPrior);
  CHECK(posterior_update(kUniformPrior, {4, 0, 0}).alpha == std::array<double, 3>{5, 1, 1});
  CHECK(posterior_update({{5, 1, 1}}, {0, 2, 1}).alpha == std::array<double, 3>{5, 3, 2});

  auto m = posterior_mean(kUniformPrior);
  for (double x : m) CHECK(x == Approx(1.0 / 3));
  m = posterior_mean({{5, 1, 1}});
  CHECK(m[0] == Approx(0.714286).epsilon(1e-6));
  CHECK(m[1] == Approx(0.142857).epsilon(1e-6));
  const auto scaled = posterior_mean({{50, 10, 10}});
  for (int i = 0; i < 3; ++i) CHECK(scaled[i] == Approx(m[i]));

  for (double v : posterior_variance(kUniformPrior)) CHECK(v == Approx(2.0 / 36));
  CHECK(posterior_variance({{5, 1, 1}})[0] == Approx(10.0 / 392));
  for (double v : posterior_variance({{100, 100, 100}})) CHECK(v == Approx(0.000738).epsilon(1e-3));
}

TEST_CASE("posterior properties over random evidence") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> cnt(0, 40);
  std::uniform_real_distribution<double> a(0.05, 20);
  for (int t = 0; t < 500; ++t) {
    const DirichletPosterior d{{a(rng), a(rng), a(rng)}};
    const auto m = posterior_mean(d);
    CHECK(m[0] + m[1] + m[2] == Approx(1.0));
    for (double v : posterior_variance(d)) {
      CHECK(v > 0);
      CHECK(v < 0.25);
    }
    const EvidenceCounts e1{cnt(rng), cnt(rng), cnt(rng)}, e2{cnt(rng), cnt(rng), cnt(rng)},
        e3{cnt(rng), cnt(rng), cnt(rng)};
    const auto ab = posterior_update(posterior_update(d, e1), e2);
    const auto ba = posterior_update(posterior_update(d, e2), e1);
    for (int i = 0; i < 3; ++i) CHECK(ab.alpha[i] == Approx(ba.alpha[i]).epsilon(1e-14));
    const EvidenceCounts e23{e2[0] + e3[0], e2[1] + e3[1], e2[2] + e3[2]};
    const auto left = posterior_update(posterior_update(posterior_update(d, e1), e2), e3);
    const auto right = posterior_update(d, {e1[0] + e23[0], e1[1] + e23[1], e1[2] + e23[2]});
    for (int i = 0; i < 3; ++i) CHECK(left.alpha[i] == Approx(right.alpha[i]));
  }
}

TEST_CASE("closed forms agree with a million Dirichlet samples") {
  for (const DirichletPosterior d : {DirichletPosterior{{5, 1, 1}}, DirichletPosterior{{2.5, 4, 0.7}}}) {
    std::mt19937_64 rng(31);
    const int n = 1000000;
    std::array<double, 3> s1{}, s2{}, s3{}, s4{};
    for (int i = 0; i < n; ++i) {
      const auto t = sample_dirichlet(d, rng);
      for (int k = 0; k < 3; ++k) {
        s1[k] += t[k];
        s2[k] += t[k] * t[k];
        s3[k] += t[k] * t[k] * t[k];
        s4[k] += t[k] * t[k] * t[k] * t[k];
      }
    }
    const auto mean = posterior_mean(d);
    const auto var = posterior_variance(d);
    for (int k = 0; k < 3; ++k) {
      const double mu = s1[k] / n;
      const double v = s2[k] / n - mu * mu;
      // Fourth central moment for the standard error of the sample variance.
      const double m4 = s4[k] / n - 4 * mu * s3[k] / n + 6 * mu * mu * s2[k] / n - 3 * mu * mu * mu * mu;
      CHECK(std::abs(mu - mean[k]) < 3 * std::sqrt(v / n));
      CHECK(std::abs(v - var[k]) < 3 * std::sqrt((m4 - v * v) / n));
    }
  }
}

TEST_CASE("evidence: self match and the neighbour-twin construction") {
  const auto pts = random_points(12, 3, 4);
  const auto q = TripletQuery(0, 5, 9);
  std::vector<QueryResponse> answered{resp(0, 5, 9, 2)};
  CHECK(similar_query_evidence(q, answered, pts, 0) == EvidenceCounts{0, 0, 1});
  CHECK(similar_query_evidence(q, {}, pts, 2) == EvidenceCounts{0, 0, 0});

  // a, b, c far apart, each with a close twin a1, b1, c1.
  kernels::PointMatrix tw(6, 2);
  tw << 0, 0, 0.1, 0, 10, 0, 10.1, 0, 0, 10, 0, 10.1;
  const TripletQuery fig(0, 2, 4);
  CHECK(similar_query_evidence(fig, std::vector<QueryResponse>{resp(1, 3, 5, 2)}, tw, 1) == EvidenceCounts{0, 0, 1});
  // Option order inside the answered query does not matter.
  CHECK(similar_query_evidence(fig, std::vector<QueryResponse>{resp(5, 1, 3, 0)}, tw, 1) == EvidenceCounts{0, 0, 1});
  // Two options in the same neighbourhood cannot both match.
  CHECK(similar_query_evidence(fig, std::vector<QueryResponse>{resp(0, 1, 4, 2)}, tw, 1) == EvidenceCounts{0, 0, 0});
}

TEST_CASE("evidence is invariant to the order of the answered list") {
  const auto pts = random_points(30, 4, 9);
  std::mt19937_64 rng(3);
  std::vector<QueryResponse> answered;
  for (int i = 0; i < 400; ++i) {
    const auto c = generate_candidates(nullptr, 30, 1, 1000 + i).front();
    answered.push_back(QueryResponse{c, i % 3, ResponseSource::Oracle, 0, i});
  }
  const auto nb = neighborhoods(pts, 3);
  for (int t = 0; t < 30; ++t) {
    const auto q = generate_candidates(nullptr, 30, 1, 5000 + t).front();
    const auto base = similar_query_evidence(q, answered, nb);
    auto shuffled = answered;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(similar_query_evidence(q, shuffled, nb) == base);
  }
}

TEST_CASE("filter verdicts") {
  QueryEngineConfig cfg;
  const auto confident = judge({9, 0, 0}, cfg);
  CHECK_FALSE(confident.accepted);
  CHECK(confident.reason == RejectReason::Confident);
  CHECK(posterior_mean(confident.posterior)[0] == Approx(10.0 / 12));

  CHECK(judge({0, 0, 0}, cfg).accepted);
  CHECK(judge({4, 4, 4}, cfg).accepted);
  CHECK(posterior_variance(judge({4, 4, 4}, cfg).posterior)[0] == Approx(50.0 / (225 * 16)));

  const auto thin = judge({2, 2, 2}, cfg);  // variance 2/90 is above 0.02
  CHECK_FALSE(thin.accepted);
  CHECK(thin.reason == RejectReason::Ambiguous);
  CHECK(judge({2, 2, 1}, cfg).accepted);  // below min_evidence
}

TEST_CASE("select_queries keeps candidate order and ignores enhanced evidence") {
  const auto pts = random_points(40, 4, 2);
  const auto nb = neighborhoods(pts, 2);
  const auto cands = generate_candidates(nullptr, 40, 60, 8);
  QueryEngineConfig cfg;
  const auto none = select_queries(cands, {}, nb, cfg);
  CHECK(none.accepted == cands);
  CHECK(none.rejected.empty());

  // Nine consistent answers to the first candidate make it confident.
  std::vector<QueryResponse> answered(9, QueryResponse{cands[0], 1, ResponseSource::Oracle, 0, 0});
  const auto sel = select_queries(cands, answered, nb, cfg);
  REQUIRE(sel.rejected.size() >= 1);
  CHECK(sel.rejected.front().first == cands[0]);
  CHECK(sel.rejected.front().second == RejectReason::Confident);
  CHECK(std::is_sorted(sel.accepted.begin(), sel.accepted.end(), [&](const auto& x, const auto& y) {
    return std::find(cands.begin(), cands.end(), x) < std::find(cands.begin(), cands.end(), y);
  }));

  for (auto& r : answered) r.source = ResponseSource::Enhanced;
  CHECK(select_queries(cands, answered, nb, cfg).accepted == cands);
  CHECK_THROWS_AS(select_queries(std::vector<TripletQuery>{}, answered, nb, cfg), std::invalid_argument);
}

TEST_CASE("enhancement doubles the answered set with neighbour substitutes") {
  const auto pts = random_points(300, 8, 6);
  const auto nb = neighborhoods(pts, 2);
  std::vector<QueryResponse> answered;
  for (const auto& q : generate_candidates(nullptr, 300, 800, 17))
    answered.push_back(QueryResponse{q, static_cast<int>(answered.size() % 3), ResponseSource::Oracle, 0, 0});
  const auto out = enhance_responses(answered, nb, 2.0, 5);
  CHECK(out.size() == 800);

  std::set<std::array<int, 3>> seen;
  for (const auto& r : answered) seen.insert(r.query.key());
  for (const auto& r : out) {
    CHECK(r.source == ResponseSource::Enhanced);
    CHECK(r.query.valid());
    CHECK(seen.insert(r.query.key()).second);
    // Each patch comes from the neighbourhood of the matching patch of some source with the same choice.
    bool traced = false;
    for (const auto& s : answered) {
      if (s.choice != r.choice) continue;
      bool all = true;
      for (int j = 0; j < 3 && all; ++j) {
        const auto& n = nb[s.query[j]];
        all = std::find(n.begin(), n.end(), r.query[j]) != n.end();
      }
      if (all) {
        traced = true;
        break;
      }
    }
    CHECK(traced);
  }
  CHECK(enhance_responses(answered, nb, 1.0, 5).empty());
  CHECK(enhance_responses(answered, nb, 2.0, 5) == out);
  CHECK_THROWS_AS(enhance_responses(answered, nb, 0.5, 5), std::invalid_argument);
}

TEST_CASE("enhanced copies keep the source choice") {
  const auto pts = random_points(50, 3, 1);
  const auto nb = neighborhoods(pts, 2);
  std::vector<QueryResponse> answered;
  for (const auto& q : generate_candidates(nullptr, 50, 40, 2)) answered.push_back(QueryResponse{q, 2});
  for (const auto& r : enhance_responses(answered, nb, 3.0, 9)) CHECK(r.choice == 2);
}

TEST_CASE("neighbourhoods start with the patch itself") {
  const auto pts = random_points(20, 3, 3);
  const auto nb = neighborhoods(pts, 4);
  for (int i = 0; i < 20; ++i) {
    REQUIRE(nb[i].size() == 5);
    CHECK(nb[i][0] == i);
    for (int j = 2; j < 5; ++j)
      CHECK((pts.row(i) - pts.row(nb[i][j - 1])).norm() <= (pts.row(i) - pts.row(nb[i][j])).norm());
  }
  CHECK(neighborhoods(pts, 4, false) == nb);
}
