#include "psyseg/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace psyseg::evaluation {

using nlohmann::json;

namespace {

int label_at(std::span<const int> labels, int patch) {
  if (patch < 0 || patch >= static_cast<int>(labels.size()) || labels[patch] < 0)
    throw std::invalid_argument("patch " + std::to_string(patch) + " has no ground-truth label");
  return labels[patch];
}

}  // namespace

double node_purity(std::span<const int> members, std::span<const int> labels) {
  if (members.empty()) throw std::invalid_argument("node_purity: empty node");
  std::map<int, int> counts;
  for (int m : members) ++counts[label_at(labels, m)];
  int best = 0;
  for (const auto& [c, n] : counts) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(members.size());
}

double dendrogram_purity(const hierarchy::HierarchyTree& tree, std::span<const int> labels) {
  const auto& nodes = tree.nodes();
  if (static_cast<int>(labels.size()) < tree.patch_count())
    throw std::invalid_argument("dendrogram_purity: labels do not cover every patch");
  int classes = 0;
  for (int m : tree.root().members) classes = std::max(classes, label_at(labels, m) + 1);

  // counts[node][class]; children always have larger ids than their parent.
  std::vector<std::vector<long long>> counts(nodes.size(), std::vector<long long>(static_cast<std::size_t>(classes), 0));
  for (std::size_t id = nodes.size(); id-- > 0;) {
    if (nodes[id].is_leaf()) {
      for (int m : nodes[id].members) ++counts[id][labels[m]];
    } else {
      for (int c : nodes[id].children)
        for (int k = 0; k < classes; ++k) counts[id][k] += counts[c][k];
    }
  }
  auto pairs = [](long long n) { return n * (n - 1) / 2; };
  long double total = 0;
  long long total_pairs = 0;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const double size = static_cast<double>(nodes[id].members.size());
    for (int k = 0; k < classes; ++k) {
      // Same-class pairs whose lowest common ancestor is exactly this node.
      long long here = pairs(counts[id][k]);
      for (int c : nodes[id].children) here -= pairs(counts[c][k]);
      if (here == 0) continue;
      total += static_cast<long double>(here) * (static_cast<double>(counts[id][k]) / size);
      total_pairs += here;
    }
  }
  if (total_pairs == 0) throw UndefinedMetric("dendrogram purity undefined: no class has two members");
  return static_cast<double>(total / static_cast<long double>(total_pairs));
}

void annotate_purity(hierarchy::HierarchyTree& tree, std::span<const int> labels) {
  for (auto& n : tree.nodes()) n.purity = node_purity(n.members, labels);
}

EvaluationReport evaluate(const hierarchy::HierarchyTree& tree, std::span<const int> labels, int iteration,
                          std::size_t responses, std::size_t enhanced, std::string variant, json config) {
  EvaluationReport r;
  r.iteration = iteration;
  r.responses = responses;
  r.enhanced = enhanced;
  r.dendrogram_purity = dendrogram_purity(tree, labels);
  for (const auto& n : tree.nodes())
    r.nodes.push_back({n.id, n.level, static_cast<int>(n.members.size()), node_purity(n.members, labels), n.is_leaf()});
  r.variant = std::move(variant);
  r.config = std::move(config);
  return r;
}

json to_json(const EvaluationReport& r) {
  json nodes = json::array();
  for (const auto& n : r.nodes)
    nodes.push_back({{"node", n.node}, {"level", n.level}, {"size", n.size}, {"purity", n.purity}, {"leaf", n.leaf}});
  return {{"iteration", r.iteration},
          {"responses", r.responses},
          {"enhanced", r.enhanced},
          {"dendrogram_purity", r.dendrogram_purity},
          {"nodes", nodes},
          {"variant", r.variant},
          {"epoch_losses", r.epoch_losses},
          {"selection", r.selection},
          {"config", r.config}};
}

EvaluationReport report_from_json(const json& j) {
  EvaluationReport r;
  r.iteration = j.at("iteration");
  r.responses = j.at("responses");
  r.enhanced = j.value("enhanced", std::size_t{0});
  r.dendrogram_purity = j.at("dendrogram_purity");
  for (const auto& n : j.at("nodes"))
    r.nodes.push_back({n.at("node"), n.at("level"), n.at("size"), n.at("purity"), n.value("leaf", false)});
  r.variant = j.value("variant", "");
  r.epoch_losses = j.value("epoch_losses", std::vector<double>{});
  r.selection = j.value("selection", json{});
  r.config = j.value("config", json{});
  return r;
}

void write_curve(const std::filesystem::path& path, std::span<const EvaluationReport> reports, bool append) {
  const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (header) out << "iteration,responses,dendrogram_purity,variant\n";
  char buf[64];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.dendrogram_purity);
    out << r.iteration << ',' << r.responses << ',' << buf << ',' << r.variant << '\n';
  }
}

}  // namespace psyseg::evaluation
