#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyseg/hierarchy.hpp"

namespace psyseg::evaluation {

class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Largest class fraction among `members`.
double node_purity(std::span<const int> members, std::span<const int> labels);

/// Mean over same-class patch pairs of the pair-class fraction at their lowest
/// common ancestor. Aggregates per node instead of enumerating pairs.
double dendrogram_purity(const hierarchy::HierarchyTree& tree, std::span<const int> labels);

/// Writes node purities into the tree.
void annotate_purity(hierarchy::HierarchyTree& tree, std::span<const int> labels);

struct NodePurity {
  int node = 0;
  int level = 0;
  int size = 0;
  double purity = 0;
  bool leaf = false;
};

struct EvaluationReport {
  int iteration = 0;
  std::size_t responses = 0;  // non-enhanced responses consumed so far
  std::size_t enhanced = 0;
  double dendrogram_purity = 0;
  std::vector<NodePurity> nodes;
  std::string variant;
  std::vector<double> epoch_losses;  // training losses of this iteration, when known
  nlohmann::json selection;          // candidate filtering counts for the iteration, when known
  nlohmann::json config;
};

EvaluationReport evaluate(const hierarchy::HierarchyTree& tree, std::span<const int> labels, int iteration,
                          std::size_t responses, std::size_t enhanced, std::string variant,
                          nlohmann::json config = {});

nlohmann::json to_json(const EvaluationReport& r);
EvaluationReport report_from_json(const nlohmann::json& j);

/// curve.csv columns: iteration,responses,dendrogram_purity,variant
void write_curve(const std::filesystem::path& path, std::span<const EvaluationReport> reports, bool append = false);

}  // namespace psyseg::evaluation
