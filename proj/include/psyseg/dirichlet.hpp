#pragma once

#include <array>

namespace psyseg::query {

/// Dirichlet belief over the probabilities of picking each of a query's three options.
struct DirichletPosterior {
  std::array<double, 3> alpha{1.0, 1.0, 1.0};

  double concentration() const { return alpha[0] + alpha[1] + alpha[2]; }
  bool operator==(const DirichletPosterior&) const = default;
};

using EvidenceCounts = std::array<int, 3>;
using Simplex3 = std::array<double, 3>;

inline constexpr DirichletPosterior kUniformPrior{};

/// Density on the 2-simplex; theta must be non-negative and sum to 1 within 1e-9.
double dirichlet_density(const DirichletPosterior& d, const Simplex3& theta);
double dirichlet_log_beta(const DirichletPosterior& d);

DirichletPosterior posterior_update(const DirichletPosterior& prior, const EvidenceCounts& counts);
Simplex3 posterior_mean(const DirichletPosterior& d);
Simplex3 posterior_variance(const DirichletPosterior& d);

}  // namespace psyseg::query
