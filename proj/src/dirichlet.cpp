#include "psyseg/dirichlet.hpp"

#include <cmath>
#include <stdexcept>

namespace psyseg::query {

namespace {
void check(const DirichletPosterior& d) {
  for (double a : d.alpha)
    if (!(a > 0)) throw std::invalid_argument("Dirichlet parameters must be positive");
}
}  // namespace

double dirichlet_log_beta(const DirichletPosterior& d) {
  check(d);
  double s = 0;
  for (double a : d.alpha) s += std::lgamma(a);
  return s - std::lgamma(d.concentration());
}

double dirichlet_density(const DirichletPosterior& d, const Simplex3& theta) {
  check(d);
  double sum = 0;
  for (double t : theta) {
    if (!(t >= 0)) throw std::invalid_argument("theta must be non-negative");
    sum += t;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("theta must lie on the probability simplex");
  double log_p = -dirichlet_log_beta(d);
  for (int i = 0; i < 3; ++i) {
    if (d.alpha[i] == 1.0) continue;  // theta^0 = 1, including at theta = 0
    if (theta[i] == 0.0) return d.alpha[i] > 1.0 ? 0.0 : INFINITY;
    log_p += (d.alpha[i] - 1.0) * std::log(theta[i]);
  }
  return std::exp(log_p);
}

DirichletPosterior posterior_update(const DirichletPosterior& prior, const EvidenceCounts& counts) {
  DirichletPosterior out = prior;
  for (int i = 0; i < 3; ++i) {
    if (counts[i] < 0) throw std::invalid_argument("evidence counts must be non-negative");
    out.alpha[i] += counts[i];
  }
  return out;
}

Simplex3 posterior_mean(const DirichletPosterior& d) {
  check(d);
  const double a0 = d.concentration();
  return {d.alpha[0] / a0, d.alpha[1] / a0, d.alpha[2] / a0};
}

Simplex3 posterior_variance(const DirichletPosterior& d) {
  check(d);
  const double a0 = d.concentration();
  Simplex3 v{};
  for (int i = 0; i < 3; ++i) v[i] = d.alpha[i] * (a0 - d.alpha[i]) / (a0 * a0 * (a0 + 1.0));
  return v;
}

}  // namespace psyseg::query
