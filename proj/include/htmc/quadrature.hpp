#ifndef HTMC_QUADRATURE_HPP
#define HTMC_QUADRATURE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "htmc/model.hpp"
#include "htmc/prior.hpp"
#include "htmc/sampler.hpp"

namespace htmc {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  double a, b;
};

// Gauss-Legendre nodes/weights on [a, b] via Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1 || n > 128) throw std::invalid_argument("quadrature order must be in [1, 128]");
  QuadratureRule rule;
  rule.a = a;
  rule.b = b;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const int mid = (n + 1) / 2;
  for (int i = 0; i < mid; ++i) {
    // Chebyshev-based initial guess.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence for P_n(x) and P'_n(x).
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Map from [-1, 1] to [a, b]; symmetric counterpart filled in directly.
    const double half = 0.5 * (b - a), mid_ab = 0.5 * (a + b);
    rule.nodes[static_cast<std::size_t>(i)] = mid_ab - half * x;
    rule.weights[static_cast<std::size_t>(i)] = half * w;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = mid_ab + half * x;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = half * w;
  }
  return rule;
}

// Self-normalized posterior expectation on a scalar uniform prior:
//   (sum w_i e^{-Phi(z_i)} Q(z_i)) / (sum w_i e^{-Phi(z_i)}),
// with potentials shifted by their minimum before exponentiation.
inline double posterior_expectation_quadrature(const ForwardModel& model,
                                               const ObservationSet& obs,
                                               const PriorSpec& prior,
                                               const QoiFunction& qoi, int n_points) {
  if (n_points < 4) throw std::invalid_argument("need at least 4 quadrature points");
  if (prior.type != PriorType::UniformBox || prior.bounds.size() != 1)
    throw std::invalid_argument("quadrature oracle expects a scalar uniform prior");
  const auto rule = gauss_legendre(n_points, prior.bounds[0][0], prior.bounds[0][1]);

  std::vector<double> phis(rule.nodes.size()), qs(rule.nodes.size());
  double phi_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    Eigen::VectorXd z(1);
    z[0] = rule.nodes[i];
    phis[i] = potential(model, z, obs);
    qs[i] = qoi(z)[0];
    phi_min = std::min(phi_min, phis[i]);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double w = rule.weights[i] * std::exp(-(phis[i] - phi_min));
    num += w * qs[i];
    den += w;
  }
  return num / den;
}

// Generic 1-D weighted posterior expectation over tabulated potentials; used
// by the telescoping-identity checks.
inline double weighted_expectation(const std::vector<double>& weights,
                                   const std::vector<double>& phis,
                                   const std::vector<double>& values) {
  double phi_min = std::numeric_limits<double>::infinity();
  for (double p : phis) phi_min = std::min(phi_min, p);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i] * std::exp(-(phis[i] - phi_min));
    num += w * values[i];
    den += w;
  }
  return num / den;
}

}  // namespace htmc

#endif
