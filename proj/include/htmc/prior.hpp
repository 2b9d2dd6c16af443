#ifndef HTMC_PRIOR_HPP
#define HTMC_PRIOR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "htmc/fem.hpp"
#include "htmc/mesh.hpp"
#include "htmc/rng.hpp"

namespace htmc {

enum class PriorType { UniformBox, GaussianIid };

struct PriorSpec {
  PriorType type = PriorType::UniformBox;
  // Uniform box bounds, one (lo, hi) pair per coordinate.
  std::vector<std::array<double, 2>> bounds;
  // Gaussian dimension.
  int dim = 1;

  int dimension() const {
    return type == PriorType::UniformBox ? static_cast<int>(bounds.size()) : dim;
  }

  void validate() const {
    if (type == PriorType::UniformBox) {
      if (bounds.empty()) throw std::invalid_argument("uniform prior needs bounds");
      for (const auto& b : bounds)
        if (!(b[0] < b[1])) throw std::invalid_argument("uniform bounds must have lo < hi");
    } else if (dim < 1) {
      throw std::invalid_argument("gaussian prior needs dim >= 1");
    }
  }

  bool contains(const Eigen::VectorXd& z) const {
    if (type != PriorType::UniformBox) return true;
    if (z.size() != static_cast<Eigen::Index>(bounds.size())) return false;
    for (std::size_t j = 0; j < bounds.size(); ++j)
      if (z[static_cast<Eigen::Index>(j)] < bounds[j][0] ||
          z[static_cast<Eigen::Index>(j)] > bounds[j][1])
        return false;
    return true;
  }

  static PriorSpec uniform(double lo, double hi, int n = 1) {
    PriorSpec s;
    s.type = PriorType::UniformBox;
    s.bounds.assign(static_cast<std::size_t>(n), {lo, hi});
    return s;
  }

  static PriorSpec gaussian(int n) {
    PriorSpec s;
    s.type = PriorType::GaussianIid;
    s.dim = n;
    return s;
  }
};

inline Eigen::VectorXd sample_prior_one(const PriorSpec& spec, Rng& rng) {
  const int n = spec.dimension();
  Eigen::VectorXd z(n);
  if (spec.type == PriorType::UniformBox) {
    for (int j = 0; j < n; ++j)
      z[j] = rng.uniform(spec.bounds[static_cast<std::size_t>(j)][0],
                         spec.bounds[static_cast<std::size_t>(j)][1]);
  } else {
    for (int j = 0; j < n; ++j) z[j] = rng.normal();
  }
  return z;
}

inline std::vector<Eigen::VectorXd> sample_prior(const PriorSpec& spec,
                                                 std::uint64_t seed, int count) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  spec.validate();
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(sample_prior_one(spec, rng));
  return out;
}

// K(x) = z cos(2 pi x1) sin(2 pi x2) + 2, z scalar in [0, 1].
inline CoefficientField build_field_uniform(const Eigen::VectorXd& z, const Mesh& mesh) {
  if (z.size() != 1) throw std::invalid_argument("uniform field expects a scalar parameter");
  if (z[0] < 0.0 || z[0] > 1.0)
    throw std::invalid_argument("uniform field parameter must lie in [0, 1]");
  CoefficientField field;
  field.provenance = "K = z*cos(2*pi*x1)*sin(2*pi*x2) + 2.0";
  field.values.resize(static_cast<Eigen::Index>(mesh.level().node_count()));
  for (std::size_t i = 0; i < mesh.nodes().size(); ++i) {
    const auto& p = mesh.nodes()[i];
    field.values[static_cast<Eigen::Index>(i)] =
        z[0] * std::cos(2.0 * M_PI * p[0]) * std::sin(2.0 * M_PI * p[1]) + 2.0;
  }
  return field;
}

// Truncated log-normal expansion K = K* + exp(Kbar + sum_j z_j psi_j(x)).
struct GaussianFieldSpec {
  double k_star = 0.0;
  double k_bar = 0.0;
  std::vector<std::function<double(double, double)>> psi;
  std::vector<double> sup_norms;  // b_j = ||psi_j||_inf, recorded metadata

  // Default test spec: psi_j = (0.5/j^2) sin(j pi x1) sin(j pi x2).
  static GaussianFieldSpec sin_decay(int n) {
    GaussianFieldSpec spec;
    for (int j = 1; j <= n; ++j) {
      const double amp = 0.5 / (j * j);
      spec.psi.push_back([j, amp](double x, double y) {
        return amp * std::sin(j * M_PI * x) * std::sin(j * M_PI * y);
      });
      spec.sup_norms.push_back(amp);
    }
    return spec;
  }
};

inline CoefficientField build_field_lognormal(const Eigen::VectorXd& z,
                                              const GaussianFieldSpec& spec,
                                              const Mesh& mesh) {
  if (static_cast<std::size_t>(z.size()) != spec.psi.size())
    throw std::invalid_argument("parameter dimension does not match field spec");
  CoefficientField field;
  field.provenance = "K = K_star + exp(K_bar + sum z_j psi_j)";
  field.values.resize(static_cast<Eigen::Index>(mesh.level().node_count()));
  for (std::size_t i = 0; i < mesh.nodes().size(); ++i) {
    const auto& p = mesh.nodes()[i];
    double expo = spec.k_bar;
    for (std::size_t j = 0; j < spec.psi.size(); ++j)
      expo += z[static_cast<Eigen::Index>(j)] * spec.psi[j](p[0], p[1]);
    field.values[static_cast<Eigen::Index>(i)] = spec.k_star + std::exp(expo);
  }
  return field;
}

}  // namespace htmc

#endif
