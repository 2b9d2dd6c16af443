#ifndef HTMC_HYBRID_HPP
#define HTMC_HYBRID_HPP

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "htmc/sampler.hpp"

namespace htmc {

// I(z) = 1 when Phi_num - Phi_ml <= 0; keeps every exponential weight bounded.
inline int switching_indicator(double phi_num, double phi_ml) {
  if (!std::isfinite(phi_num) || !std::isfinite(phi_ml))
    throw std::invalid_argument("potentials must be finite");
  return phi_num - phi_ml <= 0.0 ? 1 : 0;
}

struct DualPotentialSample {
  Eigen::VectorXd z;
  double phi_num;
  double phi_ml;
  Eigen::VectorXd q;
};

// The six branch-split integrands of the Gaussian-prior estimator. The
// exponential is only evaluated on the branch where its argument is <= 0.
struct ATerms {
  Eigen::VectorXd a1, a2, a3, a4;  // QoI-valued
  double a5, a6;
};

inline ATerms a_terms(const DualPotentialSample& s) {
  const double delta = s.phi_num - s.phi_ml;
  const int ind = switching_indicator(s.phi_num, s.phi_ml);
  ATerms t;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(s.q.size());
  if (ind == 1) {
    const double e = std::exp(delta);  // delta <= 0
    t.a1 = (1.0 - e) * s.q;
    t.a2 = zero;
    t.a3 = s.q;
    t.a4 = zero;
    t.a5 = e - 1.0;
    t.a6 = 0.0;
  } else {
    const double e = std::exp(-delta);  // -delta < 0
    t.a1 = zero;
    t.a2 = (e - 1.0) * s.q;
    t.a3 = zero;
    t.a4 = s.q;
    t.a5 = 0.0;
    t.a6 = 1.0 - e;
  }
  return t;
}

// M_ml = C 2^(2L), M_num = C (1 + 2^eps)^2.
struct SampleBudget {
  int target_level;
  double epsilon;
  double calibration;
  long m_ml;
  long m_num;
};

inline SampleBudget select_budget(int target_level, double epsilon, double calibration) {
  if (target_level < 1) throw std::invalid_argument("level must be >= 1");
  if (!(calibration > 0.0)) throw std::invalid_argument("calibration constant must be positive");
  SampleBudget b;
  b.target_level = target_level;
  b.epsilon = epsilon;
  b.calibration = calibration;
  b.m_ml = std::max(1l, std::lround(calibration * std::pow(2.0, 2 * target_level)));
  const double base = 1.0 + std::pow(2.0, epsilon);
  b.m_num = std::max(1l, std::lround(calibration * base * base));
  return b;
}

struct TermEstimate {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_error;
};

// Non-overlapping batch means, 20 batches.
inline TermEstimate batch_mean_estimate(const std::vector<Eigen::VectorXd>& values,
                                        int n_batches = 20) {
  if (values.empty()) throw std::invalid_argument("empty sample set");
  const Eigen::Index dim = values.front().size();
  const int n = static_cast<int>(values.size());
  TermEstimate est;
  est.mean = Eigen::VectorXd::Zero(dim);
  for (const auto& v : values) est.mean += v;
  est.mean /= n;

  if (n < 2 * n_batches) {
    // Too short for batching; fall back to the i.i.d. standard error.
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    for (const auto& v : values) var += (v - est.mean).cwiseAbs2();
    var /= std::max(1, n - 1);
    est.std_error = (var / n).cwiseSqrt();
    return est;
  }

  const int batch_size = n / n_batches;
  const int used = batch_size * n_batches;
  std::vector<Eigen::VectorXd> batch_means;
  for (int b = 0; b < n_batches; ++b) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    for (int i = b * batch_size; i < (b + 1) * batch_size; ++i)
      acc += values[static_cast<std::size_t>(i)];
    batch_means.push_back(acc / batch_size);
  }
  Eigen::VectorXd grand = Eigen::VectorXd::Zero(dim);
  for (const auto& m : batch_means) grand += m;
  grand /= n_batches;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& m : batch_means) var += (m - grand).cwiseAbs2();
  var /= (n_batches - 1);
  est.std_error = (var / n_batches).cwiseSqrt();
  (void)used;
  return est;
}

struct HybridEstimate {
  Eigen::VectorXd base_ml_mean;
  Eigen::VectorXd term_weighted;  // mean[(1 - e^delta) q] over the numerical chain
  double term_ratio;              // mean[e^delta - 1] over the numerical chain
  Eigen::VectorXd total;
  Eigen::VectorXd se_base, se_weighted;
  double se_ratio;
  Eigen::VectorXd se_combined;
  // Gaussian case: the six A-term means (QoI-valued terms use component 0 ... dim).
  std::optional<std::array<Eigen::VectorXd, 6>> a_term_means;
  long numerical_solves = 0;
};

namespace detail {

inline void require_dual(const Chain& chain, const char* name) {
  if (chain.states.empty()) throw std::invalid_argument(std::string(name) + ": empty chain");
  if (!chain.has_aux())
    throw std::invalid_argument(std::string(name) + ": chain lacks dual potentials");
}

}  // namespace detail

// Uniform-prior estimator:
//   total = E_num[(1 - e^delta) Q] + E_num[e^delta - 1] * E_ml[Q] + E_ml[Q],
// delta = Phi_num - Phi_ml on the numerical chain's states.
inline HybridEstimate hybrid_estimate_uniform(const Chain& chain_num, const Chain& chain_ml) {
  detail::require_dual(chain_num, "chain_num");
  if (chain_ml.states.empty()) throw std::invalid_argument("chain_ml: empty chain");

  const Eigen::Index dim = chain_num.qoi.front().size();
  std::vector<Eigen::VectorXd> weighted, ratio;
  weighted.reserve(chain_num.qoi.size());
  ratio.reserve(chain_num.qoi.size());
  for (int i = 0; i < chain_num.size(); ++i) {
    const double delta = chain_num.potentials[static_cast<std::size_t>(i)] -
                         chain_num.aux_potentials[static_cast<std::size_t>(i)];
    const double em1 = std::expm1(delta);
    weighted.push_back(-em1 * chain_num.qoi[static_cast<std::size_t>(i)]);
    Eigen::VectorXd r(1);
    r[0] = em1;
    ratio.push_back(std::move(r));
  }

  const TermEstimate w = batch_mean_estimate(weighted);
  const TermEstimate r = batch_mean_estimate(ratio);
  const TermEstimate base = batch_mean_estimate(chain_ml.qoi);

  HybridEstimate est;
  est.base_ml_mean = base.mean;
  est.term_weighted = w.mean;
  est.term_ratio = r.mean[0];
  est.total = w.mean + r.mean[0] * base.mean + base.mean;
  est.se_base = base.std_error;
  est.se_weighted = w.std_error;
  est.se_ratio = r.std_error[0];
  est.se_combined.resize(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const double s1 = w.std_error[c];
    const double s2 = r.std_error[0] * base.mean[c];
    const double s3 = (1.0 + r.mean[0]) * base.std_error[c];
    est.se_combined[c] = std::sqrt(s1 * s1 + s2 * s2 + s3 * s3);
  }
  est.numerical_solves = chain_num.size();
  return est;
}

// Gaussian-prior estimator. A1, A4, A5 come from the numerical chain; A2, A3,
// A6 from a short ML-targeted chain whose states also carry Phi_num; E[Q] from
// the long surrogate-only chain. The normalizing-constant ratios satisfy
//   Z_ml / Z_num = (1 + E_num[A5]) / (1 - E_ml[A6]),
// so the two switching-branch constants are assembled exactly as
//   c1 = Z_ml/Z_num - 1 = (E_num[A5] + E_ml[A6]) / (1 - E_ml[A6]),
//   c2 = 1 - Z_num/Z_ml = (E_num[A5] + E_ml[A6]) / (1 + E_num[A5]),
// and the estimator
//   total = E_num[A1] + c1 E_ml[A3] + E_ml[A2] + c2 E_num[A4] + E_ml[Q]
// is an exact population decomposition of E_num[Q]. Using E_num[A5] and
// E_ml[A6] directly in place of c1, c2 drops only products of correction
// terms but breaks the exact telescoping identity.
inline HybridEstimate hybrid_estimate_gaussian(const Chain& chain_num,
                                               const Chain& chain_ml_short,
                                               const Chain& chain_ml_long) {
  detail::require_dual(chain_num, "chain_num");
  detail::require_dual(chain_ml_short, "chain_ml_short");
  if (chain_ml_long.states.empty()) throw std::invalid_argument("chain_ml_long: empty chain");
  const Eigen::Index dim = chain_num.qoi.front().size();
  if (chain_ml_long.qoi.front().size() != dim ||
      chain_ml_short.qoi.front().size() != dim)
    throw std::invalid_argument("QoI dimension mismatch across chains");

  auto scalar = [](double v) {
    Eigen::VectorXd s(1);
    s[0] = v;
    return s;
  };

  // Numerical chain: potentials are Phi_num, aux is Phi_ml.
  std::vector<Eigen::VectorXd> a1_s, a4_s, a5_s;
  for (int i = 0; i < chain_num.size(); ++i) {
    DualPotentialSample s{chain_num.states[static_cast<std::size_t>(i)],
                          chain_num.potentials[static_cast<std::size_t>(i)],
                          chain_num.aux_potentials[static_cast<std::size_t>(i)],
                          chain_num.qoi[static_cast<std::size_t>(i)]};
    const ATerms t = a_terms(s);
    a1_s.push_back(t.a1);
    a4_s.push_back(t.a4);
    a5_s.push_back(scalar(t.a5));
  }
  // Short ML chain: potentials are Phi_ml, aux is Phi_num.
  std::vector<Eigen::VectorXd> a2_s, a3_s, a6_s;
  for (int i = 0; i < chain_ml_short.size(); ++i) {
    DualPotentialSample s{chain_ml_short.states[static_cast<std::size_t>(i)],
                          chain_ml_short.aux_potentials[static_cast<std::size_t>(i)],
                          chain_ml_short.potentials[static_cast<std::size_t>(i)],
                          chain_ml_short.qoi[static_cast<std::size_t>(i)]};
    const ATerms t = a_terms(s);
    a2_s.push_back(t.a2);
    a3_s.push_back(t.a3);
    a6_s.push_back(scalar(t.a6));
  }

  const TermEstimate a1 = batch_mean_estimate(a1_s);
  const TermEstimate a2 = batch_mean_estimate(a2_s);
  const TermEstimate a3 = batch_mean_estimate(a3_s);
  const TermEstimate a4 = batch_mean_estimate(a4_s);
  const TermEstimate a5 = batch_mean_estimate(a5_s);
  const TermEstimate a6 = batch_mean_estimate(a6_s);
  const TermEstimate base = batch_mean_estimate(chain_ml_long.qoi);

  const double a5m = a5.mean[0], a6m = a6.mean[0];
  if (!(1.0 - a6m > 0.0) || !(1.0 + a5m > 0.0))
    throw std::runtime_error("degenerate ratio terms in hybrid assembly");
  const double c1 = (a5m + a6m) / (1.0 - a6m);
  const double c2 = (a5m + a6m) / (1.0 + a5m);
  // first-order sensitivity of c1, c2 to the a5/a6 sample errors
  const double dc1 = (a5.std_error[0] + (1.0 + a5m) / (1.0 - a6m) * a6.std_error[0]) / (1.0 - a6m);
  const double dc2 = (a6.std_error[0] + (1.0 - a6m) / (1.0 + a5m) * a5.std_error[0]) / (1.0 + a5m);

  HybridEstimate est;
  est.base_ml_mean = base.mean;
  est.term_weighted = a1.mean;
  est.term_ratio = c1;
  est.total = a1.mean + c1 * a3.mean + a2.mean + c2 * a4.mean + base.mean;
  est.se_base = base.std_error;
  est.se_weighted = a1.std_error;
  est.se_ratio = dc1;
  est.se_combined.resize(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const double s1 = a1.std_error[c];
    const double s2 = dc1 * std::abs(a3.mean[c]) + std::abs(c1) * a3.std_error[c];
    const double s3 = a2.std_error[c];
    const double s4 = dc2 * std::abs(a4.mean[c]) + std::abs(c2) * a4.std_error[c];
    const double s5 = base.std_error[c];
    est.se_combined[c] = std::sqrt(s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4 + s5 * s5);
  }
  est.a_term_means = {a1.mean, a2.mean, a3.mean, a4.mean, a5.mean, a6.mean};
  // Phi_num is solved along the numerical chain and once per short-chain state.
  est.numerical_solves = chain_num.size() + chain_ml_short.size();
  return est;
}

}  // namespace htmc

#endif
