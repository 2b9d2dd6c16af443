#ifndef HTMC_SAMPLER_HPP
#define HTMC_SAMPLER_HPP

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "htmc/model.hpp"
#include "htmc/prior.hpp"
#include "htmc/rng.hpp"

namespace htmc {

using QoiFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline QoiFunction qoi_component(int index = 0) {
  return [index](const Eigen::VectorXd& z) {
    Eigen::VectorXd q(1);
    q[0] = z[index];
    return q;
  };
}

inline QoiFunction qoi_identity() {
  return [](const Eigen::VectorXd& z) { return z; };
}

enum class KernelType { RwReflect, Pcn };

struct ChainConfig {
  KernelType kernel = KernelType::RwReflect;
  double step = 0.1;   // rw_reflect proposal stddev
  double beta = 0.2;   // pCN mixing in (0, 1]
  int length = 1000;   // retained post-burn-in states
  int burn_in = 100;
  int thin = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (length < 1) throw std::invalid_argument("chain length must be >= 1");
    if (burn_in < 0 || burn_in >= length + burn_in + 1)
      throw std::invalid_argument("invalid burn-in");
    if (thin < 1) throw std::invalid_argument("thin must be >= 1");
    if (kernel == KernelType::RwReflect && !(step > 0.0))
      throw std::invalid_argument("step must be positive");
    if (kernel == KernelType::Pcn && !(beta > 0.0 && beta <= 1.0))
      throw std::invalid_argument("pCN beta must be in (0, 1]");
  }
};

struct Chain {
  std::vector<Eigen::VectorXd> states;
  std::vector<double> potentials;
  std::vector<double> aux_potentials;  // second model's potential, when recorded
  std::vector<Eigen::VectorXd> qoi;
  double acceptance_rate = 0.0;
  int nonfinite_rejections = 0;
  ChainConfig config;

  bool has_aux() const { return !aux_potentials.empty(); }
  int size() const { return static_cast<int>(states.size()); }
};

namespace detail {

// Fold a coordinate back into [lo, hi]; the map is an isometry of the box,
// so the proposal stays symmetric.
inline double reflect_into(double v, double lo, double hi) {
  const double width = hi - lo;
  double t = std::fmod(v - lo, 2.0 * width);
  if (t < 0.0) t += 2.0 * width;
  return t <= width ? lo + t : hi - (t - width);
}

}  // namespace detail

// Draw a prior-reversible proposal from the configured kernel.
inline Eigen::VectorXd propose(const Eigen::VectorXd& z, const PriorSpec& prior,
                               const ChainConfig& cfg, Rng& rng) {
  const Eigen::Index n = z.size();
  Eigen::VectorXd zp(n);
  if (cfg.kernel == KernelType::RwReflect) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& b = prior.bounds[static_cast<std::size_t>(j)];
      zp[j] = detail::reflect_into(z[j] + cfg.step * rng.normal(), b[0], b[1]);
    }
  } else {
    const double keep = std::sqrt(1.0 - cfg.beta * cfg.beta);
    for (Eigen::Index j = 0; j < n; ++j) zp[j] = keep * z[j] + cfg.beta * rng.normal();
  }
  return zp;
}

struct MhState {
  Eigen::VectorXd z;
  double phi;
};

struct MhResult {
  MhState next;
  bool accepted;
  bool nonfinite;
};

// Acceptance probability min(1, exp(phi - phi')) for prior-reversible proposals.
inline double mh_acceptance_probability(double phi_current, double phi_proposed) {
  const double log_alpha = phi_current - phi_proposed;
  return log_alpha >= 0.0 ? 1.0 : std::exp(log_alpha);
}

// One Metropolis step.
inline MhResult mh_step(const MhState& current, const ForwardModel& model,
                        const ObservationSet& obs, const PriorSpec& prior,
                        const ChainConfig& cfg, Rng& rng) {
  if (!std::isfinite(current.phi))
    throw std::invalid_argument("current potential must be finite");
  const Eigen::VectorXd zp = propose(current.z, prior, cfg, rng);
  const double phi_p = potential(model, zp, obs);
  if (!std::isfinite(phi_p)) {
    rng.uniform();  // keep the stream aligned with the accept draw
    return {current, false, true};
  }
  const double u = rng.uniform();
  if (u < mh_acceptance_probability(current.phi, phi_p)) return {{zp, phi_p}, true, false};
  return {current, false, false};
}

// Runs a chain targeting exp(-Phi) * prior. When `aux_model` is given, its
// potential is evaluated at every retained state and stored alongside.
inline Chain run_chain(const ForwardModel& model, const ObservationSet& obs,
                       const PriorSpec& prior, const ChainConfig& cfg,
                       const QoiFunction& qoi, const ForwardModel* aux_model = nullptr) {
  cfg.validate();
  prior.validate();
  Rng rng(cfg.seed);
  MhState state{sample_prior_one(prior, rng), 0.0};
  state.phi = potential(model, state.z, obs);

  Chain chain;
  chain.config = cfg;
  chain.states.reserve(static_cast<std::size_t>(cfg.length));
  chain.potentials.reserve(static_cast<std::size_t>(cfg.length));

  const long total = static_cast<long>(cfg.burn_in) + static_cast<long>(cfg.length) * cfg.thin;
  long accepted = 0;
  for (long step = 0; step < total; ++step) {
    const MhResult res = mh_step(state, model, obs, prior, cfg, rng);
    state = res.next;
    if (res.accepted) ++accepted;
    if (res.nonfinite) ++chain.nonfinite_rejections;
    const long past_burn = step - cfg.burn_in + 1;
    if (past_burn > 0 && past_burn % cfg.thin == 0) {
      chain.states.push_back(state.z);
      chain.potentials.push_back(state.phi);
      chain.qoi.push_back(qoi(state.z));
      if (aux_model)
        chain.aux_potentials.push_back(potential(*aux_model, state.z, obs));
    }
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
  return chain;
}

inline double chain_mean(const Chain& chain, const std::function<double(int)>& f) {
  if (chain.states.empty()) throw std::invalid_argument("empty chain");
  double acc = 0.0;
  for (int i = 0; i < chain.size(); ++i) acc += f(i);
  return acc / chain.size();
}

inline Eigen::VectorXd chain_qoi_mean(const Chain& chain) {
  if (chain.qoi.empty()) throw std::invalid_argument("empty chain");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(chain.qoi.front().size());
  for (const auto& q : chain.qoi) acc += q;
  return acc / static_cast<double>(chain.qoi.size());
}

// ESS with initial-positive-sequence truncation of the autocorrelation sum.
// A constant series has ESS = n by convention.
inline double effective_sample_size(const std::vector<double>& series) {
  const int n = static_cast<int>(series.size());
  if (n < 10) throw std::invalid_argument("series too short for ESS");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= n;
  if (var <= 0.0) return static_cast<double>(n);

  auto rho = [&](int lag) {
    double acc = 0.0;
    for (int i = 0; i + lag < n; ++i) acc += (series[static_cast<std::size_t>(i)] - mean) *
                                             (series[static_cast<std::size_t>(i + lag)] - mean);
    return acc / (n * var);
  };

  double sum = 0.0;
  for (int m = 0; 2 * m + 1 < n; ++m) {
    const double gamma = rho(2 * m) + rho(2 * m + 1);
    if (gamma <= 0.0) break;
    sum += gamma;
  }
  // sum includes rho(0) = 1 in the first pair; ESS = n / (2*sum - 1)
  const double denom = 2.0 * sum - 1.0;
  double ess = denom > 0.0 ? n / denom : static_cast<double>(n);
  if (ess > n) ess = static_cast<double>(n);
  if (ess < 1.0) ess = 1.0;
  return ess;
}

inline std::vector<double> qoi_series(const Chain& chain, int component = 0) {
  std::vector<double> out;
  out.reserve(chain.qoi.size());
  for (const auto& q : chain.qoi) out.push_back(q[component]);
  return out;
}

// CSV dump: step, z_1..z_n, phi, qoi, (phi_aux when present).
inline void dump_chain_csv(const Chain& chain, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  const Eigen::Index n = chain.states.empty() ? 0 : chain.states.front().size();
  out << "step";
  for (Eigen::Index j = 0; j < n; ++j) out << ",z_" << (j + 1);
  out << ",phi,qoi";
  if (chain.has_aux()) out << ",phi_aux";
  out << '\n';
  for (int i = 0; i < chain.size(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << chain.states[static_cast<std::size_t>(i)][j];
    out << ',' << chain.potentials[static_cast<std::size_t>(i)] << ','
        << chain.qoi[static_cast<std::size_t>(i)][0];
    if (chain.has_aux()) out << ',' << chain.aux_potentials[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

inline nlohmann::json chain_summary(const Chain& chain) {
  nlohmann::json j;
  j["length"] = chain.size();
  j["acceptance_rate"] = chain.acceptance_rate;
  j["nonfinite_rejections"] = chain.nonfinite_rejections;
  j["seed"] = chain.config.seed;
  j["burn_in"] = chain.config.burn_in;
  j["thin"] = chain.config.thin;
  j["kernel"] = chain.config.kernel == KernelType::RwReflect ? "rw_reflect" : "pcn";
  if (chain.size() >= 10) j["ess_qoi"] = effective_sample_size(qoi_series(chain));
  return j;
}

}  // namespace htmc

#endif
