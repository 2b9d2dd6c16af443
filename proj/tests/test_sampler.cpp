#include <catch_amalgamated.hpp>
#include <cmath>

#include "htmc/model.hpp"
#include "htmc/prior.hpp"
#include "htmc/quadrature.hpp"
#include "htmc/sampler.hpp"

using namespace htmc;

namespace {

// Forward model with identically zero output; with delta = 0 the potential
// vanishes everywhere.
class ZeroModel : public ForwardModel {
public:
  Eigen::VectorXd evaluate(const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Zero(1);
  }
  int output_dim() const override { return 1; }
  CostClass cost_class() const override { return CostClass::Surrogate; }
};

ObservationSet zero_obs() {
  ObservationSet obs;
  obs.sigma2 = 1.0;
  obs.layout.points = {{0.5, 0.5}};
  obs.delta = Eigen::VectorXd::Zero(1);
  obs.truth_z = Eigen::VectorXd::Zero(1);
  return obs;
}

NumericalForward make_forward(int level) {
  return NumericalForward(MeshLevel(level), build_field_uniform,
                          ObservationLayout::lattice6x6());
}

}  // namespace

TEST_CASE("acceptance probability closed forms") {
  CHECK(mh_acceptance_probability(2.0, 1.0) == 1.0);  // downhill
  CHECK(mh_acceptance_probability(1.0, 1.0) == 1.0);  // equal
  CHECK(mh_acceptance_probability(1.0, 1.0 + std::log(2.0)) ==
        Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("5-state transition matrix is stationary for exp(-Phi)") {
  // Discrete Metropolis chain over 5 states with a uniform symmetric proposal,
  // built from the implementation's acceptance rule.
  const std::array<double, 5> phi = {0.3, 1.1, 0.2, 2.0, 0.7};
  Eigen::Matrix<double, 5, 5> P = Eigen::Matrix<double, 5, 5>::Zero();
  for (int i = 0; i < 5; ++i) {
    double stay = 1.0;
    for (int j = 0; j < 5; ++j) {
      if (i == j) continue;
      P(i, j) = 0.25 * mh_acceptance_probability(phi[static_cast<std::size_t>(i)],
                                                 phi[static_cast<std::size_t>(j)]);
      stay -= P(i, j);
    }
    P(i, i) = stay;
  }
  Eigen::Matrix<double, 1, 5> pi;
  for (int i = 0; i < 5; ++i) pi(0, i) = std::exp(-phi[static_cast<std::size_t>(i)]);
  pi /= pi.sum();
  const Eigen::Matrix<double, 1, 5> pi_next = pi * P;
  CHECK(0.5 * (pi_next - pi).cwiseAbs().sum() <= 1e-12);  // total variation
}

TEST_CASE("reflected proposal stays in the box and is symmetric") {
  const auto prior = PriorSpec::uniform(0.0, 1.0);
  ChainConfig cfg;
  cfg.kernel = KernelType::RwReflect;
  cfg.step = 0.3;

  Rng rng(5);
  Eigen::VectorXd z(1);
  z[0] = 0.05;
  for (int i = 0; i < 5000; ++i) {
    const auto zp = propose(z, prior, cfg, rng);
    CHECK(zp[0] >= 0.0);
    CHECK(zp[0] <= 1.0);
  }

  // Histogram symmetry on a coarse grid: q(a -> bin(b)) vs q(b -> bin(a)).
  const double a = 0.12, b = 0.81, half_width = 0.05;
  const int n_draws = 400000;
  Rng rng2(17);
  int a_to_b = 0, b_to_a = 0;
  for (int i = 0; i < n_draws; ++i) {
    Eigen::VectorXd za(1), zb(1);
    za[0] = a;
    zb[0] = b;
    if (std::abs(propose(za, prior, cfg, rng2)[0] - b) < half_width) ++a_to_b;
    if (std::abs(propose(zb, prior, cfg, rng2)[0] - a) < half_width) ++b_to_a;
  }
  const double p1 = static_cast<double>(a_to_b) / n_draws;
  const double p2 = static_cast<double>(b_to_a) / n_draws;
  const double se = std::sqrt(2.0 * std::max(p1, p2) / n_draws);
  CHECK(std::abs(p1 - p2) < 3.0 * std::max(se, 1e-5));
}

TEST_CASE("pCN with zero potential preserves the standard normal prior") {
  const ZeroModel model;
  const auto obs = zero_obs();
  const auto prior = PriorSpec::gaussian(2);
  ChainConfig cfg;
  cfg.kernel = KernelType::Pcn;
  cfg.beta = 0.5;
  cfg.length = 40000;
  cfg.burn_in = 2000;
  cfg.seed = 3;
  const auto chain = run_chain(model, obs, prior, cfg, qoi_identity());
  CHECK(chain.acceptance_rate == 1.0);  // Phi constant, every step accepted

  for (int c = 0; c < 2; ++c) {
    const auto series = qoi_series(chain, c);
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(series.size());
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    var /= static_cast<double>(series.size());
    const double ess = effective_sample_size(series);
    const double se_mean = std::sqrt(var / ess);
    CHECK(std::abs(mean) < 3.0 * se_mean);
    const double se_var = std::sqrt(2.0 / ess);  // var of sample variance of N(0,1)
    CHECK(std::abs(var - 1.0) < 3.0 * se_var);
  }
}

TEST_CASE("pCN with beta = 1 is an i.i.d. prior sampler") {
  const ZeroModel model;
  ChainConfig cfg;
  cfg.kernel = KernelType::Pcn;
  cfg.beta = 1.0;
  cfg.length = 20000;
  cfg.burn_in = 10;
  cfg.seed = 4;
  const auto chain = run_chain(model, zero_obs(), PriorSpec::gaussian(1), cfg, qoi_identity());
  const auto series = qoi_series(chain);
  const double ess = effective_sample_size(series);
  // independent draws: ESS close to the chain length
  CHECK(ess > 0.8 * cfg.length);
}

TEST_CASE("pCN with tiny beta barely moves") {
  const ZeroModel model;
  ChainConfig cfg;
  cfg.kernel = KernelType::Pcn;
  cfg.beta = 1e-3;
  cfg.length = 200;
  cfg.burn_in = 0;
  cfg.seed = 5;
  const auto chain = run_chain(model, zero_obs(), PriorSpec::gaussian(1), cfg, qoi_identity());
  CHECK(chain.acceptance_rate == 1.0);
  double max_move = 0.0;
  for (int i = 1; i < chain.size(); ++i)
    max_move = std::max(max_move, std::abs(chain.states[static_cast<std::size_t>(i)][0] -
                                           chain.states[static_cast<std::size_t>(i - 1)][0]));
  CHECK(max_move < 0.01);
}

TEST_CASE("chains are deterministic under the seed and store their potentials") {
  const auto model = make_forward(3);
  Eigen::VectorXd truth(1);
  truth[0] = 0.4;
  const auto obs =
      generate_observations(model, truth, 0.001, 8, ObservationLayout::lattice6x6());
  const auto prior = PriorSpec::uniform(0.0, 1.0);
  ChainConfig cfg;
  cfg.length = 200;
  cfg.burn_in = 20;
  cfg.seed = 12;
  const auto c1 = run_chain(model, obs, prior, cfg, qoi_component());
  const auto c2 = run_chain(model, obs, prior, cfg, qoi_component());
  REQUIRE(c1.size() == c2.size());
  for (int i = 0; i < c1.size(); ++i) {
    CHECK(c1.states[static_cast<std::size_t>(i)] == c2.states[static_cast<std::size_t>(i)]);
    CHECK(c1.potentials[static_cast<std::size_t>(i)] == c2.potentials[static_cast<std::size_t>(i)]);
  }
  // stored potentials match re-evaluation
  for (int i : {0, 50, 199})
    CHECK(c1.potentials[static_cast<std::size_t>(i)] ==
          Catch::Approx(potential(model, c1.states[static_cast<std::size_t>(i)], obs))
              .margin(1e-13));
  CHECK(c1.acceptance_rate >= 0.0);
  CHECK(c1.acceptance_rate <= 1.0);
}

TEST_CASE("chain mean basics") {
  Chain chain;
  chain.config = ChainConfig{};
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd z(1);
    z[0] = (i % 2 == 0) ? 0.2 : 0.8;  // alternating
    chain.states.push_back(z);
    chain.potentials.push_back(0.0);
    chain.qoi.push_back(z);
  }
  CHECK(chain_mean(chain, [](int) { return 3.5; }) == 3.5);
  CHECK(chain_mean(chain, [](int) { return 1.0; }) == 1.0);
  CHECK(chain_qoi_mean(chain)[0] == Catch::Approx(0.5).margin(1e-15));
  Chain empty;
  CHECK_THROWS_AS(chain_qoi_mean(empty), std::invalid_argument);
}

TEST_CASE("effective sample size") {
  Rng rng(77);
  std::vector<double> iid;
  for (int i = 0; i < 10000; ++i) iid.push_back(rng.normal());
  const double ess = effective_sample_size(iid);
  CHECK(ess > 0.8 * 10000);
  CHECK(ess <= 1.2 * 10000);

  std::vector<double> periodic;
  for (int i = 0; i < 1000; ++i) periodic.push_back(i % 2 == 0 ? 1.0 : -1.0);
  const double ess_periodic = effective_sample_size(periodic);
  CHECK(ess_periodic >= 1.0);

  const std::vector<double> constant(500, 2.5);
  CHECK(effective_sample_size(constant) == 500.0);

  CHECK_THROWS_AS(effective_sample_size(std::vector<double>(5, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("posterior chain mean matches the quadrature oracle") {
  const auto model = make_forward(3);
  Eigen::VectorXd truth(1);
  truth[0] = 0.35;
  const auto obs =
      generate_observations(model, truth, 0.001, 19, ObservationLayout::lattice6x6());
  const auto prior = PriorSpec::uniform(0.0, 1.0);

  const double oracle =
      posterior_expectation_quadrature(model, obs, prior, qoi_component(), 32);

  ChainConfig cfg;
  cfg.step = 0.1;
  cfg.length = 20000;
  cfg.burn_in = 2000;
  cfg.seed = 23;
  const auto chain = run_chain(model, obs, prior, cfg, qoi_component());
  const auto series = qoi_series(chain);
  const double mean = chain_qoi_mean(chain)[0];
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(series.size());
  const double se = std::sqrt(var / effective_sample_size(series));
  CHECK(std::abs(mean - oracle) < 3.0 * se);
}

TEST_CASE("chain csv dump") {
  const ZeroModel model;
  ChainConfig cfg;
  cfg.kernel = KernelType::Pcn;
  cfg.beta = 0.5;
  cfg.length = 20;
  cfg.burn_in = 2;
  const auto chain = run_chain(model, zero_obs(), PriorSpec::gaussian(1), cfg, qoi_identity());
  dump_chain_csv(chain, "chain_test.csv");
  std::ifstream in("chain_test.csv");
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "step,z_1,phi,qoi");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 20);
  std::remove("chain_test.csv");

  const auto summary = chain_summary(chain);
  CHECK(summary.at("length") == 20);
  CHECK(summary.at("kernel") == "pcn");
}
