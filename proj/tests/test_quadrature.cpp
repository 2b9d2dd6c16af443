#include <catch_amalgamated.hpp>
#include <cmath>

#include "htmc/model.hpp"
#include "htmc/prior.hpp"
#include "htmc/quadrature.hpp"
#include "htmc/rng.hpp"

using namespace htmc;

namespace {

// Forward model wrapper around an arbitrary scalar potential, for oracle tests:
// delta = 0, sigma2 = 0.5 turns |G(z)|^2 into Phi = G(z)^2 when G is scalar.
class PotentialModel : public ForwardModel {
public:
  explicit PotentialModel(std::function<double(double)> phi) : phi_(std::move(phi)) {}
  Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const override {
    Eigen::VectorXd g(1);
    g[0] = std::sqrt(std::max(0.0, phi_(z[0])));
    return g;
  }
  int output_dim() const override { return 1; }
  CostClass cost_class() const override { return CostClass::Surrogate; }

private:
  std::function<double(double)> phi_;
};

ObservationSet unit_obs() {
  ObservationSet obs;
  obs.sigma2 = 0.5;
  obs.layout.points = {{0.5, 0.5}};
  obs.delta = Eigen::VectorXd::Zero(1);
  obs.truth_z = Eigen::VectorXd::Zero(1);
  return obs;
}

}  // namespace

TEST_CASE("gauss_legendre closed forms") {
  const auto r1 = gauss_legendre(1, 0.0, 1.0);
  CHECK(r1.nodes[0] == Catch::Approx(0.5).margin(1e-15));
  CHECK(r1.weights[0] == Catch::Approx(1.0).margin(1e-15));

  const auto r2 = gauss_legendre(2, -1.0, 1.0);
  CHECK(r2.nodes[0] == Catch::Approx(-1.0 / std::sqrt(3.0)).margin(1e-14));
  CHECK(r2.nodes[1] == Catch::Approx(1.0 / std::sqrt(3.0)).margin(1e-14));
  CHECK(r2.weights[0] == Catch::Approx(1.0).margin(1e-14));
  CHECK(r2.weights[1] == Catch::Approx(1.0).margin(1e-14));

  CHECK_THROWS_AS(gauss_legendre(0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gauss_legendre(129, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("n-point rule is exact to degree 2n-1") {
  const auto r4 = gauss_legendre(4, 0.0, 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < r4.nodes.size(); ++i)
    acc += r4.weights[i] * std::pow(r4.nodes[i], 7);
  CHECK(std::abs(acc - 0.125) < 1e-14);

  // weights sum to b - a, nodes interior
  const auto r8 = gauss_legendre(8, 2.0, 5.0);
  double wsum = 0.0;
  for (std::size_t i = 0; i < r8.nodes.size(); ++i) {
    CHECK(r8.nodes[i] > 2.0);
    CHECK(r8.nodes[i] < 5.0);
    wsum += r8.weights[i];
  }
  CHECK(wsum == Catch::Approx(3.0).margin(1e-13));
}

TEST_CASE("posterior expectation: flat potential returns the prior mean") {
  const PotentialModel flat([](double) { return 0.0; });
  const auto prior = PriorSpec::uniform(0.0, 1.0);
  const double mean =
      posterior_expectation_quadrature(flat, unit_obs(), prior, qoi_component(), 32);
  CHECK(mean == Catch::Approx(0.5).margin(1e-13));
}

TEST_CASE("posterior expectation is shift invariant") {
  const auto prior = PriorSpec::uniform(0.0, 1.0);
  const PotentialModel base([](double z) { return 3.0 * z * z; });
  const PotentialModel shifted([](double z) { return 3.0 * z * z + 7.0; });
  const double a =
      posterior_expectation_quadrature(base, unit_obs(), prior, qoi_component(), 32);
  const double b =
      posterior_expectation_quadrature(shifted, unit_obs(), prior, qoi_component(), 32);
  CHECK(std::abs(a - b) < 1e-13);
}

TEST_CASE("posterior expectation is stable under refinement") {
  const PriorSpec prior = PriorSpec::uniform(0.0, 1.0);
  const PotentialModel model([](double z) { return 10.0 * (z - 0.3) * (z - 0.3); });
  const double e32 =
      posterior_expectation_quadrature(model, unit_obs(), prior, qoi_component(), 32);
  const double e64 =
      posterior_expectation_quadrature(model, unit_obs(), prior, qoi_component(), 64);
  CHECK(std::abs(e32 - e64) < 1e-8);
}

TEST_CASE("quadrature oracle agrees with self-normalized importance MC") {
  const PriorSpec prior = PriorSpec::uniform(0.0, 1.0);
  auto phi = [](double z) { return 4.0 * std::sin(3.0 * z) + 5.0 * z * z; };
  const PotentialModel model(phi);
  const double quad =
      posterior_expectation_quadrature(model, unit_obs(), prior, qoi_component(), 64);

  Rng rng(123);
  const int n = 2000000;
  double num = 0.0, den = 0.0, num2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.uniform();
    const double w = std::exp(-phi(z));
    num += w * z;
    den += w;
    num2 += w * z * z;
  }
  const double mc = num / den;
  const double post_var = num2 / den - mc * mc;
  const double se = std::sqrt(post_var / n) * (n / den);  // rough self-normalized SE
  CHECK(std::abs(quad - mc) < 3.0 * std::max(se, 1e-4));
}
