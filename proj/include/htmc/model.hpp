#ifndef HTMC_MODEL_HPP
#define HTMC_MODEL_HPP

#include <Eigen/Dense>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "htmc/fem.hpp"
#include "htmc/prior.hpp"
#include "htmc/rng.hpp"

namespace htmc {

enum class CostClass { Numerical, Surrogate };

// Parameters-to-observations map; implementations must be deterministic and
// safe for concurrent read-only use.
class ForwardModel {
public:
  virtual ~ForwardModel() = default;
  virtual Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const = 0;
  virtual int output_dim() const = 0;
  virtual CostClass cost_class() const = 0;
};

using FieldBuilder = std::function<CoefficientField(const Eigen::VectorXd&, const Mesh&)>;

// FEM-backed forward map: build coefficient field, solve, observe.
class NumericalForward : public ForwardModel {
public:
  NumericalForward(MeshLevel level, FieldBuilder builder, ObservationLayout layout,
                   SourceFunction source = default_source(), BoundarySpec bc = {})
      : mesh_(level),
        builder_(std::move(builder)),
        layout_(std::move(layout)),
        source_(std::move(source)),
        bc_(bc) {
    layout_.validate();
  }

  static SourceFunction default_source() {
    return [](double x, double y) {
      return std::cos(2.0 * M_PI * x) * std::sin(2.0 * M_PI * y);
    };
  }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const override {
    return observe(solve(z), layout_);
  }

  FemSolution solve(const Eigen::VectorXd& z) const {
    return assemble_and_solve(mesh_, builder_(z, mesh_), source_, bc_);
  }

  int output_dim() const override { return static_cast<int>(layout_.points.size()); }
  CostClass cost_class() const override { return CostClass::Numerical; }
  const Mesh& mesh() const { return mesh_; }
  const ObservationLayout& layout() const { return layout_; }

private:
  Mesh mesh_;
  FieldBuilder builder_;
  ObservationLayout layout_;
  SourceFunction source_;
  BoundarySpec bc_;
};

struct ObservationSet {
  Eigen::VectorXd delta;
  double sigma2 = 0.0;
  ObservationLayout layout;
  Eigen::VectorXd truth_z;  // reference only
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    if (delta.size() != static_cast<Eigen::Index>(layout.points.size()))
      throw std::invalid_argument("observation length does not match layout");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["sigma2"] = sigma2;
    auto& pts = j["layout"] = nlohmann::json::array();
    for (const auto& p : layout.points) pts.push_back({p[0], p[1]});
    j["delta"] = std::vector<double>(delta.data(), delta.data() + delta.size());
    j["truth_z"] = std::vector<double>(truth_z.data(), truth_z.data() + truth_z.size());
    j["seed"] = seed;
    return j;
  }

  static ObservationSet from_json(const nlohmann::json& j) {
    ObservationSet obs;
    obs.sigma2 = j.at("sigma2").get<double>();
    for (const auto& p : j.at("layout"))
      obs.layout.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    const auto d = j.at("delta").get<std::vector<double>>();
    obs.delta = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
    const auto t = j.at("truth_z").get<std::vector<double>>();
    obs.truth_z = Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
    obs.seed = j.at("seed").get<std::uint64_t>();
    obs.validate();
    return obs;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << to_json().dump(2) << '\n';
  }

  static ObservationSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

// delta = G(truth_z) + N(0, sigma2 I). `zero_noise` is an explicit switch so
// sigma2 stays positive and the potential stays defined.
inline ObservationSet generate_observations(const ForwardModel& model,
                                            const Eigen::VectorXd& truth_z, double sigma2,
                                            std::uint64_t seed,
                                            const ObservationLayout& layout,
                                            bool zero_noise = false) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  ObservationSet obs;
  obs.sigma2 = sigma2;
  obs.layout = layout;
  obs.truth_z = truth_z;
  obs.seed = seed;
  obs.delta = model.evaluate(truth_z);
  if (!zero_noise) {
    Rng rng(seed);
    const double sd = std::sqrt(sigma2);
    for (Eigen::Index i = 0; i < obs.delta.size(); ++i) obs.delta[i] += sd * rng.normal();
  }
  obs.validate();
  return obs;
}

// Phi(z) = 1/2 |delta - G(z)|^2 / sigma2.
inline double potential(const ForwardModel& model, const Eigen::VectorXd& z,
                        const ObservationSet& obs) {
  const Eigen::VectorXd g = model.evaluate(z);
  if (g.size() != obs.delta.size())
    throw std::invalid_argument("model output length does not match observations");
  return 0.5 * (obs.delta - g).squaredNorm() / obs.sigma2;
}

inline double potential_of_output(const Eigen::VectorXd& g, const ObservationSet& obs) {
  if (g.size() != obs.delta.size())
    throw std::invalid_argument("model output length does not match observations");
  return 0.5 * (obs.delta - g).squaredNorm() / obs.sigma2;
}

}  // namespace htmc

#endif
