#ifndef HTMC_CONFIG_HPP
#define HTMC_CONFIG_HPP

#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace htmc {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Strict schema: any key outside the allowed set is an error, so typos fail
// loudly instead of being silently ignored.
inline void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                       const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const auto& a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key \"" + key + "\" in " + context);
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value for \"" + key + "\": " + e.what());
  }
}

}  // namespace detail

struct SurrogateConfig {
  std::vector<int> hidden = {32, 32};
  int epochs = 2000;
  std::uint64_t train_seed = 1;
  int dataset_count = 500;
  std::uint64_t dataset_seed = 2;
  std::array<double, 3> fractions = {0.5, 0.25, 0.25};
  double adam_step = 1e-3;
  bool cosine_decay = true;
  // > 0 enables the reference-error estimate of epsilon against a model
  // `epsilon_reference_offset` levels finer, averaged over prior draws.
  int epsilon_reference_offset = 0;
  int epsilon_reference_draws = 64;
  std::uint64_t epsilon_reference_seed = 9;
};

struct ChainsConfig {
  std::string kernel = "rw_reflect";  // or "pcn"
  double step = 0.1;
  double beta = 0.2;
  long ml_length = 20000;
  long num_length = 2000;
  int burn_in = -1;  // -1: 10% of the chain length
  int thin = 1;
  std::uint64_t ml_seed = 100;
  std::uint64_t num_seed = 200;
  std::uint64_t short_seed = 300;
};

struct QuadratureConfig {
  int points = 32;
  int reference_level = 0;  // 0: use the experiment level
};

struct ExperimentConfig {
  std::string problem = "elliptic_uniform";  // or "elliptic_lognormal"
  int level = 5;
  // > 0 substitutes the numerical model at this level for the trained network.
  int surrogate_level = 0;
  std::string prior_type = "uniform";  // uniform box or i.i.d. standard normal
  double prior_low = 0.0, prior_high = 1.0;
  std::vector<double> truth = {0.5};
  double sigma2 = 1e-3;
  std::uint64_t noise_seed = 0;
  bool zero_noise = false;
  std::string observations_path;  // optional pre-existing ObservationSet JSON
  SurrogateConfig surrogate;
  ChainsConfig chains;
  QuadratureConfig quadrature;
  std::string output_dir = "out";
  std::string model_path;    // defaults to <output_dir>/model.bin
  std::string dataset_path;  // defaults to <output_dir>/dataset (.csv/.json)

  std::string resolved_model_path() const {
    return model_path.empty() ? output_dir + "/model.bin" : model_path;
  }
  std::string resolved_dataset_csv() const {
    return (dataset_path.empty() ? output_dir + "/dataset" : dataset_path) + ".csv";
  }
  std::string resolved_dataset_sidecar() const {
    return (dataset_path.empty() ? output_dir + "/dataset" : dataset_path) + ".json";
  }
  std::string resolved_observations_path() const {
    return observations_path.empty() ? output_dir + "/observations.json" : observations_path;
  }

  int burn_in_for(long length) const {
    return chains.burn_in >= 0 ? chains.burn_in : static_cast<int>(length / 10);
  }

  void validate() const {
    if (problem != "elliptic_uniform" && problem != "elliptic_lognormal")
      throw ConfigError("problem must be elliptic_uniform or elliptic_lognormal");
    if (level < 1 || level > 10) throw ConfigError("level must be in [1, 10]");
    if (surrogate_level < 0 || surrogate_level > 10)
      throw ConfigError("surrogate_level must be in [0, 10]");
    if (prior_type != "uniform" && prior_type != "gaussian")
      throw ConfigError("prior type must be uniform or gaussian");
    if (prior_type == "uniform" && !(prior_low < prior_high))
      throw ConfigError("prior bounds must satisfy low < high");
    if (truth.empty()) throw ConfigError("truth must be non-empty");
    if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
    if (chains.kernel != "rw_reflect" && chains.kernel != "pcn")
      throw ConfigError("kernel must be rw_reflect or pcn");
    if (chains.ml_length < 1 || chains.num_length < 1)
      throw ConfigError("chain lengths must be >= 1");
    if (chains.thin < 1) throw ConfigError("thin must be >= 1");
    if (quadrature.points < 4 || quadrature.points > 128)
      throw ConfigError("quadrature points must be in [4, 128]");
    if (quadrature.reference_level < 0 || quadrature.reference_level > 10)
      throw ConfigError("quadrature reference_level must be in [0, 10]");
    if (surrogate.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (surrogate.dataset_count < 10) throw ConfigError("dataset_count must be >= 10");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["problem"] = problem;
    j["level"] = level;
    if (surrogate_level > 0) j["surrogate_level"] = surrogate_level;
    j["prior"] = {{"type", prior_type}, {"low", prior_low}, {"high", prior_high}};
    j["observation"] = {{"truth", truth},
                        {"sigma2", sigma2},
                        {"noise_seed", noise_seed},
                        {"zero_noise", zero_noise}};
    if (!observations_path.empty()) j["observation"]["path"] = observations_path;
    j["surrogate"] = {{"hidden", surrogate.hidden},
                      {"epochs", surrogate.epochs},
                      {"train_seed", surrogate.train_seed},
                      {"dataset_count", surrogate.dataset_count},
                      {"dataset_seed", surrogate.dataset_seed},
                      {"fractions", surrogate.fractions},
                      {"adam_step", surrogate.adam_step},
                      {"cosine_decay", surrogate.cosine_decay},
                      {"epsilon_reference_offset", surrogate.epsilon_reference_offset},
                      {"epsilon_reference_draws", surrogate.epsilon_reference_draws},
                      {"epsilon_reference_seed", surrogate.epsilon_reference_seed}};
    j["chains"] = {{"kernel", chains.kernel},   {"step", chains.step},
                   {"beta", chains.beta},       {"ml_length", chains.ml_length},
                   {"num_length", chains.num_length}, {"burn_in", chains.burn_in},
                   {"thin", chains.thin},       {"ml_seed", chains.ml_seed},
                   {"num_seed", chains.num_seed}, {"short_seed", chains.short_seed}};
    j["quadrature"] = {{"points", quadrature.points},
                       {"reference_level", quadrature.reference_level}};
    j["output_dir"] = output_dir;
    if (!model_path.empty()) j["model_path"] = model_path;
    if (!dataset_path.empty()) j["dataset_path"] = dataset_path;
    return j;
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    detail::check_keys(j,
                       {"problem", "level", "surrogate_level", "prior", "observation",
                        "surrogate", "chains", "quadrature", "output_dir", "model_path",
                        "dataset_path"},
                       "config");
    ExperimentConfig c;
    c.problem = detail::get_or<std::string>(j, "problem", c.problem);
    c.level = detail::get_or<int>(j, "level", c.level);
    c.surrogate_level = detail::get_or<int>(j, "surrogate_level", c.surrogate_level);
    if (j.contains("prior")) {
      const auto& p = j.at("prior");
      detail::check_keys(p, {"type", "low", "high"}, "prior");
      c.prior_type = detail::get_or<std::string>(p, "type", c.prior_type);
      c.prior_low = detail::get_or<double>(p, "low", c.prior_low);
      c.prior_high = detail::get_or<double>(p, "high", c.prior_high);
    } else if (c.problem == "elliptic_lognormal") {
      c.prior_type = "gaussian";
    }
    if (j.contains("observation")) {
      const auto& o = j.at("observation");
      detail::check_keys(o, {"truth", "sigma2", "noise_seed", "zero_noise", "path"},
                         "observation");
      c.truth = detail::get_or<std::vector<double>>(o, "truth", c.truth);
      c.sigma2 = detail::get_or<double>(o, "sigma2", c.sigma2);
      c.noise_seed = detail::get_or<std::uint64_t>(o, "noise_seed", c.noise_seed);
      c.zero_noise = detail::get_or<bool>(o, "zero_noise", c.zero_noise);
      c.observations_path = detail::get_or<std::string>(o, "path", c.observations_path);
    }
    if (j.contains("surrogate")) {
      const auto& s = j.at("surrogate");
      detail::check_keys(s,
                         {"hidden", "epochs", "train_seed", "dataset_count", "dataset_seed",
                          "fractions", "adam_step", "cosine_decay", "epsilon_reference_offset",
                          "epsilon_reference_draws", "epsilon_reference_seed"},
                         "surrogate");
      c.surrogate.hidden = detail::get_or<std::vector<int>>(s, "hidden", c.surrogate.hidden);
      c.surrogate.epochs = detail::get_or<int>(s, "epochs", c.surrogate.epochs);
      c.surrogate.train_seed =
          detail::get_or<std::uint64_t>(s, "train_seed", c.surrogate.train_seed);
      c.surrogate.dataset_count =
          detail::get_or<int>(s, "dataset_count", c.surrogate.dataset_count);
      c.surrogate.dataset_seed =
          detail::get_or<std::uint64_t>(s, "dataset_seed", c.surrogate.dataset_seed);
      c.surrogate.fractions =
          detail::get_or<std::array<double, 3>>(s, "fractions", c.surrogate.fractions);
      c.surrogate.adam_step = detail::get_or<double>(s, "adam_step", c.surrogate.adam_step);
      c.surrogate.cosine_decay =
          detail::get_or<bool>(s, "cosine_decay", c.surrogate.cosine_decay);
      c.surrogate.epsilon_reference_offset = detail::get_or<int>(
          s, "epsilon_reference_offset", c.surrogate.epsilon_reference_offset);
      c.surrogate.epsilon_reference_draws = detail::get_or<int>(
          s, "epsilon_reference_draws", c.surrogate.epsilon_reference_draws);
      c.surrogate.epsilon_reference_seed = detail::get_or<std::uint64_t>(
          s, "epsilon_reference_seed", c.surrogate.epsilon_reference_seed);
    }
    if (j.contains("chains")) {
      const auto& h = j.at("chains");
      detail::check_keys(h,
                         {"kernel", "step", "beta", "ml_length", "num_length", "burn_in",
                          "thin", "ml_seed", "num_seed", "short_seed"},
                         "chains");
      c.chains.kernel = detail::get_or<std::string>(h, "kernel", c.chains.kernel);
      c.chains.step = detail::get_or<double>(h, "step", c.chains.step);
      c.chains.beta = detail::get_or<double>(h, "beta", c.chains.beta);
      c.chains.ml_length = detail::get_or<long>(h, "ml_length", c.chains.ml_length);
      c.chains.num_length = detail::get_or<long>(h, "num_length", c.chains.num_length);
      c.chains.burn_in = detail::get_or<int>(h, "burn_in", c.chains.burn_in);
      c.chains.thin = detail::get_or<int>(h, "thin", c.chains.thin);
      c.chains.ml_seed = detail::get_or<std::uint64_t>(h, "ml_seed", c.chains.ml_seed);
      c.chains.num_seed = detail::get_or<std::uint64_t>(h, "num_seed", c.chains.num_seed);
      c.chains.short_seed =
          detail::get_or<std::uint64_t>(h, "short_seed", c.chains.short_seed);
    }
    if (j.contains("quadrature")) {
      const auto& q = j.at("quadrature");
      detail::check_keys(q, {"points", "reference_level"}, "quadrature");
      c.quadrature.points = detail::get_or<int>(q, "points", c.quadrature.points);
      c.quadrature.reference_level =
          detail::get_or<int>(q, "reference_level", c.quadrature.reference_level);
    }
    c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir);
    c.model_path = detail::get_or<std::string>(j, "model_path", c.model_path);
    c.dataset_path = detail::get_or<std::string>(j, "dataset_path", c.dataset_path);
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return from_json(j);
  }
};

}  // namespace htmc

#endif
