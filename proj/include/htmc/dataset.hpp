#ifndef HTMC_DATASET_HPP
#define HTMC_DATASET_HPP

#include <Eigen/Dense>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "htmc/model.hpp"
#include "htmc/prior.hpp"

namespace htmc {

// Input/target pairs for surrogate training, with a fixed train/val/test split.
struct Dataset {
  Eigen::MatrixXd inputs;   // count x n
  Eigen::MatrixXd targets;  // count x k
  std::vector<int> train_idx, val_idx, test_idx;
  std::uint64_t gen_seed = 0;

  int count() const { return static_cast<int>(inputs.rows()); }

  Eigen::MatrixXd rows(const Eigen::MatrixXd& m, const std::vector<int>& idx) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
    return out;
  }
};

inline Dataset generate_dataset(const ForwardModel& model, const PriorSpec& prior,
                                int count, const std::array<double, 3>& split_fracs,
                                std::uint64_t seed) {
  if (count < 10) throw std::invalid_argument("dataset count must be >= 10");
  const double fsum = split_fracs[0] + split_fracs[1] + split_fracs[2];
  if (std::abs(fsum - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");

  const auto zs = sample_prior(prior, seed, count);
  Dataset data;
  data.gen_seed = seed;
  data.inputs.resize(count, zs[0].size());
  data.targets.resize(count, model.output_dim());
  for (int i = 0; i < count; ++i) {
    data.inputs.row(i) = zs[static_cast<std::size_t>(i)].transpose();
    data.targets.row(i) = model.evaluate(zs[static_cast<std::size_t>(i)]).transpose();
  }
  const int n_train = static_cast<int>(std::llround(split_fracs[0] * count));
  const int n_val = static_cast<int>(std::llround(split_fracs[1] * count));
  for (int i = 0; i < count; ++i) {
    if (i < n_train)
      data.train_idx.push_back(i);
    else if (i < n_train + n_val)
      data.val_idx.push_back(i);
    else
      data.test_idx.push_back(i);
  }
  return data;
}

// CSV: z_1..z_n, t_1..t_k per row; JSON sidecar carries seed and split indices.
inline void save_dataset(const Dataset& data, const std::string& csv_path,
                         const std::string& sidecar_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot open " + csv_path);
  out.precision(17);
  const Eigen::Index n = data.inputs.cols(), k = data.targets.cols();
  for (Eigen::Index j = 0; j < n; ++j) out << "z_" << (j + 1) << ',';
  for (Eigen::Index j = 0; j < k; ++j) out << "t_" << (j + 1) << (j + 1 < k ? ',' : '\n');
  for (int i = 0; i < data.count(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out << data.inputs(i, j) << ',';
    for (Eigen::Index j = 0; j < k; ++j)
      out << data.targets(i, j) << (j + 1 < k ? ',' : '\n');
  }
  nlohmann::json side;
  side["gen_seed"] = data.gen_seed;
  side["train_idx"] = data.train_idx;
  side["val_idx"] = data.val_idx;
  side["test_idx"] = data.test_idx;
  std::ofstream sout(sidecar_path);
  if (!sout) throw std::runtime_error("cannot open " + sidecar_path);
  sout << side.dump(2) << '\n';
}

inline Dataset load_dataset(const std::string& csv_path, const std::string& sidecar_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file");
  int n = 0, k = 0;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.rfind("z_", 0) == 0)
        ++n;
      else if (tok.rfind("t_", 0) == 0)
        ++k;
      else
        throw std::runtime_error("bad dataset header column: " + tok);
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    if (static_cast<int>(row.size()) != n + k)
      throw std::runtime_error("bad dataset row width");
    rows.push_back(std::move(row));
  }
  Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(rows.size()), n);
  data.targets.resize(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < n; ++j) data.inputs(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    for (int j = 0; j < k; ++j)
      data.targets(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(n + j)];
  }
  std::ifstream sin(sidecar_path);
  if (!sin) throw std::runtime_error("cannot open " + sidecar_path);
  nlohmann::json side;
  sin >> side;
  data.gen_seed = side.at("gen_seed").get<std::uint64_t>();
  data.train_idx = side.at("train_idx").get<std::vector<int>>();
  data.val_idx = side.at("val_idx").get<std::vector<int>>();
  data.test_idx = side.at("test_idx").get<std::vector<int>>();
  return data;
}

}  // namespace htmc

#endif
