#ifndef HTMC_MLP_HPP
#define HTMC_MLP_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "htmc/dataset.hpp"
#include "htmc/model.hpp"
#include "htmc/rng.hpp"

namespace htmc {

// Fully connected ReLU network, identity output layer. Inputs are mapped
// affinely to [-1, 1] with constants stored in the model file so evaluation
// is self-contained.
struct MlpModel {
  std::vector<Eigen::MatrixXd> weights;  // layer i: in x out
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd norm_lo, norm_hi;  // input normalization range
  std::uint64_t train_seed = 0;
  int epochs = 0;
  std::vector<double> loss_history;

  int input_dim() const { return static_cast<int>(weights.front().rows()); }
  int output_dim() const { return static_cast<int>(weights.back().cols()); }

  Eigen::VectorXd normalize(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      const double span = norm_hi[j] - norm_lo[j];
      out[j] = span > 0.0 ? 2.0 * (z[j] - norm_lo[j]) / span - 1.0 : z[j];
    }
    return out;
  }

  Eigen::VectorXd predict(const Eigen::VectorXd& z) const {
    if (z.size() != weights.front().rows())
      throw std::invalid_argument("input dimension mismatch");
    Eigen::VectorXd h = normalize(z);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      h = (weights[i].transpose() * h + biases[i]).eval();
      if (i + 1 < weights.size()) h = h.cwiseMax(0.0);
    }
    return h;
  }

  // Batched evaluation, rows are samples.
  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& z) const {
    Eigen::MatrixXd h(z.rows(), z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double span = norm_hi[j] - norm_lo[j];
      if (span > 0.0)
        h.col(j) = (2.0 * (z.col(j).array() - norm_lo[j]) / span - 1.0).matrix();
      else
        h.col(j) = z.col(j);
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
      h = ((h * weights[i]).rowwise() + biases[i].transpose()).eval();
      if (i + 1 < weights.size()) h = h.cwiseMax(0.0);
    }
    return h;
  }
};

// ForwardModel adapter over a trained network.
class SurrogateForward : public ForwardModel {
public:
  explicit SurrogateForward(MlpModel model) : model_(std::move(model)) {}

  Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const override {
    return model_.predict(z);
  }
  int output_dim() const override { return model_.output_dim(); }
  CostClass cost_class() const override { return CostClass::Surrogate; }
  const MlpModel& model() const { return model_; }

private:
  MlpModel model_;
};

struct AdamParams {
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool cosine_decay = false;  // anneal the step to zero over the epoch budget
};

class TrainingError : public std::runtime_error {
public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch(epoch) {}
  int epoch;
};

// Full-batch Adam on mean squared error. Deterministic given the seed.
inline MlpModel train_mlp(const Dataset& data, const std::vector<int>& hidden,
                          const AdamParams& adam, int epochs, std::uint64_t seed) {
  if (data.count() == 0) throw std::invalid_argument("empty dataset");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (data.train_idx.empty()) throw std::invalid_argument("empty training split");

  const int n_in = static_cast<int>(data.inputs.cols());
  const int n_out = static_cast<int>(data.targets.cols());
  std::vector<int> sizes;
  sizes.push_back(n_in);
  for (int hsz : hidden) sizes.push_back(hsz);
  sizes.push_back(n_out);
  const std::size_t n_layers = sizes.size() - 1;

  MlpModel model;
  model.train_seed = seed;
  model.epochs = epochs;
  model.norm_lo.resize(n_in);
  model.norm_hi.resize(n_in);
  for (int j = 0; j < n_in; ++j) {
    model.norm_lo[j] = data.inputs.col(j).minCoeff();
    model.norm_hi[j] = data.inputs.col(j).maxCoeff();
  }

  // He initialization.
  Rng rng(seed);
  for (std::size_t i = 0; i < n_layers; ++i) {
    const int rows = sizes[i], cols = sizes[i + 1];
    const double sd = std::sqrt(2.0 / rows);
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = sd * rng.normal();
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(cols));
  }

  const Eigen::MatrixXd x_train = data.rows(data.inputs, data.train_idx);
  const Eigen::MatrixXd y_train = data.rows(data.targets, data.train_idx);
  const auto n_samples = static_cast<double>(x_train.rows());

  Eigen::MatrixXd x_norm(x_train.rows(), x_train.cols());
  for (int j = 0; j < n_in; ++j) {
    const double span = model.norm_hi[j] - model.norm_lo[j];
    if (span > 0.0)
      x_norm.col(j) =
          (2.0 * (x_train.col(j).array() - model.norm_lo[j]) / span - 1.0).matrix();
    else
      x_norm.col(j) = x_train.col(j);
  }

  std::vector<Eigen::MatrixXd> m_w(n_layers), v_w(n_layers);
  std::vector<Eigen::VectorXd> m_b(n_layers), v_b(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    m_w[i] = Eigen::MatrixXd::Zero(sizes[i], sizes[i + 1]);
    v_w[i] = m_w[i];
    m_b[i] = Eigen::VectorXd::Zero(sizes[i + 1]);
    v_b[i] = m_b[i];
  }

  std::vector<Eigen::MatrixXd> activations(n_layers + 1);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    // forward
    activations[0] = x_norm;
    for (std::size_t i = 0; i < n_layers; ++i) {
      activations[i + 1] =
          ((activations[i] * model.weights[i]).rowwise() + model.biases[i].transpose()).eval();
      if (i + 1 < n_layers) activations[i + 1] = activations[i + 1].cwiseMax(0.0);
    }
    const Eigen::MatrixXd resid = activations[n_layers] - y_train;
    const double loss = resid.squaredNorm() / (n_samples * n_out);
    if (!std::isfinite(loss)) throw TrainingError("NaN loss during training", epoch);
    model.loss_history.push_back(loss);

    // backward
    Eigen::MatrixXd grad_out = 2.0 * resid / (n_samples * n_out);
    for (std::size_t i = n_layers; i-- > 0;) {
      const Eigen::MatrixXd grad_w = activations[i].transpose() * grad_out;
      const Eigen::VectorXd grad_b = grad_out.colwise().sum().transpose();
      if (i > 0) {
        grad_out = (grad_out * model.weights[i].transpose()).eval();
        grad_out = grad_out.array() * (activations[i].array() > 0.0).cast<double>();
      }
      // Adam update
      const double lr =
          adam.cosine_decay
              ? adam.step * 0.5 * (1.0 + std::cos(M_PI * epoch / epochs))
              : adam.step;
      const double t = epoch + 1;
      const double corr1 = 1.0 - std::pow(adam.beta1, t);
      const double corr2 = 1.0 - std::pow(adam.beta2, t);
      m_w[i] = adam.beta1 * m_w[i] + (1.0 - adam.beta1) * grad_w;
      v_w[i] = adam.beta2 * v_w[i].array().matrix() +
               (1.0 - adam.beta2) * grad_w.array().square().matrix();
      model.weights[i].array() -= lr * (m_w[i].array() / corr1) /
                                  ((v_w[i].array() / corr2).sqrt() + adam.eps);
      m_b[i] = adam.beta1 * m_b[i] + (1.0 - adam.beta1) * grad_b;
      v_b[i] = adam.beta2 * v_b[i].array().matrix() +
               (1.0 - adam.beta2) * grad_b.array().square().matrix();
      model.biases[i].array() -= lr * (m_b[i].array() / corr1) /
                                 ((v_b[i].array() / corr2).sqrt() + adam.eps);
    }
  }
  return model;
}

namespace detail {
constexpr std::uint32_t kMlpVersion = 1;
constexpr char kMlpMagic[4] = {'H', 'M', 'L', 'P'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated model file");
}
}  // namespace detail

// Binary little-endian model file: magic "HMLP", version, layer count,
// per-layer rows/cols + row-major weights + biases, then normalization.
inline void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write(detail::kMlpMagic, 4);
  detail::write_pod(out, detail::kMlpVersion);
  detail::write_pod(out, static_cast<std::uint32_t>(model.weights.size()));
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    const auto& w = model.weights[i];
    detail::write_pod(out, static_cast<std::uint32_t>(w.rows()));
    detail::write_pod(out, static_cast<std::uint32_t>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) detail::write_pod(out, w(r, c));
    for (Eigen::Index c = 0; c < model.biases[i].size(); ++c)
      detail::write_pod(out, model.biases[i][c]);
  }
  detail::write_pod(out, static_cast<std::uint32_t>(model.norm_lo.size()));
  for (Eigen::Index j = 0; j < model.norm_lo.size(); ++j) detail::write_pod(out, model.norm_lo[j]);
  for (Eigen::Index j = 0; j < model.norm_hi.size(); ++j) detail::write_pod(out, model.norm_hi[j]);
  detail::write_pod(out, model.train_seed);
  detail::write_pod(out, static_cast<std::uint32_t>(model.epochs));
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, detail::kMlpMagic, 4) != 0)
    throw std::runtime_error("bad model file magic");
  std::uint32_t version;
  detail::read_pod(in, version);
  if (version != detail::kMlpVersion)
    throw std::runtime_error("unsupported model file version");
  std::uint32_t n_layers;
  detail::read_pod(in, n_layers);
  MlpModel model;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    std::uint32_t rows, cols;
    detail::read_pod(in, rows);
    detail::read_pod(in, cols);
    Eigen::MatrixXd w(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) detail::read_pod(in, w(r, c));
    Eigen::VectorXd b(cols);
    for (std::uint32_t c = 0; c < cols; ++c) detail::read_pod(in, b[c]);
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  std::uint32_t n_in;
  detail::read_pod(in, n_in);
  model.norm_lo.resize(n_in);
  model.norm_hi.resize(n_in);
  for (std::uint32_t j = 0; j < n_in; ++j) detail::read_pod(in, model.norm_lo[j]);
  for (std::uint32_t j = 0; j < n_in; ++j) detail::read_pod(in, model.norm_hi[j]);
  detail::read_pod(in, model.train_seed);
  std::uint32_t epochs;
  detail::read_pod(in, epochs);
  model.epochs = static_cast<int>(epochs);
  return model;
}

// Surrogate error exponent relative to the numerical error at the same level.
struct SurrogateErrorEstimate {
  double err_ml;
  double err_num;
  double epsilon;
};

inline SurrogateErrorEstimate estimate_epsilon(double err_ml, double err_num) {
  if (!(err_ml > 0.0) || !(err_num > 0.0))
    throw std::invalid_argument("errors must be positive");
  return {err_ml, err_num, std::log2(err_ml / err_num)};
}

}  // namespace htmc

#endif
