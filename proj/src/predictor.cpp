#include "beamopt/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace beamopt {

namespace {

Eigen::MatrixXd to_matrix(const std::vector<FeatureVector>& rows, int dim) {
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(rows.size()));
  for (size_t c = 0; c < rows.size(); ++c) {
    if (static_cast<int>(rows[c].size()) != dim) {
      throw std::invalid_argument("feature dimension mismatch");
    }
    x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(rows[c].data(), dim);
  }
  return x;
}

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

}  // namespace

void PredictorSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("predictor: input_dim must be >= 1");
  if (epochs < 1) throw std::invalid_argument("predictor: epochs must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("predictor: learning_rate must be > 0");
  if (batch_size < 0) throw std::invalid_argument("predictor: batch_size must be >= 0");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("predictor: hidden sizes must be >= 1");
  }
}

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
  for (size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].weights.cols() != layers_[i - 1].weights.rows()) {
      throw std::invalid_argument("network layer shapes do not chain");
    }
  }
  if (layers_.back().weights.rows() != 1) {
    throw std::invalid_argument("network output must be scalar");
  }
}

int Network::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.cols());
}

double Network::forward(const FeatureVector& x) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw std::invalid_argument("forward: expected " + std::to_string(input_dim()) +
                                " features, got " + std::to_string(x.size()));
  }
  return forward_batch(Eigen::Map<const Eigen::VectorXd>(x.data(), input_dim()))(0);
}

Eigen::VectorXd Network::forward_batch(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_dim()) throw std::invalid_argument("forward_batch: dimension mismatch");
  Eigen::MatrixXd a = x;
  for (size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = (layers_[l].weights * a).colwise() + layers_[l].bias;
    if (l + 1 < layers_.size()) {
      a = z.cwiseMax(0.0);
    } else {
      a = sigmoid(z.array()).matrix();
    }
  }
  return a.row(0).transpose();
}

double Network::loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                                  std::vector<DenseLayer>& grads) const {
  const Eigen::Index n = x.cols();
  const size_t L = layers_.size();
  std::vector<Eigen::MatrixXd> acts(L + 1);  // acts[0] = input
  std::vector<Eigen::MatrixXd> pre(L);
  acts[0] = x;
  for (size_t l = 0; l < L; ++l) {
    pre[l] = (layers_[l].weights * acts[l]).colwise() + layers_[l].bias;
    acts[l + 1] = l + 1 < L ? pre[l].cwiseMax(0.0).eval()
                            : sigmoid(pre[l].array()).matrix().eval();
  }
  const Eigen::RowVectorXd y = acts[L].row(0);
  const Eigen::RowVectorXd err = y - targets.transpose();
  const double loss = err.squaredNorm() / static_cast<double>(n);

  grads.resize(L);
  // d loss / d pre-activation of the output.
  Eigen::MatrixXd delta =
      (2.0 / static_cast<double>(n) * err.array() * y.array() * (1.0 - y.array())).matrix();
  for (size_t l = L; l-- > 0;) {
    grads[l].weights = delta * acts[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers_[l].weights.transpose() * delta;
      delta = (back.array() * (pre[l - 1].array() > 0.0).cast<double>()).matrix();
    }
  }
  return loss;
}

size_t Network::num_params() const {
  size_t n = 0;
  for (const auto& l : layers_) n += static_cast<size_t>(l.weights.size() + l.bias.size());
  return n;
}

Eigen::VectorXd Network::flat_params() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(num_params()));
  Eigen::Index o = 0;
  for (const auto& l : layers_) {
    p.segment(o, l.weights.size()) = Eigen::Map<const Eigen::VectorXd>(l.weights.data(), l.weights.size());
    o += l.weights.size();
    p.segment(o, l.bias.size()) = l.bias;
    o += l.bias.size();
  }
  return p;
}

void Network::set_flat_params(const Eigen::VectorXd& p) {
  if (static_cast<size_t>(p.size()) != num_params()) {
    throw std::invalid_argument("set_flat_params: size mismatch");
  }
  Eigen::Index o = 0;
  for (auto& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(l.weights.data(), l.weights.size()) = p.segment(o, l.weights.size());
    o += l.weights.size();
    l.bias = p.segment(o, l.bias.size());
    o += l.bias.size();
  }
}

nlohmann::json Network::to_json() const {
  nlohmann::json j;
  j["format"] = "beamopt-network";
  j["version"] = 1;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers_) {
    nlohmann::json jl;
    jl["rows"] = l.weights.rows();
    jl["cols"] = l.weights.cols();
    // Row-major weight dump.
    std::vector<double> w;
    w.reserve(static_cast<size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    jl["weights"] = w;
    jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    j["layers"].push_back(std::move(jl));
  }
  return j;
}

Network Network::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "beamopt-network" || j.value("version", 0) != 1) {
    throw std::invalid_argument("unsupported network snapshot");
  }
  std::vector<DenseLayer> layers;
  for (const auto& jl : j.at("layers")) {
    const auto rows = jl.at("rows").get<Eigen::Index>();
    const auto cols = jl.at("cols").get<Eigen::Index>();
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows) {
      throw std::invalid_argument("network snapshot: inconsistent layer shape");
    }
    DenseLayer l;
    l.weights.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = w[static_cast<size_t>(r * cols + c)];
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    layers.push_back(std::move(l));
  }
  return Network(std::move(layers));
}

bool operator==(const Network& a, const Network& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (size_t i = 0; i < a.layers_.size(); ++i) {
    if (a.layers_[i].weights.rows() != b.layers_[i].weights.rows() ||
        a.layers_[i].weights.cols() != b.layers_[i].weights.cols() ||
        a.layers_[i].weights != b.layers_[i].weights || a.layers_[i].bias != b.layers_[i].bias) {
      return false;
    }
  }
  return true;
}

Network init_network(const PredictorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<DenseLayer> layers;
  int fan_in = spec.input_dim;
  std::vector<int> widths = spec.hidden;
  widths.push_back(1);
  for (size_t i = 0; i < widths.size(); ++i) {
    const bool output = i + 1 == widths.size();
    const double limit = std::sqrt((output ? 3.0 : 6.0) / fan_in);
    DenseLayer l;
    l.weights.resize(widths[i], fan_in);
    // Filled in row-major order so the draw sequence does not depend on
    // Eigen's storage order.
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = limit * unit(rng);
    l.bias = Eigen::VectorXd::Zero(widths[i]);
    layers.push_back(std::move(l));
    fan_in = widths[i];
  }
  return Network(std::move(layers));
}

bool TrainSet::add(std::string key, FeatureVector features, double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument("train set: value " + std::to_string(value) +
                                " for " + key + " outside [0, 1]");
  }
  if (!entries_.empty() && features.size() != entries_.front().features.size()) {
    throw std::invalid_argument("train set: feature dimension mismatch");
  }
  if (index_.count(key)) return false;
  index_.emplace(key, entries_.size());
  entries_.push_back({std::move(key), std::move(features), value});
  return true;
}

Network train(const PredictorSpec& spec, const TrainSet& data, const NormStats& norm,
              TrainReport* report) {
  if (data.empty()) throw std::invalid_argument("train: empty training set");
  Network net = init_network(spec);
  const int dim = spec.input_dim;
  std::vector<FeatureVector> rows;
  rows.reserve(data.size());
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (size_t i = 0; i < data.size(); ++i) {
    rows.push_back(norm.apply(data.entries()[i].features));
    y(static_cast<Eigen::Index>(i)) = data.entries()[i].value;
  }
  const Eigen::MatrixXd x = to_matrix(rows, dim);
  const Eigen::Index n = x.cols();
  const Eigen::Index batch = spec.batch_size == 0 ? n : std::min<Eigen::Index>(spec.batch_size, n);

  auto full_loss = [&] {
    const Eigen::VectorXd pred = net.forward_batch(x);
    return (pred - y).squaredNorm() / static_cast<double>(n);
  };
  if (report) {
    report->epoch_losses.clear();
    report->initial_loss = full_loss();
  }

  std::vector<DenseLayer> m1, m2, grads;
  for (const auto& l : net.layers()) {
    m1.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                  Eigen::VectorXd::Zero(l.bias.size())});
  }
  m2 = m1;
  // Shuffling uses a stream distinct from the initialization.
  std::mt19937_64 rng(spec.seed ^ 0x5bd1e995ULL);
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  double b1t = 1.0, b2t = 1.0;
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      if (len == n) {
        xb = x;
        yb = y;
      } else {
        xb.resize(dim, len);
        yb.resize(len);
        for (Eigen::Index c = 0; c < len; ++c) {
          xb.col(c) = x.col(order[static_cast<size_t>(start + c)]);
          yb(c) = y(order[static_cast<size_t>(start + c)]);
        }
      }
      net.loss_and_gradient(xb, yb, grads);
      b1t *= spec.beta1;
      b2t *= spec.beta2;
      const double step = spec.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
      auto& layers = net.layers();
      for (size_t l = 0; l < layers.size(); ++l) {
        m1[l].weights = spec.beta1 * m1[l].weights + (1.0 - spec.beta1) * grads[l].weights;
        m2[l].weights = spec.beta2 * m2[l].weights +
                        (1.0 - spec.beta2) * grads[l].weights.cwiseAbs2();
        m1[l].bias = spec.beta1 * m1[l].bias + (1.0 - spec.beta1) * grads[l].bias;
        m2[l].bias = spec.beta2 * m2[l].bias + (1.0 - spec.beta2) * grads[l].bias.cwiseAbs2();
        layers[l].weights.array() -=
            step * m1[l].weights.array() / (m2[l].weights.array().sqrt() + spec.adam_epsilon);
        layers[l].bias.array() -=
            step * m1[l].bias.array() / (m2[l].bias.array().sqrt() + spec.adam_epsilon);
      }
    }
    if (report) report->epoch_losses.push_back(full_loss());
  }
  if (report) report->final_loss = report->epoch_losses.back();
  return net;
}

double gradient_check(const PredictorSpec& spec, const FeatureVector& x, double target,
                      int samples) {
  Network net = init_network(spec);
  const Eigen::MatrixXd xm = Eigen::Map<const Eigen::VectorXd>(x.data(), spec.input_dim);
  Eigen::VectorXd t(1);
  t(0) = target;
  std::vector<DenseLayer> grads;
  net.loss_and_gradient(xm, t, grads);
  Network flat_grad_holder(grads);
  const Eigen::VectorXd analytic = flat_grad_holder.flat_params();
  const Eigen::VectorXd p0 = net.flat_params();

  std::mt19937_64 rng(spec.seed ^ 0xc0ffeeULL);
  std::uniform_int_distribution<Eigen::Index> pick(0, p0.size() - 1);
  constexpr double h = 1e-5;
  auto loss_at = [&](const Eigen::VectorXd& p) {
    net.set_flat_params(p);
    const double y = net.forward_batch(xm)(0);
    return (y - target) * (y - target);
  };
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::Index i = pick(rng);
    Eigen::VectorXd p = p0;
    p(i) += h;
    const double up = loss_at(p);
    p(i) -= 2 * h;
    const double down = loss_at(p);
    const double numeric = (up - down) / (2 * h);
    const double a = analytic(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  net.set_flat_params(p0);
  return worst;
}

ValuePredictor ValuePredictor::fit(const PredictorSpec& spec, const TrainSet& data,
                                   TrainReport* report) {
  std::vector<FeatureVector> raw;
  raw.reserve(data.size());
  for (const auto& e : data.entries()) raw.push_back(e.features);
  NormStats norm = normalize(raw).second;
  Network net = train(spec, data, norm, report);
  return ValuePredictor(std::move(net), std::move(norm));
}

double ValuePredictor::predict(const FeatureVector& raw) const {
  return net_.forward(norm_.apply(raw));
}

std::vector<double> ValuePredictor::predict_batch(const std::vector<FeatureVector>& raw) const {
  if (raw.empty()) return {};
  std::vector<FeatureVector> rows;
  rows.reserve(raw.size());
  for (const auto& r : raw) rows.push_back(norm_.apply(r));
  const Eigen::VectorXd out = net_.forward_batch(to_matrix(rows, net_.input_dim()));
  return std::vector<double>(out.data(), out.data() + out.size());
}

}  // namespace beamopt
