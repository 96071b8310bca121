#pragma once

#include "beamopt/features.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace beamopt {

/// Architecture and training regime of the value predictor.
struct PredictorSpec {
  int input_dim = feature_dim(4);
  std::vector<int> hidden = {128, 64};
  int epochs = 10;
  double learning_rate = 1e-3;
  /// Samples per Adam step; 0 means full batch.
  int batch_size = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Fully connected net: ReLU on hidden layers, sigmoid on the scalar output.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers);

  int input_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Throws std::invalid_argument on dimension mismatch.
  double forward(const FeatureVector& x) const;
  /// Columns of `x` are samples; returns one prediction per column.
  Eigen::VectorXd forward_batch(const Eigen::MatrixXd& x) const;

  /// Mean squared error over the columns of `x` and its gradient, laid out
  /// like layers().
  double loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                           std::vector<DenseLayer>& grads) const;

  size_t num_params() const;
  Eigen::VectorXd flat_params() const;
  void set_flat_params(const Eigen::VectorXd& p);

  nlohmann::json to_json() const;
  static Network from_json(const nlohmann::json& j);

  friend bool operator==(const Network& a, const Network& b);

 private:
  std::vector<DenseLayer> layers_;
};

/// Zero biases; weights uniform in +-sqrt(6 / fan_in) for ReLU layers and
/// +-sqrt(3 / fan_in) for the output layer, drawn from spec.seed.
Network init_network(const PredictorSpec& spec);

struct TrainEntry {
  std::string key;
  FeatureVector features;
  double value = 0;
};

/// Visited states with their true values; keys are unique.
class TrainSet {
 public:
  /// False when `key` is already present. Throws when value is outside
  /// [0, 1] or the dimension differs from earlier entries.
  bool add(std::string key, FeatureVector features, double value);
  bool contains(const std::string& key) const { return index_.count(key) > 0; }
  const std::vector<TrainEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<TrainEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

struct TrainReport {
  double initial_loss = 0;
  double final_loss = 0;
  /// Full-data loss after each epoch.
  std::vector<double> epoch_losses;
};

/// Fresh init_network(spec), then spec.epochs passes of Adam on the MSE over
/// `norm`-normalized features.
Network train(const PredictorSpec& spec, const TrainSet& data, const NormStats& norm,
              TrainReport* report = nullptr);

/// Max relative error between the analytic gradient of (f(x) - target)^2
/// and central differences (step 1e-5) over `samples` random parameters of a
/// network initialized from `spec`. Relative error is
/// |a - n| / max(|a|, |n|, 1e-6).
double gradient_check(const PredictorSpec& spec, const FeatureVector& x, double target,
                      int samples = 32);

/// A trained network together with the normalization it was trained on.
class ValuePredictor {
 public:
  ValuePredictor() = default;
  ValuePredictor(Network net, NormStats norm) : net_(std::move(net)), norm_(std::move(norm)) {}

  /// Computes NormStats from `data`, then trains.
  static ValuePredictor fit(const PredictorSpec& spec, const TrainSet& data,
                            TrainReport* report = nullptr);

  double predict(const FeatureVector& raw) const;
  std::vector<double> predict_batch(const std::vector<FeatureVector>& raw) const;

  const Network& network() const { return net_; }
  const NormStats& norm() const { return norm_; }

 private:
  Network net_;
  NormStats norm_;
};

}  // namespace beamopt
