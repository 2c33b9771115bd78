#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace lazylp {

// Fully connected ReLU network with an identity output layer. Weights are
// stored out x in; batches are column-major, one sample per column.
class Mlp {
 public:
  Mlp() = default;
  // Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  Mlp(std::vector<int> layer_dims, std::uint64_t seed);
  static Mlp zeros(std::vector<int> layer_dims);

  const std::vector<int>& layer_dims() const noexcept { return dims_; }
  std::size_t num_layers() const noexcept { return weights_.size(); }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }

  Eigen::MatrixXd& weight(std::size_t layer) { return weights_.at(layer); }
  const Eigen::MatrixXd& weight(std::size_t layer) const { return weights_.at(layer); }
  Eigen::VectorXd& bias(std::size_t layer) { return biases_.at(layer); }
  const Eigen::VectorXd& bias(std::size_t layer) const { return biases_.at(layer); }

  std::size_t parameter_count() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  explicit Mlp(std::vector<int> layer_dims);

  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

// Per-layer intermediates of a batch forward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  Eigen::MatrixXd output;
};

ForwardCache forward_cached(const Mlp& net, const Eigen::MatrixXd& inputs);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static Gradients zeros_like(const Mlp& net);
  double max_abs() const;
};

// Gradients of sum(output .* grad_out) with respect to every parameter.
Gradients backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_out);

// Adam with bias-corrected moments.
struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;

  static AdamState for_network(const Mlp& net, double learning_rate = 1e-4);
};

void adam_update(Mlp& net, const Gradients& grads, AdamState& opt);

// Bit-exact parameter copy between networks of identical shape.
void copy_parameters(const Mlp& src, Mlp& dst);

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::int64_t training_step = 0;
  std::string config_hash;
};

nlohmann::json to_checkpoint(const Mlp& net, const CheckpointMeta& meta,
                             const AdamState* opt = nullptr);
Mlp from_checkpoint(const nlohmann::json& doc, CheckpointMeta* meta = nullptr);

void save_checkpoint(const std::string& path, const Mlp& net, const CheckpointMeta& meta,
                     const AdamState* opt = nullptr);
Mlp load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace lazylp
