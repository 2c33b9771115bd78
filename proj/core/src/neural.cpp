#include "lazylp/neural.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "lazylp/csv.hpp"
#include "lazylp/error.hpp"

namespace lazylp {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeError, what);
}

void check_dims(const std::vector<int>& dims) {
  require(dims.size() >= 2, "network needs at least an input and an output layer");
  for (int d : dims) require(d > 0, "layer dimensions must be positive");
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

}  // namespace

Mlp::Mlp(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  check_dims(dims_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(dims_[l + 1]));
  }
}

Mlp::Mlp(std::vector<int> layer_dims, std::uint64_t seed) : Mlp(std::move(layer_dims)) {
  std::mt19937_64 rng(seed);
  for (auto& w : weights_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    // Row-major fill order so the draw sequence matches the checkpoint layout.
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = uniform(rng);
  }
}

Mlp Mlp::zeros(std::vector<int> layer_dims) { return Mlp(std::move(layer_dims)); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  require(x.size() == input_dim(), "input length does not match the network");
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    a = l + 1 < weights_.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  require(inputs.rows() == input_dim(), "batch rows do not match the input dimension");
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = weights_[l] * a;
    z.colwise() += biases_[l];
    a = l + 1 < weights_.size() ? relu(z) : std::move(z);
  }
  return a;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.dims_ != b.dims_) return false;
  for (std::size_t l = 0; l < a.weights_.size(); ++l) {
    if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
  }
  return true;
}

ForwardCache forward_cached(const Mlp& net, const Eigen::MatrixXd& inputs) {
  require(inputs.rows() == net.input_dim(), "batch rows do not match the input dimension");
  ForwardCache cache;
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd z = net.weight(l) * a;
    z.colwise() += net.bias(l);
    cache.inputs.push_back(std::move(a));
    a = l + 1 < net.num_layers() ? relu(z) : z;
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(a);
  return cache;
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.bias(l).size()));
  }
  return g;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& b : biases) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

Gradients backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_out) {
  require(cache.pre.size() == net.num_layers(), "forward cache does not belong to this network");
  require(grad_out.rows() == net.output_dim() && grad_out.cols() == cache.output.cols(),
          "output gradient shape mismatch");
  Gradients g = Gradients::zeros_like(net);
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    if (l + 1 < net.num_layers()) {
      // ReLU: units with non-positive pre-activation pass no gradient.
      delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    }
    g.weights[l].noalias() = delta * cache.inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) delta = net.weight(l).transpose() * delta;
  }
  return g;
}

AdamState AdamState::for_network(const Mlp& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  const Gradients z = Gradients::zeros_like(net);
  s.m_w = s.v_w = z.weights;
  s.m_b = s.v_b = z.biases;
  return s;
}

void adam_update(Mlp& net, const Gradients& grads, AdamState& opt) {
  require(grads.weights.size() == net.num_layers() && opt.m_w.size() == net.num_layers(),
          "gradient/optimizer layer count mismatch");
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  auto apply = [&](auto& param, const auto& grad, auto& m, auto& v) {
    require(param.rows() == grad.rows() && param.cols() == grad.cols(), "gradient shape mismatch");
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    param.array() -= opt.learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + opt.epsilon);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    apply(net.weight(l), grads.weights[l], opt.m_w[l], opt.v_w[l]);
    apply(net.bias(l), grads.biases[l], opt.m_b[l], opt.v_b[l]);
  }
}

void copy_parameters(const Mlp& src, Mlp& dst) {
  require(src.layer_dims() == dst.layer_dims(), "copy between networks of different shape");
  for (std::size_t l = 0; l < src.num_layers(); ++l) {
    dst.weight(l) = src.weight(l);
    dst.bias(l) = src.bias(l);
  }
}

namespace {

nlohmann::json row_major(const Eigen::MatrixXd& m) {
  nlohmann::json flat = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return flat;
}

nlohmann::json vec(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void fill_matrix(Eigen::MatrixXd& m, const nlohmann::json& flat) {
  require(flat.is_array() && flat.size() == static_cast<std::size_t>(m.size()),
          "checkpoint weight array has the wrong length");
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[k++].get<double>();
}

void fill_vector(Eigen::VectorXd& v, const nlohmann::json& flat) {
  require(flat.is_array() && flat.size() == static_cast<std::size_t>(v.size()),
          "checkpoint bias array has the wrong length");
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = flat[static_cast<std::size_t>(i)].get<double>();
}

}  // namespace

nlohmann::json to_checkpoint(const Mlp& net, const CheckpointMeta& meta, const AdamState* opt) {
  nlohmann::json doc;
  doc["layer_dims"] = net.layer_dims();
  doc["weights"] = nlohmann::json::array();
  doc["biases"] = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    doc["weights"].push_back(row_major(net.weight(l)));
    doc["biases"].push_back(vec(net.bias(l)));
  }
  doc["metadata"] = {{"seed", meta.seed},
                     {"training_step", meta.training_step},
                     {"config_hash", meta.config_hash}};
  if (opt != nullptr) {
    nlohmann::json o;
    o["learning_rate"] = opt->learning_rate;
    o["beta1"] = opt->beta1;
    o["beta2"] = opt->beta2;
    o["epsilon"] = opt->epsilon;
    o["step"] = opt->step;
    for (const char* key : {"m_w", "v_w", "m_b", "v_b"}) o[key] = nlohmann::json::array();
    for (std::size_t l = 0; l < opt->m_w.size(); ++l) {
      o["m_w"].push_back(row_major(opt->m_w[l]));
      o["v_w"].push_back(row_major(opt->v_w[l]));
      o["m_b"].push_back(vec(opt->m_b[l]));
      o["v_b"].push_back(vec(opt->v_b[l]));
    }
    doc["optimizer"] = std::move(o);
  }
  return doc;
}

Mlp from_checkpoint(const nlohmann::json& doc, CheckpointMeta* meta) {
  try {
    auto dims = doc.at("layer_dims").get<std::vector<int>>();
    Mlp net = Mlp::zeros(dims);
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    require(weights.size() == net.num_layers() && biases.size() == net.num_layers(),
            "checkpoint layer count does not match layer_dims");
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      fill_matrix(net.weight(l), weights[l]);
      fill_vector(net.bias(l), biases[l]);
    }
    if (meta != nullptr && doc.contains("metadata")) {
      const auto& m = doc["metadata"];
      meta->seed = m.value("seed", std::uint64_t{0});
      meta->training_step = m.value("training_step", std::int64_t{0});
      meta->config_hash = m.value("config_hash", std::string{});
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ShapeError, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Mlp& net, const CheckpointMeta& meta,
                     const AdamState* opt) {
  auto out = csv::open_for_write(path);
  out << to_checkpoint(net, meta, opt).dump() << '\n';
}

Mlp load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return from_checkpoint(doc, meta);
}

}  // namespace lazylp
