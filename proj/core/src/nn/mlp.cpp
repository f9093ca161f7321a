#include "statelab/nn/mlp.hpp"

#include <cmath>

#include "statelab/error.hpp"

namespace statelab::nn {

Mlp::Mlp(const std::vector<int>& dims, Activation output, Rng& rng) : output_(output) {
  if (dims.size() < 2) throw ValidationError("Mlp: need at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] < 1 || dims[i + 1] < 1) throw ValidationError("Mlp: layer dims must be positive");
    DenseLayer layer;
    layer.weight.resize(dims[i + 1], dims[i]);
    const double scale = std::sqrt(2.0 / dims[i]);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = scale * rng.normal();
    layer.bias = Eigen::VectorXd::Zero(dims[i + 1]);
    layers_.push_back(std::move(layer));
  }
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

std::vector<int> Mlp::dims() const {
  std::vector<int> d;
  if (layers_.empty()) return d;
  d.push_back(input_dim());
  for (const auto& l : layers_) d.push_back(static_cast<int>(l.weight.rows()));
  return d;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Cache unused;
  return forward(x, unused);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
  if (x.rows() != input_dim()) {
    throw ValidationError("Mlp::forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                          std::to_string(input_dim()));
  }
  cache.inputs.clear();
  cache.pre.clear();
  Eigen::MatrixXd h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cache.inputs.push_back(h);
    Eigen::MatrixXd z = layers_[i].weight * h;
    z.colwise() += layers_[i].bias;
    cache.pre.push_back(z);
    const bool last = i + 1 == layers_.size();
    h = (!last || output_ == Activation::kRelu) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out, Mlp& grad) const {
  Eigen::MatrixXd g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const bool last = k + 1 == layers_.size();
    if (!last || output_ == Activation::kRelu) {
      g = g.cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
    }
    grad.layers_[k].weight.noalias() += g * cache.inputs[k].transpose();
    grad.layers_[k].bias += g.rowwise().sum();
    g = layers_[k].weight.transpose() * g;
  }
  return g;
}

Mlp Mlp::zeros_like() const {
  Mlp out = *this;
  for (auto& l : out.layers_) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return out;
}

void Mlp::append_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    const std::string base = prefix + "." + std::to_string(i);
    out.push_back({base + ".weight", l.weight.data(), l.weight.rows(), l.weight.cols()});
    out.push_back({base + ".bias", l.bias.data(), l.bias.size(), 1});
  }
}

bool Mlp::operator==(const Mlp& other) const {
  if (output_ != other.output_ || layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

void adam_step(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw ValidationError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Eigen::VectorXd::Zero(p.size()));
      state.v.push_back(Eigen::VectorXd::Zero(p.size()));
    }
  }
  if (state.m.size() != params.size()) throw ValidationError("adam_step: optimizer state size mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows != grads[i].rows || params[i].cols != grads[i].cols ||
        state.m[i].size() != params[i].size()) {
      throw ValidationError("adam_step: shape mismatch for " + params[i].name);
    }
    Eigen::Map<Eigen::VectorXd> p(params[i].data, params[i].size());
    Eigen::Map<const Eigen::VectorXd> g(grads[i].data, grads[i].size());
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g.cwiseAbs2();
    p.array() -= config.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + config.eps);
  }
}

void zero(const std::vector<ParamRef>& params) {
  for (const auto& p : params) Eigen::Map<Eigen::VectorXd>(p.data, p.size()).setZero();
}

}  // namespace statelab::nn
