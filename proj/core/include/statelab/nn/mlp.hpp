#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statelab/rng.hpp"

namespace statelab::nn {

enum class Activation { kLinear, kRelu };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Non-owning view of one parameter tensor.
struct ParamRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

/// Dense stack with rectifiers between layers. Samples are columns.
class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input of every layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of every layer
  };

  Mlp() = default;
  /// He-initialized weights, zero biases. dims = {in, hidden..., out}.
  Mlp(const std::vector<int>& dims, Activation output, Rng& rng);

  int input_dim() const;
  int output_dim() const;
  std::vector<int> dims() const;
  Activation output_activation() const { return output_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;

  /// Accumulates parameter gradients into `grad` (same shapes) and returns
  /// the gradient with respect to the input.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& grad_out, Mlp& grad) const;

  /// Copy with every parameter set to zero.
  Mlp zeros_like() const;

  void append_parameters(const std::string& prefix, std::vector<ParamRef>& out);

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  void set_output_activation(Activation a) { output_ = a; }

  bool operator==(const Mlp& other) const;

 private:
  std::vector<DenseLayer> layers_;
  Activation output_ = Activation::kLinear;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments per parameter tensor, in registry order.
struct AdamState {
  std::vector<Eigen::VectorXd> m;
  std::vector<Eigen::VectorXd> v;
  std::int64_t step = 0;
};

/// Bias-corrected Adam update of every tensor in `params` using `grads`.
/// Shapes must match pairwise; the state is lazily sized on first use.
void adam_step(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads,
               AdamState& state, const AdamConfig& config);

/// Sets every tensor in the list to zero.
void zero(const std::vector<ParamRef>& params);

}  // namespace statelab::nn
