#pragma once

#include <vector>

#include "flowmorph/numerics/dual.hpp"
#include "flowmorph/numerics/ops.hpp"
#include "flowmorph/numerics/rng.hpp"
#include "flowmorph/numerics/tape.hpp"

namespace fm::numerics {

struct DenseLayer {
  Mat weight;  // out x in
  Mat bias;    // 1 x out
  Activation activation = Activation::identity;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  bool empty() const { return layers.empty(); }
  Eigen::Index input_width() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Eigen::Index output_width() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
  std::size_t parameter_count() const;
  bool uses(Activation a) const;

  // Checks that adjacent widths chain and biases match; throws on violation.
  void validate() const;
};

// Glorot-uniform weights, zero biases.
MlpParams make_mlp(const std::vector<int>& widths, Activation hidden, Activation output, Rng& rng);

// Backbone: (3 + latent_dim) -> 4w -> 2w -> w -> 3, linear head.
MlpParams make_backbone(int latent_dim, int width, Activation hidden, Rng& rng);

// Odd sign network: latent_dim -> w -> 1, tanh everywhere, biases pinned to 0.
MlpParams make_sign_net(int latent_dim, int width, Rng& rng);

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input);

// Batched evaluation, one sample per row.
Mat mlp_forward_batch(const MlpParams& params, const Mat& input);

// Exact d(output)/d(x) of a 3-output network whose input is concat(x, conditioning).
Eigen::Matrix3d spatial_jacobian(const MlpParams& params, const Eigen::Vector3d& x,
                                 const Eigen::VectorXd& conditioning);

// Parameters of one network lifted into a computation mode: plain matrices
// for eager evaluation, or tape variables for differentiation.
template <class P>
struct MlpView {
  std::vector<P> weights;
  std::vector<P> biases;
  std::vector<Activation> activations;
};

inline MlpView<Mat> view_of(const MlpParams& p) {
  MlpView<Mat> v;
  for (const auto& l : p.layers) {
    v.weights.push_back(l.weight);
    v.biases.push_back(l.bias);
    v.activations.push_back(l.activation);
  }
  return v;
}

// When `trainable` is false the parameters enter the tape as constants.
MlpView<Var> record_on(Tape& tape, const MlpParams& p, bool trainable, bool trainable_biases = true);

// Collects gradients for a view recorded with record_on after backward().
MlpParams gradients_of(const Tape& tape, const MlpView<Var>& view);

// Applies the network to a batch held in any computation mode.
template <class T, class P>
T mlp_apply(const MlpView<P>& net, const T& input) {
  T h = input;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    h = add_row(matmul_wt(h, net.weights[i]), net.biases[i]);
    if (net.activations[i] != Activation::identity) h = act(net.activations[i], h);
  }
  return h;
}

// Network whose input is concat(x, conditioning) with x spatial. The first
// layer is split so the conditioning term is computed once per batch and only
// the spatial columns see per-row (and per-tangent) work.
template <class P>
struct SplitMlpView {
  P space_weight;  // out x 3
  P cond_weight;   // out x c
  P bias;          // 1 x out
  Activation activation = Activation::identity;
  MlpView<P> tail;
};

SplitMlpView<Mat> split_view_of(const MlpParams& p);
SplitMlpView<Var> record_split_on(Tape& tape, const MlpParams& p, bool trainable);
MlpParams gradients_of(const Tape& tape, const SplitMlpView<Var>& view);

template <class T, class P>
T split_apply(const SplitMlpView<P>& net, const T& x, const P& cond) {
  const P row = add(matmul_wt(cond, net.cond_weight), net.bias);
  T h = add_row(matmul_wt(x, net.space_weight), row);
  if (net.activation != Activation::identity) h = act(net.activation, h);
  return mlp_apply(net.tail, h);
}

}  // namespace fm::numerics
