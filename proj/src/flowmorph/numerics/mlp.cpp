#include "flowmorph/numerics/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fm::numerics {

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool MlpParams::uses(Activation a) const {
  for (const auto& l : layers)
    if (l.activation == a) return true;
  return false;
}

void MlpParams::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.rows())
      throw std::invalid_argument("layer " + std::to_string(i) + ": bias width does not match weight rows");
    if (i > 0 && layers[i - 1].weight.rows() != l.weight.cols())
      throw std::invalid_argument("layer " + std::to_string(i) + ": input width does not chain");
  }
}

MlpParams make_mlp(const std::vector<int>& widths, Activation hidden, Activation output, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output widths");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const int in = widths[i], out = widths[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer l;
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-limit, limit);
    l.bias = Mat::Zero(1, out);
    l.activation = (i + 2 == widths.size()) ? output : hidden;
    p.layers.push_back(std::move(l));
  }
  return p;
}

MlpParams make_backbone(int latent_dim, int width, Activation hidden, Rng& rng) {
  if (width < 1 || latent_dim < 0) throw std::invalid_argument("make_backbone: invalid dimensions");
  return make_mlp({3 + latent_dim, 4 * width, 2 * width, width, 3}, hidden, Activation::identity, rng);
}

MlpParams make_sign_net(int latent_dim, int width, Rng& rng) {
  if (width < 1 || latent_dim < 1) throw std::invalid_argument("make_sign_net: invalid dimensions");
  return make_mlp({latent_dim, width, 1}, Activation::tanh, Activation::tanh, rng);
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input) {
  if (input.size() != params.input_width())
    throw std::invalid_argument("mlp_forward: expected input width " + std::to_string(params.input_width()) +
                                ", got " + std::to_string(input.size()));
  Mat row = input.transpose();
  Mat out = mlp_apply(view_of(params), row);
  return out.row(0).transpose();
}

Mat mlp_forward_batch(const MlpParams& params, const Mat& input) {
  if (input.cols() != params.input_width()) throw std::invalid_argument("mlp_forward_batch: width mismatch");
  return mlp_apply(view_of(params), input);
}

Eigen::Matrix3d spatial_jacobian(const MlpParams& params, const Eigen::Vector3d& x,
                                 const Eigen::VectorXd& conditioning) {
  if (params.output_width() != 3) throw std::invalid_argument("spatial_jacobian: output width must be 3");
  if (params.input_width() != 3 + conditioning.size())
    throw std::invalid_argument("spatial_jacobian: input width mismatch");
  if (params.uses(Activation::relu))
    throw std::invalid_argument("spatial_jacobian: relu is not differentiable; use elu or tanh");
  const auto net = split_view_of(params);
  Mat xr = x.transpose();
  Mat cond = conditioning.transpose();
  const Dual<Mat> out = split_apply(net, seed_spatial(xr), cond);
  Eigen::Matrix3d j;
  for (int k = 0; k < 3; ++k) j.col(k) = out.d[static_cast<std::size_t>(k)].row(0).transpose();
  return j;
}

MlpView<Var> record_on(Tape& tape, const MlpParams& p, bool trainable, bool trainable_biases) {
  MlpView<Var> v;
  for (const auto& l : p.layers) {
    v.weights.push_back(trainable ? tape.leaf(l.weight) : tape.constant(l.weight));
    v.biases.push_back(trainable && trainable_biases ? tape.leaf(l.bias) : tape.constant(l.bias));
    v.activations.push_back(l.activation);
  }
  return v;
}

MlpParams gradients_of(const Tape& tape, const MlpView<Var>& view) {
  MlpParams g;
  for (std::size_t i = 0; i < view.weights.size(); ++i)
    g.layers.push_back(DenseLayer{tape.grad(view.weights[i]), tape.grad(view.biases[i]), view.activations[i]});
  return g;
}

SplitMlpView<Mat> split_view_of(const MlpParams& p) {
  if (p.layers.empty() || p.input_width() < 3) throw std::invalid_argument("split_view_of: need a 3+c input");
  const auto& first = p.layers.front();
  SplitMlpView<Mat> v;
  v.space_weight = first.weight.leftCols(3);
  v.cond_weight = first.weight.rightCols(first.weight.cols() - 3);
  v.bias = first.bias;
  v.activation = first.activation;
  for (std::size_t i = 1; i < p.layers.size(); ++i) {
    v.tail.weights.push_back(p.layers[i].weight);
    v.tail.biases.push_back(p.layers[i].bias);
    v.tail.activations.push_back(p.layers[i].activation);
  }
  return v;
}

SplitMlpView<Var> record_split_on(Tape& tape, const MlpParams& p, bool trainable) {
  const SplitMlpView<Mat> m = split_view_of(p);
  auto lift = [&](const Mat& x) { return trainable ? tape.leaf(x) : tape.constant(x); };
  SplitMlpView<Var> v;
  v.space_weight = lift(m.space_weight);
  v.cond_weight = lift(m.cond_weight);
  v.bias = lift(m.bias);
  v.activation = m.activation;
  for (std::size_t i = 0; i < m.tail.weights.size(); ++i) {
    v.tail.weights.push_back(lift(m.tail.weights[i]));
    v.tail.biases.push_back(lift(m.tail.biases[i]));
    v.tail.activations.push_back(m.tail.activations[i]);
  }
  return v;
}

MlpParams gradients_of(const Tape& tape, const SplitMlpView<Var>& view) {
  MlpParams g;
  const Mat gs = tape.grad(view.space_weight);
  const Mat gc = tape.grad(view.cond_weight);
  DenseLayer first;
  first.weight.resize(gs.rows(), gs.cols() + gc.cols());
  first.weight << gs, gc;
  first.bias = tape.grad(view.bias);
  first.activation = view.activation;
  g.layers.push_back(std::move(first));
  const MlpParams tail = gradients_of(tape, view.tail);
  g.layers.insert(g.layers.end(), tail.layers.begin(), tail.layers.end());
  return g;
}

}  // namespace fm::numerics
