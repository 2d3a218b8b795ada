#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "noir/error.hpp"

namespace noir::memory {

// Fully connected network, samples as columns. Rectifier between layers,
// identity at the output.
template <typename Scalar>
class Mlp {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Mat w;  // out x in
    Vec b;
  };

  struct Cache {
    std::vector<Mat> inputs;  // input to each layer (post-activation of the previous)
  };

  Mlp() = default;

  // He-uniform initialization: U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero bias.
  Mlp(std::vector<int> dims, std::uint64_t seed) : dims_(std::move(dims)) {
    require(dims_.size() >= 2, "network needs at least an input and an output layer");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      require(dims_[l] > 0 && dims_[l + 1] > 0, "layer widths must be positive");
      const double bound = std::sqrt(6.0 / dims_[l]);
      std::uniform_real_distribution<double> u(-bound, bound);
      Layer layer{Mat(dims_[l + 1], dims_[l]), Vec::Zero(dims_[l + 1])};
      for (Eigen::Index i = 0; i < layer.w.size(); ++i) layer.w.data()[i] = static_cast<Scalar>(u(rng));
      layers_.push_back(std::move(layer));
    }
  }

  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }

  Mat forward(const Mat& x) const {
    Cache unused;
    return forward(x, unused, false);
  }

  Mat forward(const Mat& x, Cache& cache, bool keep = true) const {
    require(x.rows() == input_dim(), "network input dimension mismatch");
    if (keep) cache.inputs.clear();
    Mat a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (keep) cache.inputs.push_back(a);
      Mat z = layers_[l].w * a;
      z.colwise() += layers_[l].b;
      if (l + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
      a = std::move(z);
    }
    return a;
  }

  // Gradients of a scalar loss given dLoss/dOutput. Same layout as layers().
  std::vector<Layer> backward(const Cache& cache, const Mat& grad_out) const {
    std::vector<Layer> grads(layers_.size());
    Mat dz = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const Mat& a = cache.inputs[i];
      grads[i].w = dz * a.transpose();
      grads[i].b = dz.rowwise().sum();
      if (i == 0) break;
      Mat da = layers_[i].w.transpose() * dz;
      // a = relu(z) for hidden inputs, so relu'(z) = [a > 0].
      dz = (a.array() > Scalar(0)).select(da, Scalar(0));
    }
    return grads;
  }

 private:
  std::vector<int> dims_;
  std::vector<Layer> layers_;
};

// Adam with bias correction.
template <typename Scalar>
class Adam {
 public:
  using Layer = typename Mlp<Scalar>::Layer;

  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Layer>& params, const std::vector<Layer>& grads) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back({Mlp<Scalar>::Mat::Zero(p.w.rows(), p.w.cols()), Mlp<Scalar>::Vec::Zero(p.b.size())});
        v_.push_back(m_.back());
      }
    }
    ++t_;
    const Scalar c1 = static_cast<Scalar>(1.0 / (1.0 - std::pow(beta1_, t_)));
    const Scalar c2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(beta2_, t_)));
    const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const auto lr = static_cast<Scalar>(lr_), eps = static_cast<Scalar>(eps_);
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      p.array() -= lr * (m.array() * c1) / ((v.array() * c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < params.size(); ++l) {
      update(params[l].w, grads[l].w, m_[l].w, v_[l].w);
      update(params[l].b, grads[l].b, m_[l].b, v_[l].b);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Layer> m_, v_;
};

}  // namespace noir::memory
