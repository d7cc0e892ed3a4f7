#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "jointqa/types.hpp"

namespace jointqa::nn {

inline constexpr Scalar kLayerNormEps = 1e-12;
inline constexpr Scalar kMaskLogit = -1e9; // exp underflows to exactly zero

inline Scalar sigmoid(Scalar x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Scalar gelu(Scalar x) {
  return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

inline Scalar gelu_grad(Scalar x) {
  constexpr Scalar inv_sqrt_2pi = 0.3989422804014326779;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Softmax over positions where mask != 0; masked positions get probability 0.
template <typename Derived>
Vec masked_softmax(const Eigen::MatrixBase<Derived>& logits, const std::vector<std::uint8_t>& mask) {
  Vec z = logits;
  Scalar max_logit = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) max_logit = std::max(max_logit, z[i]);
  }
  Vec p = Vec::Zero(z.size());
  Scalar denom = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      p[i] = std::exp(z[i] - max_logit);
      denom += p[i];
    }
  }
  p /= denom;
  return p;
}

/// Row-wise layer normalization cache: normalized rows and per-row 1/std.
struct LayerNormCache {
  Mat x_hat;
  Vec inv_std;
};

/// out[r,:] = gain .* (x[r,:] - mean_r) / sqrt(var_r + eps) + bias
inline Mat layer_norm(const Mat& x, const Vec& gain, const Vec& bias, LayerNormCache* cache) {
  const Eigen::Index d = x.cols();
  Mat x_hat(x.rows(), d);
  Vec inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Scalar mean = x.row(r).mean();
    Scalar var = (x.row(r).array() - mean).square().sum() / static_cast<Scalar>(d);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    x_hat.row(r) = (x.row(r).array() - mean) * inv_std[r];
  }
  Mat out = (x_hat.array().rowwise() * gain.transpose().array()).rowwise() +
            bias.transpose().array();
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

/// Backward of layer_norm; accumulates parameter gradients and returns dx.
inline Mat layer_norm_backward(const Mat& d_out, const LayerNormCache& cache, const Vec& gain,
                               Mat& d_gain, Mat& d_bias) {
  const Eigen::Index d = d_out.cols();
  Mat dx(d_out.rows(), d);
  for (Eigen::Index r = 0; r < d_out.rows(); ++r) {
    Vec d_hat = d_out.row(r).transpose().cwiseProduct(gain);
    Scalar mean_d_hat = d_hat.mean();
    Scalar mean_d_hat_xhat = d_hat.cwiseProduct(cache.x_hat.row(r).transpose()).mean();
    dx.row(r) = cache.inv_std[r] *
                (d_hat.transpose().array() - mean_d_hat -
                 cache.x_hat.row(r).array() * mean_d_hat_xhat);
  }
  d_gain += (d_out.array() * cache.x_hat.array()).colwise().sum().matrix().transpose();
  d_bias += d_out.colwise().sum().transpose();
  return dx;
}

}  // namespace jointqa::nn
