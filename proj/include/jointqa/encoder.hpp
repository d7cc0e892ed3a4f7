#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "jointqa/chunking.hpp"
#include "jointqa/nn_math.hpp"
#include "jointqa/types.hpp"

namespace jointqa::encoder {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t max_len = 128; // m
  std::uint64_t seed = 1;

  void validate() const;
};

/// Named parameter tensor with its gradient buffer. Vectors are stored as
/// d x 1 matrices.
struct Tensor {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;
  bool no_decay = false;
};

class ParameterSet {
 public:
  Tensor& add(std::string name, Eigen::Index rows, Eigen::Index cols, bool no_decay = false);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  void zero_grads();
  std::size_t scalar_count() const;

 private:
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EncoderOutput {
  Mat token_repr;  // H, m x d
  Vec pooled_cls;  // H row at the CLS position
  Vec pooled_mean; // mean over non-pad rows
  std::size_t real_tokens = 0;
};

enum class Pooling { cls, mean };

struct LayerCache {
  Mat x_in;
  Mat q, k, v;
  std::vector<Mat> att; // per-head m x m attention probabilities
  Mat ctx;              // concatenated head outputs, m x d
  nn::LayerNormCache ln1;
  Mat x1;
  Mat ffn_pre;  // pre-activation, m x 4d
  Mat ffn_act;  // gelu(ffn_pre)
  nn::LayerNormCache ln2;
};

struct ForwardCache {
  bool valid = false;
  nn::LayerNormCache emb_ln;
  std::vector<LayerCache> layers;
};

/// Small trainable transformer behind the encoder contract: token + position
/// + segment embeddings with layer norm, then post-norm attention/FFN layers.
/// Padding is excluded from attention keys and from mean pooling.
class TransformerEncoder {
 public:
  explicit TransformerEncoder(EncoderConfig config);

  /// Creates and initializes the encoder tensors (scaled normal, std 0.02;
  /// layer-norm gains 1, biases 0). Draw order is fixed by name order.
  void add_parameters(ParameterSet& params, std::mt19937_64& rng) const;

  EncoderOutput encode(const ParameterSet& params, const chunking::Block& block,
                       ForwardCache* cache = nullptr) const;

  /// Accumulates gradients for one recorded forward pass. d_cls / d_mean may
  /// be empty when the pooled outputs carry no gradient.
  void backward(ParameterSet& params, const chunking::Block& block, const ForwardCache& cache,
                const Mat& d_token_repr, const Vec& d_cls, const Vec& d_mean) const;

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
};

/// Keeps exactly the top `k` transformer layers (plus head tensors) trainable;
/// embeddings stay trainable only when k equals the layer count.
void freeze_layers(ParameterSet& params, std::size_t k, std::size_t layer_count);

/// Normal(0, std) init used for weights and embeddings.
void fill_normal(Mat& m, std::mt19937_64& rng, Scalar stddev);

}  // namespace jointqa::encoder
