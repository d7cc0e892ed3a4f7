#include "jointqa/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace jointqa::encoder {

void EncoderConfig::validate() const {
  if (vocab_size == 0) throw std::invalid_argument("encoder: vocab_size must be positive");
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument("encoder: d must be divisible by heads");
  }
  if (max_len < 16) throw std::invalid_argument("encoder: max_len must be >= 16");
  if (layers == 0) throw std::invalid_argument("encoder: need at least one layer");
}

Tensor& ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols, bool no_decay) {
  if (index_.contains(name)) {
    throw std::invalid_argument("duplicate tensor name '" + name + "'");
  }
  index_[name] = tensors_.size();
  Tensor t;
  t.name = std::move(name);
  t.value = Mat::Zero(rows, cols);
  t.grad = Mat::Zero(rows, cols);
  t.no_decay = no_decay;
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no tensor named '" + name + "'");
  return tensors_[it->second];
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no tensor named '" + name + "'");
  return tensors_[it->second];
}

void ParameterSet::zero_grads() {
  for (Tensor& t : tensors_) t.grad.setZero();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

void fill_normal(Mat& m, std::mt19937_64& rng, Scalar stddev) {
  std::normal_distribution<Scalar> dist(0.0, stddev);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = dist(rng);
    }
  }
}

TransformerEncoder::TransformerEncoder(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
}

void TransformerEncoder::add_parameters(ParameterSet& params, std::mt19937_64& rng) const {
  const auto d = static_cast<Eigen::Index>(config_.d);
  const auto v = static_cast<Eigen::Index>(config_.vocab_size);
  const auto m = static_cast<Eigen::Index>(config_.max_len);
  constexpr Scalar init_std = 0.02;

  auto add_weight = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
    fill_normal(params.add(name, r, c).value, rng, init_std);
  };
  auto add_bias = [&](const std::string& name, Eigen::Index r) {
    params.add(name, r, 1, /*no_decay=*/true);
  };
  auto add_ln = [&](const std::string& prefix) {
    params.add(prefix + ".gain", d, 1, /*no_decay=*/true).value.setOnes();
    params.add(prefix + ".bias", d, 1, /*no_decay=*/true);
  };

  add_weight("emb.word", v, d);
  add_weight("emb.pos", m, d);
  add_weight("emb.seg", 2, d);
  add_ln("emb.ln");
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add_weight(p + "attn.wq", d, d);
    add_bias(p + "attn.bq", d);
    add_weight(p + "attn.wk", d, d);
    add_bias(p + "attn.bk", d);
    add_weight(p + "attn.wv", d, d);
    add_bias(p + "attn.bv", d);
    add_weight(p + "attn.wo", d, d);
    add_bias(p + "attn.bo", d);
    add_ln(p + "ln1");
    add_weight(p + "ffn.w1", d, 4 * d);
    add_bias(p + "ffn.b1", 4 * d);
    add_weight(p + "ffn.w2", 4 * d, d);
    add_bias(p + "ffn.b2", d);
    add_ln(p + "ln2");
  }
}

EncoderOutput TransformerEncoder::encode(const ParameterSet& params, const chunking::Block& block,
                                         ForwardCache* cache) const {
  const auto m = static_cast<Eigen::Index>(config_.max_len);
  const auto d = static_cast<Eigen::Index>(config_.d);
  const std::size_t heads = config_.heads;
  const Eigen::Index dk = d / static_cast<Eigen::Index>(heads);
  const Scalar att_scale = 1.0 / std::sqrt(static_cast<Scalar>(dk));

  if (block.token_ids.size() != config_.max_len) {
    throw std::invalid_argument("encode: block length " + std::to_string(block.token_ids.size()) +
                                " != m=" + std::to_string(config_.max_len));
  }
  std::size_t real = 0;
  for (std::size_t p = 0; p < block.token_ids.size(); ++p) {
    if (block.token_ids[p] < 0 ||
        static_cast<std::size_t>(block.token_ids[p]) >= config_.vocab_size) {
      throw std::invalid_argument("encode: token id " + std::to_string(block.token_ids[p]) +
                                  " outside vocabulary of size " +
                                  std::to_string(config_.vocab_size));
    }
    if (block.attention_mask[p]) ++real;
  }
  if (real == 0) {
    throw std::invalid_argument("encode: block has no real tokens");
  }

  const Mat& w_word = params.at("emb.word").value;
  const Mat& w_pos = params.at("emb.pos").value;
  const Mat& w_seg = params.at("emb.seg").value;

  Mat x(m, d);
  for (Eigen::Index p = 0; p < m; ++p) {
    x.row(p) = w_word.row(block.token_ids[static_cast<std::size_t>(p)]) + w_pos.row(p) +
               w_seg.row(block.segment_mask[static_cast<std::size_t>(p)]);
  }
  nn::LayerNormCache emb_ln;
  x = nn::layer_norm(x, params.at("emb.ln.gain").value.col(0), params.at("emb.ln.bias").value.col(0),
                     &emb_ln);

  if (cache) {
    cache->valid = false;
    cache->emb_ln = std::move(emb_ln);
    cache->layers.assign(config_.layers, LayerCache{});
  }

  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    const Mat& wq = params.at(pre + "attn.wq").value;
    const Mat& wk = params.at(pre + "attn.wk").value;
    const Mat& wv = params.at(pre + "attn.wv").value;
    const Mat& wo = params.at(pre + "attn.wo").value;

    Mat q = (x * wq).rowwise() + params.at(pre + "attn.bq").value.col(0).transpose();
    Mat k = (x * wk).rowwise() + params.at(pre + "attn.bk").value.col(0).transpose();
    Mat v = (x * wv).rowwise() + params.at(pre + "attn.bv").value.col(0).transpose();

    Mat ctx(m, d);
    std::vector<Mat> att(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dk;
      Mat scores = q.middleCols(c0, dk) * k.middleCols(c0, dk).transpose() * att_scale;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (!block.attention_mask[static_cast<std::size_t>(j)]) {
          scores.col(j).array() += nn::kMaskLogit;
        }
      }
      Mat& a = att[h];
      a.resize(m, m);
      for (Eigen::Index r = 0; r < m; ++r) {
        Scalar mx = scores.row(r).maxCoeff();
        a.row(r) = (scores.row(r).array() - mx).exp();
        a.row(r) /= a.row(r).sum();
      }
      ctx.middleCols(c0, dk) = a * v.middleCols(c0, dk);
    }
    Mat attn_out = (ctx * wo).rowwise() + params.at(pre + "attn.bo").value.col(0).transpose();

    nn::LayerNormCache ln1;
    Mat x1 = nn::layer_norm(x + attn_out, params.at(pre + "ln1.gain").value.col(0),
                            params.at(pre + "ln1.bias").value.col(0), &ln1);

    Mat ffn_pre = (x1 * params.at(pre + "ffn.w1").value).rowwise() +
                  params.at(pre + "ffn.b1").value.col(0).transpose();
    Mat ffn_act = ffn_pre.unaryExpr([](Scalar s) { return nn::gelu(s); });
    Mat ffn_out = (ffn_act * params.at(pre + "ffn.w2").value).rowwise() +
                  params.at(pre + "ffn.b2").value.col(0).transpose();

    nn::LayerNormCache ln2;
    Mat x2 = nn::layer_norm(x1 + ffn_out, params.at(pre + "ln2.gain").value.col(0),
                            params.at(pre + "ln2.bias").value.col(0), &ln2);

    if (cache) {
      LayerCache& lc = cache->layers[l];
      lc.x_in = std::move(x);
      lc.q = std::move(q);
      lc.k = std::move(k);
      lc.v = std::move(v);
      lc.att = std::move(att);
      lc.ctx = std::move(ctx);
      lc.ln1 = std::move(ln1);
      lc.x1 = x1;
      lc.ffn_pre = std::move(ffn_pre);
      lc.ffn_act = std::move(ffn_act);
      lc.ln2 = std::move(ln2);
    }
    x = std::move(x2);
  }

  EncoderOutput out;
  out.token_repr = std::move(x);
  out.real_tokens = real;
  out.pooled_cls = out.token_repr.row(0).transpose();
  Vec mean = Vec::Zero(d);
  for (Eigen::Index p = 0; p < m; ++p) {
    if (block.attention_mask[static_cast<std::size_t>(p)]) {
      mean += out.token_repr.row(p).transpose();
    }
  }
  out.pooled_mean = mean / static_cast<Scalar>(real);
  if (!out.token_repr.allFinite()) {
    throw std::runtime_error("encode: non-finite representations");
  }
  if (cache) cache->valid = true;
  return out;
}

void TransformerEncoder::backward(ParameterSet& params, const chunking::Block& block,
                                  const ForwardCache& cache, const Mat& d_token_repr,
                                  const Vec& d_cls, const Vec& d_mean) const {
  if (!cache.valid) {
    throw std::logic_error("encoder backward called without a recorded forward pass");
  }
  const auto m = static_cast<Eigen::Index>(config_.max_len);
  const auto d = static_cast<Eigen::Index>(config_.d);
  const std::size_t heads = config_.heads;
  const Eigen::Index dk = d / static_cast<Eigen::Index>(heads);
  const Scalar att_scale = 1.0 / std::sqrt(static_cast<Scalar>(dk));

  Mat dx = d_token_repr.size() > 0 ? d_token_repr : Mat::Zero(m, d);
  if (d_cls.size() > 0) {
    dx.row(0) += d_cls.transpose();
  }
  if (d_mean.size() > 0) {
    std::size_t real = 0;
    for (auto a : block.attention_mask) real += a;
    const Scalar inv = 1.0 / static_cast<Scalar>(real);
    for (Eigen::Index p = 0; p < m; ++p) {
      if (block.attention_mask[static_cast<std::size_t>(p)]) {
        dx.row(p) += d_mean.transpose() * inv;
      }
    }
  }

  for (std::size_t li = config_.layers; li-- > 0;) {
    const LayerCache& lc = cache.layers[li];
    const std::string pre = "layer" + std::to_string(li) + ".";

    // ln2
    Mat d_res2 = nn::layer_norm_backward(dx, lc.ln2, params.at(pre + "ln2.gain").value.col(0),
                                         params.at(pre + "ln2.gain").grad,
                                         params.at(pre + "ln2.bias").grad);
    Mat dx1 = d_res2;

    // ffn
    const Mat& w2 = params.at(pre + "ffn.w2").value;
    params.at(pre + "ffn.w2").grad += lc.ffn_act.transpose() * d_res2;
    params.at(pre + "ffn.b2").grad += d_res2.colwise().sum().transpose();
    Mat d_act = d_res2 * w2.transpose();
    Mat d_pre = d_act.cwiseProduct(lc.ffn_pre.unaryExpr([](Scalar s) { return nn::gelu_grad(s); }));
    const Mat& w1 = params.at(pre + "ffn.w1").value;
    params.at(pre + "ffn.w1").grad += lc.x1.transpose() * d_pre;
    params.at(pre + "ffn.b1").grad += d_pre.colwise().sum().transpose();
    dx1 += d_pre * w1.transpose();

    // ln1
    Mat d_res1 = nn::layer_norm_backward(dx1, lc.ln1, params.at(pre + "ln1.gain").value.col(0),
                                         params.at(pre + "ln1.gain").grad,
                                         params.at(pre + "ln1.bias").grad);
    dx = d_res1;
    Mat d_attn_out = d_res1;

    // output projection
    const Mat& wo = params.at(pre + "attn.wo").value;
    params.at(pre + "attn.wo").grad += lc.ctx.transpose() * d_attn_out;
    params.at(pre + "attn.bo").grad += d_attn_out.colwise().sum().transpose();
    Mat d_ctx = d_attn_out * wo.transpose();

    Mat dq(m, d), dkm(m, d), dv(m, d);
    for (std::size_t h = 0; h < heads; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dk;
      const Mat& a = lc.att[h];
      Mat d_a = d_ctx.middleCols(c0, dk) * lc.v.middleCols(c0, dk).transpose();
      dv.middleCols(c0, dk) = a.transpose() * d_ctx.middleCols(c0, dk);
      Mat d_scores(m, m);
      for (Eigen::Index r = 0; r < m; ++r) {
        Scalar dot = d_a.row(r).cwiseProduct(a.row(r)).sum();
        d_scores.row(r) = (a.row(r).array() * (d_a.row(r).array() - dot)).matrix();
      }
      dq.middleCols(c0, dk) = d_scores * lc.k.middleCols(c0, dk) * att_scale;
      dkm.middleCols(c0, dk) = d_scores.transpose() * lc.q.middleCols(c0, dk) * att_scale;
    }

    params.at(pre + "attn.wq").grad += lc.x_in.transpose() * dq;
    params.at(pre + "attn.bq").grad += dq.colwise().sum().transpose();
    params.at(pre + "attn.wk").grad += lc.x_in.transpose() * dkm;
    params.at(pre + "attn.bk").grad += dkm.colwise().sum().transpose();
    params.at(pre + "attn.wv").grad += lc.x_in.transpose() * dv;
    params.at(pre + "attn.bv").grad += dv.colwise().sum().transpose();
    dx += dq * params.at(pre + "attn.wq").value.transpose() +
          dkm * params.at(pre + "attn.wk").value.transpose() +
          dv * params.at(pre + "attn.wv").value.transpose();
  }

  Mat d_emb = nn::layer_norm_backward(dx, cache.emb_ln, params.at("emb.ln.gain").value.col(0),
                                      params.at("emb.ln.gain").grad, params.at("emb.ln.bias").grad);
  Mat& d_word = params.at("emb.word").grad;
  Mat& d_pos = params.at("emb.pos").grad;
  Mat& d_seg = params.at("emb.seg").grad;
  for (Eigen::Index p = 0; p < m; ++p) {
    d_word.row(block.token_ids[static_cast<std::size_t>(p)]) += d_emb.row(p);
    d_pos.row(p) += d_emb.row(p);
    d_seg.row(block.segment_mask[static_cast<std::size_t>(p)]) += d_emb.row(p);
  }
}

void freeze_layers(ParameterSet& params, std::size_t k, std::size_t layer_count) {
  if (k > layer_count) {
    throw std::invalid_argument("freeze_layers: k=" + std::to_string(k) + " exceeds layer count " +
                                std::to_string(layer_count));
  }
  const std::size_t first_trainable = layer_count - k;
  for (Tensor& t : params.tensors()) {
    if (t.name.starts_with("head.")) {
      t.trainable = true;
    } else if (t.name.starts_with("emb.")) {
      t.trainable = (k == layer_count);
    } else if (t.name.starts_with("layer")) {
      std::size_t idx = std::stoul(t.name.substr(5));
      t.trainable = idx >= first_trainable;
    }
  }
}

}  // namespace jointqa::encoder
