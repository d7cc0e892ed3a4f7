#include <cmath>
#include <random>

#include "doctest.h"

#include "jointqa/chunking.hpp"
#include "jointqa/corpus.hpp"
#include "jointqa/encoder.hpp"

using namespace jointqa;
using namespace jointqa::encoder;

namespace {

struct Fixture {
  corpus::Vocabulary vocab = corpus::Vocabulary::from_terms(
      {"alpha", "beta", "delta", "gamma", "omega", "sigma", "theta", "zeta"});
  EncoderConfig config;
  chunking::Block block;

  Fixture() {
    config.vocab_size = vocab.size();
    config.d = 8;
    config.layers = 2;
    config.heads = 2;
    config.max_len = 16;
    config.seed = 5;

    corpus::Question q;
    q.question_id = "q";
    q.body = "alpha beta gamma";
    q.tokens = corpus::tokenize(q.body).first;
    corpus::Document doc;
    doc.doc_id = "d";
    doc.text = "delta omega sigma theta zeta alpha beta gamma";
    corpus::tokenize_document(doc);
    chunking::ChunkingConfig cc;
    cc.max_seq_len = config.max_len;
    cc.stride = 5;
    block = chunking::make_blocks(q, doc, vocab, cc).front();
  }
};

}  // namespace

TEST_CASE("parameter creation is deterministic and shaped") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet a, b;
  std::mt19937_64 rng_a(42), rng_b(42);
  enc.add_parameters(a, rng_a);
  enc.add_parameters(b, rng_b);
  CHECK(a.scalar_count() == b.scalar_count());
  CHECK(a.scalar_count() > 0);
  REQUIRE(a.tensors().size() == b.tensors().size());
  for (std::size_t i = 0; i < a.tensors().size(); ++i) {
    CHECK(a.tensors()[i].name == b.tensors()[i].name);
    CHECK(a.tensors()[i].value == b.tensors()[i].value);
    CHECK(a.tensors()[i].grad.isZero(0.0));
  }
  CHECK(a.at("emb.word").value.rows() == static_cast<Eigen::Index>(f.config.vocab_size));
  CHECK(a.at("emb.pos").value.rows() == 16);
  CHECK(a.at("layer1.ffn.w1").value.cols() == 32);
  CHECK(a.at("emb.ln.gain").no_decay);
  CHECK(a.at("layer0.attn.bq").no_decay);
  CHECK_FALSE(a.at("layer0.attn.wq").no_decay);
}

TEST_CASE("encode output shapes and determinism") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet params;
  std::mt19937_64 rng(42);
  enc.add_parameters(params, rng);

  const EncoderOutput out1 = enc.encode(params, f.block);
  const EncoderOutput out2 = enc.encode(params, f.block);
  CHECK(out1.token_repr.rows() == 16);
  CHECK(out1.token_repr.cols() == 8);
  CHECK(out1.pooled_cls.size() == 8);
  CHECK(out1.pooled_mean.size() == 8);
  CHECK(out1.real_tokens == 14);  // CLS + 3 question + SEP + 8 doc + SEP
  CHECK(out1.token_repr == out2.token_repr);
  CHECK(out1.pooled_cls == out2.pooled_cls);
  CHECK(out1.token_repr.allFinite());
  CHECK(out1.pooled_cls == out1.token_repr.row(0).transpose());
}

TEST_CASE("padding content cannot leak into real positions") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet params;
  std::mt19937_64 rng(42);
  enc.add_parameters(params, rng);

  const EncoderOutput base = enc.encode(params, f.block);
  chunking::Block tampered = f.block;
  bool changed = false;
  for (std::size_t p = 0; p < tampered.token_ids.size(); ++p) {
    if (!tampered.attention_mask[p]) {
      tampered.token_ids[p] = kUnkId;  // garbage where padding lives
      changed = true;
    }
  }
  REQUIRE(changed);
  const EncoderOutput out = enc.encode(params, tampered);
  for (std::size_t p = 0; p < f.block.token_ids.size(); ++p) {
    if (f.block.attention_mask[p]) {
      CHECK(out.token_repr.row(static_cast<Eigen::Index>(p)) ==
            base.token_repr.row(static_cast<Eigen::Index>(p)));
    }
  }
  CHECK(out.pooled_cls == base.pooled_cls);
  CHECK(out.pooled_mean == base.pooled_mean);
}

TEST_CASE("mean pooling averages only real positions") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet params;
  std::mt19937_64 rng(42);
  enc.add_parameters(params, rng);
  const EncoderOutput out = enc.encode(params, f.block);
  Vec manual = Vec::Zero(8);
  for (std::size_t p = 0; p < f.block.token_ids.size(); ++p) {
    if (f.block.attention_mask[p]) {
      manual += out.token_repr.row(static_cast<Eigen::Index>(p)).transpose();
    }
  }
  manual /= static_cast<Scalar>(out.real_tokens);
  CHECK((manual - out.pooled_mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode validates its inputs") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet params;
  std::mt19937_64 rng(42);
  enc.add_parameters(params, rng);

  chunking::Block wrong_len = f.block;
  wrong_len.token_ids.push_back(kPadId);
  CHECK_THROWS_AS(enc.encode(params, wrong_len), std::invalid_argument);

  chunking::Block bad_id = f.block;
  bad_id.token_ids[2] = static_cast<TokenId>(f.config.vocab_size);
  CHECK_THROWS_AS(enc.encode(params, bad_id), std::invalid_argument);
}

TEST_CASE("backward demands a recorded forward pass") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet params;
  std::mt19937_64 rng(42);
  enc.add_parameters(params, rng);
  ForwardCache cache;  // never filled
  CHECK_THROWS_AS(enc.backward(params, f.block, cache, Mat::Zero(16, 8), Vec(), Vec()),
                  std::logic_error);
}

TEST_CASE("analytic gradients match finite differences") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet params;
  std::mt19937_64 rng(42);
  enc.add_parameters(params, rng);

  std::mt19937_64 probe_rng(99);
  Mat d_repr(16, 8);
  fill_normal(d_repr, probe_rng, 1.0);
  Mat d_cls_m(8, 1), d_mean_m(8, 1);
  fill_normal(d_cls_m, probe_rng, 1.0);
  fill_normal(d_mean_m, probe_rng, 1.0);
  const Vec d_cls = d_cls_m.col(0);
  const Vec d_mean = d_mean_m.col(0);

  auto loss = [&](const ParameterSet& p) {
    const EncoderOutput out = enc.encode(p, f.block);
    return (out.token_repr.array() * d_repr.array()).sum() + d_cls.dot(out.pooled_cls) +
           d_mean.dot(out.pooled_mean);
  };

  params.zero_grads();
  ForwardCache cache;
  enc.encode(params, f.block, &cache);
  enc.backward(params, f.block, cache, d_repr, d_cls, d_mean);

  const double eps = 1e-5;
  for (const char* name : {"emb.word", "emb.pos", "emb.seg", "emb.ln.gain", "layer0.attn.wq",
                           "layer0.attn.bv", "layer0.ffn.w1", "layer1.ffn.b2", "layer1.attn.wo",
                           "layer1.ln2.bias"}) {
    Tensor& t = params.at(name);
    for (int probe = 0; probe < 3; ++probe) {
      const Eigen::Index r = static_cast<Eigen::Index>(probe_rng() % t.value.rows());
      const Eigen::Index c = static_cast<Eigen::Index>(probe_rng() % t.value.cols());
      const Scalar saved = t.value(r, c);
      t.value(r, c) = saved + eps;
      const double up = loss(params);
      t.value(r, c) = saved - eps;
      const double down = loss(params);
      t.value(r, c) = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double an = t.grad(r, c);
      const double rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
      INFO(name, "(", r, ",", c, ") fd=", fd, " an=", an);
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("layer freezing keeps the top of the stack trainable") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet params;
  std::mt19937_64 rng(42);
  enc.add_parameters(params, rng);
  params.add("head.reader.start", 8, 1);
  params.add("head.match.w", 8, 1);

  freeze_layers(params, 1, 2);
  CHECK_FALSE(params.at("emb.word").trainable);
  CHECK_FALSE(params.at("emb.ln.gain").trainable);
  CHECK_FALSE(params.at("layer0.attn.wq").trainable);
  CHECK(params.at("layer1.attn.wq").trainable);
  CHECK(params.at("layer1.ffn.b2").trainable);
  CHECK(params.at("head.reader.start").trainable);

  freeze_layers(params, 2, 2);  // full unfreeze restores the embeddings too
  CHECK(params.at("emb.word").trainable);
  CHECK(params.at("layer0.attn.wq").trainable);

  freeze_layers(params, 0, 2);  // heads only
  CHECK_FALSE(params.at("layer1.attn.wq").trainable);
  CHECK_FALSE(params.at("emb.word").trainable);
  CHECK(params.at("head.match.w").trainable);

  CHECK_THROWS_AS(freeze_layers(params, 3, 2), std::invalid_argument);
}

TEST_CASE("zero_grads clears accumulated gradients") {
  Fixture f;
  TransformerEncoder enc(f.config);
  ParameterSet params;
  std::mt19937_64 rng(42);
  enc.add_parameters(params, rng);
  ForwardCache cache;
  enc.encode(params, f.block, &cache);
  enc.backward(params, f.block, cache, Mat::Ones(16, 8), Vec(), Vec());
  CHECK(params.at("emb.word").grad.cwiseAbs().maxCoeff() > 0.0);
  params.zero_grads();
  for (const Tensor& t : params.tensors()) CHECK(t.grad.isZero(0.0));
}
