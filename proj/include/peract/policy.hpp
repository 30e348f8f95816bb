#pragma once

// Latent-bottleneck transformer policy over voxel observations.
//
//   voxels (V x 10) --1x1x1--> skip (V x C) --P^3 stride P--> patches (N x C)
//   proprio (4) --affine--> (C) + mean language (C), tiled over patches; tokens = [patch | proprio] (N x E)
//   language (T x F) --affine--> (T x E), appended; + learned positions -> seq (L x E)
//   latents (M x D) <-cross- seq; self-attention x layers; seq <-cross- latents
//   voxel tokens --3^3 conv--> (N x C) --trilinear xP--> (V x C) ++ skip --1x1x1--> features (V x C)
//   q_trans = 1x1x1 conv of features; max-pool(features) -> rot / open / collide heads
//
// Attention blocks are pre-normalized with residual connections. The output
// cross-attention uses the (normalized) input sequence as queries and adds
// its result back onto the sequence.

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "peract/action_codec.hpp"
#include "peract/demo_pipeline.hpp"
#include "peract/language.hpp"
#include "peract/nn/attention.hpp"
#include "peract/nn/layers.hpp"
#include "peract/nn/tensor.hpp"
#include "peract/nn/volume.hpp"
#include "peract/policy_config.hpp"
#include "peract/voxelizer.hpp"

namespace peract {

template <typename Scalar>
class PerceiverPolicy {
public:
  using M = nn::Mat<Scalar>;
  using LN = nn::LayerNorm<Scalar>;
  using FF = nn::FeedForward<Scalar>;
  using MHA = nn::MultiHeadAttention<Scalar>;

  struct PreprocessCache {
    M input;
    M a0;
    M skip;
    M patches;
    M a1;
    M proprio_in;
    M pa;
    M lang_in;
  };

  struct LatentBlockCache {
    typename LN::Cache ln1;
    typename MHA::Cache attn;
    typename LN::Cache ln2;
    typename FF::Cache ff;
  };

  struct TransformCache {
    typename LN::Cache enc_ln_latent;
    typename LN::Cache enc_ln_input;
    typename MHA::Cache enc_attn;
    typename LN::Cache enc_ff_ln;
    typename FF::Cache enc_ff;
    std::vector<LatentBlockCache> blocks;
    typename LN::Cache dec_ln_query;
    typename LN::Cache dec_ln_latent;
    typename MHA::Cache dec_attn;
  };

  struct DecodeCache {
    M columns;
    M u_pre;
    M concat;
    M f_pre;
    M features;
    std::vector<Eigen::Index> pool_argmax;
    M pooled;
  };

  struct ForwardCache {
    PreprocessCache pre;
    TransformCache transform;
    DecodeCache decode;
  };

  struct Preprocessed {
    M sequence;  // L x E, positional embeddings included
    M skip;      // V x C
  };

  explicit PerceiverPolicy(const PolicyConfig& config) : cfg_(config) {
    cfg_.validate();
    nn::InitRng rng(cfg_.init_seed);
    const int c = cfg_.voxel_feature_dim;
    const int e = cfg_.embed_dim;
    const int d = cfg_.latent_dim;
    const int p3 = cfg_.patch_size * cfg_.patch_size * cfg_.patch_size;
    voxel_lift_ = nn::Linear<Scalar>(channel::kCount, c, rng);
    patch_proj_ = nn::Linear<Scalar>(p3 * c, c, rng);
    proprio_lift_ = nn::Linear<Scalar>(4, c, rng);
    lang_proj_ = nn::Linear<Scalar>(cfg_.lang_feature_dim, e, rng);
    pos_emb_.resize(cfg_.sequence_length(), e);
    rng.fill_uniform(pos_emb_, 0.02 * std::sqrt(3.0));
    pos_emb_grad_ = M::Zero(pos_emb_.rows(), pos_emb_.cols());
    latents_.resize(cfg_.num_latents, d);
    rng.fill_uniform(latents_, 0.02 * std::sqrt(3.0));
    latents_grad_ = M::Zero(latents_.rows(), latents_.cols());

    enc_ln_latent_ = LN(d);
    enc_ln_input_ = LN(e);
    enc_attn_ = MHA(d, e, cfg_.num_cross_heads, cfg_.cross_head_dim, d, rng);
    enc_ff_ln_ = LN(d);
    enc_ff_ = FF(d, d * cfg_.ff_mult, rng);
    for (int l = 0; l < cfg_.num_self_attn_layers; ++l) {
      LatentBlock b;
      b.ln1 = LN(d);
      b.attn = MHA(d, d, cfg_.num_attention_heads, d / cfg_.num_attention_heads, d, rng);
      b.ln2 = LN(d);
      b.ff = FF(d, d * cfg_.ff_mult, rng);
      blocks_.push_back(std::move(b));
    }
    dec_ln_query_ = LN(e);
    dec_ln_latent_ = LN(d);
    dec_attn_ = MHA(e, d, cfg_.num_cross_heads, cfg_.cross_head_dim, e, rng);

    up_conv_ = nn::Linear<Scalar>(27 * e, c, rng);
    fuse_ = nn::Linear<Scalar>(2 * c, c, rng);
    // No bias: a shared offset on every voxel logit cancels in the softmax.
    trans_head_ = nn::Linear<Scalar>(c, 1, rng, false);
    rot_head_ = nn::Linear<Scalar>(c, 3 * cfg_.rotation_bins(), rng);
    open_head_ = nn::Linear<Scalar>(c, 2, rng);
    collide_head_ = nn::Linear<Scalar>(c, 2, rng);

    encoder_ = std::make_shared<HashLanguageEncoder>(cfg_.num_lang_tokens, cfg_.lang_feature_dim, cfg_.lang_seed);
  }

  [[nodiscard]] const PolicyConfig& config() const { return cfg_; }

  /// Replaces the built-in hash encoder; shapes must match the config.
  void set_language_encoder(std::shared_ptr<const LanguageEncoder> encoder) {
    if (!encoder || encoder->num_tokens() != cfg_.num_lang_tokens ||
        encoder->feature_dim() != cfg_.lang_feature_dim) {
      throw InvalidInput("policy: language encoder shape does not match the config");
    }
    encoder_ = std::move(encoder);
  }
  [[nodiscard]] const LanguageEncoder& language_encoder() const { return *encoder_; }

  [[nodiscard]] LanguageEncoding encode_language(const std::string& goal) const { return encoder_->encode(goal); }

  // ---------------------------------------------------------------- stages

  Preprocessed preprocess(const VoxelGrid& grid, const Proprio& proprio, const LanguageEncoding& lang,
                          PreprocessCache* cache = nullptr) const {
    check_inputs(grid, lang);
    const nn::Dims3 dims = cfg_.grid();
    const int c = cfg_.voxel_feature_dim;
    const int n = cfg_.num_voxel_tokens();
    const int t = cfg_.num_lang_tokens;

    M input = Eigen::Map<const nn::Mat<float>>(grid.channels.data(), grid.voxel_count(), channel::kCount)
                  .template cast<Scalar>();
    M a0 = voxel_lift_.forward(input);
    M skip = nn::Gelu<Scalar>::forward(a0);
    M patches = nn::patchify_gather(skip, dims, cfg_.patch_size);
    M a1 = patch_proj_.forward(patches);
    M proprio_in(1, 4);
    for (int i = 0; i < 4; ++i) proprio_in(0, i) = static_cast<Scalar>(proprio[static_cast<std::size_t>(i)]);
    M pa = proprio_lift_.forward(proprio_in);
    const M pf = nn::Gelu<Scalar>::forward(pa);
    M lang_in = lang.tokens.template cast<Scalar>();

    Preprocessed out;
    out.sequence.resize(n + t, cfg_.embed_dim);
    out.sequence.topLeftCorner(n, c) = nn::Gelu<Scalar>::forward(a1);
    const M lang_tok = lang_proj_.forward(lang_in);
    // Mean language feature rides along with proprio on every voxel token, so
    // the decoder sees the goal without going through the latents.
    out.sequence.topRightCorner(n, c) = (pf + lang_tok.rightCols(c).colwise().mean()).replicate(n, 1);
    out.sequence.bottomRows(t) = lang_tok;
    out.sequence += pos_emb_;
    if (cache) {
      cache->input = std::move(input);
      cache->a0 = std::move(a0);
      cache->skip = skip;
      cache->patches = std::move(patches);
      cache->a1 = std::move(a1);
      cache->proprio_in = std::move(proprio_in);
      cache->pa = std::move(pa);
      cache->lang_in = std::move(lang_in);
    }
    out.skip = std::move(skip);
    return out;
  }

  /// Cross-attends the sequence into the latents, runs latent self-attention,
  /// and cross-attends back out to a sequence of the input's length.
  M latent_transform(const M& seq, TransformCache* cache = nullptr) const {
    if (seq.cols() != cfg_.embed_dim) throw InvalidInput("latent_transform: sequence width does not match embed_dim");
    M z = latents_;
    {
      const M zn = enc_ln_latent_.forward(z, cache ? &cache->enc_ln_latent : nullptr);
      const M xn = enc_ln_input_.forward(seq, cache ? &cache->enc_ln_input : nullptr);
      z += enc_attn_.forward(zn, xn, cache ? &cache->enc_attn : nullptr);
      const M fn = enc_ff_ln_.forward(z, cache ? &cache->enc_ff_ln : nullptr);
      z += enc_ff_.forward(fn, cache ? &cache->enc_ff : nullptr);
    }
    if (cache) cache->blocks.resize(blocks_.size());
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const auto& b = blocks_[l];
      LatentBlockCache* bc = cache ? &cache->blocks[l] : nullptr;
      const M n1 = b.ln1.forward(z, bc ? &bc->ln1 : nullptr);
      z += b.attn.forward(n1, n1, bc ? &bc->attn : nullptr);
      const M n2 = b.ln2.forward(z, bc ? &bc->ln2 : nullptr);
      z += b.ff.forward(n2, bc ? &bc->ff : nullptr);
    }
    const M qn = dec_ln_query_.forward(seq, cache ? &cache->dec_ln_query : nullptr);
    const M cn = dec_ln_latent_.forward(z, cache ? &cache->dec_ln_latent : nullptr);
    M out = seq;
    out += dec_attn_.forward(qn, cn, cache ? &cache->dec_attn : nullptr);
    return out;
  }

  /// Decodes the voxel-token rows of `seq_out` (language rows are ignored).
  QPrediction<Scalar> decode(const M& seq_out, const M& skip, DecodeCache* cache = nullptr) const {
    const int n = cfg_.num_voxel_tokens();
    if (seq_out.rows() < n || seq_out.cols() != cfg_.embed_dim) throw InvalidInput("decode: sequence shape mismatch");
    const int per_axis = cfg_.patches_per_axis();
    const nn::Dims3 lattice{per_axis, per_axis, per_axis};
    M columns = nn::neighbourhood_gather<Scalar>(seq_out.topRows(n), lattice);
    M u_pre = up_conv_.forward(columns);
    const M u = nn::Gelu<Scalar>::forward(u_pre);
    const M up = nn::trilinear_upsample(u, lattice, cfg_.patch_size);
    const int c = cfg_.voxel_feature_dim;
    M concat(up.rows(), 2 * c);
    concat.leftCols(c) = up;
    concat.rightCols(c) = skip;
    M f_pre = fuse_.forward(concat);
    M features = nn::Gelu<Scalar>::forward(f_pre);

    QPrediction<Scalar> q;
    q.grid = cfg_.grid();
    q.q_trans = trans_head_.forward(features).col(0);
    std::vector<Eigen::Index> argmax;
    M pooled = nn::global_max_pool(features, cache ? &argmax : nullptr);
    const int bins = cfg_.rotation_bins();
    const M rot = rot_head_.forward(pooled);
    q.q_rot.resize(bins, 3);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < bins; ++b) q.q_rot(b, a) = rot(0, a * bins + b);
    }
    const M open = open_head_.forward(pooled);
    const M collide = collide_head_.forward(pooled);
    q.q_open << open(0, 0), open(0, 1);
    q.q_collide << collide(0, 0), collide(0, 1);
    if (cache) {
      cache->columns = std::move(columns);
      cache->u_pre = std::move(u_pre);
      cache->concat = std::move(concat);
      cache->f_pre = std::move(f_pre);
      cache->features = std::move(features);
      cache->pool_argmax = std::move(argmax);
      cache->pooled = std::move(pooled);
    }
    return q;
  }

  QPrediction<Scalar> forward(const VoxelGrid& grid, const Proprio& proprio, const LanguageEncoding& lang,
                              ForwardCache* cache = nullptr) const {
    const auto pre = preprocess(grid, proprio, lang, cache ? &cache->pre : nullptr);
    const M out = latent_transform(pre.sequence, cache ? &cache->transform : nullptr);
    return decode(out, pre.skip, cache ? &cache->decode : nullptr);
  }

  QPrediction<Scalar> forward(const VoxelGrid& grid, const Proprio& proprio, const std::string& goal) const {
    return forward(grid, proprio, encode_language(goal));
  }

  // --------------------------------------------------------------- backward

  /// Accumulates dL/dparams given dL/dQ for one forward pass.
  void backward(const ForwardCache& cache, const QPrediction<Scalar>& dq) {
    const int c = cfg_.voxel_feature_dim;
    const int bins = cfg_.rotation_bins();
    const auto& dc = cache.decode;

    // Heads.
    M df = trans_head_.backward(dc.features, M(dq.q_trans));
    M drot(1, 3 * bins);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < bins; ++b) drot(0, a * bins + b) = dq.q_rot(b, a);
    }
    M dpooled = rot_head_.backward(dc.pooled, drot);
    M dopen(1, 2), dcollide(1, 2);
    dopen << dq.q_open[0], dq.q_open[1];
    dcollide << dq.q_collide[0], dq.q_collide[1];
    dpooled += open_head_.backward(dc.pooled, dopen);
    dpooled += collide_head_.backward(dc.pooled, dcollide);
    for (Eigen::Index ch = 0; ch < dpooled.cols(); ++ch) {
      df(dc.pool_argmax[static_cast<std::size_t>(ch)], ch) += dpooled(0, ch);
    }

    // Decoder.
    const M df_pre = nn::Gelu<Scalar>::backward(dc.f_pre, df);
    const M dconcat = fuse_.backward(dc.concat, df_pre);
    const int per_axis = cfg_.patches_per_axis();
    const nn::Dims3 lattice{per_axis, per_axis, per_axis};
    const M du = nn::trilinear_upsample_backward<Scalar>(dconcat.leftCols(c), lattice, cfg_.patch_size);
    const M du_pre = nn::Gelu<Scalar>::backward(dc.u_pre, du);
    const M dcolumns = up_conv_.backward(dc.columns, du_pre);
    const M dtokens = nn::neighbourhood_scatter(dcolumns, lattice, cfg_.embed_dim);

    M dseq_out = M::Zero(cfg_.sequence_length(), cfg_.embed_dim);
    dseq_out.topRows(cfg_.num_voxel_tokens()) = dtokens;
    const M dseq = latent_transform_backward(cache.transform, dseq_out);
    preprocess_backward(cache.pre, dseq, dconcat.rightCols(c));
  }

  M latent_transform_backward(const TransformCache& tc, const M& dout) {
    M dseq = dout;
    auto g = dec_attn_.backward(tc.dec_attn, dout);
    dseq += dec_ln_query_.backward(tc.dec_ln_query, g.dxq);
    M dz = dec_ln_latent_.backward(tc.dec_ln_latent, g.dxkv);
    for (std::size_t l = blocks_.size(); l-- > 0;) {
      auto& b = blocks_[l];
      const auto& bc = tc.blocks[l];
      dz += b.ln2.backward(bc.ln2, b.ff.backward(bc.ff, dz));
      auto ga = b.attn.backward(bc.attn, dz);
      ga.dxq += ga.dxkv;
      dz += b.ln1.backward(bc.ln1, ga.dxq);
    }
    dz += enc_ff_ln_.backward(tc.enc_ff_ln, enc_ff_.backward(tc.enc_ff, dz));
    auto ge = enc_attn_.backward(tc.enc_attn, dz);
    dz += enc_ln_latent_.backward(tc.enc_ln_latent, ge.dxq);
    dseq += enc_ln_input_.backward(tc.enc_ln_input, ge.dxkv);
    latents_grad_ += dz;
    return dseq;
  }

  void preprocess_backward(const PreprocessCache& pc, const M& dseq, const M& dskip_decoder) {
    const int c = cfg_.voxel_feature_dim;
    const int n = cfg_.num_voxel_tokens();
    const int t = cfg_.num_lang_tokens;
    pos_emb_grad_ += dseq;
    const M dpf = dseq.topRightCorner(n, c).colwise().sum();
    M dlang = dseq.bottomRows(t);
    dlang.rightCols(c).rowwise() += dpf.row(0) / static_cast<Scalar>(t);
    lang_proj_.backward_params(pc.lang_in, dlang);
    proprio_lift_.backward_params(pc.proprio_in, nn::Gelu<Scalar>::backward(pc.pa, dpf));
    const M da1 = nn::Gelu<Scalar>::backward(pc.a1, M(dseq.topLeftCorner(n, c)));
    const M dpatches = patch_proj_.backward(pc.patches, da1);
    M dskip = nn::patchify_scatter(dpatches, cfg_.grid(), cfg_.patch_size, c);
    dskip += dskip_decoder;
    voxel_lift_.backward_params(pc.input, nn::Gelu<Scalar>::backward(pc.a0, dskip));
  }

  // ------------------------------------------------------------- parameters

  /// Calls f(name, value, grad) for every parameter tensor, in a fixed order.
  template <typename F>
  void visit_parameters(F&& f) {
    voxel_lift_.visit("preprocess.voxel_lift", f);
    patch_proj_.visit("preprocess.patchify", f);
    proprio_lift_.visit("preprocess.proprio_lift", f);
    lang_proj_.visit("preprocess.lang_proj", f);
    f(std::string("preprocess.pos_embedding"), pos_emb_, pos_emb_grad_);
    f(std::string("perceiver.latents"), latents_, latents_grad_);
    enc_ln_latent_.visit("perceiver.encoder.ln_latent", f);
    enc_ln_input_.visit("perceiver.encoder.ln_input", f);
    enc_attn_.visit("perceiver.encoder.attn", f);
    enc_ff_ln_.visit("perceiver.encoder.ln_ff", f);
    enc_ff_.visit("perceiver.encoder.ff", f);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const std::string p = "perceiver.layer" + std::to_string(l);
      blocks_[l].ln1.visit(p + ".ln_attn", f);
      blocks_[l].attn.visit(p + ".attn", f);
      blocks_[l].ln2.visit(p + ".ln_ff", f);
      blocks_[l].ff.visit(p + ".ff", f);
    }
    dec_ln_query_.visit("perceiver.decoder.ln_query", f);
    dec_ln_latent_.visit("perceiver.decoder.ln_latent", f);
    dec_attn_.visit("perceiver.decoder.attn", f);
    up_conv_.visit("decode.up_conv", f);
    fuse_.visit("decode.fuse", f);
    trans_head_.visit("decode.trans_head", f);
    rot_head_.visit("decode.rot_head", f);
    open_head_.visit("decode.open_head", f);
    collide_head_.visit("decode.collide_head", f);
  }

  template <typename F>
  void visit_parameters(F&& f) const {
    const_cast<PerceiverPolicy*>(this)->visit_parameters(
        [&](const std::string& name, M& value, M& grad) { f(name, static_cast<const M&>(value), static_cast<const M&>(grad)); });
  }

  void zero_grad() {
    visit_parameters([](const std::string&, M&, M& grad) { grad.setZero(); });
  }

  [[nodiscard]] std::int64_t parameter_count() const {
    std::int64_t n = 0;
    visit_parameters([&](const std::string&, const M& v, const M&) { n += v.size(); });
    return n;
  }

  /// Copies every parameter from a policy of another scalar type with the same config.
  template <typename Other>
  void copy_parameters_from(const PerceiverPolicy<Other>& other) {
    if (!(other.config() == cfg_)) throw InvalidInput("policy: cannot copy parameters across configs");
    std::vector<nn::Mat<Other>> values;
    other.visit_parameters([&](const std::string&, const nn::Mat<Other>& v, const nn::Mat<Other>&) { values.push_back(v); });
    std::size_t i = 0;
    visit_parameters([&](const std::string&, M& v, M&) { v = values[i++].template cast<Scalar>(); });
  }

private:
  struct LatentBlock {
    LN ln1;
    MHA attn;
    LN ln2;
    FF ff;
  };

  void check_inputs(const VoxelGrid& grid, const LanguageEncoding& lang) const {
    const auto g = cfg_.grid();
    if (grid.bounds.grid_size != g || grid.channels.size() != static_cast<std::size_t>(grid.voxel_count()) * channel::kCount) {
      throw InvalidInput("policy: voxel grid shape does not match grid_size");
    }
    if (lang.tokens.rows() != cfg_.num_lang_tokens || lang.tokens.cols() != cfg_.lang_feature_dim) {
      throw InvalidInput("policy: language encoding shape does not match the config");
    }
  }

  PolicyConfig cfg_;
  nn::Linear<Scalar> voxel_lift_;
  nn::Linear<Scalar> patch_proj_;
  nn::Linear<Scalar> proprio_lift_;
  nn::Linear<Scalar> lang_proj_;
  M pos_emb_;
  M pos_emb_grad_;
  M latents_;
  M latents_grad_;
  LN enc_ln_latent_;
  LN enc_ln_input_;
  MHA enc_attn_;
  LN enc_ff_ln_;
  FF enc_ff_;
  std::vector<LatentBlock> blocks_;
  LN dec_ln_query_;
  LN dec_ln_latent_;
  MHA dec_attn_;
  nn::Linear<Scalar> up_conv_;
  nn::Linear<Scalar> fuse_;
  nn::Linear<Scalar> trans_head_;
  nn::Linear<Scalar> rot_head_;
  nn::Linear<Scalar> open_head_;
  nn::Linear<Scalar> collide_head_;
  std::shared_ptr<const LanguageEncoder> encoder_;
};

}  // namespace peract
