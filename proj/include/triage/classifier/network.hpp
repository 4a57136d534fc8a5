#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "triage/classifier/loss.hpp"
#include "triage/classifier/model.hpp"
#include "triage/error.hpp"
#include "triage/rng.hpp"

namespace triage {

/// One gradient matrix per model tensor, in model order.
struct Gradients {
  std::vector<Mat> grads;

  static Gradients zeros_like(const ModelBundle& m) {
    Gradients g;
    g.grads.reserve(m.weights().size());
    for (const auto& t : m.weights()) g.grads.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
    return g;
  }

  void scale(double s) {
    for (auto& g : grads) g *= s;
  }
};

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

inline RowVec to_row(const std::vector<double>& v) {
  return Eigen::Map<const RowVec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const RowVec& v) { return {v.data(), v.data() + v.size()}; }

// --- linear backend --------------------------------------------------------

struct LinearCache {
  RowVec hidden;
};

inline void check_bag(const ModelBundle& m, const BagOfFeatures& bag) {
  const auto rows = static_cast<std::uint64_t>(m.param("embedding").rows());
  for (auto idx : bag.indices) {
    if (idx >= rows)
      throw MismatchError("feature index " + std::to_string(idx) + " outside model embedding of " +
                          std::to_string(rows) + " rows");
  }
}

inline RowVec linear_logits(const ModelBundle& m, const BagOfFeatures& bag, LinearCache* cache) {
  check_bag(m, bag);
  const Mat& emb = m.param("embedding");
  RowVec hidden = RowVec::Zero(emb.cols());
  // Indices are sorted, so the summation order is fixed for a given bag.
  for (auto idx : bag.indices) hidden += emb.row(idx);
  if (!bag.indices.empty()) hidden /= static_cast<double>(bag.indices.size());
  RowVec logits = hidden * m.param("head.weight") + m.param("head.bias");
  if (cache) cache->hidden = std::move(hidden);
  return logits;
}

inline void linear_backward(const ModelBundle& m, const BagOfFeatures& bag, const LinearCache& cache,
                            const RowVec& dlogits, Gradients& g) {
  const std::size_t iw = m.index_of("head.weight");
  g.grads[iw].noalias() += cache.hidden.transpose() * dlogits;
  g.grads[m.index_of("head.bias")] += dlogits;
  if (bag.indices.empty()) return;
  const RowVec dhidden = (dlogits * m.weights()[iw].value.transpose()) /
                         static_cast<double>(bag.indices.size());
  Mat& demb = g.grads[m.index_of("embedding")];
  for (auto idx : bag.indices) demb.row(idx) += dhidden;
}

// --- transformer backend ---------------------------------------------------

inline double gelu(double x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

inline double gelu_grad(double x) {
  constexpr double c = 0.7978845608028654;
  const double t = std::tanh(c * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

inline double positional_encoding(std::size_t pos, std::size_t i, std::size_t d) {
  const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
  const double angle = static_cast<double>(pos) / rate;
  return i % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

struct LayerNormCache {
  Mat xhat;
  std::vector<double> rstd;
};

inline Mat layer_norm(const Mat& x, const Mat& gamma, const Mat& beta, LayerNormCache* cache) {
  const auto d = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  std::vector<double> rstd(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).sum() / d;
    const RowVec centered = x.row(r).array() - mu;
    const double var = centered.squaredNorm() / d;
    rstd[static_cast<std::size_t>(r)] = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = centered * rstd[static_cast<std::size_t>(r)];
  }
  Mat y = (xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

/// Returns dL/dx; accumulates gamma and beta gradients.
inline Mat layer_norm_backward(const Mat& dy, const LayerNormCache& c, const Mat& gamma, Mat& dgamma,
                               Mat& dbeta) {
  dgamma.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gamma.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / d;
    const double mean_dx = dxhat.row(r).dot(c.xhat.row(r)) / d;
    dx.row(r) = (dxhat.row(r).array() - mean_d - c.xhat.row(r).array() * mean_dx) *
                c.rstd[static_cast<std::size_t>(r)];
  }
  return dx;
}

inline Mat dropout_mask(Rng* rng, Eigen::Index rows, Eigen::Index cols, double p) {
  if (!rng || p <= 0.0) return {};
  Mat mask(rows, cols);
  const double keep = 1.0 - p;
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

inline void apply_mask(Mat& x, const Mat& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

struct LayerCache {
  Mat x_in, q, k, v, concat;
  std::vector<Mat> attn;  // per head, rows = queries, cols = keys
  Mat drop1;
  LayerNormCache ln1;
  Mat y1, ff_pre, ff_act;
  Mat drop2;
  LayerNormCache ln2;
};

struct TransformerCache {
  std::vector<std::size_t> positions;  // sequence positions of the computed rows
  std::vector<bool> valid;             // row is a real (unmasked) token
  std::size_t n_valid = 0;
  Mat drop0;
  std::vector<LayerCache> layers;
  RowVec pooled;
};

struct LayerParams {
  std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1g, ln1b, w1, b1, w2, b2, ln2g, ln2b;

  static LayerParams of(const ModelBundle& m, std::size_t layer) {
    const std::string p = "layer" + std::to_string(layer) + ".";
    return {m.index_of(p + "attn.wq"), m.index_of(p + "attn.bq"), m.index_of(p + "attn.wk"),
            m.index_of(p + "attn.bk"), m.index_of(p + "attn.wv"), m.index_of(p + "attn.bv"),
            m.index_of(p + "attn.wo"), m.index_of(p + "attn.bo"), m.index_of(p + "ln1.gamma"),
            m.index_of(p + "ln1.beta"), m.index_of(p + "ff.w1"),  m.index_of(p + "ff.b1"),
            m.index_of(p + "ff.w2"),   m.index_of(p + "ff.b2"),  m.index_of(p + "ln2.gamma"),
            m.index_of(p + "ln2.beta")};
  }
};

inline void check_sequence(const ModelBundle& m, const TokenSequence& seq) {
  if (seq.ids.size() != seq.mask.size()) throw MismatchError("token ids and mask differ in length");
  const auto vocab_rows = static_cast<std::int64_t>(m.param("embedding").rows());
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (seq.mask[i] && (seq.ids[i] < 0 || seq.ids[i] >= vocab_rows))
      throw MismatchError("token id " + std::to_string(seq.ids[i]) +
                          " outside model vocabulary of " + std::to_string(vocab_rows));
  }
}

/// Runs the encoder. With `full_length` every position (PAD included) is
/// computed and masked keys are excluded from attention; otherwise only the
/// unmasked positions are computed, which gives the same pooled output.
inline RowVec transformer_logits(const ModelBundle& m, const TokenSequence& seq, TransformerCache& cache,
                                 Rng* dropout_rng, bool full_length = false) {
  check_sequence(m, seq);
  const EncoderConfig& enc = *m.encoder;
  const auto& W = m.weights();
  const std::size_t d = enc.hidden_dim;
  const std::size_t dh = enc.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache = {};
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (full_length || seq.mask[i]) {
      cache.positions.push_back(i);
      cache.valid.push_back(seq.mask[i]);
      if (seq.mask[i]) ++cache.n_valid;
    }
  }
  const auto T = static_cast<Eigen::Index>(cache.positions.size());
  const auto di = static_cast<Eigen::Index>(d);

  if (cache.n_valid == 0) {
    cache.pooled = RowVec::Zero(di);
    return cache.pooled * m.param("head.weight") + m.param("head.bias");
  }

  const Mat& emb = m.param("embedding");
  Mat x(T, di);
  for (Eigen::Index r = 0; r < T; ++r) {
    const std::size_t pos = cache.positions[static_cast<std::size_t>(r)];
    const auto id = seq.mask[pos] ? seq.ids[pos] : kPadId;
    x.row(r) = emb.row(id);
    for (std::size_t c = 0; c < d; ++c) x(r, static_cast<Eigen::Index>(c)) += positional_encoding(pos, c, d);
  }
  cache.drop0 = dropout_mask(dropout_rng, T, di, enc.dropout);
  apply_mask(x, cache.drop0);

  cache.layers.resize(enc.layers);
  for (std::size_t l = 0; l < enc.layers; ++l) {
    const LayerParams p = LayerParams::of(m, l);
    LayerCache& lc = cache.layers[l];
    lc.x_in = x;
    lc.q = (x * W[p.wq].value).rowwise() + W[p.bq].value.row(0);
    lc.k = (x * W[p.wk].value).rowwise() + W[p.bk].value.row(0);
    lc.v = (x * W[p.wv].value).rowwise() + W[p.bv].value.row(0);
    lc.concat = Mat::Zero(T, di);
    lc.attn.resize(enc.heads);
    for (std::size_t h = 0; h < enc.heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h * dh);
      const auto dhi = static_cast<Eigen::Index>(dh);
      Mat s = (lc.q.middleCols(c0, dhi) * lc.k.middleCols(c0, dhi).transpose()) * scale;
      Mat a = Mat::Zero(T, T);
      for (Eigen::Index i = 0; i < T; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < T; ++j) {
          if (cache.valid[static_cast<std::size_t>(j)]) mx = std::max(mx, s(i, j));
        }
        double sum = 0.0;
        for (Eigen::Index j = 0; j < T; ++j) {
          if (cache.valid[static_cast<std::size_t>(j)]) sum += (a(i, j) = std::exp(s(i, j) - mx));
        }
        a.row(i) /= sum;
      }
      lc.concat.middleCols(c0, dhi) = a * lc.v.middleCols(c0, dhi);
      lc.attn[h] = std::move(a);
    }
    Mat attn_out = (lc.concat * W[p.wo].value).rowwise() + W[p.bo].value.row(0);
    lc.drop1 = dropout_mask(dropout_rng, T, di, enc.dropout);
    apply_mask(attn_out, lc.drop1);
    lc.y1 = layer_norm(x + attn_out, W[p.ln1g].value, W[p.ln1b].value, &lc.ln1);

    lc.ff_pre = (lc.y1 * W[p.w1].value).rowwise() + W[p.b1].value.row(0);
    lc.ff_act = lc.ff_pre.unaryExpr([](double v) { return gelu(v); });
    Mat ff_out = (lc.ff_act * W[p.w2].value).rowwise() + W[p.b2].value.row(0);
    lc.drop2 = dropout_mask(dropout_rng, T, di, enc.dropout);
    apply_mask(ff_out, lc.drop2);
    x = layer_norm(lc.y1 + ff_out, W[p.ln2g].value, W[p.ln2b].value, &lc.ln2);
  }

  cache.pooled = RowVec::Zero(di);
  for (Eigen::Index r = 0; r < T; ++r) {
    if (cache.valid[static_cast<std::size_t>(r)]) cache.pooled += x.row(r);
  }
  cache.pooled /= static_cast<double>(cache.n_valid);
  return cache.pooled * m.param("head.weight") + m.param("head.bias");
}

inline void transformer_backward(const ModelBundle& m, const TokenSequence& seq,
                                 const TransformerCache& cache, const RowVec& dlogits, Gradients& g) {
  const EncoderConfig& enc = *m.encoder;
  const auto& W = m.weights();
  const std::size_t dh = enc.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const std::size_t ihw = m.index_of("head.weight");
  g.grads[ihw].noalias() += cache.pooled.transpose() * dlogits;
  g.grads[m.index_of("head.bias")] += dlogits;
  if (cache.n_valid == 0) return;

  const auto T = static_cast<Eigen::Index>(cache.positions.size());
  const RowVec dpooled = (dlogits * W[ihw].value.transpose()) / static_cast<double>(cache.n_valid);
  Mat dx = Mat::Zero(T, static_cast<Eigen::Index>(enc.hidden_dim));
  for (Eigen::Index r = 0; r < T; ++r) {
    if (cache.valid[static_cast<std::size_t>(r)]) dx.row(r) = dpooled;
  }

  for (std::size_t l = enc.layers; l-- > 0;) {
    const LayerParams p = LayerParams::of(m, l);
    const LayerCache& lc = cache.layers[l];

    // x_out = LN2(y1 + ff_out)
    Mat dz2 = layer_norm_backward(dx, lc.ln2, W[p.ln2g].value, g.grads[p.ln2g], g.grads[p.ln2b]);
    Mat dy1 = dz2;
    Mat dff = dz2;
    apply_mask(dff, lc.drop2);
    g.grads[p.w2].noalias() += lc.ff_act.transpose() * dff;
    g.grads[p.b2].row(0) += dff.colwise().sum();
    Mat dpre = (dff * W[p.w2].value.transpose()).array() *
               lc.ff_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    g.grads[p.w1].noalias() += lc.y1.transpose() * dpre;
    g.grads[p.b1].row(0) += dpre.colwise().sum();
    dy1.noalias() += dpre * W[p.w1].value.transpose();

    // y1 = LN1(x_in + attn_out)
    Mat dz1 = layer_norm_backward(dy1, lc.ln1, W[p.ln1g].value, g.grads[p.ln1g], g.grads[p.ln1b]);
    Mat dattn = dz1;
    apply_mask(dattn, lc.drop1);
    g.grads[p.wo].noalias() += lc.concat.transpose() * dattn;
    g.grads[p.bo].row(0) += dattn.colwise().sum();
    const Mat dconcat = dattn * W[p.wo].value.transpose();

    Mat dq = Mat::Zero(T, dconcat.cols());
    Mat dk = Mat::Zero(T, dconcat.cols());
    Mat dv = Mat::Zero(T, dconcat.cols());
    for (std::size_t h = 0; h < enc.heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h * dh);
      const auto dhi = static_cast<Eigen::Index>(dh);
      const Mat& a = lc.attn[h];
      const Mat dout = dconcat.middleCols(c0, dhi);
      dv.middleCols(c0, dhi).noalias() += a.transpose() * dout;
      const Mat da = dout * lc.v.middleCols(c0, dhi).transpose();
      Mat ds(T, T);
      for (Eigen::Index i = 0; i < T; ++i) {
        const double row_dot = a.row(i).dot(da.row(i));
        ds.row(i) = a.row(i).array() * (da.row(i).array() - row_dot);
      }
      ds *= scale;
      dq.middleCols(c0, dhi).noalias() += ds * lc.k.middleCols(c0, dhi);
      dk.middleCols(c0, dhi).noalias() += ds.transpose() * lc.q.middleCols(c0, dhi);
    }
    g.grads[p.wq].noalias() += lc.x_in.transpose() * dq;
    g.grads[p.bq].row(0) += dq.colwise().sum();
    g.grads[p.wk].noalias() += lc.x_in.transpose() * dk;
    g.grads[p.bk].row(0) += dk.colwise().sum();
    g.grads[p.wv].noalias() += lc.x_in.transpose() * dv;
    g.grads[p.bv].row(0) += dv.colwise().sum();
    dx = dz1;
    dx.noalias() += dq * W[p.wq].value.transpose();
    dx.noalias() += dk * W[p.wk].value.transpose();
    dx.noalias() += dv * W[p.wv].value.transpose();
  }

  apply_mask(dx, cache.drop0);
  Mat& demb = g.grads[m.index_of("embedding")];
  for (Eigen::Index r = 0; r < T; ++r) {
    const std::size_t pos = cache.positions[static_cast<std::size_t>(r)];
    const auto id = seq.mask[pos] ? seq.ids[pos] : kPadId;
    demb.row(id) += dx.row(r);
  }
}

inline const TokenSequence& as_sequence(const ModelBundle& m, const ModelInput& in) {
  if (m.backend != Backend::kTransformer || !std::holds_alternative<TokenSequence>(in))
    throw MismatchError("transformer backend expects a token sequence input");
  if (!m.encoder) throw MismatchError("transformer model lacks an encoder configuration");
  return std::get<TokenSequence>(in);
}

inline const BagOfFeatures& as_bag(const ModelBundle& m, const ModelInput& in) {
  if (m.backend != Backend::kLinear || !std::holds_alternative<BagOfFeatures>(in))
    throw MismatchError("linear backend expects a bag-of-features input");
  return std::get<BagOfFeatures>(in);
}

}  // namespace detail

/// Raw output scores before the sigmoid/softmax head.
inline std::vector<double> forward_logits(const ModelBundle& m, const ModelInput& input) {
  if (m.backend == Backend::kLinear)
    return detail::to_std(detail::linear_logits(m, detail::as_bag(m, input), nullptr));
  detail::TransformerCache cache;
  return detail::to_std(detail::transformer_logits(m, detail::as_sequence(m, input), cache, nullptr));
}

inline Prediction forward(const ModelBundle& m, const ModelInput& input) {
  return apply_head(m.task.task, forward_logits(m, input));
}

/// Attention weights of every layer and head, rows = computed query
/// positions, columns = key positions in the same order. With `full_length`
/// PAD positions are computed too and must receive zero weight.
inline std::vector<std::vector<Mat>> attention_maps(const ModelBundle& m, const TokenSequence& seq,
                                                    bool full_length) {
  detail::TransformerCache cache;
  detail::transformer_logits(m, detail::as_sequence(m, ModelInput{seq}), cache, nullptr, full_length);
  std::vector<std::vector<Mat>> out;
  for (const auto& lc : cache.layers) out.push_back(lc.attn);
  return out;
}

/// Prediction computed over every padded position with key masking. Used to
/// cross-check the compact path.
inline Prediction forward_full_length(const ModelBundle& m, const TokenSequence& seq) {
  detail::TransformerCache cache;
  const RowVec logits =
      detail::transformer_logits(m, detail::as_sequence(m, ModelInput{seq}), cache, nullptr, true);
  return apply_head(m.task.task, detail::to_std(logits));
}

struct Example {
  ModelInput input;
  Target truth;
};

/// Mean loss over `batch` and its gradient. A non-null `dropout_rng` enables
/// dropout (training mode).
inline double loss_and_gradients(const ModelBundle& m, std::span<const Example> batch, Gradients& g,
                                 Rng* dropout_rng = nullptr) {
  g = Gradients::zeros_like(m);
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const Example& ex : batch) {
    RowVec logits;
    detail::LinearCache lcache;
    detail::TransformerCache tcache;
    if (m.backend == Backend::kLinear) {
      logits = detail::linear_logits(m, detail::as_bag(m, ex.input), &lcache);
    } else {
      logits = detail::transformer_logits(m, detail::as_sequence(m, ex.input), tcache, dropout_rng);
    }
    const Prediction pred = apply_head(m.task.task, detail::to_std(logits));
    total += compute_loss(m.task.task, pred, ex.truth);
    const RowVec dlogits = detail::to_row(loss_gradient(m.task.task, pred, ex.truth));
    if (m.backend == Backend::kLinear) {
      detail::linear_backward(m, std::get<BagOfFeatures>(ex.input), lcache, dlogits, g);
    } else {
      detail::transformer_backward(m, std::get<TokenSequence>(ex.input), tcache, dlogits, g);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  g.scale(inv);
  return total * inv;
}

/// Mean loss over `batch` without gradients or dropout.
inline double mean_loss(const ModelBundle& m, std::span<const Example> batch) {
  double total = 0.0;
  for (const Example& ex : batch) total += compute_loss(m.task.task, forward(m, ex.input), ex.truth);
  return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

}  // namespace triage
