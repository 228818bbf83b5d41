#pragma once

// Method core: projection of referring/word features to a shared dimension,
// Gaussian-language similarity, position-aware cross-modal interaction,
// Gaussian-text contrastive learning, and the training losses. Every
// forward here has a matching analytic backward; the gradient checker in
// numkit is the verification oracle for all of them.
//
// The attention refinement per Gaussian i over words j:
//   u_j  = <f_w[j], f_r[i]> / sqrt(D)            s = softmax(u)
//   f_pw[i][j] = s_j * f_p[i]                    (word-aligned position feature)
//   z_j  = <f_r[i]+f_p[i], f_w[j]+f_pw[i][j]> / sqrt(D)
//   a    = softmax(z)
//   f'_r[i] = f_r[i] + sum_j a_j f_w[j]
// There are no learned query/key/value matrices; learnable capacity lives in
// the projections, the position MLP, and the referring features themselves.

#include "splatseg/numkit.hpp"
#include "splatseg/rasterizer.hpp"
#include "splatseg/scene.hpp"
#include "splatseg/text.hpp"

namespace splatseg {

enum class Similarity { multiplication, cosine };

template <typename R>
struct ReferModel {
    AffineLayer<R> refer_proj;  // d_r -> D
    AffineLayer<R> word_proj;   // d_text -> D
    Mlp<R> pos_mlp;             // 3 -> hidden -> D
    std::size_t d_r = 16;
    std::size_t feature_dim = 128;

    ReferModel() = default;
    ReferModel(std::size_t dr, std::size_t D, std::size_t d_text, std::size_t pos_hidden = 64)
        : refer_proj(D, dr), word_proj(D, d_text), pos_mlp(3, pos_hidden, D), d_r(dr),
          feature_dim(D) {}
};

struct AblationFlags {
    bool pcmi = true;
    bool gtcl = true;
    Similarity similarity = Similarity::multiplication;
};

template <typename R>
struct TrainHyper {
    R lambda = R(0.02);
    R epsilon = R(0.3);  // candidate confidence threshold (pseudo-mask stage)
    R tau0 = R(0.1);
    R tau_decay = R(0.6);
    R tau_period = R(1000);
    R lr_features = R(0.0025);
    R lr_layers = R(0.0001);
    std::size_t iterations = 5000;
};

/// tau = tau0 * decay^(iteration / period), real-valued exponent.
template <typename R>
inline R tau_schedule(std::uint64_t iteration, R tau0 = R(0.1), R decay = R(0.6),
                      R period = R(1000)) {
    return tau0 * std::pow(decay, static_cast<R>(iteration) / period);
}

/// Row-wise projection of referring features and word features to the shared
/// dimension D. Returns (N x D, L x D).
template <typename R>
inline std::pair<Tensor2<R>, Tensor2<R>> project_features(const Tensor2<R>& referring,
                                                          const Tensor2<R>& word_feats,
                                                          const ReferModel<R>& model) {
    if (referring.cols != model.refer_proj.in() || word_feats.cols != model.word_proj.in()) {
        throw std::invalid_argument("project_features: shape mismatch");
    }
    Tensor2<R> fr(referring.rows, model.feature_dim);
    for (std::size_t i = 0; i < referring.rows; ++i) {
        affine_into(model.refer_proj, referring.row(i), fr.row(i));
    }
    Tensor2<R> fw(word_feats.rows, model.feature_dim);
    for (std::size_t j = 0; j < word_feats.rows; ++j) {
        affine_into(model.word_proj, word_feats.row(j), fw.row(j));
    }
    return {std::move(fr), std::move(fw)};
}

/// m_i = sum_j <f_r[i], f_w[j]> (multiplication) or the sum of per-word
/// cosine similarities (ablation option).
template <typename R>
inline Vec<R> similarity_scores(const Tensor2<R>& fr, const Tensor2<R>& fw,
                                Similarity mode = Similarity::multiplication) {
    Vec<R> m(fr.rows, R(0));
    if (mode == Similarity::multiplication) {
        Vec<R> wsum(fw.cols, R(0));
        for (std::size_t j = 0; j < fw.rows; ++j) {
            auto row = fw.row(j);
            for (std::size_t k = 0; k < fw.cols; ++k) wsum[k] += row[k];
        }
        for (std::size_t i = 0; i < fr.rows; ++i) m[i] = dot<R>(fr.row(i), wsum);
    } else {
        Vec<R> wn(fw.rows);
        for (std::size_t j = 0; j < fw.rows; ++j) wn[j] = std::max(l2_norm<R>(fw.row(j)), R(1e-12));
        for (std::size_t i = 0; i < fr.rows; ++i) {
            const R rn = std::max(l2_norm<R>(fr.row(i)), R(1e-12));
            R acc = 0;
            for (std::size_t j = 0; j < fw.rows; ++j) acc += dot<R>(fr.row(i), fw.row(j)) / (rn * wn[j]);
            m[i] = acc;
        }
    }
    return m;
}

/// Position embeddings: row-wise pos_mlp on the Gaussian centers. The
/// hidden pre-activations are returned for the backward pass.
template <typename R>
inline std::pair<Tensor2<R>, Tensor2<R>> position_embed_cached(const GaussianCloud<R>& cloud,
                                                               const ReferModel<R>& model) {
    const std::size_t n = cloud.size();
    const std::size_t hdim = model.pos_mlp.hidden.out();
    Tensor2<R> fp(n, model.feature_dim);
    Tensor2<R> hidden_pre(n, hdim);
    Vec<R> h(hdim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& mu = cloud.gaussians[i].mu;
        const std::array<R, 3> x = {mu[0], mu[1], mu[2]};
        auto pre = hidden_pre.row(i);
        affine_into(model.pos_mlp.hidden, std::span<const R>(x.data(), 3), pre);
        for (std::size_t t = 0; t < hdim; ++t) h[t] = relu(pre[t]);
        affine_into(model.pos_mlp.output, std::span<const R>(h), fp.row(i));
    }
    return {std::move(fp), std::move(hidden_pre)};
}

template <typename R>
inline Tensor2<R> position_embed(const GaussianCloud<R>& cloud, const ReferModel<R>& model) {
    return position_embed_cached(cloud, model).first;
}

/// Word-aligned position features for one Gaussian: softmax over the word
/// scores <f_w[j], f_r[i]>/sqrt(D) scales the Gaussian's position embedding
/// per word. Returns the L x D matrix and the attention weights.
template <typename R>
inline std::pair<Tensor2<R>, Vec<R>> text_position_features(const Tensor2<R>& fw,
                                                            std::span<const R> fr_i,
                                                            std::span<const R> fp_i) {
    const R inv_sqrt_d = R(1) / std::sqrt(static_cast<R>(fw.cols));
    Vec<R> u(fw.rows);
    for (std::size_t j = 0; j < fw.rows; ++j) u[j] = dot<R>(fw.row(j), fr_i) * inv_sqrt_d;
    Vec<R> s = softmax<R>(u);
    Tensor2<R> fpw(fw.rows, fw.cols);
    for (std::size_t j = 0; j < fw.rows; ++j) {
        for (std::size_t k = 0; k < fw.cols; ++k) fpw.at(j, k) = s[j] * fp_i[k];
    }
    return {std::move(fpw), std::move(s)};
}

/// Literal position-guided refinement of one row (test surface); the batch
/// pipeline computes the same quantity with the dot products expanded.
template <typename R>
inline std::pair<Vec<R>, Vec<R>> position_aware_refine_one(std::span<const R> fr_i,
                                                           std::span<const R> fp_i,
                                                           const Tensor2<R>& fw,
                                                           const Tensor2<R>& fpw_i) {
    const std::size_t D = fw.cols;
    const R inv_sqrt_d = R(1) / std::sqrt(static_cast<R>(D));
    Vec<R> q(D);
    for (std::size_t k = 0; k < D; ++k) q[k] = fr_i[k] + fp_i[k];
    Vec<R> z(fw.rows);
    for (std::size_t j = 0; j < fw.rows; ++j) {
        R acc = 0;
        for (std::size_t k = 0; k < D; ++k) acc += q[k] * (fw.at(j, k) + fpw_i.at(j, k));
        z[j] = acc * inv_sqrt_d;
    }
    Vec<R> a = softmax<R>(z);
    Vec<R> refined(fr_i.begin(), fr_i.end());
    for (std::size_t j = 0; j < fw.rows; ++j) {
        for (std::size_t k = 0; k < D; ++k) refined[k] += a[j] * fw.at(j, k);
    }
    return {std::move(refined), std::move(a)};
}

/// Batch refinement over all Gaussians. Returns refined features and the two
/// attention matrices (word softmax s and position-guided softmax a).
template <typename R>
inline void position_aware_refine(const Tensor2<R>& fr, const Tensor2<R>& fp, const Tensor2<R>& fw,
                                  Tensor2<R>& refined, Tensor2<R>& attn_s, Tensor2<R>& attn_a,
                                  Vec<R>& qp_cache) {
    const std::size_t n = fr.rows, L = fw.rows, D = fw.cols;
    const R inv_sqrt_d = R(1) / std::sqrt(static_cast<R>(D));
    refined = Tensor2<R>(n, D);
    attn_s = Tensor2<R>(n, L);
    attn_a = Tensor2<R>(n, L);
    qp_cache.assign(n, R(0));
    Vec<R> u(L), z(L), q(D);
    for (std::size_t i = 0; i < n; ++i) {
        auto fri = fr.row(i);
        auto fpi = fp.row(i);
        for (std::size_t j = 0; j < L; ++j) u[j] = dot<R>(fw.row(j), fri) * inv_sqrt_d;
        auto s = attn_s.row(i);
        softmax_into<R>(u, s);
        // q = f_r + f_p;  z_j = (<q, f_w[j]> + s_j * <q, f_p>) / sqrt(D)
        for (std::size_t k = 0; k < D; ++k) q[k] = fri[k] + fpi[k];
        const R qp = dot<R>(std::span<const R>(q), fpi);
        qp_cache[i] = qp;
        for (std::size_t j = 0; j < L; ++j) {
            z[j] = (dot<R>(std::span<const R>(q), fw.row(j)) + s[j] * qp) * inv_sqrt_d;
        }
        auto a = attn_a.row(i);
        softmax_into<R>(z, a);
        auto out = refined.row(i);
        std::copy(fri.begin(), fri.end(), out.begin());
        for (std::size_t j = 0; j < L; ++j) {
            auto fwj = fw.row(j);
            const R aj = a[j];
            for (std::size_t k = 0; k < D; ++k) out[k] += aj * fwj[k];
        }
    }
}

/// Forward intermediates cached for the backward pass.
template <typename R>
struct InteractionOutput {
    Tensor2<R> refined;   // N x D  f'_r (aliases fr when PCMI is off)
    Vec<R> responses;     // N      m_i
    Tensor2<R> pos_g;     // N x D  f_p (empty when PCMI is off)
    Tensor2<R> fr;        // N x D  projected referring features
    Tensor2<R> fw;        // L x D  projected word features
    Tensor2<R> attn_s;    // N x L
    Tensor2<R> attn_a;    // N x L
    Vec<R> qp;            // N      <f_r+f_p, f_p>
    Tensor2<R> pos_hidden_pre;  // N x H
    bool pcmi = true;
    Similarity similarity = Similarity::multiplication;
};

/// Full interaction pipeline: projections, optional PCMI refinement, and
/// similarity scores on the (possibly refined) features.
template <typename R>
inline void interact(const GaussianCloud<R>& cloud, const Tensor2<R>& word_embeds,
                     const ReferModel<R>& model, const AblationFlags& flags,
                     InteractionOutput<R>& out) {
    auto [fr, fw] = project_features(cloud.referring, word_embeds, model);
    out.fr = std::move(fr);
    out.fw = std::move(fw);
    out.pcmi = flags.pcmi;
    out.similarity = flags.similarity;
    if (flags.pcmi) {
        auto [fp, hidden] = position_embed_cached(cloud, model);
        out.pos_g = std::move(fp);
        out.pos_hidden_pre = std::move(hidden);
        position_aware_refine(out.fr, out.pos_g, out.fw, out.refined, out.attn_s, out.attn_a, out.qp);
    } else {
        out.refined = out.fr;
        out.pos_g = Tensor2<R>();
        out.attn_s = Tensor2<R>();
        out.attn_a = Tensor2<R>();
        out.qp.clear();
    }
    out.responses = similarity_scores(out.refined, out.fw, flags.similarity);
}

/// Response map for one expression in one view (evaluation entry point).
template <typename R>
inline std::pair<ResponseMap<R>, InteractionOutput<R>> forward_response(
    const GaussianCloud<R>& cloud, const Expression& expr, const Vocab<R>& vocab,
    const ReferModel<R>& model, const AblationFlags& flags, const Camera<R>& camera,
    const RenderSettings& settings = {}) {
    auto embeds = embed_tokens(expr, vocab);
    InteractionOutput<R> out;
    interact(cloud, embeds, model, flags, out);
    auto map = render_response(cloud, std::span<const R>(out.responses), camera, settings);
    return {std::move(map), std::move(out)};
}

/// Pixel-averaged binary cross entropy on the logistic of the composited
/// response. Probabilities are clamped to [1e-7, 1-1e-7] inside the logs;
/// the returned per-pixel gradient is (y - target) / pixel_count.
template <typename R>
struct BceResult {
    R loss = 0;
    Vec<R> grad;  // dL/dM per pixel
};

template <typename R>
inline BceResult<R> bce_loss(const ResponseMap<R>& map, const BinaryMask& target) {
    if (map.width != target.width || map.height != target.height) {
        throw std::invalid_argument("bce_loss: dimension mismatch");
    }
    const std::size_t npix = map.values.size();
    BceResult<R> out;
    out.grad.assign(npix, R(0));
    const R lo = R(1e-7), hi = R(1) - R(1e-7);
    R acc = 0;
    for (std::size_t p = 0; p < npix; ++p) {
        const R y = R(1) / (R(1) + std::exp(-map.values[p]));
        const R yc = std::min(std::max(y, lo), hi);
        const R t = target.bits[p] ? R(1) : R(0);
        acc -= t * std::log(yc) + (R(1) - t) * std::log(R(1) - yc);
        out.grad[p] = (y - t) / static_cast<R>(npix);
    }
    out.loss = acc / static_cast<R>(npix);
    return out;
}

/// Top-tau-fraction positive Gaussian embedding: mean of the selected
/// refined rows, L2-normalized. Selection takes the max(1, round(tau*N))
/// largest responses, ties broken toward the lower index.
template <typename R>
struct GaussianEmbedding {
    Vec<R> f_g;                         // normalized
    std::vector<std::size_t> selected;  // indices into the cloud
    R raw_norm = 0;
};

template <typename R>
inline GaussianEmbedding<R> gaussian_embedding(const Tensor2<R>& refined, std::span<const R> m,
                                               R tau) {
    const std::size_t n = refined.rows;
    if (n == 0) throw std::invalid_argument("gaussian_embedding: empty input");
    const auto quota = static_cast<std::size_t>(
        std::floor(tau * static_cast<R>(n) + R(0.5)));
    const std::size_t n_tau = std::max<std::size_t>(1, std::min(quota, n));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + n_tau, order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (m[a] != m[b]) return m[a] > m[b];
                          return a < b;
                      });
    GaussianEmbedding<R> out;
    out.selected.assign(order.begin(), order.begin() + n_tau);
    out.f_g.assign(refined.cols, R(0));
    for (auto i : out.selected) {
        auto row = refined.row(i);
        for (std::size_t k = 0; k < refined.cols; ++k) out.f_g[k] += row[k];
    }
    for (auto& v : out.f_g) v /= static_cast<R>(n_tau);
    out.raw_norm = l2_norm<R>(out.f_g);
    if (!(out.raw_norm > R(0))) throw std::runtime_error("gaussian_embedding: zero-norm mean");
    for (auto& v : out.f_g) v /= out.raw_norm;
    return out;
}

/// InfoNCE-style objective over positive/negative sentence embeddings:
/// L = -(1/|P|) sum_{e+ in P} log( exp(fg.e+) / sum_{e in P u N} exp(fg.e) ).
template <typename R>
struct ContrastiveResult {
    R loss = 0;
    Vec<R> d_fg;
    std::vector<Vec<R>> d_pos;
    std::vector<Vec<R>> d_neg;
};

template <typename R>
inline ContrastiveResult<R> contrastive_loss(std::span<const R> f_g,
                                             const std::vector<Vec<R>>& positives,
                                             const std::vector<Vec<R>>& negatives) {
    if (positives.empty()) throw std::invalid_argument("contrastive_loss: empty positive set");
    const std::size_t D = f_g.size();
    const std::size_t np = positives.size(), nn = negatives.size();
    Vec<R> logits(np + nn);
    for (std::size_t e = 0; e < np; ++e) logits[e] = dot<R>(f_g, positives[e]);
    for (std::size_t e = 0; e < nn; ++e) logits[np + e] = dot<R>(f_g, negatives[e]);
    R mx = logits[0];
    for (R l : logits) mx = std::max(mx, l);
    R z = 0;
    for (R l : logits) z += std::exp(l - mx);
    const R log_z = std::log(z) + mx;
    ContrastiveResult<R> out;
    R pos_sum = 0;
    for (std::size_t e = 0; e < np; ++e) pos_sum += logits[e];
    out.loss = -pos_sum / static_cast<R>(np) + log_z;

    out.d_fg.assign(D, R(0));
    out.d_pos.assign(np, Vec<R>(D, R(0)));
    out.d_neg.assign(nn, Vec<R>(D, R(0)));
    for (std::size_t e = 0; e < np + nn; ++e) {
        const R p = std::exp(logits[e] - mx) / z;
        const R dl = p - (e < np ? R(1) / static_cast<R>(np) : R(0));
        const auto& fe = e < np ? positives[e] : negatives[e - np];
        auto& dfe = e < np ? out.d_pos[e] : out.d_neg[e - np];
        for (std::size_t k = 0; k < D; ++k) {
            out.d_fg[k] += dl * fe[k];
            dfe[k] = dl * f_g[k];
        }
    }
    return out;
}

template <typename R>
inline R total_loss(R bce, R con, R lambda) {
    return bce + lambda * con;
}

// ---------------------------------------------------------------------------
// Fused training objective with analytic gradients
// ---------------------------------------------------------------------------

template <typename R>
struct ModelGrads {
    Tensor2<R> refer_w;
    Vec<R> refer_b;
    Tensor2<R> word_w;
    Vec<R> word_b;
    Tensor2<R> pos_hidden_w;
    Vec<R> pos_hidden_b;
    Tensor2<R> pos_out_w;
    Vec<R> pos_out_b;
    Tensor2<R> referring;

    ModelGrads() = default;
    ModelGrads(const ReferModel<R>& m, std::size_t n_gaussians)
        : refer_w(m.refer_proj.out(), m.refer_proj.in()), refer_b(m.refer_proj.out(), R(0)),
          word_w(m.word_proj.out(), m.word_proj.in()), word_b(m.word_proj.out(), R(0)),
          pos_hidden_w(m.pos_mlp.hidden.out(), m.pos_mlp.hidden.in()),
          pos_hidden_b(m.pos_mlp.hidden.out(), R(0)),
          pos_out_w(m.pos_mlp.output.out(), m.pos_mlp.output.in()),
          pos_out_b(m.pos_mlp.output.out(), R(0)), referring(n_gaussians, m.d_r) {}

    void zero() {
        refer_w.fill(R(0));
        std::fill(refer_b.begin(), refer_b.end(), R(0));
        word_w.fill(R(0));
        std::fill(word_b.begin(), word_b.end(), R(0));
        pos_hidden_w.fill(R(0));
        std::fill(pos_hidden_b.begin(), pos_hidden_b.end(), R(0));
        pos_out_w.fill(R(0));
        std::fill(pos_out_b.begin(), pos_out_b.end(), R(0));
        referring.fill(R(0));
    }
};

template <typename R>
struct LossBreakdown {
    R bce = 0;
    R con = 0;
    R total = 0;
    R tau = 0;
};

namespace detail {

/// dL/dx accumulation for v = x / ||x|| given dL/dv.
template <typename R>
inline void normalize_backward(std::span<const R> v, R raw_norm, std::span<const R> dv,
                               std::span<R> dx_out) {
    const R inner = dot<R>(v, dv);
    for (std::size_t k = 0; k < v.size(); ++k) dx_out[k] = (dv[k] - v[k] * inner) / raw_norm;
}

}  // namespace detail

/// Sentence embedding of an expression under the current word projection,
/// with everything needed to backpropagate into word_proj.
template <typename R>
struct SentenceEmbedding {
    Vec<R> f_e;      // normalized
    Vec<R> mean;     // pre-normalization mean of the projected rows
    R raw_norm = 0;
};

template <typename R>
inline SentenceEmbedding<R> sentence_embedding(const Tensor2<R>& word_embeds,
                                               const ReferModel<R>& model) {
    Tensor2<R> projected(word_embeds.rows, model.feature_dim);
    for (std::size_t j = 0; j < word_embeds.rows; ++j) {
        affine_into(model.word_proj, word_embeds.row(j), projected.row(j));
    }
    SentenceEmbedding<R> out;
    out.f_e = pool_sentence(projected);
    out.mean.assign(model.feature_dim, R(0));
    for (std::size_t j = 0; j < projected.rows; ++j) {
        auto row = projected.row(j);
        for (std::size_t k = 0; k < model.feature_dim; ++k) out.mean[k] += row[k];
    }
    for (auto& v : out.mean) v /= static_cast<R>(projected.rows);
    out.raw_norm = l2_norm<R>(std::span<const R>(out.mean));
    return out;
}

/// Accumulates word_proj gradients for d(f_e): normalize -> mean -> affine.
template <typename R>
inline void sentence_embedding_backward(const SentenceEmbedding<R>& se,
                                        const Tensor2<R>& word_embeds, std::span<const R> d_fe,
                                        ModelGrads<R>& grads) {
    const std::size_t D = se.f_e.size();
    Vec<R> d_mean(D);
    detail::normalize_backward<R>(se.f_e, se.raw_norm, d_fe, d_mean);
    const R inv_l = R(1) / static_cast<R>(word_embeds.rows);
    // Each projected row receives d_mean / L; rows share the affine params.
    for (std::size_t j = 0; j < word_embeds.rows; ++j) {
        auto e = word_embeds.row(j);
        for (std::size_t o = 0; o < D; ++o) {
            const R g = d_mean[o] * inv_l;
            grads.word_b[o] += g;
            auto wrow = grads.word_w.row(o);
            for (std::size_t k = 0; k < e.size(); ++k) wrow[k] += g * e[k];
        }
    }
}

/// Context for the contrastive term: embedded token matrices and targets of
/// the same-scene training expressions.
template <typename R>
struct GtclContext {
    std::vector<Tensor2<R>> word_embeds;
    std::vector<std::int32_t> targets;

    template <typename VocabT>
    static GtclContext build(const std::vector<Expression>& exprs, const VocabT& vocab) {
        GtclContext ctx;
        for (const auto& e : exprs) {
            if (e.split != Expression::Split::train) continue;
            ctx.word_embeds.push_back(embed_tokens(e, vocab));
            ctx.targets.push_back(e.target_object);
        }
        return ctx;
    }
};

/// Full training objective for one (expression, view) sample. Renders
/// through the forward cache, computes BCE (+ contrastive when enabled),
/// and accumulates analytic gradients for every trainable parameter.
template <typename R>
inline LossBreakdown<R> model_objective(const GaussianCloud<R>& cloud, const ReferModel<R>& model,
                                        const Tensor2<R>& anchor_embeds,
                                        std::int32_t anchor_target, const GtclContext<R>& ctx,
                                        const BinaryMask& target_mask, const ForwardCache<R>& cache,
                                        const AblationFlags& flags, const TrainHyper<R>& hyper,
                                        std::uint64_t iteration, InteractionOutput<R>& io,
                                        ModelGrads<R>* grads) {
    const std::size_t n = cloud.size();
    const std::size_t D = model.feature_dim;
    interact(cloud, anchor_embeds, model, flags, io);

    auto map = apply_cache(cache, std::span<const R>(io.responses));
    auto bce = bce_loss<R>(map, target_mask);

    LossBreakdown<R> loss;
    loss.bce = bce.loss;
    loss.tau = tau_schedule<R>(iteration, hyper.tau0, hyper.tau_decay, hyper.tau_period);

    GaussianEmbedding<R> ge;
    ContrastiveResult<R> con;
    std::vector<SentenceEmbedding<R>> sentences;
    std::vector<std::size_t> pos_idx, neg_idx;
    if (flags.gtcl) {
        ge = gaussian_embedding(io.refined, std::span<const R>(io.responses), loss.tau);
        sentences.reserve(ctx.word_embeds.size());
        std::vector<Vec<R>> positives, negatives;
        for (std::size_t e = 0; e < ctx.word_embeds.size(); ++e) {
            sentences.push_back(sentence_embedding(ctx.word_embeds[e], model));
            if (ctx.targets[e] == anchor_target) {
                pos_idx.push_back(e);
                positives.push_back(sentences.back().f_e);
            } else {
                neg_idx.push_back(e);
                negatives.push_back(sentences.back().f_e);
            }
        }
        con = contrastive_loss<R>(ge.f_g, positives, negatives);
        loss.con = con.loss;
    }
    loss.total = total_loss(loss.bce, loss.con, flags.gtcl ? hyper.lambda : R(0));
    if (!grads) return loss;

    grads->zero();

    // ---- response gradient through the renderer ----
    auto dm = backward_response(cache, std::span<const R>(bce.grad), n);

    // ---- refined-feature gradient ----
    Tensor2<R> d_refined(n, D);
    if (flags.similarity == Similarity::multiplication) {
        Vec<R> wsum(D, R(0));
        for (std::size_t j = 0; j < io.fw.rows; ++j) {
            auto row = io.fw.row(j);
            for (std::size_t k = 0; k < D; ++k) wsum[k] += row[k];
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto out_row = d_refined.row(i);
            const R g = dm[i];
            for (std::size_t k = 0; k < D; ++k) out_row[k] = g * wsum[k];
        }
    } else {
        d_refined.fill(R(0));
    }

    // Word-feature gradient accumulator (anchor expression words).
    Tensor2<R> d_fw(io.fw.rows, D);
    d_fw.fill(R(0));
    if (flags.similarity == Similarity::multiplication) {
        // d wsum = sum_i dm_i * refined_i, shared by every word row.
        Vec<R> dwsum(D, R(0));
        for (std::size_t i = 0; i < n; ++i) {
            auto row = io.refined.row(i);
            const R g = dm[i];
            for (std::size_t k = 0; k < D; ++k) dwsum[k] += g * row[k];
        }
        for (std::size_t j = 0; j < io.fw.rows; ++j) {
            auto row = d_fw.row(j);
            for (std::size_t k = 0; k < D; ++k) row[k] += dwsum[k];
        }
    } else {
        // Cosine similarity backward, per (gaussian, word).
        Vec<R> wn(io.fw.rows);
        for (std::size_t j = 0; j < io.fw.rows; ++j) {
            wn[j] = std::max(l2_norm<R>(io.fw.row(j)), R(1e-12));
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto ri = io.refined.row(i);
            const R rn = std::max(l2_norm<R>(ri), R(1e-12));
            auto dri = d_refined.row(i);
            const R g = dm[i];
            if (g == R(0)) continue;
            for (std::size_t j = 0; j < io.fw.rows; ++j) {
                auto wj = io.fw.row(j);
                const R d = dot<R>(ri, wj);
                const R c = d / (rn * wn[j]);
                auto dwj = d_fw.row(j);
                for (std::size_t k = 0; k < D; ++k) {
                    dri[k] += g * (wj[k] / (rn * wn[j]) - c * ri[k] / (rn * rn));
                    dwj[k] += g * (ri[k] / (rn * wn[j]) - c * wj[k] / (wn[j] * wn[j]));
                }
            }
        }
    }

    // ---- contrastive gradients ----
    if (flags.gtcl) {
        Vec<R> d_raw(D);
        detail::normalize_backward<R>(ge.f_g, ge.raw_norm, con.d_fg, d_raw);
        const R inv_sel = R(1) / static_cast<R>(ge.selected.size());
        for (auto i : ge.selected) {
            auto row = d_refined.row(i);
            for (std::size_t k = 0; k < D; ++k) row[k] += hyper.lambda * d_raw[k] * inv_sel;
        }
        for (std::size_t p = 0; p < pos_idx.size(); ++p) {
            Vec<R> dfe = con.d_pos[p];
            for (auto& v : dfe) v *= hyper.lambda;
            sentence_embedding_backward(sentences[pos_idx[p]], ctx.word_embeds[pos_idx[p]],
                                        std::span<const R>(dfe), *grads);
        }
        for (std::size_t q = 0; q < neg_idx.size(); ++q) {
            Vec<R> dfe = con.d_neg[q];
            for (auto& v : dfe) v *= hyper.lambda;
            sentence_embedding_backward(sentences[neg_idx[q]], ctx.word_embeds[neg_idx[q]],
                                        std::span<const R>(dfe), *grads);
        }
    }

    // ---- attention backward ----
    Tensor2<R> d_fr(n, D);
    if (flags.pcmi) {
        d_fr.fill(R(0));
        const std::size_t L = io.fw.rows;
        const R inv_sqrt_d = R(1) / std::sqrt(static_cast<R>(D));
        Tensor2<R> d_fp(n, D);
        d_fp.fill(R(0));
        Vec<R> da(L), dz(L), ds(L), du(L), dq(D);
        for (std::size_t i = 0; i < n; ++i) {
            auto gref = d_refined.row(i);
            auto fri = io.fr.row(i);
            auto fpi = io.pos_g.row(i);
            auto s = io.attn_s.row(i);
            auto a = io.attn_a.row(i);
            auto dfri = d_fr.row(i);
            auto dfpi = d_fp.row(i);
            // Residual path.
            for (std::size_t k = 0; k < D; ++k) dfri[k] += gref[k];
            // Value path and attention weights.
            for (std::size_t j = 0; j < L; ++j) {
                auto wj = io.fw.row(j);
                da[j] = dot<R>(gref, wj);
                auto dwj = d_fw.row(j);
                const R aj = a[j];
                for (std::size_t k = 0; k < D; ++k) dwj[k] += aj * gref[k];
            }
            // Softmax over z.
            {
                R inner = 0;
                for (std::size_t j = 0; j < L; ++j) inner += a[j] * da[j];
                for (std::size_t j = 0; j < L; ++j) dz[j] = a[j] * (da[j] - inner);
            }
            // z_j = (qw_j + s_j * qp) / sqrt(D) with q = f_r + f_p.
            std::fill(dq.begin(), dq.end(), R(0));
            R dqp = 0;
            for (std::size_t j = 0; j < L; ++j) {
                const R dzj = dz[j] * inv_sqrt_d;
                auto wj = io.fw.row(j);
                auto dwj = d_fw.row(j);
                for (std::size_t k = 0; k < D; ++k) {
                    dq[k] += dzj * wj[k];
                    dwj[k] += dzj * (fri[k] + fpi[k]);
                }
                ds[j] = dzj * io.qp[i];
                dqp += dz[j] * inv_sqrt_d * s[j];
            }
            // qp = <q, f_p>.
            for (std::size_t k = 0; k < D; ++k) {
                dq[k] += dqp * fpi[k];
                dfpi[k] += dqp * (fri[k] + fpi[k]);
            }
            // q = f_r + f_p.
            for (std::size_t k = 0; k < D; ++k) {
                dfri[k] += dq[k];
                dfpi[k] += dq[k];
            }
            // Softmax over u.
            {
                R inner = 0;
                for (std::size_t j = 0; j < L; ++j) inner += s[j] * ds[j];
                for (std::size_t j = 0; j < L; ++j) du[j] = s[j] * (ds[j] - inner);
            }
            // u_j = <f_w[j], f_r[i]> / sqrt(D).
            for (std::size_t j = 0; j < L; ++j) {
                const R duj = du[j] * inv_sqrt_d;
                auto wj = io.fw.row(j);
                auto dwj = d_fw.row(j);
                for (std::size_t k = 0; k < D; ++k) {
                    dfri[k] += duj * wj[k];
                    dwj[k] += duj * fri[k];
                }
            }
        }
        // Position MLP backward: input mu is frozen, params accumulate.
        const std::size_t hdim = model.pos_mlp.hidden.out();
        Vec<R> dh(hdim), hrelu(hdim);
        for (std::size_t i = 0; i < n; ++i) {
            auto dfpi = d_fp.row(i);
            auto pre = io.pos_hidden_pre.row(i);
            // Output layer: y = W2 h + b2 with h = relu(pre).
            for (std::size_t t = 0; t < hdim; ++t) {
                dh[t] = R(0);
                hrelu[t] = relu(pre[t]);
            }
            for (std::size_t o = 0; o < D; ++o) {
                const R g = dfpi[o];
                if (g == R(0)) continue;
                grads->pos_out_b[o] += g;
                auto w2row = model.pos_mlp.output.weight.row(o);
                auto gw2row = grads->pos_out_w.row(o);
                for (std::size_t t = 0; t < hdim; ++t) {
                    gw2row[t] += g * hrelu[t];
                    dh[t] += g * w2row[t];
                }
            }
            const auto& mu = cloud.gaussians[i].mu;
            for (std::size_t t = 0; t < hdim; ++t) {
                if (pre[t] <= R(0)) continue;
                const R g = dh[t];
                grads->pos_hidden_b[t] += g;
                auto gw1row = grads->pos_hidden_w.row(t);
                gw1row[0] += g * mu[0];
                gw1row[1] += g * mu[1];
                gw1row[2] += g * mu[2];
            }
        }
    } else {
        d_fr = std::move(d_refined);
    }

    // ---- projection backward ----
    for (std::size_t j = 0; j < io.fw.rows; ++j) {
        auto dwj = d_fw.row(j);
        auto e = anchor_embeds.row(j);
        for (std::size_t o = 0; o < D; ++o) {
            const R g = dwj[o];
            if (g == R(0)) continue;
            grads->word_b[o] += g;
            auto wrow = grads->word_w.row(o);
            for (std::size_t k = 0; k < e.size(); ++k) wrow[k] += g * e[k];
        }
    }
    const std::size_t dr = model.d_r;
    for (std::size_t i = 0; i < n; ++i) {
        auto dfri = d_fr.row(i);
        auto x = cloud.referring.row(i);
        auto dref = grads->referring.row(i);
        for (std::size_t o = 0; o < D; ++o) {
            const R g = dfri[o];
            if (g == R(0)) continue;
            grads->refer_b[o] += g;
            auto wrow = model.refer_proj.weight.row(o);
            auto gwrow = grads->refer_w.row(o);
            for (std::size_t k = 0; k < dr; ++k) {
                gwrow[k] += g * x[k];
                dref[k] += g * wrow[k];
            }
        }
    }
    return loss;
}

}  // namespace splatseg
