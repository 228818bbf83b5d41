#pragma once

// Training orchestration: seeded initialization, per-iteration sampling of
// (train view, train expression) pairs, loss assembly, Adam updates with
// per-group learning rates, and the two-stage refinement protocol.
//
// Geometry is frozen, so each training camera's splat weights are projected
// and cached once up front; every iteration replays the cached per-pixel
// weight lists, which is bit-identical to re-rendering.

#include "splatseg/io.hpp"
#include "splatseg/referfield.hpp"

namespace splatseg {

template <typename R>
struct TrainConfig {
    TrainHyper<R> hyper;
    AblationFlags flags;
    std::uint64_t seed = 1;
    std::size_t d_r = 16;
    std::size_t feature_dim = 128;
    std::size_t d_text = 32;
    std::size_t pos_hidden = 64;

    static TrainConfig from_run_config(const RunConfig& rc) {
        TrainConfig c;
        c.hyper = rc.hyper<R>();
        c.flags = rc.flags();
        c.seed = rc.seed;
        c.d_r = rc.train.d_r;
        c.feature_dim = rc.train.feature_dim;
        c.d_text = rc.train.d_text;
        c.pos_hidden = rc.train.pos_hidden;
        return c;
    }
};

/// Hash of the frozen geometry fields (positions, scales, rotations,
/// opacities, colors, object ids) of every Gaussian, in index order.
template <typename R>
inline std::uint64_t geometry_hash(const GaussianCloud<R>& cloud) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto fold = [&h](const void* p, std::size_t n) { h = detail::fnv1a64_bytes(p, n, h); };
    for (const auto& g : cloud.gaussians) {
        double buf[14] = {double(g.mu[0]),    double(g.mu[1]),    double(g.mu[2]),
                          double(g.scale[0]), double(g.scale[1]), double(g.scale[2]),
                          double(g.rot[0]),   double(g.rot[1]),   double(g.rot[2]),
                          double(g.rot[3]),   double(g.opacity),  double(g.color[0]),
                          double(g.color[1]), double(g.color[2])};
        fold(buf, sizeof(buf));
        fold(&g.object_id, sizeof(g.object_id));
    }
    return h;
}

template <typename R>
struct TrainState {
    GaussianCloud<R> cloud;  // frozen geometry + live referring features
    ReferModel<R> model;
    std::vector<AdamState<R>> adam;  // one per parameter group, fixed order
    std::uint64_t iteration = 0;
    std::uint64_t frozen_hash = 0;
    std::vector<LossBreakdown<R>> trace;
};

namespace detail {

template <typename R>
struct ParamBinding {
    const char* name;
    std::span<R> values;
    std::span<const R> grads;
    bool is_features;
};

template <typename R>
inline std::vector<ParamBinding<R>> param_bindings(TrainState<R>& st, const ModelGrads<R>& g) {
    auto span_of = [](auto& v) { return std::span<R>(v.data(), v.size()); };
    auto cspan_of = [](const auto& v) { return std::span<const R>(v.data(), v.size()); };
    return {
        {"referring", span_of(st.cloud.referring.data), cspan_of(g.referring.data), true},
        {"refer_proj.weight", span_of(st.model.refer_proj.weight.data), cspan_of(g.refer_w.data), false},
        {"refer_proj.bias", span_of(st.model.refer_proj.bias), cspan_of(g.refer_b), false},
        {"word_proj.weight", span_of(st.model.word_proj.weight.data), cspan_of(g.word_w.data), false},
        {"word_proj.bias", span_of(st.model.word_proj.bias), cspan_of(g.word_b), false},
        {"pos_mlp.hidden.weight", span_of(st.model.pos_mlp.hidden.weight.data),
         cspan_of(g.pos_hidden_w.data), false},
        {"pos_mlp.hidden.bias", span_of(st.model.pos_mlp.hidden.bias), cspan_of(g.pos_hidden_b), false},
        {"pos_mlp.output.weight", span_of(st.model.pos_mlp.output.weight.data),
         cspan_of(g.pos_out_w.data), false},
        {"pos_mlp.output.bias", span_of(st.model.pos_mlp.output.bias), cspan_of(g.pos_out_b), false},
    };
}

template <typename R>
inline void glorot_uniform(AffineLayer<R>& layer, Rng& rng) {
    const double bound = std::sqrt(6.0 / double(layer.in() + layer.out()));
    for (auto& w : layer.weight.data) w = R(rng.uniform_in(-bound, bound));
    for (auto& b : layer.bias) b = R(0);
}

}  // namespace detail

/// Seeded initialization: referring features ~ Normal(0, 0.01^2), affine and
/// MLP weights Glorot-uniform, biases zero.
template <typename R>
inline TrainState<R> init(const GaussianCloud<R>& cloud, const TrainConfig<R>& config) {
    TrainState<R> st;
    st.cloud = cloud;
    st.model = ReferModel<R>(config.d_r, config.feature_dim, config.d_text, config.pos_hidden);
    Rng rng(config.seed, "init");
    detail::glorot_uniform(st.model.refer_proj, rng);
    detail::glorot_uniform(st.model.word_proj, rng);
    detail::glorot_uniform(st.model.pos_mlp.hidden, rng);
    detail::glorot_uniform(st.model.pos_mlp.output, rng);
    st.cloud.referring = Tensor2<R>(cloud.size(), config.d_r);
    for (auto& v : st.cloud.referring.data) v = R(0.01 * rng.normal());
    ModelGrads<R> probe(st.model, cloud.size());
    for (const auto& b : detail::param_bindings(st, probe)) {
        st.adam.emplace_back(b.values.size());
    }
    st.frozen_hash = geometry_hash(st.cloud);
    return st;
}

/// One optimization step on a single (camera cache, expression, mask)
/// sample. Throws with a diagnostic when the loss goes non-finite.
template <typename R>
inline LossBreakdown<R> train_step(TrainState<R>& st, const ForwardCache<R>& view_cache,
                                   const Tensor2<R>& anchor_embeds, std::int32_t anchor_target,
                                   const GtclContext<R>& ctx, const BinaryMask& mask,
                                   const TrainConfig<R>& config, ModelGrads<R>& grads,
                                   InteractionOutput<R>& scratch) {
    auto loss = model_objective(st.cloud, st.model, anchor_embeds, anchor_target, ctx, mask,
                                view_cache, config.flags, config.hyper, st.iteration, scratch,
                                &grads);
    if (!std::isfinite(static_cast<double>(loss.total))) {
        throw std::runtime_error("train_step: non-finite loss at iteration " +
                                 std::to_string(st.iteration));
    }
    auto bindings = detail::param_bindings(st, grads);
    for (std::size_t g = 0; g < bindings.size(); ++g) {
        const R lr = bindings[g].is_features ? config.hyper.lr_features : config.hyper.lr_layers;
        adam_step(st.adam[g], bindings[g].values, bindings[g].grads, lr, bindings[g].name);
    }
    st.iteration += 1;
    st.trace.push_back(loss);
    return loss;
}

/// Precomputed per-sample inputs shared across the whole run.
template <typename R>
struct TrainPlan {
    std::vector<std::size_t> train_views;
    std::vector<std::size_t> train_exprs;
    std::vector<ForwardCache<R>> caches;      // parallel to train_views
    std::vector<Tensor2<R>> embeds;           // parallel to expressions (all)
    GtclContext<R> ctx;

    static TrainPlan build(const Dataset<R>& ds, const RenderSettings& settings = {}) {
        TrainPlan plan;
        plan.train_views = ds.camera_indices(CameraSplit::train);
        plan.train_exprs = ds.expression_indices(Expression::Split::train);
        plan.caches.resize(plan.train_views.size());
        Vec<R> zeros(ds.scene.cloud.size(), R(0));
        for (std::size_t v = 0; v < plan.train_views.size(); ++v) {
            (void)render_response(ds.scene.cloud, std::span<const R>(zeros),
                                  ds.cameras[plan.train_views[v]], settings, &plan.caches[v]);
        }
        for (const auto& e : ds.expressions) plan.embeds.push_back(embed_tokens(e, ds.vocab));
        plan.ctx = GtclContext<R>::build(ds.expressions, ds.vocab);
        return plan;
    }
};

/// Full training run: uniform seeded sampling of (train view, train
/// expression) pairs for the configured number of iterations. The frozen
/// geometry hash is verified at the end of the run.
template <typename R>
inline TrainState<R> train(const Dataset<R>& ds, const PseudoMaskStore& pseudo,
                           const TrainConfig<R>& config, const TrainPlan<R>* shared_plan = nullptr) {
    TrainPlan<R> local_plan;
    if (!shared_plan) local_plan = TrainPlan<R>::build(ds);
    const TrainPlan<R>& plan = shared_plan ? *shared_plan : local_plan;
    auto st = init(ds.scene.cloud, config);
    // Sample space: (train view, train expression) pairs that actually have a
    // pseudo mask. Pairs can be absent when the target is fully hidden in a
    // view; the map's key order keeps the list deterministic.
    std::vector<std::tuple<std::size_t, std::size_t, const BinaryMask*>> samples;
    for (std::size_t vi = 0; vi < plan.train_views.size(); ++vi) {
        for (auto expr : plan.train_exprs) {
            auto it = pseudo.masks.find({plan.train_views[vi], expr});
            if (it != pseudo.masks.end()) samples.push_back({vi, expr, &it->second});
        }
    }
    if (samples.empty() && config.hyper.iterations > 0) {
        throw std::runtime_error("train: no (train view, train expression) pair has a pseudo mask");
    }
    Rng sampler(config.seed, "sampling");
    ModelGrads<R> grads(st.model, st.cloud.size());
    InteractionOutput<R> scratch;
    for (std::size_t it = 0; it < config.hyper.iterations; ++it) {
        const auto& [vi, expr, mask] = samples[sampler.index(samples.size())];
        (void)train_step(st, plan.caches[vi], plan.embeds[expr],
                         ds.expressions[expr].target_object, plan.ctx, *mask, config, grads,
                         scratch);
    }
    if (geometry_hash(st.cloud) != st.frozen_hash) {
        throw std::runtime_error("train: frozen geometry changed during training");
    }
    return st;
}

/// Masks rendered by a trained model for every (train view, train
/// expression) pair, binarized at M > 0. These replace the pseudo masks in
/// the second stage.
template <typename R>
inline PseudoMaskStore render_refined_masks(const Dataset<R>& ds, const TrainState<R>& st,
                                            const AblationFlags& flags,
                                            const PseudoMaskStore& pseudo) {
    PseudoMaskStore refined;
    refined.selector = "stage1-render";
    refined.config_hash = pseudo.config_hash;
    refined.dataset_hash = pseudo.dataset_hash;
    for (const auto& [key, unused] : pseudo.masks) {
        (void)unused;
        auto [map, io] = forward_response(st.cloud, ds.expressions[key.second], ds.vocab, st.model,
                                          flags, ds.cameras[key.first]);
        BinaryMask mask(map.width, map.height);
        for (std::size_t p = 0; p < map.values.size(); ++p) {
            mask.bits[p] = map.values[p] > R(0) ? 1 : 0;
        }
        refined.masks[key] = std::move(mask);
    }
    return refined;
}

template <typename R>
inline std::uint64_t stage2_seed(std::uint64_t seed) {
    return detail::splitmix64(seed ^ detail::fnv1a64("stage2"));
}

template <typename R>
struct TwoStageResult {
    TrainState<R> stage1;
    PseudoMaskStore refined;
    TrainState<R> stage2;
};

/// Stage 1 trains on the pseudo masks; its rendered masks then supervise a
/// freshly initialized stage-2 model (same seed policy, derived stream).
template <typename R>
inline TwoStageResult<R> train_two_stage(const Dataset<R>& ds, const PseudoMaskStore& pseudo,
                                         const TrainConfig<R>& config,
                                         const TrainPlan<R>* shared_plan = nullptr) {
    TwoStageResult<R> out;
    out.stage1 = train(ds, pseudo, config, shared_plan);
    out.refined = render_refined_masks(ds, out.stage1, config.flags, pseudo);
    TrainConfig<R> cfg2 = config;
    cfg2.seed = stage2_seed<R>(config.seed);
    out.stage2 = train(ds, out.refined, cfg2, shared_plan);
    return out;
}

template <typename R>
inline Checkpoint<R> to_checkpoint(const TrainState<R>& st, const AblationFlags& flags,
                                   const std::string& config_hash, const std::string& dataset_hash) {
    Checkpoint<R> c;
    c.model = st.model;
    c.referring = st.cloud.referring;
    c.iteration = st.iteration;
    c.flags = flags;
    c.config_hash = config_hash;
    c.dataset_hash = dataset_hash;
    return c;
}

}  // namespace splatseg
