#pragma once

// Canonical verification instance: a 5-Gaussian, 3-word, 8x8-pixel scene on
// which every trainable parameter group is checked against central finite
// differences. Used by the gradcheck command and the acceptance suite.

#include "splatseg/referfield.hpp"

namespace splatseg {

template <typename R>
struct VerifyInstance {
    GaussianCloud<R> cloud;
    Camera<R> camera;
    ReferModel<R> model;
    Vocab<R> vocab;
    std::vector<Expression> exprs;
    Tensor2<R> anchor_embeds;
    BinaryMask mask;
    ForwardCache<R> cache;
    GtclContext<R> ctx;
};

template <typename R>
inline VerifyInstance<R> make_verify_instance(std::size_t d_r = 16, std::size_t D = 128,
                                              std::size_t d_text = 32, std::size_t pos_hidden = 32,
                                              std::uint64_t seed = 424242) {
    VerifyInstance<R> inst;
    auto add = [&](std::array<R, 3> mu, std::int32_t id) {
        Gaussian<R> g;
        g.mu = mu;
        g.scale = {R(0.12), R(0.12), R(0.12)};
        g.rot = {R(1), R(0), R(0), R(0)};
        g.opacity = R(0.8);
        g.color = {R(1), R(0), R(0)};
        g.object_id = id;
        inst.cloud.gaussians.push_back(g);
    };
    add({R(0.22), R(0.05), R(0.0)}, 0);
    add({R(0.15), R(-0.06), R(0.05)}, 0);
    add({R(0.3), R(0.0), R(-0.04)}, 0);
    add({R(-0.3), R(0.12), R(0.0)}, 1);
    add({R(-0.24), R(0.02), R(0.06)}, 1);

    Rng rng(seed, "verify");
    inst.cloud.referring = Tensor2<R>(5, d_r);
    for (auto& v : inst.cloud.referring.data) v = R(0.1 * rng.normal());

    inst.camera = make_lookat_camera<R>({R(2.2), R(0.4), R(1.1)}, {R(0), R(0), R(0)}, R(12), R(12),
                                        8, 8);
    inst.model = ReferModel<R>(d_r, D, d_text, pos_hidden);
    auto glorot = [&](AffineLayer<R>& layer) {
        const double bound = std::sqrt(6.0 / double(layer.in() + layer.out()));
        for (auto& w : layer.weight.data) w = R(rng.uniform_in(-bound, bound));
    };
    glorot(inst.model.refer_proj);
    glorot(inst.model.word_proj);
    glorot(inst.model.pos_mlp.hidden);
    glorot(inst.model.pos_mlp.output);

    inst.vocab = make_vocab<R>(d_text, 7);
    auto mk = [&](std::vector<std::string> toks, std::int32_t target) {
        Expression e;
        e.tokens = std::move(toks);
        e.target_object = target;
        inst.exprs.push_back(e);
    };
    mk({"the", "red", "sphere"}, 0);
    mk({"the", "small", "red", "thing"}, 0);
    mk({"the", "blue", "cube"}, 1);
    mk({"the", "blue", "object", "near", "the", "red", "sphere"}, 1);

    inst.anchor_embeds = embed_tokens(inst.exprs[0], inst.vocab);
    inst.mask = render_object_mask(inst.cloud, inst.camera, 0, R(0.5), verification_settings());
    Vec<R> zeros(5, R(0));
    (void)render_response(inst.cloud, std::span<const R>(zeros), inst.camera,
                          verification_settings(), &inst.cache);
    inst.ctx = GtclContext<R>::build(inst.exprs, inst.vocab);
    return inst;
}

/// Per-group gradient check of the full training objective on the canonical
/// instance (or a caller-supplied one).
template <typename R>
inline GradCheckReport<R> verify_gradients(VerifyInstance<R>& inst, const AblationFlags& flags,
                                           R h = R(1e-4), R tol = R(1e-4)) {
    TrainHyper<R> hyper;
    ModelGrads<R> grads(inst.model, inst.cloud.size());
    InteractionOutput<R> io;
    (void)model_objective(inst.cloud, inst.model, inst.anchor_embeds, inst.exprs[0].target_object,
                          inst.ctx, inst.mask, inst.cache, flags, hyper, 0, io, &grads);
    auto loss_fn = [&]() {
        InteractionOutput<R> scratch;
        return model_objective<R>(inst.cloud, inst.model, inst.anchor_embeds,
                                  inst.exprs[0].target_object, inst.ctx, inst.mask, inst.cache,
                                  flags, hyper, 0, scratch, nullptr)
            .total;
    };
    auto& m = inst.model;
    std::vector<ParamGroup<R>> groups = {
        {"referring", inst.cloud.referring.data.data(), grads.referring.data.data(),
         inst.cloud.referring.size()},
        {"refer_proj.weight", m.refer_proj.weight.data.data(), grads.refer_w.data.data(),
         m.refer_proj.weight.size()},
        {"refer_proj.bias", m.refer_proj.bias.data(), grads.refer_b.data(), m.refer_proj.bias.size()},
        {"word_proj.weight", m.word_proj.weight.data.data(), grads.word_w.data.data(),
         m.word_proj.weight.size()},
        {"word_proj.bias", m.word_proj.bias.data(), grads.word_b.data(), m.word_proj.bias.size()},
        {"pos_mlp.hidden.weight", m.pos_mlp.hidden.weight.data.data(),
         grads.pos_hidden_w.data.data(), m.pos_mlp.hidden.weight.size()},
        {"pos_mlp.hidden.bias", m.pos_mlp.hidden.bias.data(), grads.pos_hidden_b.data(),
         m.pos_mlp.hidden.bias.size()},
        {"pos_mlp.output.weight", m.pos_mlp.output.weight.data.data(), grads.pos_out_w.data.data(),
         m.pos_mlp.output.weight.size()},
        {"pos_mlp.output.bias", m.pos_mlp.output.bias.data(), grads.pos_out_b.data(),
         m.pos_mlp.output.bias.size()},
    };
    return grad_check<R>(loss_fn, groups, h, tol);
}

}  // namespace splatseg
