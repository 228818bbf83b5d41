#pragma once

// Effective run configuration: one JSON-serializable struct covering scene
// synthesis, cameras, grammar, corruption, training, and evaluation. Every
// output artifact embeds the FNV-1a hash of the canonical JSON form so that
// mismatched pipeline stages can be detected and rejected.

#include <json.hpp>

#include "splatseg/pseudomask.hpp"
#include "splatseg/referfield.hpp"
#include "splatseg/scene.hpp"
#include "splatseg/text.hpp"

namespace splatseg {

using json = nlohmann::json;

struct TrainSection {
    std::size_t d_r = 16;
    std::size_t feature_dim = 128;
    std::size_t d_text = 32;
    std::size_t pos_hidden = 32;
    double lambda = 0.02;
    double epsilon = 0.3;
    double tau0 = 0.1;
    double tau_decay = 0.6;
    double tau_period = 1000.0;
    double lr_features = 0.0025;
    double lr_layers = 0.0001;
    std::size_t iterations = 5000;
    bool pcmi = true;
    bool gtcl = true;
    std::string similarity = "multiplication";  // or "cosine"
};

struct RunConfig {
    std::uint64_t seed = 1;
    bool probe = false;  // generate the occlusion probe scene instead
    SceneSpec scene;
    CameraSpec cameras;
    GrammarConfig grammar;
    CorruptionConfig corruption;
    TrainSection train;
    double eval_threshold = 0.0;  // predicted mask = { M(v) > threshold }

    // Defaults describe the reference benchmark: an 8-object scene of about
    // 1500 Gaussians seen from 20 orbit cameras (16 train + 4 novel), five
    // expressions per object.
    RunConfig() {
        scene.objects = 8;
        scene.gaussians_per_object = 64;
        scene.background_gaussians = 988;
        scene.duplicate_attribute_pairs = 1;
        cameras.count = 20;
        cameras.width = 64;
        cameras.height = 64;
    }

    AblationFlags flags() const {
        AblationFlags f;
        f.pcmi = train.pcmi;
        f.gtcl = train.gtcl;
        f.similarity =
            train.similarity == "cosine" ? Similarity::cosine : Similarity::multiplication;
        return f;
    }

    template <typename R>
    TrainHyper<R> hyper() const {
        TrainHyper<R> h;
        h.lambda = R(train.lambda);
        h.epsilon = R(train.epsilon);
        h.tau0 = R(train.tau0);
        h.tau_decay = R(train.tau_decay);
        h.tau_period = R(train.tau_period);
        h.lr_features = R(train.lr_features);
        h.lr_layers = R(train.lr_layers);
        h.iterations = train.iterations;
        return h;
    }
};

inline json to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["probe"] = c.probe;
    j["scene"] = {{"objects", c.scene.objects},
                  {"gaussians_per_object", c.scene.gaussians_per_object},
                  {"background_gaussians", c.scene.background_gaussians},
                  {"layout_radius", c.scene.layout_radius},
                  {"z_low", c.scene.z_low},
                  {"z_high", c.scene.z_high},
                  {"min_separation", c.scene.min_separation},
                  {"object_scale_factor", c.scene.object_scale_factor},
                  {"duplicate_attribute_pairs", c.scene.duplicate_attribute_pairs}};
    j["cameras"] = {{"count", c.cameras.count},
                    {"orbit_radius", c.cameras.orbit_radius},
                    {"elevation_low", c.cameras.elevation_low},
                    {"elevation_high", c.cameras.elevation_high},
                    {"look_at", c.cameras.look_at},
                    {"jitter", c.cameras.jitter},
                    {"focal", c.cameras.focal},
                    {"width", c.cameras.width},
                    {"height", c.cameras.height},
                    {"train_fraction", c.cameras.train_fraction}};
    j["grammar"] = {{"axis_margin", c.grammar.axis_margin},
                    {"z_margin", c.grammar.z_margin},
                    {"near_threshold", c.grammar.near_threshold},
                    {"far_threshold", c.grammar.far_threshold},
                    {"superlative_margin", c.grammar.superlative_margin},
                    {"relation_probability", c.grammar.relation_probability},
                    {"generic_noun_probability", c.grammar.generic_noun_probability},
                    {"size_probability", c.grammar.size_probability},
                    {"anchor_color_probability", c.grammar.anchor_color_probability},
                    {"anchor_size_probability", c.grammar.anchor_size_probability},
                    {"z_relations", c.grammar.z_relations},
                    {"anchor_pool", c.grammar.anchor_pool},
                    {"per_object", c.grammar.per_object},
                    {"max_attempts", c.grammar.max_attempts}};
    j["corruption"] = {{"count", c.corruption.count},
                       {"dilate_radius", c.corruption.dilate_radius},
                       {"translate_px", c.corruption.translate_px},
                       {"spurious_blob_rate", c.corruption.spurious_blob_rate},
                       {"wrong_object_rate", c.corruption.wrong_object_rate},
                       {"gamma_base", c.corruption.gamma_base},
                       {"gamma_quality", c.corruption.gamma_quality},
                       {"gamma_noise", c.corruption.gamma_noise}};
    j["train"] = {{"d_r", c.train.d_r},
                  {"feature_dim", c.train.feature_dim},
                  {"d_text", c.train.d_text},
                  {"pos_hidden", c.train.pos_hidden},
                  {"lambda", c.train.lambda},
                  {"epsilon", c.train.epsilon},
                  {"tau0", c.train.tau0},
                  {"tau_decay", c.train.tau_decay},
                  {"tau_period", c.train.tau_period},
                  {"lr_features", c.train.lr_features},
                  {"lr_layers", c.train.lr_layers},
                  {"iterations", c.train.iterations},
                  {"pcmi", c.train.pcmi},
                  {"gtcl", c.train.gtcl},
                  {"similarity", c.train.similarity}};
    j["eval"] = {{"threshold", c.eval_threshold}};
    return j;
}

namespace detail {

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// Parses a (possibly partial) config JSON over the defaults. Unknown keys
/// are rejected so typos surface as errors instead of silent defaults.
inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    const std::vector<std::string> sections = {"seed",       "probe", "scene", "cameras",
                                               "grammar",    "corruption", "train", "eval"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(sections.begin(), sections.end(), it.key()) == sections.end()) {
            throw std::invalid_argument("config: unknown key '" + it.key() + "'");
        }
    }
    detail::get_if_present(j, "seed", c.seed);
    detail::get_if_present(j, "probe", c.probe);
    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        detail::get_if_present(s, "objects", c.scene.objects);
        detail::get_if_present(s, "gaussians_per_object", c.scene.gaussians_per_object);
        detail::get_if_present(s, "background_gaussians", c.scene.background_gaussians);
        detail::get_if_present(s, "layout_radius", c.scene.layout_radius);
        detail::get_if_present(s, "z_low", c.scene.z_low);
        detail::get_if_present(s, "z_high", c.scene.z_high);
        detail::get_if_present(s, "min_separation", c.scene.min_separation);
        detail::get_if_present(s, "object_scale_factor", c.scene.object_scale_factor);
        detail::get_if_present(s, "duplicate_attribute_pairs", c.scene.duplicate_attribute_pairs);
    }
    if (j.contains("cameras")) {
        const auto& s = j.at("cameras");
        detail::get_if_present(s, "count", c.cameras.count);
        detail::get_if_present(s, "orbit_radius", c.cameras.orbit_radius);
        detail::get_if_present(s, "elevation_low", c.cameras.elevation_low);
        detail::get_if_present(s, "elevation_high", c.cameras.elevation_high);
        detail::get_if_present(s, "look_at", c.cameras.look_at);
        detail::get_if_present(s, "jitter", c.cameras.jitter);
        detail::get_if_present(s, "focal", c.cameras.focal);
        detail::get_if_present(s, "width", c.cameras.width);
        detail::get_if_present(s, "height", c.cameras.height);
        detail::get_if_present(s, "train_fraction", c.cameras.train_fraction);
    }
    if (j.contains("grammar")) {
        const auto& s = j.at("grammar");
        detail::get_if_present(s, "axis_margin", c.grammar.axis_margin);
        detail::get_if_present(s, "z_margin", c.grammar.z_margin);
        detail::get_if_present(s, "near_threshold", c.grammar.near_threshold);
        detail::get_if_present(s, "far_threshold", c.grammar.far_threshold);
        detail::get_if_present(s, "superlative_margin", c.grammar.superlative_margin);
        detail::get_if_present(s, "relation_probability", c.grammar.relation_probability);
        detail::get_if_present(s, "generic_noun_probability", c.grammar.generic_noun_probability);
        detail::get_if_present(s, "size_probability", c.grammar.size_probability);
        detail::get_if_present(s, "anchor_color_probability", c.grammar.anchor_color_probability);
        detail::get_if_present(s, "anchor_size_probability", c.grammar.anchor_size_probability);
        detail::get_if_present(s, "z_relations", c.grammar.z_relations);
        detail::get_if_present(s, "anchor_pool", c.grammar.anchor_pool);
        detail::get_if_present(s, "per_object", c.grammar.per_object);
        detail::get_if_present(s, "max_attempts", c.grammar.max_attempts);
    }
    if (j.contains("corruption")) {
        const auto& s = j.at("corruption");
        detail::get_if_present(s, "count", c.corruption.count);
        detail::get_if_present(s, "dilate_radius", c.corruption.dilate_radius);
        detail::get_if_present(s, "translate_px", c.corruption.translate_px);
        detail::get_if_present(s, "spurious_blob_rate", c.corruption.spurious_blob_rate);
        detail::get_if_present(s, "wrong_object_rate", c.corruption.wrong_object_rate);
        detail::get_if_present(s, "gamma_base", c.corruption.gamma_base);
        detail::get_if_present(s, "gamma_quality", c.corruption.gamma_quality);
        detail::get_if_present(s, "gamma_noise", c.corruption.gamma_noise);
    }
    if (j.contains("train")) {
        const auto& s = j.at("train");
        detail::get_if_present(s, "d_r", c.train.d_r);
        detail::get_if_present(s, "feature_dim", c.train.feature_dim);
        detail::get_if_present(s, "d_text", c.train.d_text);
        detail::get_if_present(s, "pos_hidden", c.train.pos_hidden);
        detail::get_if_present(s, "lambda", c.train.lambda);
        detail::get_if_present(s, "epsilon", c.train.epsilon);
        detail::get_if_present(s, "tau0", c.train.tau0);
        detail::get_if_present(s, "tau_decay", c.train.tau_decay);
        detail::get_if_present(s, "tau_period", c.train.tau_period);
        detail::get_if_present(s, "lr_features", c.train.lr_features);
        detail::get_if_present(s, "lr_layers", c.train.lr_layers);
        detail::get_if_present(s, "iterations", c.train.iterations);
        detail::get_if_present(s, "pcmi", c.train.pcmi);
        detail::get_if_present(s, "gtcl", c.train.gtcl);
        detail::get_if_present(s, "similarity", c.train.similarity);
        if (c.train.similarity != "multiplication" && c.train.similarity != "cosine") {
            throw std::invalid_argument("config: train.similarity must be 'multiplication' or "
                                        "'cosine', got '" + c.train.similarity + "'");
        }
    }
    if (j.contains("eval")) {
        detail::get_if_present(j.at("eval"), "threshold", c.eval_threshold);
    }
    if (c.scene.objects < 1) throw std::invalid_argument("config: scene.objects must be >= 1");
    if (c.cameras.count < 2) throw std::invalid_argument("config: cameras.count must be >= 2");
    if (c.train.iterations < 0 + 0u) throw std::invalid_argument("config: train.iterations invalid");
    return c;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Content hash of the canonical (key-sorted) JSON form.
inline std::string config_hash(const RunConfig& c) {
    const std::string dump = to_json(c).dump();
    return hash_hex(detail::fnv1a64(dump));
}

}  // namespace splatseg
