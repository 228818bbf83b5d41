#pragma once

// Deterministic stand-in for the language stack: a small vocabulary with a
// frozen seeded embedding table, a template grammar that generates referring
// expressions from scene object tables (attributes plus spatial relations
// evaluated in a fixed canonical world frame), and sentence pooling.
//
// Every generated expression is verified to identify its target uniquely by
// exhaustively filtering the object table with the expression's predicates,
// and token multisets are kept distinct across targets so that bag-of-words
// similarity models can in principle resolve every expression.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "splatseg/numkit.hpp"
#include "splatseg/scene.hpp"

namespace splatseg {

struct Expression {
    std::vector<std::string> tokens;
    std::int32_t target_object = 0;
    enum class Split { train, test } split = Split::train;
};

template <typename R>
struct Vocab {
    std::vector<std::string> tokens;
    std::map<std::string, std::size_t> index;
    Tensor2<R> embeddings;  // |V| x d_text, frozen
    std::uint64_t seed = 0;
};

inline const std::vector<std::string>& function_words() {
    static const std::vector<std::string> w = {"the", "that", "is", "object", "thing"};
    return w;
}

inline const std::vector<std::string>& size_words() {
    static const std::vector<std::string> w = {"small", "large"};
    return w;
}

enum class Relation {
    left_of,
    right_of,
    behind,
    in_front_of,
    above,
    below,
    near_to,
    far_from,
    nearest_to,
    farthest_from,
};

inline const std::vector<Relation>& all_relations() {
    static const std::vector<Relation> r = {
        Relation::left_of,  Relation::right_of,  Relation::behind,     Relation::in_front_of,
        Relation::above,    Relation::below,     Relation::near_to,    Relation::far_from,
        Relation::nearest_to, Relation::farthest_from};
    return r;
}

inline std::vector<std::string> relation_tokens(Relation r) {
    switch (r) {
        case Relation::left_of: return {"left", "of"};
        case Relation::right_of: return {"right", "of"};
        case Relation::behind: return {"behind"};
        case Relation::in_front_of: return {"in", "front", "of"};
        case Relation::above: return {"above"};
        case Relation::below: return {"below"};
        case Relation::near_to: return {"near"};
        case Relation::far_from: return {"far", "from"};
        case Relation::nearest_to: return {"nearest", "to"};
        case Relation::farthest_from: return {"farthest", "from"};
    }
    return {};
}

struct GrammarConfig {
    double axis_margin = 0.12;   // left/right/behind/front separation
    double z_margin = 0.1;       // above/below separation
    double near_threshold = 0.72;
    double far_threshold = 1.15;
    double superlative_margin = 0.04;  // nearest/farthest runner-up gap
    double relation_probability = 0.55;
    double generic_noun_probability = 0.08;
    double size_probability = 0.3;
    // Anchor noun phrases stay lean so anchor attributes do not dominate the
    // bag of words: mostly bare shape nouns.
    double anchor_color_probability = 0.1;
    double anchor_size_probability = 0.1;
    // Vertical relations are nearly degenerate on a flat tabletop layout, so
    // generation skips them by default; the predicates stay available.
    bool z_relations = false;
    std::size_t anchor_pool = 1;  // distinct anchors per object's relational tails
    std::size_t per_object = 5;
    std::size_t max_attempts = 600;
};

inline double centroid_distance(const ObjectInfo& a, const ObjectInfo& b) {
    double d2 = 0;
    for (int k = 0; k < 3; ++k) {
        const double d = a.centroid[k] - b.centroid[k];
        d2 += d * d;
    }
    return std::sqrt(d2);
}

/// Relation predicate in the canonical world frame (x: right, y: behind,
/// z: up). Superlatives quantify over the whole object table.
inline bool relation_holds(Relation r, const ObjectInfo& a, const ObjectInfo& b,
                           const std::vector<ObjectInfo>& objects, const GrammarConfig& cfg) {
    if (a.id == b.id) return false;
    switch (r) {
        case Relation::left_of: return a.centroid[0] <= b.centroid[0] - cfg.axis_margin;
        case Relation::right_of: return a.centroid[0] >= b.centroid[0] + cfg.axis_margin;
        case Relation::behind: return a.centroid[1] >= b.centroid[1] + cfg.axis_margin;
        case Relation::in_front_of: return a.centroid[1] <= b.centroid[1] - cfg.axis_margin;
        case Relation::above: return a.centroid[2] >= b.centroid[2] + cfg.z_margin;
        case Relation::below: return a.centroid[2] <= b.centroid[2] - cfg.z_margin;
        case Relation::near_to: return centroid_distance(a, b) <= cfg.near_threshold;
        case Relation::far_from: return centroid_distance(a, b) >= cfg.far_threshold;
        case Relation::nearest_to: {
            const double d = centroid_distance(a, b);
            for (const auto& o : objects) {
                if (o.id == a.id || o.id == b.id) continue;
                if (centroid_distance(o, b) < d + cfg.superlative_margin) return false;
            }
            return true;
        }
        case Relation::farthest_from: {
            const double d = centroid_distance(a, b);
            for (const auto& o : objects) {
                if (o.id == a.id || o.id == b.id) continue;
                if (centroid_distance(o, b) > d - cfg.superlative_margin) return false;
            }
            return true;
        }
    }
    return false;
}

/// Attribute constraints of a noun phrase; empty strings mean "any", and
/// generic nouns ("object"/"thing") leave the shape unconstrained.
struct NounPhrase {
    std::string size;
    std::string color;
    std::string shape;  // canonical shape word, or "object"/"thing"

    bool matches(const ObjectInfo& o) const {
        if (!size.empty() && size != o.size_tag) return false;
        if (!color.empty() && color != o.color_tag) return false;
        if (!shape.empty() && shape != "object" && shape != "thing" && shape != o.shape_tag) {
            return false;
        }
        return true;
    }

    std::vector<std::string> tokens() const {
        std::vector<std::string> t = {"the"};
        if (!size.empty()) t.push_back(size);
        if (!color.empty()) t.push_back(color);
        t.push_back(shape.empty() ? "object" : shape);
        return t;
    }
};

/// Structured form of one expression: a target noun phrase and optionally a
/// relation against an anchor noun phrase (existential reading).
struct ExpressionPredicates {
    NounPhrase target_np;
    bool has_relation = false;
    Relation relation = Relation::near_to;
    NounPhrase anchor_np;

    /// All objects satisfying the predicates against the object table.
    std::vector<std::int32_t> candidates(const std::vector<ObjectInfo>& objects,
                                         const GrammarConfig& cfg) const {
        std::vector<std::int32_t> out;
        for (const auto& o : objects) {
            if (!target_np.matches(o)) continue;
            if (has_relation) {
                bool any = false;
                for (const auto& b : objects) {
                    if (b.id == o.id) continue;
                    if (anchor_np.matches(b) && relation_holds(relation, o, b, objects, cfg)) {
                        any = true;
                        break;
                    }
                }
                if (!any) continue;
            }
            out.push_back(o.id);
        }
        return out;
    }

    std::vector<std::string> tokens(bool with_that_is) const {
        auto t = target_np.tokens();
        if (has_relation) {
            if (with_that_is) {
                t.push_back("that");
                t.push_back("is");
            }
            for (const auto& w : relation_tokens(relation)) t.push_back(w);
            for (const auto& w : anchor_np.tokens()) t.push_back(w);
        }
        return t;
    }
};

template <typename R>
inline Vocab<R> make_vocab(std::size_t d_text, std::uint64_t seed) {
    Vocab<R> v;
    v.seed = seed;
    for (const auto& w : function_words()) v.tokens.push_back(w);
    for (const auto& [name, rgb] : object_palette()) {
        (void)rgb;
        v.tokens.push_back(name);
    }
    for (const auto& w : object_shapes()) v.tokens.push_back(w);
    for (const auto& w : size_words()) v.tokens.push_back(w);
    std::set<std::string> seen(v.tokens.begin(), v.tokens.end());
    for (auto r : all_relations()) {
        for (const auto& w : relation_tokens(r)) {
            if (seen.insert(w).second) v.tokens.push_back(w);
        }
    }
    for (std::size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = i;

    Rng rng(seed, "vocab");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_text));
    v.embeddings = Tensor2<R>(v.tokens.size(), d_text);
    for (auto& e : v.embeddings.data) e = R(rng.uniform_in(-scale, scale));
    return v;
}

/// Word features: row j is the frozen embedding of token j.
template <typename R>
inline Tensor2<R> embed_tokens(const Expression& expr, const Vocab<R>& vocab) {
    Tensor2<R> out(expr.tokens.size(), vocab.embeddings.cols);
    for (std::size_t j = 0; j < expr.tokens.size(); ++j) {
        auto it = vocab.index.find(expr.tokens[j]);
        if (it == vocab.index.end()) {
            throw std::invalid_argument("embed_tokens: unknown token '" + expr.tokens[j] + "'");
        }
        auto src = vocab.embeddings.row(it->second);
        std::copy(src.begin(), src.end(), out.row(j).begin());
    }
    return out;
}

/// Sentence embedding: arithmetic mean over rows, then L2 normalization.
template <typename R>
inline Vec<R> pool_sentence(const Tensor2<R>& projected) {
    if (projected.rows == 0) throw std::invalid_argument("pool_sentence: empty input");
    Vec<R> mean(projected.cols, R(0));
    for (std::size_t j = 0; j < projected.rows; ++j) {
        auto row = projected.row(j);
        for (std::size_t k = 0; k < projected.cols; ++k) mean[k] += row[k];
    }
    for (auto& m : mean) m /= R(projected.rows);
    const R n = l2_norm<R>(mean);
    if (!(n > R(0))) throw std::runtime_error("pool_sentence: zero-norm mean");
    for (auto& m : mean) m /= n;
    return mean;
}

namespace detail {

inline std::string multiset_key(const std::vector<std::string>& tokens) {
    std::vector<std::string> sorted = tokens;
    std::sort(sorted.begin(), sorted.end());
    std::string key;
    for (const auto& t : sorted) {
        key += t;
        key += '|';
    }
    return key;
}

inline NounPhrase sample_np(Rng& rng, const ObjectInfo& o, const GrammarConfig& cfg,
                            bool is_anchor) {
    NounPhrase np;
    if (is_anchor) {
        np.shape = o.shape_tag;
        if (rng.uniform() < cfg.anchor_color_probability) np.color = o.color_tag;
        if (rng.uniform() < cfg.anchor_size_probability) np.size = o.size_tag;
        return np;
    }
    const bool generic = rng.uniform() < cfg.generic_noun_probability;
    np.shape = generic ? (rng.uniform() < 0.5 ? "object" : "thing") : o.shape_tag;
    // Target phrases keep the color so the same core tokens recur across an
    // object's expressions; that keeps held-out combinations resolvable.
    np.color = o.color_tag;
    if (rng.uniform() < cfg.size_probability) np.size = o.size_tag;
    return np;
}

}  // namespace detail

/// Template-based expression generation. Each accepted expression uniquely
/// identifies its target under exhaustive candidate filtering, token
/// multisets are unique across targets, and exactly one expression per
/// object is tagged test. Deterministic in (objects, cfg, seed).
inline std::vector<Expression> generate_expressions(const std::vector<ObjectInfo>& objects,
                                                    const GrammarConfig& cfg, std::uint64_t seed) {
    if (objects.size() < 2) {
        throw std::invalid_argument("generate_expressions: need at least 2 objects");
    }
    Rng rng(seed, "expressions");
    std::vector<Expression> out;
    std::map<std::string, std::int32_t> multiset_owner;
    std::set<std::string> used_token_lists;

    for (const auto& obj : objects) {
        std::vector<Expression> mine;
        std::size_t attempts = 0;
        // Mix expression types per object: a couple of attribute-only
        // phrasings when attributes suffice, relational ones for the rest,
        // so held-out expressions of either kind have trained siblings.
        const std::size_t attr_quota =
            std::min<std::size_t>(cfg.per_object,
                                  static_cast<std::size_t>(std::floor(
                                      (1.0 - cfg.relation_probability) * cfg.per_object + 0.5)));
        std::size_t attr_done = 0;
        std::size_t attr_failures = 0;
        // Relational tails reuse a small per-object anchor pool, so a
        // held-out expression recombines parts that occur in the training
        // split instead of introducing a never-seen anchor.
        std::vector<std::size_t> anchor_pool;
        {
            // Prefer anchors whose shape noun is unique in the scene; a
            // shape shared between objects gives the anchor mention a split
            // identity.
            std::vector<std::size_t> others, unique_others;
            for (std::size_t k = 0; k < objects.size(); ++k) {
                if (objects[k].id == obj.id) continue;
                others.push_back(k);
                std::size_t same_shape = 0;
                for (const auto& o2 : objects) {
                    if (o2.shape_tag == objects[k].shape_tag) ++same_shape;
                }
                if (same_shape == 1) unique_others.push_back(k);
            }
            auto& source = unique_others.size() >= cfg.anchor_pool ? unique_others : others;
            for (std::size_t i = source.size(); i > 1; --i) std::swap(source[i - 1], source[rng.index(i)]);
            anchor_pool.assign(source.begin(),
                               source.begin() + std::min<std::size_t>(cfg.anchor_pool, source.size()));
        }
        while (mine.size() < cfg.per_object && attempts < cfg.max_attempts) {
            ++attempts;
            ExpressionPredicates pred;
            pred.target_np = detail::sample_np(rng, obj, cfg, false);
            const bool relational =
                !(attr_done < attr_quota && attr_failures < cfg.max_attempts / 4);
            bool with_that_is = false;
            if (relational) {
                const auto& rels = all_relations();
                const Relation rel = rels[rng.index(rels.size())];
                if (!cfg.z_relations && (rel == Relation::above || rel == Relation::below)) continue;
                // Widen the anchor pool late in the attempt budget so sparse
                // layouts still reach their quota.
                const bool widen = attempts > cfg.max_attempts / 2;
                const auto& anchor =
                    widen ? objects[rng.index(objects.size())]
                          : objects[anchor_pool[rng.index(anchor_pool.size())]];
                if (anchor.id == obj.id) continue;
                if (!relation_holds(rel, obj, anchor, objects, cfg)) continue;
                pred.has_relation = true;
                pred.relation = rel;
                pred.anchor_np = detail::sample_np(rng, anchor, cfg, true);
                with_that_is = rng.uniform() < 0.3;
            }
            auto cands = pred.candidates(objects, cfg);
            if (cands.size() != 1 || cands[0] != obj.id) {
                if (!relational) ++attr_failures;
                continue;
            }

            Expression e;
            e.tokens = pred.tokens(with_that_is);
            e.target_object = obj.id;

            const auto key = detail::multiset_key(e.tokens);
            auto it = multiset_owner.find(key);
            if (it != multiset_owner.end() && it->second != obj.id) {
                if (!relational) ++attr_failures;
                continue;
            }
            std::string list_key;
            for (const auto& t : e.tokens) {
                list_key += t;
                list_key += ' ';
            }
            if (!used_token_lists.insert(list_key).second) {
                if (!relational) ++attr_failures;
                continue;
            }
            multiset_owner[key] = obj.id;
            if (!relational) ++attr_done;
            mine.push_back(std::move(e));
        }
        if (mine.size() < cfg.per_object) {
            throw std::runtime_error("generate_expressions: cannot uniquely describe object " +
                                     std::to_string(obj.id) + " (" + obj.size_tag + " " +
                                     obj.color_tag + " " + obj.shape_tag + ") after " +
                                     std::to_string(cfg.max_attempts) + " attempts");
        }
        mine[rng.index(mine.size())].split = Expression::Split::test;
        for (auto& e : mine) out.push_back(std::move(e));
    }
    return out;
}

}  // namespace splatseg
