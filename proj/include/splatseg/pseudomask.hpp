#pragma once

// Pseudo-ground-truth mask production: a controlled corruption generator
// standing in for an external mask proposer, confidence filtering, the
// confidence-weighted IoU consensus selector, and the baseline selectors it
// is compared against. The corruption model is tuned so that confidence
// correlates with mask quality only imperfectly, reproducing the failure
// mode that makes plain top-confidence selection unreliable.

#include <string>
#include <vector>

#include "splatseg/numkit.hpp"
#include "splatseg/rasterizer.hpp"

namespace splatseg {

struct MaskCandidate {
    BinaryMask mask;
    double gamma = 0.0;  // confidence in (0, 1]
};

struct CandidateMaskSet {
    std::vector<MaskCandidate> candidates;
    std::string provenance;
};

struct CorruptionConfig {
    std::size_t count = 8;           // K
    int dilate_radius = 1;           // signed morphology drawn in [-r, r]
    int translate_px = 1;            // shift drawn in [-t, t] per axis
    double spurious_blob_rate = 0.5;   // expected spurious discs per candidate
    double wrong_object_rate = 0.1;    // probability of emitting a decoy mask
    double gamma_base = 0.35;
    double gamma_quality = 0.45;     // weight of true IoU inside the confidence
    double gamma_noise = 0.18;       // stddev of the confidence noise
};

/// Soft-mask Jaccard of confidence-scaled masks:
/// sum min(gk Mk, gj Mj) / sum max(gk Mk, gj Mj); both masks empty -> 1.
inline double weighted_jaccard(const BinaryMask& mk, double gk, const BinaryMask& mj, double gj) {
    if (mk.width != mj.width || mk.height != mj.height) {
        throw std::invalid_argument("weighted_jaccard: dimension mismatch");
    }
    double num = 0, den = 0;
    for (std::size_t p = 0; p < mk.bits.size(); ++p) {
        const double a = mk.bits[p] ? gk : 0.0;
        const double b = mj.bits[p] ? gj : 0.0;
        num += a < b ? a : b;
        den += a > b ? a : b;
    }
    if (den == 0.0) return 1.0;
    return num / den;
}

// ---------------------------------------------------------------------------
// Mask morphology helpers
// ---------------------------------------------------------------------------

inline BinaryMask dilate(const BinaryMask& m, int radius) {
    if (radius <= 0) return m;
    BinaryMask out(m.width, m.height);
    const int r2 = radius * radius;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    if (dx * dx + dy * dy > r2) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && nx < m.width && ny >= 0 && ny < m.height) out.at(nx, ny) = 1;
                }
            }
        }
    }
    return out;
}

inline BinaryMask erode(const BinaryMask& m, int radius) {
    if (radius <= 0) return m;
    BinaryMask out(m.width, m.height);
    const int r2 = radius * radius;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            bool keep = true;
            for (int dy = -radius; dy <= radius && keep; ++dy) {
                for (int dx = -radius; dx <= radius && keep; ++dx) {
                    if (dx * dx + dy * dy > r2) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || nx >= m.width || ny < 0 || ny >= m.height || !m.at(nx, ny)) {
                        keep = false;
                    }
                }
            }
            if (keep) out.at(x, y) = 1;
        }
    }
    return out;
}

inline BinaryMask translate(const BinaryMask& m, int dx, int dy) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx >= 0 && sx < m.width && sy >= 0 && sy < m.height && m.at(sx, sy)) {
                out.at(x, y) = 1;
            }
        }
    }
    return out;
}

inline void stamp_disc(BinaryMask& m, int cx, int cy, int radius) {
    const int r2 = radius * radius;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > r2) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (nx >= 0 && nx < m.width && ny >= 0 && ny < m.height) m.at(nx, ny) = 1;
        }
    }
}

/// K corrupted candidates for one ground-truth mask: mostly perturbed copies
/// (signed morphology, translation, spurious discs), occasionally a decoy
/// drawn from the supplied object masks. Confidence mixes true quality with
/// seeded noise, so the best candidate is not reliably the most confident.
inline CandidateMaskSet corrupt_masks(const BinaryMask& gt, const CorruptionConfig& cfg,
                                      std::uint64_t seed, const std::vector<BinaryMask>& decoys) {
    if (gt.count() == 0) throw std::invalid_argument("corrupt_masks: empty ground truth");
    Rng rng(seed, "corruption");
    CandidateMaskSet out;
    out.provenance = "synthetic corruption";
    for (std::size_t k = 0; k < cfg.count; ++k) {
        BinaryMask cand;
        const bool decoy = rng.uniform() < cfg.wrong_object_rate;
        if (decoy && !decoys.empty()) {
            cand = decoys[rng.index(decoys.size())];
        } else if (decoy) {
            cand = translate(gt, gt.width / 3, gt.height / 3);
        } else {
            cand = gt;
            const int morph =
                static_cast<int>(rng.uniform_int(-cfg.dilate_radius, cfg.dilate_radius));
            cand = morph >= 0 ? dilate(cand, morph) : erode(cand, -morph);
            const int dx = static_cast<int>(rng.uniform_int(-cfg.translate_px, cfg.translate_px));
            const int dy = static_cast<int>(rng.uniform_int(-cfg.translate_px, cfg.translate_px));
            cand = translate(cand, dx, dy);
            double budget = cfg.spurious_blob_rate;
            while (budget > 0.0) {
                if (rng.uniform() < budget) {
                    stamp_disc(cand, static_cast<int>(rng.index(cand.width)),
                               static_cast<int>(rng.index(cand.height)),
                               1 + static_cast<int>(rng.index(2)));
                }
                budget -= 1.0;
            }
        }
        const double quality = weighted_jaccard(cand, 1.0, gt, 1.0);
        const double gamma = std::clamp(
            cfg.gamma_base + cfg.gamma_quality * quality + cfg.gamma_noise * rng.normal(), 0.05,
            0.99);
        out.candidates.push_back({std::move(cand), gamma});
    }
    return out;
}

/// Keep candidates with gamma > eps; when none survive, keep the single
/// highest-confidence candidate.
inline CandidateMaskSet filter_candidates(const CandidateMaskSet& set, double eps = 0.3) {
    if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("filter_candidates: eps out of range");
    CandidateMaskSet out;
    out.provenance = set.provenance;
    for (const auto& c : set.candidates) {
        if (c.gamma > eps) out.candidates.push_back(c);
    }
    if (out.candidates.empty() && !set.candidates.empty()) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < set.candidates.size(); ++k) {
            if (set.candidates[k].gamma > set.candidates[best].gamma) best = k;
        }
        out.candidates.push_back(set.candidates[best]);
    }
    return out;
}

/// Consensus scores p_k = sum_j weighted_jaccard(k, j), including j = k.
inline std::vector<double> consensus_scores(const CandidateMaskSet& set, bool use_gamma) {
    const std::size_t k = set.candidates.size();
    std::vector<double> p(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            const double ga = use_gamma ? set.candidates[a].gamma : 1.0;
            const double gb = use_gamma ? set.candidates[b].gamma : 1.0;
            p[a] += weighted_jaccard(set.candidates[a].mask, ga, set.candidates[b].mask, gb);
        }
    }
    return p;
}

inline std::size_t argmax_index(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

/// Confidence-weighted IoU consensus selection (ties -> lower index).
inline std::pair<std::size_t, BinaryMask> select_weighted_iou(const CandidateMaskSet& set) {
    if (set.candidates.empty()) throw std::invalid_argument("select_weighted_iou: empty set");
    const auto idx = argmax_index(consensus_scores(set, true));
    return {idx, set.candidates[idx].mask};
}

/// IoU consensus with confidences ignored.
inline std::pair<std::size_t, BinaryMask> select_iou_unweighted(const CandidateMaskSet& set) {
    if (set.candidates.empty()) throw std::invalid_argument("select_iou_unweighted: empty set");
    const auto idx = argmax_index(consensus_scores(set, false));
    return {idx, set.candidates[idx].mask};
}

/// Highest-confidence candidate (ties -> lower index).
inline std::pair<std::size_t, BinaryMask> select_top1(const CandidateMaskSet& set) {
    if (set.candidates.empty()) throw std::invalid_argument("select_top1: empty set");
    std::size_t best = 0;
    for (std::size_t k = 1; k < set.candidates.size(); ++k) {
        if (set.candidates[k].gamma > set.candidates[best].gamma) best = k;
    }
    return {best, set.candidates[best].mask};
}

}  // namespace splatseg
