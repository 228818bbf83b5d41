#include <doctest.h>

#include <cmath>

#include "splatseg/pseudomask.hpp"

using namespace splatseg;

namespace {

BinaryMask blob_mask(int w, int h, int cx, int cy, int r) {
    BinaryMask m(w, h);
    stamp_disc(m, cx, cy, r);
    return m;
}

double plain_iou(const BinaryMask& a, const BinaryMask& b) {
    return weighted_jaccard(a, 1.0, b, 1.0);
}

}  // namespace

TEST_CASE("weighted_jaccard values and properties") {
    auto a = blob_mask(8, 8, 3, 3, 2);
    CHECK(weighted_jaccard(a, 0.7, a, 0.7) == 1.0);

    auto b = blob_mask(8, 8, 6, 6, 1);
    BinaryMask disjoint(8, 8);
    disjoint.at(0, 0) = 1;
    CHECK(weighted_jaccard(b, 0.9, disjoint, 0.4) == 0.0);

    // Scripted 2x2 case: min-sum 0.4 over max-sum 1.6.
    BinaryMask mk(2, 2), mj(2, 2);
    mk.at(0, 0) = 1;
    mk.at(1, 0) = 1;  // pixels (0,0) and (0,1) in (row, col) reading
    mj.at(0, 0) = 1;
    CHECK(weighted_jaccard(mk, 0.8, mj, 0.4) == doctest::Approx(0.25).epsilon(1e-15));

    // Both empty -> 1; one empty -> 0.
    BinaryMask e1(8, 8), e2(8, 8);
    CHECK(weighted_jaccard(e1, 0.5, e2, 0.7) == 1.0);
    CHECK(weighted_jaccard(a, 0.5, e1, 0.7) == 0.0);

    // Symmetric and bounded on random pairs; 1 iff identical soft masks.
    Rng rng(3, "wj");
    for (int trial = 0; trial < 30; ++trial) {
        BinaryMask x(8, 8), y(8, 8);
        for (auto& bit : x.bits) bit = rng.uniform() < 0.4 ? 1 : 0;
        for (auto& bit : y.bits) bit = rng.uniform() < 0.4 ? 1 : 0;
        const double gx = rng.uniform_in(0.1, 1.0), gy = rng.uniform_in(0.1, 1.0);
        const double ab = weighted_jaccard(x, gx, y, gy);
        const double ba = weighted_jaccard(y, gy, x, gx);
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        const bool identical_soft = x.bits == y.bits && (gx == gy || x.count() == 0);
        if (ab == 1.0) {
            CHECK(identical_soft);
        }
    }

    CHECK_THROWS_AS((void)weighted_jaccard(a, 0.5, BinaryMask(3, 3), 0.5), std::invalid_argument);
}

TEST_CASE("filter_candidates threshold and degenerate rule") {
    CandidateMaskSet set;
    auto m = blob_mask(6, 6, 3, 3, 1);
    for (double g : {0.9, 0.9, 0.9}) set.candidates.push_back({m, g});
    auto kept = filter_candidates(set, 0.3);
    CHECK(kept.candidates.size() == 3);

    CandidateMaskSet low;
    for (double g : {0.1, 0.08, 0.09}) low.candidates.push_back({m, g});
    auto deg = filter_candidates(low, 0.3);
    REQUIRE(deg.candidates.size() == 1);
    CHECK(deg.candidates[0].gamma == 0.1);

    CandidateMaskSet mixed;
    for (double g : {0.2, 0.4, 0.5}) mixed.candidates.push_back({m, g});
    CHECK(filter_candidates(mixed, 0.3).candidates.size() == 2);

    CHECK_THROWS_AS((void)filter_candidates(mixed, 1.0), std::invalid_argument);
}

TEST_CASE("selectors on identical and scripted sets") {
    auto m = blob_mask(6, 6, 3, 3, 2);
    CandidateMaskSet same;
    for (int k = 0; k < 4; ++k) same.candidates.push_back({m, 0.6});
    auto scores = consensus_scores(same, true);
    for (double p : scores) CHECK(p == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(select_weighted_iou(same).first == 0);
    CHECK(select_iou_unweighted(same).first == 0);
    CHECK(select_top1(same).first == 0);

    CandidateMaskSet single;
    single.candidates.push_back({m, 0.4});
    CHECK(consensus_scores(single, true)[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(select_weighted_iou(single).first == 0);

    // Scripted K=3 on a 4x4 grid, hand-set gammas, exhaustive oracle.
    CandidateMaskSet scripted;
    scripted.candidates.push_back({blob_mask(4, 4, 1, 1, 1), 0.8});
    scripted.candidates.push_back({blob_mask(4, 4, 2, 1, 1), 0.5});
    scripted.candidates.push_back({blob_mask(4, 4, 3, 3, 0), 0.9});
    std::vector<double> oracle(3, 0.0);
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            double num = 0, den = 0;
            for (int p = 0; p < 16; ++p) {
                const double va = scripted.candidates[a].mask.bits[p]
                                      ? scripted.candidates[a].gamma : 0.0;
                const double vb = scripted.candidates[b].mask.bits[p]
                                      ? scripted.candidates[b].gamma : 0.0;
                num += std::min(va, vb);
                den += std::max(va, vb);
            }
            oracle[a] += den == 0 ? 1.0 : num / den;
        }
    }
    auto got = consensus_scores(scripted, true);
    std::size_t want_idx = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(got[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
        if (oracle[i] > oracle[want_idx]) want_idx = i;
    }
    CHECK(select_weighted_iou(scripted).first == want_idx);

    // top1 basics.
    CandidateMaskSet t1;
    for (double g : {0.5, 0.9, 0.7}) t1.candidates.push_back({m, g});
    CHECK(select_top1(t1).first == 1);
    CandidateMaskSet t2;
    for (double g : {0.6, 0.6}) t2.candidates.push_back({m, g});
    CHECK(select_top1(t2).first == 0);
}

TEST_CASE("confidence-scale invariance of the weighted selection") {
    Rng rng(7, "scale");
    CandidateMaskSet set;
    for (int k = 0; k < 5; ++k) {
        BinaryMask m(8, 8);
        for (auto& bit : m.bits) bit = rng.uniform() < 0.35 ? 1 : 0;
        set.candidates.push_back({m, rng.uniform_in(0.2, 0.95)});
    }
    auto base_scores = consensus_scores(set, true);
    const auto base_idx = select_weighted_iou(set).first;
    for (double c : {2.0, 0.5, 3.14159}) {
        CandidateMaskSet scaled = set;
        for (auto& cand : scaled.candidates) cand.gamma *= c;
        auto scores = consensus_scores(scaled, true);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            CHECK(scores[i] == doctest::Approx(base_scores[i]).epsilon(1e-12));
        }
        CHECK(select_weighted_iou(scaled).first == base_idx);
    }

    // All-equal gammas reduce weighted selection to the unweighted one.
    CandidateMaskSet eq = set;
    for (auto& cand : eq.candidates) cand.gamma = 0.37;
    CHECK(select_weighted_iou(eq).first == select_iou_unweighted(eq).first);
}

TEST_CASE("unweighted consensus prefers near-duplicates over an outlier") {
    CandidateMaskSet set;
    set.candidates.push_back({blob_mask(12, 12, 4, 4, 2), 0.3});
    set.candidates.push_back({blob_mask(12, 12, 4, 5, 2), 0.4});
    set.candidates.push_back({blob_mask(12, 12, 5, 4, 2), 0.5});
    set.candidates.push_back({blob_mask(12, 12, 5, 5, 2), 0.6});
    set.candidates.push_back({blob_mask(12, 12, 10, 10, 1), 0.9});  // outlier
    auto [idx, mask] = select_iou_unweighted(set);
    CHECK(idx < 4);
    // And top-1 falls for the confident outlier here.
    CHECK(select_top1(set).first == 4);
}

TEST_CASE("corrupt_masks zero-noise, all-decoy, and default statistics") {
    auto gt = blob_mask(16, 16, 7, 7, 3);
    std::vector<BinaryMask> decoys = {blob_mask(16, 16, 12, 12, 2)};

    CorruptionConfig zero;
    zero.dilate_radius = 0;
    zero.translate_px = 0;
    zero.spurious_blob_rate = 0.0;
    zero.wrong_object_rate = 0.0;
    auto clean = corrupt_masks(gt, zero, 5, decoys);
    CHECK(clean.candidates.size() == zero.count);
    for (const auto& c : clean.candidates) CHECK(c.mask == gt);

    CorruptionConfig wrong;
    wrong.wrong_object_rate = 1.0;
    auto bad = corrupt_masks(gt, wrong, 6, decoys);
    for (const auto& c : bad.candidates) CHECK_FALSE(c.mask == gt);

    // Determinism.
    CorruptionConfig def;
    auto s1 = corrupt_masks(gt, def, 9, decoys);
    auto s2 = corrupt_masks(gt, def, 9, decoys);
    REQUIRE(s1.candidates.size() == s2.candidates.size());
    for (std::size_t k = 0; k < s1.candidates.size(); ++k) {
        CHECK(s1.candidates[k].mask == s2.candidates[k].mask);
        CHECK(s1.candidates[k].gamma == s2.candidates[k].gamma);
    }

    // Default config over seeded trials: mean candidate IoU strictly inside
    // (0, 1), and top confidence is not always the best mask.
    double iou_sum = 0;
    std::size_t iou_n = 0;
    int top_not_best = 0;
    const int trials = 60;
    for (int t = 0; t < trials; ++t) {
        auto set = corrupt_masks(gt, def, 100 + t, decoys);
        double best_iou = -1;
        std::size_t best_idx = 0;
        for (std::size_t k = 0; k < set.candidates.size(); ++k) {
            const double i = plain_iou(set.candidates[k].mask, gt);
            iou_sum += i;
            ++iou_n;
            if (i > best_iou) {
                best_iou = i;
                best_idx = k;
            }
        }
        if (select_top1(set).first != best_idx) ++top_not_best;
    }
    const double mean_iou = iou_sum / double(iou_n);
    CHECK(mean_iou > 0.0);
    CHECK(mean_iou < 1.0);
    CHECK(top_not_best > 0);

    CHECK_THROWS_AS((void)corrupt_masks(BinaryMask(8, 8), def, 1, decoys), std::invalid_argument);
}
