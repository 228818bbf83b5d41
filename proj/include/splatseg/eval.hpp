#pragma once

// Metrics and experiment harness: IoU/mIoU over held-out (test expression,
// novel view) pairs, an occlusion probe against transmittance-aware ground
// truth, and the ablation grid that trains method/similarity/dimension
// variants and reports per-cell medians.

#include <algorithm>

#include "splatseg/trainer.hpp"

namespace splatseg {

/// |a intersect b| / |a union b|; both masks empty -> 1.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw std::invalid_argument("iou: dimension mismatch");
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t p = 0; p < a.bits.size(); ++p) {
        const bool ba = a.bits[p] != 0, bb = b.bits[p] != 0;
        inter += ba && bb ? 1 : 0;
        uni += ba || bb ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

struct EvalRow {
    std::size_t expression = 0;
    std::size_t view = 0;
    std::int32_t target = 0;
    double iou_value = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<std::pair<std::size_t, double>> per_expression;  // mean over novel views
    double aggregate = 0.0;  // mean of the per-expression values
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
};

/// Held-out evaluation: render the response for every (test expression,
/// novel view) pair, binarize at M > threshold, and compare against the
/// exact object mask.
template <typename R>
inline EvalReport evaluate(const Dataset<R>& ds, const Checkpoint<R>& ckpt,
                           double threshold = 0.0) {
    GaussianCloud<R> cloud = ds.scene.cloud;
    if (ckpt.referring.rows != cloud.size()) {
        throw std::invalid_argument("evaluate: checkpoint does not match the scene");
    }
    cloud.referring = ckpt.referring;
    EvalReport report;
    report.config_hash = ckpt.config_hash;
    const auto novel = ds.camera_indices(CameraSplit::novel);
    const auto tests = ds.expression_indices(Expression::Split::test);
    for (auto ei : tests) {
        double acc = 0.0;
        for (auto vi : novel) {
            auto [map, io] = forward_response(cloud, ds.expressions[ei], ds.vocab, ckpt.model,
                                              ckpt.flags, ds.cameras[vi]);
            BinaryMask pred(map.width, map.height);
            for (std::size_t p = 0; p < map.values.size(); ++p) {
                pred.bits[p] = map.values[p] > R(threshold) ? 1 : 0;
            }
            auto gt = render_object_mask(cloud, ds.cameras[vi], ds.expressions[ei].target_object);
            const double v = iou(pred, gt);
            report.rows.push_back({ei, vi, ds.expressions[ei].target_object, v});
            acc += v;
        }
        report.per_expression.push_back({ei, acc / static_cast<double>(novel.size())});
    }
    double total = 0.0;
    for (const auto& [ei, v] : report.per_expression) total += v;
    report.aggregate = report.per_expression.empty()
                           ? 0.0
                           : total / static_cast<double>(report.per_expression.size());
    return report;
}

struct OcclusionReport {
    double iou_blocked = 0.0;
    double iou_unblocked = 0.0;
    double predicted_area_fraction = 0.0;  // blocked view
    std::size_t gt_blocked_pixels = 0;
    bool respects_occlusion = false;  // positives outside GT coverage < 20%
    std::size_t expression = 0;
};

/// Evaluates the occluded-target expression in the designated view, then
/// repeats with the blocker removed (same checkpoint features).
template <typename R>
inline OcclusionReport occlusion_probe(const Dataset<R>& ds, const Checkpoint<R>& ckpt,
                                       std::size_t designated_view, std::int32_t target,
                                       std::int32_t blocker, double threshold = 0.0) {
    if (designated_view >= ds.cameras.size()) {
        throw std::invalid_argument("occlusion_probe: missing designated view");
    }
    std::size_t expr_idx = ds.expressions.size();
    for (std::size_t i = 0; i < ds.expressions.size(); ++i) {
        if (ds.expressions[i].target_object == target &&
            ds.expressions[i].split == Expression::Split::test) {
            expr_idx = i;
            break;
        }
    }
    if (expr_idx == ds.expressions.size()) {
        throw std::invalid_argument("occlusion_probe: probe scene has no held-out expression for "
                                    "the target");
    }
    GaussianCloud<R> cloud = ds.scene.cloud;
    cloud.referring = ckpt.referring;
    const auto& cam = ds.cameras[designated_view];

    OcclusionReport rep;
    rep.expression = expr_idx;

    auto predict = [&](const GaussianCloud<R>& c) {
        auto [map, io] = forward_response(c, ds.expressions[expr_idx], ds.vocab, ckpt.model,
                                          ckpt.flags, cam);
        BinaryMask pred(map.width, map.height);
        for (std::size_t p = 0; p < map.values.size(); ++p) {
            pred.bits[p] = map.values[p] > R(threshold) ? 1 : 0;
        }
        return pred;
    };

    auto gt_blocked = render_object_mask(cloud, cam, target);
    auto pred_blocked = predict(cloud);
    rep.gt_blocked_pixels = gt_blocked.count();
    rep.iou_blocked = iou(pred_blocked, gt_blocked);
    rep.predicted_area_fraction =
        static_cast<double>(pred_blocked.count()) / static_cast<double>(pred_blocked.bits.size());

    // Coverage support of the target in this view (composited indicator).
    Vec<R> indicator(cloud.size(), R(0));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        indicator[i] = cloud.gaussians[i].object_id == target ? R(1) : R(0);
    }
    auto support = render_response(cloud, std::span<const R>(indicator), cam);
    std::size_t outside = 0;
    for (std::size_t p = 0; p < pred_blocked.bits.size(); ++p) {
        if (pred_blocked.bits[p] && support.values[p] <= R(0.01)) ++outside;
    }
    rep.respects_occlusion =
        pred_blocked.count() == 0 ||
        static_cast<double>(outside) / static_cast<double>(pred_blocked.count()) < 0.2;

    auto cloud_open = remove_object(cloud, blocker);
    auto gt_open = render_object_mask(cloud_open, cam, target);
    auto pred_open = predict(cloud_open);
    rep.iou_unblocked = iou(pred_open, gt_open);
    return rep;
}

// ---------------------------------------------------------------------------
// Ablation grid
// ---------------------------------------------------------------------------

struct AblationCell {
    std::string method;      // baseline | pcmi | gtcl | full | two_stage
    std::string similarity;  // multiplication | cosine
    std::size_t d_r = 16;
};

struct AblationRow {
    AblationCell cell;
    std::vector<double> mious;  // one per seed
    double median = 0.0;
};

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline AblationFlags flags_for_cell(const AblationCell& cell) {
    AblationFlags f;
    f.similarity = cell.similarity == "cosine" ? Similarity::cosine : Similarity::multiplication;
    if (cell.method == "baseline") {
        f.pcmi = false;
        f.gtcl = false;
    } else if (cell.method == "pcmi") {
        f.pcmi = true;
        f.gtcl = false;
    } else if (cell.method == "gtcl") {
        f.pcmi = false;
        f.gtcl = true;
    } else if (cell.method == "full" || cell.method == "two_stage") {
        f.pcmi = true;
        f.gtcl = true;
    } else {
        throw std::invalid_argument("unknown ablation method: " + cell.method);
    }
    return f;
}

/// Default grid: the five method rows at the reference configuration, the
/// similarity comparison on the baseline, and the d_r sweep on the baseline.
inline std::vector<AblationCell> default_ablation_cells(std::size_t base_dr = 16) {
    std::vector<AblationCell> cells;
    for (const char* m : {"baseline", "pcmi", "gtcl", "full", "two_stage"}) {
        cells.push_back({m, "multiplication", base_dr});
    }
    cells.push_back({"baseline", "cosine", base_dr});
    for (std::size_t dr : {1u, 4u, 32u}) cells.push_back({"baseline", "multiplication", dr});
    return cells;
}

/// Trains and evaluates every requested cell for every seed. The train plan
/// (projected views, embedded tokens) is shared across cells; each run is
/// otherwise independent and fully determined by its seed.
template <typename R>
inline std::vector<AblationRow> ablation_grid(const Dataset<R>& ds, const PseudoMaskStore& pseudo,
                                              const TrainConfig<R>& base,
                                              const std::vector<std::uint64_t>& seeds,
                                              const std::vector<AblationCell>& cells,
                                              double threshold = 0.0) {
    if (seeds.empty()) throw std::invalid_argument("ablation_grid: need at least one seed");
    const auto plan = TrainPlan<R>::build(ds);
    std::vector<AblationRow> rows;
    for (const auto& cell : cells) {
        AblationRow row;
        row.cell = cell;
        for (auto seed : seeds) {
            TrainConfig<R> cfg = base;
            cfg.seed = seed;
            cfg.d_r = cell.d_r;
            cfg.flags = flags_for_cell(cell);
            Dataset<R> ds_run = ds;  // shallow copy; referring dim may differ per cell
            ds_run.scene.cloud.referring = Tensor2<R>(ds.scene.cloud.size(), cell.d_r);
            TrainState<R> final_state;
            if (cell.method == "two_stage") {
                auto two = train_two_stage(ds_run, pseudo, cfg, &plan);
                final_state = std::move(two.stage2);
            } else {
                final_state = train(ds_run, pseudo, cfg, &plan);
            }
            auto ckpt = to_checkpoint(final_state, cfg.flags, "", pseudo.dataset_hash);
            row.mious.push_back(evaluate(ds_run, ckpt, threshold).aggregate);
        }
        row.median = median_of(row.mious);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace splatseg
