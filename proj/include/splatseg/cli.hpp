#pragma once

// Command-line entry point wiring the modules into reproducible experiments.
// Subcommands: gen, pseudomask, train, train2, render, eval, ablate,
// gradcheck. All commands are deterministic in (config, seed) and idempotent
// on re-run; every artifact embeds the effective-config hash.
//
// Exit codes: 0 success, 1 usage/config error, 2 verification failure,
// 3 I/O error.

#include <CLI11.hpp>
#include <iostream>

#include "splatseg/eval.hpp"
#include "splatseg/io.hpp"
#include "splatseg/verify.hpp"

namespace splatseg {

namespace cli_detail {

using Real = double;

inline std::uint64_t pair_seed(std::uint64_t seed, std::size_t view, std::size_t expr) {
    return detail::splitmix64(detail::splitmix64(seed ^ detail::fnv1a64("candidates")) +
                              view * 1000003ull + expr);
}

struct GenArtifacts {
    Dataset<Real> dataset;
    std::size_t candidate_sets = 0;
};

inline GenArtifacts run_gen(const RunConfig& rc, const fs::path& out) {
    GenArtifacts art;
    auto& ds = art.dataset;
    ds.config = rc;
    ds.hash = config_hash(rc);
    if (rc.probe) {
        auto probe = generate_occlusion_probe<Real>(rc.seed, rc.scene.gaussians_per_object,
                                                    rc.scene.background_gaussians, rc.train.d_r,
                                                    rc.cameras);
        ds.scene = std::move(probe.scene);
        ds.cameras = std::move(probe.cameras);
        ds.has_probe = true;
        ds.probe_view = probe.designated_view;
        ds.probe_target = probe.target_object;
        ds.probe_blocker = probe.blocker_object;
    } else {
        SceneSpec spec = rc.scene;
        spec.referring_dim = rc.train.d_r;
        ds.scene = generate_scene<Real>(spec, rc.seed);
        ds.cameras = generate_cameras<Real>(rc.cameras, rc.seed);
    }
    ds.vocab = make_vocab<Real>(rc.train.d_text, rc.seed);
    ds.expressions = generate_expressions(ds.scene.objects, rc.grammar, rc.seed);

    fs::create_directories(out);
    json master;
    master["version"] = 1;
    master["config_hash"] = ds.hash;
    master["config"] = to_json(rc);
    if (ds.has_probe) {
        master["probe"] = {{"designated_view", ds.probe_view},
                           {"target_object", ds.probe_target},
                           {"blocker_object", ds.probe_blocker}};
    }
    write_file_bytes(out / "dataset.json", master.dump(1) + "\n");
    write_scene_json(out / "scene.json", ds.scene.cloud, ds.scene.objects, ds.cameras, ds.hash);
    write_expressions_json(out / "expressions.json", ds.expressions, ds.hash);
    write_vocab_json(out / "vocab.json", ds.vocab, ds.hash);

    // Exact object masks for every camera.
    fs::create_directories(out / "gt");
    std::vector<std::vector<BinaryMask>> gt_masks(ds.cameras.size());
    for (std::size_t v = 0; v < ds.cameras.size(); ++v) {
        auto pv = prepare_view(ds.scene.cloud, ds.cameras[v]);
        for (const auto& obj : ds.scene.objects) {
            auto mask = render_object_mask(ds.scene.cloud, pv, obj.id, Real(0.5), RenderSettings{});
            gt_masks[v].push_back(mask);
            write_pgm(out / "gt" / gt_mask_name(v, obj.id), mask, ds.hash);
        }
    }

    // Candidate sets for (train view, train expression) pairs with a
    // nonempty ground truth.
    for (auto v : ds.camera_indices(CameraSplit::train)) {
        for (auto e : ds.expression_indices(Expression::Split::train)) {
            const auto target = ds.expressions[e].target_object;
            const auto& gt = gt_masks[v][static_cast<std::size_t>(target)];
            if (gt.count() == 0) continue;
            std::vector<BinaryMask> decoys;
            for (const auto& obj : ds.scene.objects) {
                if (obj.id == target) continue;
                const auto& m = gt_masks[v][static_cast<std::size_t>(obj.id)];
                if (m.count() > 0) decoys.push_back(m);
            }
            auto set = corrupt_masks(gt, rc.corruption, pair_seed(rc.seed, v, e), decoys);
            write_candidate_set(out / "candidates" / view_expr_name(v, e), set,
                                "../../gt/" + gt_mask_name(v, target), pair_seed(rc.seed, v, e),
                                ds.hash);
            ++art.candidate_sets;
        }
    }
    return art;
}

inline int cmd_gen(const RunConfig& rc, const fs::path& out) {
    auto art = run_gen(rc, out);
    std::cout << "gen: wrote dataset to " << out.string() << " (hash " << art.dataset.hash
              << ", " << art.dataset.scene.cloud.size() << " gaussians, "
              << art.dataset.cameras.size() << " cameras, " << art.dataset.expressions.size()
              << " expressions, " << art.candidate_sets << " candidate sets)\n";
    return 0;
}

inline int cmd_pseudomask(const fs::path& data, const std::string& selector, double eps,
                          const fs::path& out) {
    auto ds = load_dataset<Real>(data);
    PseudoMaskStore store;
    store.selector = selector;
    store.config_hash = ds.hash;
    store.dataset_hash = ds.hash;
    std::size_t degenerate = 0;
    double sum_weighted = 0, sum_unweighted = 0, sum_top1 = 0, sum_selected = 0;
    std::size_t n = 0;
    for (auto v : ds.camera_indices(CameraSplit::train)) {
        for (auto e : ds.expression_indices(Expression::Split::train)) {
            const auto dir = data / "candidates" / view_expr_name(v, e);
            if (!fs::exists(dir / "index.json")) {
                throw std::runtime_error("pseudomask: missing candidates at " + dir.string());
            }
            auto set = read_candidate_set(dir);
            auto filtered = filter_candidates(set, eps);
            if (filtered.candidates.size() == 1 && set.candidates.size() > 1) {
                bool any_above = false;
                for (const auto& c : set.candidates) any_above |= c.gamma > eps;
                if (!any_above) ++degenerate;
            }
            BinaryMask selected;
            if (selector == "weighted") {
                selected = select_weighted_iou(filtered).second;
            } else if (selector == "unweighted") {
                selected = select_iou_unweighted(filtered).second;
            } else if (selector == "top1") {
                selected = select_top1(filtered).second;
            } else {
                throw std::invalid_argument("pseudomask: unknown selector '" + selector + "'");
            }
            store.masks[{v, e}] = selected;

            const auto gt = read_pgm(data / "gt" /
                                     gt_mask_name(v, ds.expressions[e].target_object));
            sum_selected += iou(selected, gt);
            sum_weighted += iou(select_weighted_iou(filtered).second, gt);
            sum_unweighted += iou(select_iou_unweighted(filtered).second, gt);
            sum_top1 += iou(select_top1(filtered).second, gt);
            ++n;
        }
    }
    if (n == 0) throw std::runtime_error("pseudomask: no candidate sets found");
    if (degenerate > 0) {
        std::cerr << "warning: confidence filter removed every candidate in " << degenerate
                  << " sets; kept the single highest-confidence mask there\n";
    }
    write_pseudo_masks(out, store);
    json quality;
    quality["config_hash"] = ds.hash;
    quality["selector"] = selector;
    quality["epsilon"] = eps;
    quality["pairs"] = n;
    quality["degenerate_filter_applications"] = degenerate;
    quality["mean_iou_vs_gt"] = {{"selected", sum_selected / n},
                                 {"weighted", sum_weighted / n},
                                 {"unweighted", sum_unweighted / n},
                                 {"top1", sum_top1 / n}};
    write_file_bytes(out / "quality.json", quality.dump(1) + "\n");
    std::cout << "pseudomask: " << n << " masks via '" << selector << "' (mean IoU vs GT "
              << sum_selected / n << ") -> " << out.string() << "\n";
    return 0;
}

struct TrainOverrides {
    std::int64_t iterations = -1;
    std::int64_t seed = -1;
    std::int64_t d_r = -1;
    std::string ablate;      // comma list: no-pcmi, no-gtcl
    std::string similarity;  // empty = keep
};

inline RunConfig apply_overrides(RunConfig rc, const TrainOverrides& ov) {
    if (ov.iterations >= 0) rc.train.iterations = static_cast<std::size_t>(ov.iterations);
    if (ov.seed >= 0) rc.seed = static_cast<std::uint64_t>(ov.seed);
    if (ov.d_r > 0) rc.train.d_r = static_cast<std::size_t>(ov.d_r);
    if (!ov.similarity.empty()) {
        if (ov.similarity != "multiplication" && ov.similarity != "cosine") {
            throw std::invalid_argument("train: --similarity must be multiplication or cosine");
        }
        rc.train.similarity = ov.similarity;
    }
    if (!ov.ablate.empty()) {
        std::stringstream ss(ov.ablate);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item == "no-pcmi") {
                rc.train.pcmi = false;
            } else if (item == "no-gtcl") {
                rc.train.gtcl = false;
            } else if (item == "pcmi") {
                rc.train.pcmi = true;
            } else if (item == "gtcl") {
                rc.train.gtcl = true;
            } else {
                throw std::invalid_argument("train: unknown ablation token '" + item + "'");
            }
        }
    }
    return rc;
}

inline void write_loss_trace(const fs::path& path, const std::vector<LossBreakdown<Real>>& trace,
                             const std::string& config_hash, const std::string& dataset_hash) {
    std::string out;
    json head = {{"config_hash", config_hash}, {"dataset_hash", dataset_hash}};
    out += head.dump() + "\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        json line = {{"iter", i},
                     {"bce", trace[i].bce},
                     {"con", trace[i].con},
                     {"total", trace[i].total},
                     {"tau", trace[i].tau}};
        out += line.dump() + "\n";
    }
    write_file_bytes(path, out);
}

inline int cmd_train(const fs::path& data, const fs::path& pseudo_dir, const fs::path& out,
                     const TrainOverrides& ov, bool two_stage) {
    auto ds = load_dataset<Real>(data);
    auto pseudo = read_pseudo_masks(pseudo_dir);
    if (pseudo.dataset_hash != ds.hash) {
        throw std::invalid_argument("train: pseudo-mask store was built for a different dataset "
                                    "(hash mismatch)");
    }
    const RunConfig effective = apply_overrides(ds.config, ov);
    const auto eff_hash = config_hash(effective);
    auto cfg = TrainConfig<Real>::from_run_config(effective);
    fs::create_directories(out);
    if (two_stage) {
        auto res = train_two_stage(ds, pseudo, cfg);
        auto ck1 = to_checkpoint(res.stage1, cfg.flags, eff_hash, ds.hash);
        ck1.seed = cfg.seed;
        save_checkpoint(out / "stage1_checkpoint.bin", ck1);
        res.refined.config_hash = eff_hash;
        write_pseudo_masks(out / "refined_masks", res.refined);
        auto ck2 = to_checkpoint(res.stage2, cfg.flags, eff_hash, ds.hash);
        ck2.seed = stage2_seed<Real>(cfg.seed);
        save_checkpoint(out / "checkpoint.bin", ck2);
        write_loss_trace(out / "loss_trace.jsonl", res.stage2.trace, eff_hash, ds.hash);
        write_loss_trace(out / "stage1_loss_trace.jsonl", res.stage1.trace, eff_hash, ds.hash);
        std::cout << "train2: " << res.stage1.trace.size() << "+" << res.stage2.trace.size()
                  << " iterations -> " << (out / "checkpoint.bin").string() << "\n";
    } else {
        auto st = train(ds, pseudo, cfg);
        auto ck = to_checkpoint(st, cfg.flags, eff_hash, ds.hash);
        ck.seed = cfg.seed;
        save_checkpoint(out / "checkpoint.bin", ck);
        write_loss_trace(out / "loss_trace.jsonl", st.trace, eff_hash, ds.hash);
        std::cout << "train: " << st.trace.size() << " iterations -> "
                  << (out / "checkpoint.bin").string() << "\n";
    }
    return 0;
}

inline int cmd_render(const fs::path& data, const fs::path& ckpt_path, const std::string& expr_spec,
                      std::size_t camera, const fs::path& out, bool oracle) {
    auto ds = load_dataset<Real>(data);
    auto ckpt = load_checkpoint<Real>(ckpt_path);
    if (ckpt.dataset_hash != ds.hash) {
        throw std::invalid_argument("render: checkpoint belongs to a different dataset");
    }
    if (camera >= ds.cameras.size()) {
        throw std::invalid_argument("render: unknown camera index " + std::to_string(camera));
    }
    Expression expr;
    bool is_index = !expr_spec.empty() &&
                    expr_spec.find_first_not_of("0123456789") == std::string::npos;
    if (is_index) {
        const auto idx = std::stoul(expr_spec);
        if (idx >= ds.expressions.size()) {
            throw std::invalid_argument("render: expression index out of range");
        }
        expr = ds.expressions[idx];
    } else {
        std::stringstream ss(expr_spec);
        std::string tok;
        while (ss >> tok) expr.tokens.push_back(tok);
        expr.target_object = -1;
        for (const auto& t : expr.tokens) {
            if (!ds.vocab.index.count(t)) {
                throw std::invalid_argument("render: unknown token '" + t + "'");
            }
        }
        if (oracle) {
            throw std::invalid_argument("render: --oracle requires an expression index");
        }
    }

    GaussianCloud<Real> cloud = ds.scene.cloud;
    cloud.referring = ckpt.referring;
    const auto& cam = ds.cameras[camera];
    ResponseMap<Real> map;
    if (oracle) {
        Vec<Real> m(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            m[i] = cloud.gaussians[i].object_id == expr.target_object ? Real(20) : Real(-20);
        }
        map = render_response(cloud, std::span<const Real>(m), cam);
    } else {
        auto [rendered, io] = forward_response(cloud, expr, ds.vocab, ckpt.model, ckpt.flags, cam);
        map = std::move(rendered);
    }
    BinaryMask mask(map.width, map.height);
    for (std::size_t p = 0; p < map.values.size(); ++p) {
        mask.bits[p] = map.values[p] > Real(ds.config.eval_threshold) ? 1 : 0;
    }
    auto color = render_color(cloud, cam);
    ColorImage<Real> overlay = color;
    for (int y = 0; y < overlay.height; ++y) {
        for (int x = 0; x < overlay.width; ++x) {
            if (!mask.at(x, y)) continue;
            Real* px = overlay.pixel(x, y);
            px[0] = Real(0.45) * px[0] + Real(0.55);
            px[1] = Real(0.45) * px[1];
            px[2] = Real(0.45) * px[2];
        }
    }
    fs::create_directories(out);
    write_pfm(out / "response.pfm", map);
    write_pgm(out / "mask.pgm", mask, ckpt.config_hash);
    write_ppm(out / "overlay.ppm", overlay, ckpt.config_hash);
    json manifest = {{"config_hash", ckpt.config_hash},
                     {"dataset_hash", ds.hash},
                     {"camera", camera},
                     {"expression_tokens", expr.tokens},
                     {"oracle", oracle},
                     {"files", {"response.pfm", "mask.pgm", "overlay.ppm"}}};
    write_file_bytes(out / "manifest.json", manifest.dump(1) + "\n");
    std::cout << "render: wrote response/mask/overlay to " << out.string() << "\n";
    return 0;
}

inline int cmd_eval(const fs::path& data, const fs::path& ckpt_path, const fs::path& out) {
    auto ds = load_dataset<Real>(data);
    auto ckpt = load_checkpoint<Real>(ckpt_path);
    if (ckpt.dataset_hash != ds.hash) {
        throw std::invalid_argument("eval: checkpoint belongs to a different dataset");
    }
    auto report = evaluate(ds, ckpt, ds.config.eval_threshold);
    json j;
    j["config_hash"] = ckpt.config_hash;
    j["dataset_hash"] = ds.hash;
    j["aggregate_miou"] = report.aggregate;
    j["seeds"] = {ckpt.seed};
    j["per_expression"] = json::array();
    for (const auto& [ei, v] : report.per_expression) {
        j["per_expression"].push_back({{"expression", ei}, {"iou", v}});
    }
    j["rows"] = json::array();
    for (const auto& r : report.rows) {
        j["rows"].push_back({{"expression", r.expression},
                             {"view", r.view},
                             {"target", r.target},
                             {"iou", r.iou_value}});
    }
    if (ds.has_probe) {
        auto probe = occlusion_probe(ds, ckpt, ds.probe_view, ds.probe_target, ds.probe_blocker,
                                     ds.config.eval_threshold);
        j["occlusion"] = {{"iou_blocked", probe.iou_blocked},
                          {"iou_unblocked", probe.iou_unblocked},
                          {"predicted_area_fraction", probe.predicted_area_fraction},
                          {"gt_blocked_pixels", probe.gt_blocked_pixels},
                          {"respects_occlusion", probe.respects_occlusion}};
    }
    fs::create_directories(out);
    write_file_bytes(out / "eval_report.json", j.dump(1) + "\n");
    std::cout << "eval: aggregate mIoU " << report.aggregate << " over " << report.rows.size()
              << " (expression, view) pairs -> " << (out / "eval_report.json").string() << "\n";
    return 0;
}

inline int cmd_ablate(const fs::path& data, const fs::path& pseudo_dir, const std::string& seeds_csv,
                      const fs::path& out, bool full, std::int64_t iterations) {
    auto ds = load_dataset<Real>(data);
    auto pseudo = read_pseudo_masks(pseudo_dir);
    if (pseudo.dataset_hash != ds.hash) {
        throw std::invalid_argument("ablate: pseudo-mask store hash mismatch");
    }
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(seeds_csv);
    std::string item;
    while (std::getline(ss, item, ',')) seeds.push_back(std::stoull(item));
    if (seeds.size() < 1) throw std::invalid_argument("ablate: need at least one seed");

    RunConfig rc = ds.config;
    if (iterations >= 0) rc.train.iterations = static_cast<std::size_t>(iterations);
    auto base = TrainConfig<Real>::from_run_config(rc);

    std::vector<AblationCell> cells;
    if (full) {
        for (const char* m : {"baseline", "pcmi", "gtcl", "full", "two_stage"}) {
            for (const char* sim : {"multiplication", "cosine"}) {
                for (std::size_t dr : {1u, 4u, 16u, 32u}) cells.push_back({m, sim, dr});
            }
        }
    } else {
        cells = default_ablation_cells(rc.train.d_r);
    }
    auto rows = ablation_grid(ds, pseudo, base, seeds, cells, rc.eval_threshold);

    json j;
    j["config_hash"] = config_hash(rc);
    j["dataset_hash"] = ds.hash;
    j["seeds"] = seeds;
    j["iterations"] = rc.train.iterations;
    j["rows"] = json::array();
    std::string csv = "method,similarity,d_r,median_miou";
    for (std::size_t s = 0; s < seeds.size(); ++s) csv += ",seed" + std::to_string(seeds[s]);
    csv += "\n";
    for (const auto& row : rows) {
        j["rows"].push_back({{"method", row.cell.method},
                             {"similarity", row.cell.similarity},
                             {"d_r", row.cell.d_r},
                             {"mious", row.mious},
                             {"median", row.median}});
        csv += row.cell.method + "," + row.cell.similarity + "," + std::to_string(row.cell.d_r) +
               "," + std::to_string(row.median);
        for (double v : row.mious) csv += "," + std::to_string(v);
        csv += "\n";
        std::cout << "ablate: " << row.cell.method << "/" << row.cell.similarity
                  << "/d_r=" << row.cell.d_r << " median mIoU " << row.median << "\n";
    }
    fs::create_directories(out);
    write_file_bytes(out / "ablation.json", j.dump(1) + "\n");
    write_file_bytes(out / "ablation.csv", csv);
    return 0;
}

inline int cmd_gradcheck(double h, double tol) {
    auto inst = make_verify_instance<double>();
    AblationFlags flags;  // full model
    auto report = verify_gradients(inst, flags, h, tol);
    std::cout << "gradcheck: " << report.checked << " parameters, max rel err "
              << report.max_rel_err << " (worst: " << report.worst.group << "["
              << report.worst.index << "])\n";
    if (!report.passed()) {
        for (std::size_t i = 0; i < std::min<std::size_t>(10, report.flagged.size()); ++i) {
            const auto& f = report.flagged[i];
            std::cerr << "  FLAGGED " << f.group << "[" << f.index << "] analytic=" << f.analytic
                      << " numeric=" << f.numeric << " rel=" << f.rel_err << "\n";
        }
        std::cerr << "gradcheck: FAILED (" << report.flagged.size() << " of " << report.checked
                  << " above tol " << tol << ")\n";
        return 2;
    }
    std::cout << "gradcheck: PASSED at tol " << tol << "\n";
    return 0;
}

}  // namespace cli_detail

inline int cli_run(const std::vector<std::string>& args) {
    CLI::App app{"referring segmentation engine for 3D gaussian splat scenes"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", data_dir, pseudo_dir, ckpt_path;
    std::int64_t seed_override = -1;

    auto load_run_config = [&]() {
        RunConfig rc;
        if (!config_path.empty()) {
            rc = config_from_json(json::parse(read_file_bytes(config_path)));
        }
        if (seed_override >= 0) rc.seed = static_cast<std::uint64_t>(seed_override);
        return rc;
    };

    int rc_code = 0;
    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    bool gen_probe = false;
    gen->add_option("--config", config_path, "config JSON file");
    gen->add_option("--seed", seed_override, "seed override");
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    gen->add_flag("--probe", gen_probe, "generate the occlusion probe scene");
    gen->callback([&]() {
        auto rc = load_run_config();
        if (gen_probe) rc.probe = true;
        rc_code = cli_detail::cmd_gen(rc, out_dir);
    });

    // pseudomask
    auto* pm = app.add_subcommand("pseudomask", "select pseudo masks from candidate sets");
    std::string selector = "weighted";
    double eps = 0.3;
    pm->add_option("--data", data_dir, "dataset directory")->required();
    pm->add_option("--selector", selector, "weighted | unweighted | top1");
    pm->add_option("--epsilon", eps, "confidence threshold");
    pm->add_option("--out", out_dir, "output directory (default <data>/pseudo_<selector>)");
    pm->callback([&]() {
        auto ds_cfg = json::parse(read_file_bytes(fs::path(data_dir) / "dataset.json"));
        const double cfg_eps = ds_cfg.at("config").at("train").at("epsilon").get<double>();
        const fs::path out = pm->count("--out") ? fs::path(out_dir)
                                                : fs::path(data_dir) / ("pseudo_" + selector);
        rc_code = cli_detail::cmd_pseudomask(data_dir, selector,
                                             pm->count("--epsilon") ? eps : cfg_eps, out);
    });

    // train / train2
    cli_detail::TrainOverrides ov;
    for (bool two_stage : {false, true}) {
        auto* tr = app.add_subcommand(two_stage ? "train2" : "train",
                                      two_stage ? "two-stage training run" : "training run");
        tr->add_option("--data", data_dir, "dataset directory")->required();
        tr->add_option("--pseudo", pseudo_dir, "pseudo-mask directory (default "
                                               "<data>/pseudo_weighted)");
        tr->add_option("--out", out_dir, "output directory")->required();
        tr->add_option("--iterations", ov.iterations, "iteration budget override");
        tr->add_option("--seed", ov.seed, "seed override");
        tr->add_option("--dr", ov.d_r, "referring feature dimension override");
        tr->add_option("--ablate", ov.ablate, "comma list: no-pcmi,no-gtcl,pcmi,gtcl");
        tr->add_option("--similarity", ov.similarity, "multiplication | cosine");
        tr->callback([&, two_stage]() {
            const fs::path pd = pseudo_dir.empty() ? fs::path(data_dir) / "pseudo_weighted"
                                                   : fs::path(pseudo_dir);
            rc_code = cli_detail::cmd_train(data_dir, pd, out_dir, ov, two_stage);
        });
    }

    // render
    auto* rn = app.add_subcommand("render", "render response map, mask, and overlay");
    std::string expr_spec;
    std::size_t camera = 0;
    bool oracle = false;
    rn->add_option("--data", data_dir, "dataset directory")->required();
    rn->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    rn->add_option("--expr", expr_spec, "expression index or raw text")->required();
    rn->add_option("--camera", camera, "camera index")->required();
    rn->add_option("--out", out_dir, "output directory")->required();
    rn->add_flag("--oracle", oracle, "inject oracle responses for the target object");
    rn->callback([&]() {
        rc_code = cli_detail::cmd_render(data_dir, ckpt_path, expr_spec, camera, out_dir, oracle);
    });

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on held-out pairs");
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    ev->add_option("--out", out_dir, "output directory")->required();
    ev->callback([&]() { rc_code = cli_detail::cmd_eval(data_dir, ckpt_path, out_dir); });

    // ablate
    auto* ab = app.add_subcommand("ablate", "train and evaluate the ablation grid");
    std::string seeds_csv = "1,2,3";
    bool full_grid = false;
    std::int64_t ab_iters = -1;
    ab->add_option("--data", data_dir, "dataset directory")->required();
    ab->add_option("--pseudo", pseudo_dir, "pseudo-mask directory (default "
                                           "<data>/pseudo_weighted)");
    ab->add_option("--seeds", seeds_csv, "comma-separated seeds");
    ab->add_option("--out", out_dir, "output directory")->required();
    ab->add_option("--iterations", ab_iters, "iteration budget override");
    ab->add_flag("--full", full_grid, "full method x similarity x d_r cross product");
    ab->callback([&]() {
        const fs::path pd = pseudo_dir.empty() ? fs::path(data_dir) / "pseudo_weighted"
                                               : fs::path(pseudo_dir);
        rc_code = cli_detail::cmd_ablate(data_dir, pd, seeds_csv, out_dir, full_grid, ab_iters);
    });

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of all model gradients");
    double h = 1e-4, tol = 1e-4;
    gc->add_option("--step", h, "finite-difference step");
    gc->add_option("--tol", tol, "relative-error tolerance");
    gc->callback([&]() { rc_code = cli_detail::cmd_gradcheck(h, tol); });

    std::vector<const char*> argv;
    argv.push_back("splatseg");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return rc_code;
}

}  // namespace splatseg
