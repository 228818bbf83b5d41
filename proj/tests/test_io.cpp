#include <doctest.h>

#include "splatseg/io.hpp"
#include "test_helpers.hpp"

using namespace splatseg;

namespace {

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "splatseg_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("pgm and ppm round trips with config hash comments") {
    auto dir = temp_dir("pnm");
    Rng rng(1, "io");
    BinaryMask mask(17, 9);
    for (auto& b : mask.bits) b = rng.uniform() < 0.4 ? 1 : 0;
    write_pgm(dir / "m.pgm", mask, "deadbeef00000000");
    auto mask2 = read_pgm(dir / "m.pgm");
    CHECK(mask2 == mask);
    const auto bytes = read_file_bytes(dir / "m.pgm");
    CHECK(bytes.find("# cfg deadbeef00000000") != std::string::npos);

    ColorImage<double> img(7, 5);
    for (auto& v : img.data) v = rng.uniform();
    write_ppm(dir / "c.ppm", img, "deadbeef00000000");
    auto img2 = read_ppm<double>(dir / "c.ppm");
    REQUIRE(img2.data.size() == img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        CHECK(std::abs(img2.data[i] - img.data[i]) <= 0.5 / 255.0 + 1e-12);
    }
}

TEST_CASE("pfm round trip preserves float32 values bottom-up") {
    auto dir = temp_dir("pfm");
    Rng rng(2, "io");
    ResponseMap<double> map(6, 4);
    for (auto& v : map.values) v = rng.uniform_in(-5, 5);
    write_pfm(dir / "r.pfm", map);
    auto map2 = read_pfm<double>(dir / "r.pfm");
    REQUIRE(map2.width == 6);
    REQUIRE(map2.height == 4);
    for (std::size_t p = 0; p < map.values.size(); ++p) {
        CHECK(map2.values[p] == double(float(map.values[p])));
    }
    // Header sanity: grayscale magic and negative (little-endian) scale.
    const auto bytes = read_file_bytes(dir / "r.pfm");
    CHECK(bytes.substr(0, 3) == "Pf\n");
    CHECK(bytes.find("-1.0\n") != std::string::npos);
}

TEST_CASE("scene json round trip is exact and idempotent") {
    auto dir = temp_dir("scene");
    auto rc = testing::tiny_run_config(5);
    auto ds = testing::make_dataset<double>(rc);
    write_scene_json(dir / "scene.json", ds.scene.cloud, ds.scene.objects, ds.cameras, ds.hash);
    auto sf = read_scene_json<double>(dir / "scene.json", rc.train.d_r);
    CHECK(sf.config_hash == ds.hash);
    REQUIRE(sf.scene.cloud.size() == ds.scene.cloud.size());
    for (std::size_t i = 0; i < ds.scene.cloud.size(); ++i) {
        const auto& a = ds.scene.cloud.gaussians[i];
        const auto& b = sf.scene.cloud.gaussians[i];
        CHECK(a.mu == b.mu);
        CHECK(a.scale == b.scale);
        CHECK(a.rot == b.rot);
        CHECK(a.opacity == b.opacity);
        CHECK(a.color == b.color);
        CHECK(a.object_id == b.object_id);
    }
    REQUIRE(sf.cameras.size() == ds.cameras.size());
    for (std::size_t i = 0; i < ds.cameras.size(); ++i) {
        CHECK(sf.cameras[i].rotation == ds.cameras[i].rotation);
        CHECK(sf.cameras[i].translation == ds.cameras[i].translation);
        CHECK(sf.cameras[i].split == ds.cameras[i].split);
    }
    REQUIRE(sf.scene.objects.size() == ds.scene.objects.size());
    CHECK(sf.scene.objects[1].color_tag == ds.scene.objects[1].color_tag);
    CHECK(sf.scene.objects[1].centroid == ds.scene.objects[1].centroid);

    // Re-writing the loaded scene produces byte-identical output.
    write_scene_json(dir / "scene2.json", sf.scene.cloud, sf.scene.objects, sf.cameras,
                     sf.config_hash);
    CHECK(read_file_bytes(dir / "scene.json") == read_file_bytes(dir / "scene2.json"));
}

TEST_CASE("expressions and vocab json round trips") {
    auto dir = temp_dir("text");
    auto rc = testing::tiny_run_config(6);
    auto ds = testing::make_dataset<double>(rc);
    write_expressions_json(dir / "e.json", ds.expressions, ds.hash);
    std::string h;
    auto back = read_expressions_json(dir / "e.json", &h);
    CHECK(h == ds.hash);
    REQUIRE(back.size() == ds.expressions.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].tokens == ds.expressions[i].tokens);
        CHECK(back[i].target_object == ds.expressions[i].target_object);
        CHECK(back[i].split == ds.expressions[i].split);
    }

    write_vocab_json(dir / "v.json", ds.vocab, ds.hash);
    auto vb = read_vocab_json<double>(dir / "v.json");
    CHECK(vb.tokens == ds.vocab.tokens);
    CHECK(vb.embeddings.data == ds.vocab.embeddings.data);
}

TEST_CASE("checkpoint round trip and byte determinism") {
    auto dir = temp_dir("ckpt");
    auto rc = testing::tiny_run_config(7);
    auto ds = testing::make_dataset<double>(rc);
    auto cfg = TrainConfig<double>::from_run_config(rc);
    auto st = init(ds.scene.cloud, cfg);
    auto ckpt = to_checkpoint(st, cfg.flags, "aaaa000000000000", ds.hash);
    ckpt.iteration = 123;
    save_checkpoint(dir / "a.bin", ckpt);
    save_checkpoint(dir / "b.bin", ckpt);
    CHECK(read_file_bytes(dir / "a.bin") == read_file_bytes(dir / "b.bin"));

    auto back = load_checkpoint<double>(dir / "a.bin");
    CHECK(back.iteration == 123);
    CHECK(back.config_hash == "aaaa000000000000");
    CHECK(back.dataset_hash == ds.hash);
    CHECK(back.flags.pcmi == cfg.flags.pcmi);
    CHECK(back.model.refer_proj.weight.data == st.model.refer_proj.weight.data);
    CHECK(back.model.pos_mlp.output.bias == st.model.pos_mlp.output.bias);
    CHECK(back.referring.data == st.cloud.referring.data);
}

TEST_CASE("pseudo mask store round trip") {
    auto dir = temp_dir("pseudo");
    auto rc = testing::tiny_run_config(8);
    auto ds = testing::make_dataset<double>(rc);
    auto store = testing::exact_pseudo_masks(ds);
    write_pseudo_masks(dir, store);
    auto back = read_pseudo_masks(dir);
    CHECK(back.selector == store.selector);
    CHECK(back.dataset_hash == store.dataset_hash);
    REQUIRE(back.masks.size() == store.masks.size());
    for (const auto& [key, mask] : store.masks) {
        CHECK(back.masks.at(key) == mask);
    }
}

TEST_CASE("candidate set round trip") {
    auto dir = temp_dir("cand");
    BinaryMask gt(12, 12);
    stamp_disc(gt, 6, 6, 3);
    CorruptionConfig cc;
    auto set = corrupt_masks(gt, cc, 77, {});
    write_candidate_set(dir / "v000_e000", set, "../gt/cam000_obj00.pgm", 77, "cafe000000000000");
    auto back = read_candidate_set(dir / "v000_e000");
    REQUIRE(back.candidates.size() == set.candidates.size());
    for (std::size_t k = 0; k < set.candidates.size(); ++k) {
        CHECK(back.candidates[k].mask == set.candidates[k].mask);
        CHECK(back.candidates[k].gamma == set.candidates[k].gamma);
    }
}

TEST_CASE("config json parsing, defaults, and hash stability") {
    RunConfig def;
    const auto h1 = config_hash(def);
    CHECK(h1.size() == 16);
    CHECK(config_hash(def) == h1);
    RunConfig other;
    other.seed = 2;
    CHECK(config_hash(other) != h1);

    json partial = {{"seed", 9}, {"train", {{"d_r", 4}, {"similarity", "cosine"}}}};
    auto c = config_from_json(partial);
    CHECK(c.seed == 9);
    CHECK(c.train.d_r == 4);
    CHECK(c.train.similarity == "cosine");
    CHECK(c.train.feature_dim == 128);  // default preserved
    CHECK(c.flags().similarity == Similarity::cosine);

    json bad = {{"sceen", {{"objects", 2}}}};
    CHECK_THROWS_AS((void)config_from_json(bad), std::invalid_argument);
    json badsim = {{"train", {{"similarity", "dot"}}}};
    CHECK_THROWS_AS((void)config_from_json(badsim), std::invalid_argument);

    // Round trip through the canonical form preserves the hash.
    auto c2 = config_from_json(to_json(c));
    CHECK(config_hash(c2) == config_hash(c));
}
