#pragma once

// On-disk artifacts: binary PPM/PGM/PFM images, versioned scene JSON with
// 17-significant-digit decimals, expression/vocab JSON, binary checkpoints,
// candidate-mask directories, and pseudo-mask stores. Every artifact embeds
// the effective-config hash; loaders surface mismatches as errors.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "splatseg/config.hpp"
#include "splatseg/rasterizer.hpp"

namespace splatseg {

namespace fs = std::filesystem;

inline void write_file_bytes(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Decimal with 17 significant digits (round-trips IEEE doubles exactly).
/// Integral values get a trailing ".0" so JSON parsers read them back as
/// doubles; otherwise "-0" would come back as the integer zero.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

// ---------------------------------------------------------------------------
// Images: PPM (P6), PGM (P5), PFM (grayscale, little-endian, scale -1.0)
// ---------------------------------------------------------------------------

template <typename R>
inline void write_ppm(const fs::path& path, const ColorImage<R>& img,
                      const std::string& config_hash = "") {
    std::string out = "P6\n";
    if (!config_hash.empty()) out += "# cfg " + config_hash + "\n";
    out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    write_file_bytes(path, out);
}

inline void write_pgm(const fs::path& path, const BinaryMask& mask,
                      const std::string& config_hash = "") {
    std::string out = "P5\n";
    if (!config_hash.empty()) out += "# cfg " + config_hash + "\n";
    out += std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
    for (auto b : mask.bits) out.push_back(static_cast<char>(b ? 255 : 0));
    write_file_bytes(path, out);
}

namespace detail {

/// Reads whitespace-separated header tokens, skipping '#' comment lines.
inline std::vector<std::string> pnm_header_tokens(const std::string& bytes, std::size_t count,
                                                  std::size_t& pos) {
    std::vector<std::string> tokens;
    while (tokens.size() < count && pos < bytes.size()) {
        if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
            continue;
        }
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            tok.push_back(bytes[pos++]);
        }
        tokens.push_back(tok);
    }
    if (tokens.size() < count) throw std::runtime_error("truncated PNM header");
    ++pos;  // single whitespace after the last header token
    return tokens;
}

}  // namespace detail

inline BinaryMask read_pgm(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw std::runtime_error("not a P5 PGM: " + path.string());
    }
    std::size_t pos = 2;
    auto tok = detail::pnm_header_tokens(bytes, 3, pos);
    BinaryMask mask(std::stoi(tok[0]), std::stoi(tok[1]));
    if (pos + mask.bits.size() > bytes.size()) throw std::runtime_error("truncated PGM body");
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        mask.bits[i] = static_cast<unsigned char>(bytes[pos + i]) > 127 ? 1 : 0;
    }
    return mask;
}

template <typename R>
inline ColorImage<R> read_ppm(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw std::runtime_error("not a P6 PPM: " + path.string());
    }
    std::size_t pos = 2;
    auto tok = detail::pnm_header_tokens(bytes, 3, pos);
    ColorImage<R> img(std::stoi(tok[0]), std::stoi(tok[1]));
    if (pos + img.data.size() > bytes.size()) throw std::runtime_error("truncated PPM body");
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = R(static_cast<unsigned char>(bytes[pos + i])) / R(255);
    }
    return img;
}

/// Grayscale PFM, rows bottom-to-top, scale -1.0 (little endian).
template <typename R>
inline void write_pfm(const fs::path& path, const ResponseMap<R>& map) {
    std::string out = "Pf\n" + std::to_string(map.width) + " " + std::to_string(map.height) +
                      "\n-1.0\n";
    for (int y = map.height - 1; y >= 0; --y) {
        for (int x = 0; x < map.width; ++x) {
            const float v = static_cast<float>(map.value(x, y));
            char buf[4];
            std::memcpy(buf, &v, 4);
            out.append(buf, 4);
        }
    }
    write_file_bytes(path, out);
}

template <typename R>
inline ResponseMap<R> read_pfm(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != 'f') {
        throw std::runtime_error("not a grayscale PFM: " + path.string());
    }
    std::size_t pos = 2;
    auto tok = detail::pnm_header_tokens(bytes, 3, pos);
    ResponseMap<R> map(std::stoi(tok[0]), std::stoi(tok[1]));
    if (std::stod(tok[2]) >= 0) throw std::runtime_error("big-endian PFM unsupported");
    if (pos + map.values.size() * 4 > bytes.size()) throw std::runtime_error("truncated PFM body");
    for (int y = map.height - 1; y >= 0; --y) {
        for (int x = 0; x < map.width; ++x) {
            float v;
            std::memcpy(&v, bytes.data() + pos, 4);
            pos += 4;
            map.value(x, y) = R(v);
        }
    }
    return map;
}

// ---------------------------------------------------------------------------
// Scene JSON (version 1, decimals with 17 significant digits)
// ---------------------------------------------------------------------------

namespace detail {

template <typename R, std::size_t N>
inline std::string arr17(const std::array<R, N>& a) {
    std::string s = "[";
    for (std::size_t i = 0; i < N; ++i) {
        if (i) s += ",";
        s += fmt17(static_cast<double>(a[i]));
    }
    return s + "]";
}

}  // namespace detail

template <typename R>
inline void write_scene_json(const fs::path& path, const GaussianCloud<R>& cloud,
                             const std::vector<ObjectInfo>& objects,
                             const std::vector<Camera<R>>& cameras,
                             const std::string& config_hash) {
    std::string s = "{\n\"version\": 1,\n\"config_hash\": \"" + config_hash + "\",\n";
    s += "\"gaussians\": [\n";
    for (std::size_t i = 0; i < cloud.gaussians.size(); ++i) {
        const auto& g = cloud.gaussians[i];
        s += "{\"mu\":" + detail::arr17(g.mu) + ",\"scale\":" + detail::arr17(g.scale) +
             ",\"rot\":" + detail::arr17(g.rot) + ",\"opacity\":" +
             fmt17(static_cast<double>(g.opacity)) + ",\"color\":" + detail::arr17(g.color) +
             ",\"object_id\":" + std::to_string(g.object_id) + "}";
        s += i + 1 < cloud.gaussians.size() ? ",\n" : "\n";
    }
    s += "],\n\"objects\": [\n";
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        s += "{\"id\":" + std::to_string(o.id) + ",\"centroid\":" + detail::arr17(o.centroid) +
             ",\"color_tag\":\"" + o.color_tag + "\",\"shape_tag\":\"" + o.shape_tag +
             "\",\"size_tag\":\"" + o.size_tag + "\"}";
        s += i + 1 < objects.size() ? ",\n" : "\n";
    }
    s += "],\n\"cameras\": [\n";
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        const auto& c = cameras[i];
        s += "{\"fx\":" + fmt17(static_cast<double>(c.fx)) + ",\"fy\":" +
             fmt17(static_cast<double>(c.fy)) + ",\"cx\":" + fmt17(static_cast<double>(c.cx)) +
             ",\"cy\":" + fmt17(static_cast<double>(c.cy)) + ",\"width\":" +
             std::to_string(c.width) + ",\"height\":" + std::to_string(c.height) +
             ",\"rotation\":" + detail::arr17(c.rotation) + ",\"translation\":" +
             detail::arr17(c.translation) + ",\"split\":\"" +
             (c.split == CameraSplit::novel ? "novel" : "train") + "\"}";
        s += i + 1 < cameras.size() ? ",\n" : "\n";
    }
    s += "]\n}\n";
    write_file_bytes(path, s);
}

template <typename R>
struct SceneFile {
    Scene<R> scene;
    std::vector<Camera<R>> cameras;
    std::string config_hash;
};

template <typename R>
inline SceneFile<R> read_scene_json(const fs::path& path, std::size_t referring_dim) {
    const json j = json::parse(read_file_bytes(path));
    if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported scene version");
    SceneFile<R> out;
    out.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& gj : j.at("gaussians")) {
        Gaussian<R> g;
        for (int k = 0; k < 3; ++k) {
            g.mu[k] = R(gj.at("mu")[k].get<double>());
            g.scale[k] = R(gj.at("scale")[k].get<double>());
            g.color[k] = R(gj.at("color")[k].get<double>());
        }
        for (int k = 0; k < 4; ++k) g.rot[k] = R(gj.at("rot")[k].get<double>());
        g.opacity = R(gj.at("opacity").get<double>());
        g.object_id = gj.at("object_id").get<std::int32_t>();
        out.scene.cloud.gaussians.push_back(g);
    }
    out.scene.cloud.referring = Tensor2<R>(out.scene.cloud.gaussians.size(), referring_dim);
    for (const auto& oj : j.at("objects")) {
        ObjectInfo o;
        o.id = oj.at("id").get<std::int32_t>();
        for (int k = 0; k < 3; ++k) o.centroid[k] = oj.at("centroid")[k].get<double>();
        o.color_tag = oj.at("color_tag").get<std::string>();
        o.shape_tag = oj.at("shape_tag").get<std::string>();
        o.size_tag = oj.at("size_tag").get<std::string>();
        out.scene.objects.push_back(o);
    }
    for (const auto& cj : j.at("cameras")) {
        Camera<R> c;
        c.fx = R(cj.at("fx").get<double>());
        c.fy = R(cj.at("fy").get<double>());
        c.cx = R(cj.at("cx").get<double>());
        c.cy = R(cj.at("cy").get<double>());
        c.width = cj.at("width").get<int>();
        c.height = cj.at("height").get<int>();
        for (int k = 0; k < 9; ++k) c.rotation[k] = R(cj.at("rotation")[k].get<double>());
        for (int k = 0; k < 3; ++k) c.translation[k] = R(cj.at("translation")[k].get<double>());
        c.split = cj.at("split").get<std::string>() == "novel" ? CameraSplit::novel
                                                               : CameraSplit::train;
        out.cameras.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Expressions and vocab JSON
// ---------------------------------------------------------------------------

inline void write_expressions_json(const fs::path& path, const std::vector<Expression>& exprs,
                                   const std::string& config_hash) {
    json j;
    j["config_hash"] = config_hash;
    j["expressions"] = json::array();
    for (const auto& e : exprs) {
        j["expressions"].push_back({{"tokens", e.tokens},
                                    {"target_object", e.target_object},
                                    {"split", e.split == Expression::Split::test ? "test" : "train"}});
    }
    write_file_bytes(path, j.dump(1) + "\n");
}

inline std::vector<Expression> read_expressions_json(const fs::path& path,
                                                     std::string* config_hash = nullptr) {
    const json j = json::parse(read_file_bytes(path));
    if (config_hash) *config_hash = j.at("config_hash").get<std::string>();
    std::vector<Expression> out;
    for (const auto& ej : j.at("expressions")) {
        Expression e;
        e.tokens = ej.at("tokens").get<std::vector<std::string>>();
        e.target_object = ej.at("target_object").get<std::int32_t>();
        e.split = ej.at("split").get<std::string>() == "test" ? Expression::Split::test
                                                              : Expression::Split::train;
        out.push_back(std::move(e));
    }
    return out;
}

template <typename R>
inline void write_vocab_json(const fs::path& path, const Vocab<R>& vocab,
                             const std::string& config_hash) {
    json j;
    j["config_hash"] = config_hash;
    j["tokens"] = vocab.tokens;
    j["seed"] = vocab.seed;
    j["d_text"] = vocab.embeddings.cols;
    write_file_bytes(path, j.dump(1) + "\n");
}

/// The embedding table is reconstructed from the stored seed; the token list
/// is cross-checked against the current grammar.
template <typename R>
inline Vocab<R> read_vocab_json(const fs::path& path) {
    const json j = json::parse(read_file_bytes(path));
    auto vocab = make_vocab<R>(j.at("d_text").get<std::size_t>(), j.at("seed").get<std::uint64_t>());
    if (vocab.tokens != j.at("tokens").get<std::vector<std::string>>()) {
        throw std::runtime_error("vocab token list mismatch: " + path.string());
    }
    return vocab;
}

// ---------------------------------------------------------------------------
// Checkpoints (binary, doubles on disk)
// ---------------------------------------------------------------------------

template <typename R>
struct Checkpoint {
    ReferModel<R> model;
    Tensor2<R> referring;
    std::uint64_t iteration = 0;
    std::uint64_t seed = 0;
    AblationFlags flags;
    std::string config_hash;
    std::string dataset_hash;
};

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) { s.append(reinterpret_cast<char*>(&v), 4); }
inline void put_u64(std::string& s, std::uint64_t v) { s.append(reinterpret_cast<char*>(&v), 8); }
inline void put_str(std::string& s, const std::string& v) {
    put_u32(s, static_cast<std::uint32_t>(v.size()));
    s += v;
}
template <typename R>
inline void put_reals(std::string& s, const Vec<R>& v) {
    for (R x : v) {
        const double d = static_cast<double>(x);
        s.append(reinterpret_cast<const char*>(&d), 8);
    }
}

struct Cursor {
    const std::string& bytes;
    std::size_t pos = 0;
    std::uint32_t u32() {
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        std::memcpy(&v, bytes.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string str() {
        const auto n = u32();
        std::string v = bytes.substr(pos, n);
        pos += n;
        return v;
    }
    template <typename R>
    void reals(Vec<R>& out, std::size_t n) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double d;
            std::memcpy(&d, bytes.data() + pos, 8);
            pos += 8;
            out[i] = R(d);
        }
    }
};

}  // namespace detail

template <typename R>
inline void save_checkpoint(const fs::path& path, const Checkpoint<R>& c) {
    std::string s = "SSEGCKPT";
    detail::put_u32(s, 1);  // version
    detail::put_u32(s, static_cast<std::uint32_t>(c.model.d_r));
    detail::put_u32(s, static_cast<std::uint32_t>(c.model.feature_dim));
    detail::put_u32(s, static_cast<std::uint32_t>(c.model.word_proj.in()));
    detail::put_u32(s, static_cast<std::uint32_t>(c.model.pos_mlp.hidden.out()));
    detail::put_u64(s, c.referring.rows);
    detail::put_u64(s, c.iteration);
    detail::put_u64(s, c.seed);
    detail::put_u32(s, (c.flags.pcmi ? 1u : 0u) | (c.flags.gtcl ? 2u : 0u) |
                           (c.flags.similarity == Similarity::cosine ? 4u : 0u));
    detail::put_str(s, c.config_hash);
    detail::put_str(s, c.dataset_hash);
    detail::put_reals(s, c.model.refer_proj.weight.data);
    detail::put_reals(s, c.model.refer_proj.bias);
    detail::put_reals(s, c.model.word_proj.weight.data);
    detail::put_reals(s, c.model.word_proj.bias);
    detail::put_reals(s, c.model.pos_mlp.hidden.weight.data);
    detail::put_reals(s, c.model.pos_mlp.hidden.bias);
    detail::put_reals(s, c.model.pos_mlp.output.weight.data);
    detail::put_reals(s, c.model.pos_mlp.output.bias);
    detail::put_reals(s, c.referring.data);
    write_file_bytes(path, s);
}

template <typename R>
inline Checkpoint<R> load_checkpoint(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.substr(0, 8) != "SSEGCKPT") throw std::runtime_error("bad checkpoint magic");
    detail::Cursor cur{bytes, 8};
    if (cur.u32() != 1) throw std::runtime_error("unsupported checkpoint version");
    const auto d_r = cur.u32();
    const auto D = cur.u32();
    const auto d_text = cur.u32();
    const auto hidden = cur.u32();
    const auto n = cur.u64();
    Checkpoint<R> c;
    c.model = ReferModel<R>(d_r, D, d_text, hidden);
    c.iteration = cur.u64();
    c.seed = cur.u64();
    const auto flag_bits = cur.u32();
    c.flags.pcmi = flag_bits & 1u;
    c.flags.gtcl = flag_bits & 2u;
    c.flags.similarity = flag_bits & 4u ? Similarity::cosine : Similarity::multiplication;
    c.config_hash = cur.str();
    c.dataset_hash = cur.str();
    cur.reals(c.model.refer_proj.weight.data, std::size_t(D) * d_r);
    cur.reals(c.model.refer_proj.bias, D);
    cur.reals(c.model.word_proj.weight.data, std::size_t(D) * d_text);
    cur.reals(c.model.word_proj.bias, D);
    cur.reals(c.model.pos_mlp.hidden.weight.data, std::size_t(hidden) * 3);
    cur.reals(c.model.pos_mlp.hidden.bias, hidden);
    cur.reals(c.model.pos_mlp.output.weight.data, std::size_t(D) * hidden);
    cur.reals(c.model.pos_mlp.output.bias, D);
    c.referring = Tensor2<R>(n, d_r);
    cur.reals(c.referring.data, n * d_r);
    return c;
}

// ---------------------------------------------------------------------------
// Candidate sets and pseudo masks
// ---------------------------------------------------------------------------

/// One candidate set directory: index.json plus cand_<k>.pgm files.
inline void write_candidate_set(const fs::path& dir, const CandidateMaskSet& set,
                                const std::string& gt_file, std::uint64_t seed,
                                const std::string& config_hash) {
    fs::create_directories(dir);
    json idx;
    idx["config_hash"] = config_hash;
    idx["gt_file"] = gt_file;
    idx["seed"] = seed;
    idx["masks"] = json::array();
    for (std::size_t k = 0; k < set.candidates.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "cand_%02zu.pgm", k);
        write_pgm(dir / name, set.candidates[k].mask, config_hash);
        idx["masks"].push_back({{"file", name}, {"gamma", set.candidates[k].gamma}});
    }
    write_file_bytes(dir / "index.json", idx.dump(1) + "\n");
}

inline CandidateMaskSet read_candidate_set(const fs::path& dir) {
    const json idx = json::parse(read_file_bytes(dir / "index.json"));
    CandidateMaskSet set;
    set.provenance = dir.string();
    for (const auto& mj : idx.at("masks")) {
        MaskCandidate c;
        c.mask = read_pgm(dir / mj.at("file").get<std::string>());
        c.gamma = mj.at("gamma").get<double>();
        set.candidates.push_back(std::move(c));
    }
    return set;
}

/// Pseudo masks keyed by (train camera index, expression index).
struct PseudoMaskStore {
    std::map<std::pair<std::size_t, std::size_t>, BinaryMask> masks;
    std::string selector;
    std::string config_hash;
    std::string dataset_hash;
};

inline std::string view_expr_name(std::size_t view, std::size_t expr) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "v%03zu_e%03zu", view, expr);
    return buf;
}

inline void write_pseudo_masks(const fs::path& dir, const PseudoMaskStore& store) {
    fs::create_directories(dir);
    json idx;
    idx["config_hash"] = store.config_hash;
    idx["dataset_hash"] = store.dataset_hash;
    idx["selector"] = store.selector;
    idx["masks"] = json::array();
    for (const auto& [key, mask] : store.masks) {
        const auto name = view_expr_name(key.first, key.second) + ".pgm";
        write_pgm(dir / name, mask, store.config_hash);
        idx["masks"].push_back({{"view", key.first}, {"expr", key.second}, {"file", name}});
    }
    write_file_bytes(dir / "index.json", idx.dump(1) + "\n");
}

inline PseudoMaskStore read_pseudo_masks(const fs::path& dir) {
    const json idx = json::parse(read_file_bytes(dir / "index.json"));
    PseudoMaskStore store;
    store.config_hash = idx.at("config_hash").get<std::string>();
    store.dataset_hash = idx.at("dataset_hash").get<std::string>();
    store.selector = idx.at("selector").get<std::string>();
    for (const auto& mj : idx.at("masks")) {
        store.masks[{mj.at("view").get<std::size_t>(), mj.at("expr").get<std::size_t>()}] =
            read_pgm(dir / mj.at("file").get<std::string>());
    }
    return store;
}

// ---------------------------------------------------------------------------
// Dataset directory
// ---------------------------------------------------------------------------

template <typename R>
struct Dataset {
    Scene<R> scene;
    std::vector<Camera<R>> cameras;
    Vocab<R> vocab;
    std::vector<Expression> expressions;
    RunConfig config;
    std::string hash;  // effective-config hash of the generating run
    bool has_probe = false;
    std::size_t probe_view = 0;
    std::int32_t probe_target = 0;
    std::int32_t probe_blocker = 0;

    std::vector<std::size_t> camera_indices(CameraSplit split) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < cameras.size(); ++i) {
            if (cameras[i].split == split) out.push_back(i);
        }
        return out;
    }
    std::vector<std::size_t> expression_indices(Expression::Split split) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < expressions.size(); ++i) {
            if (expressions[i].split == split) out.push_back(i);
        }
        return out;
    }
};

template <typename R>
inline Dataset<R> load_dataset(const fs::path& dir) {
    Dataset<R> ds;
    const json master = json::parse(read_file_bytes(dir / "dataset.json"));
    ds.hash = master.at("config_hash").get<std::string>();
    ds.config = config_from_json(master.at("config"));
    if (master.contains("probe")) {
        ds.has_probe = true;
        ds.probe_view = master.at("probe").at("designated_view").get<std::size_t>();
        ds.probe_target = master.at("probe").at("target_object").get<std::int32_t>();
        ds.probe_blocker = master.at("probe").at("blocker_object").get<std::int32_t>();
    }
    if (config_hash(ds.config) != ds.hash) {
        throw std::runtime_error("dataset.json: config hash mismatch");
    }
    auto sf = read_scene_json<R>(dir / "scene.json", ds.config.train.d_r);
    if (sf.config_hash != ds.hash) throw std::runtime_error("scene.json: config hash mismatch");
    ds.scene = std::move(sf.scene);
    ds.cameras = std::move(sf.cameras);
    std::string expr_hash;
    ds.expressions = read_expressions_json(dir / "expressions.json", &expr_hash);
    if (expr_hash != ds.hash) throw std::runtime_error("expressions.json: config hash mismatch");
    ds.vocab = read_vocab_json<R>(dir / "vocab.json");
    return ds;
}

inline std::string gt_mask_name(std::size_t view, std::int32_t object_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "cam%03zu_obj%02d.pgm", view, object_id);
    return buf;
}

}  // namespace splatseg
