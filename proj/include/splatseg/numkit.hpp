#pragma once

// Minimal dense numerical core: row-major matrices, affine layers, a
// two-layer perceptron, Adam, a counter-based seeded RNG, and a central
// finite-difference gradient checker. No allocations are hidden behind
// expression templates; everything is plain loops so the verification
// oracles stay independent of any BLAS behavior.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace splatseg {

template <typename R>
using Vec = std::vector<R>;

template <typename R>
inline bool all_finite(std::span<const R> v) {
    for (R x : v) {
        if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
}

/// Dense row-major rows x cols matrix.
template <typename R>
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec<R> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, R fill = R(0)) : rows(r), cols(c), data(r * c, fill) {}

    R& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const R& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<R> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const R> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return data.size(); }
    void fill(R v) { std::fill(data.begin(), data.end(), v); }

    bool finite() const { return all_finite<R>(data); }
};

/// Four-lane dot product: fixed association (deterministic run to run) that
/// breaks the FMA latency chain so -O3 can keep the pipeline full.
template <typename R>
inline R dot(std::span<const R> a, std::span<const R> b) {
    const std::size_t n = a.size();
    R s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

template <typename R>
inline R l2_norm(std::span<const R> a) {
    return std::sqrt(dot(a, a));
}

/// Numerically stable softmax (max subtraction) written into `out`.
/// Throws on non-finite input.
template <typename R>
inline void softmax_into(std::span<const R> v, std::span<R> out) {
    if (!all_finite(v)) throw std::invalid_argument("softmax: non-finite input");
    if (v.empty()) throw std::invalid_argument("softmax: empty input");
    R m = v[0];
    for (R x : v) m = std::max(m, x);
    R sum = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (R& x : out) x /= sum;
}

template <typename R>
inline Vec<R> softmax(std::span<const R> v) {
    Vec<R> out(v.size());
    softmax_into(v, std::span<R>(out));
    return out;
}

/// Backward of softmax: given s = softmax(u) and dL/ds, returns dL/du.
template <typename R>
inline Vec<R> softmax_backward(std::span<const R> s, std::span<const R> ds) {
    R inner = 0;
    for (std::size_t i = 0; i < s.size(); ++i) inner += s[i] * ds[i];
    Vec<R> du(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) du[i] = s[i] * (ds[i] - inner);
    return du;
}

/// y = W x + b with W stored row-major (out x in).
template <typename R>
struct AffineLayer {
    Tensor2<R> weight;  // out x in
    Vec<R> bias;        // out

    AffineLayer() = default;
    AffineLayer(std::size_t out_dim, std::size_t in_dim)
        : weight(out_dim, in_dim), bias(out_dim, R(0)) {}

    std::size_t in() const { return weight.cols; }
    std::size_t out() const { return weight.rows; }
};

template <typename R>
inline void affine_into(const AffineLayer<R>& layer, std::span<const R> x, std::span<R> y) {
    if (x.size() != layer.in()) throw std::invalid_argument("affine_forward: shape mismatch");
    for (std::size_t o = 0; o < layer.out(); ++o) {
        y[o] = layer.bias[o] + dot<R>(layer.weight.row(o), x);
    }
}

template <typename R>
inline Vec<R> affine_forward(const AffineLayer<R>& layer, std::span<const R> x) {
    Vec<R> y(layer.out());
    affine_into(layer, x, std::span<R>(y));
    return y;
}

template <typename R>
inline R relu(R x) {
    return x > R(0) ? x : R(0);
}

/// Two-layer perceptron with rectifier activation between the layers.
template <typename R>
struct Mlp {
    AffineLayer<R> hidden;
    AffineLayer<R> output;

    Mlp() = default;
    Mlp(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim)
        : hidden(hidden_dim, in_dim), output(out_dim, hidden_dim) {}
};

template <typename R>
inline Vec<R> mlp_forward(const Mlp<R>& m, std::span<const R> x) {
    if (x.size() != m.hidden.in()) throw std::invalid_argument("mlp_forward: shape mismatch");
    Vec<R> h = affine_forward(m.hidden, x);
    for (R& v : h) v = relu(v);
    return affine_forward(m.output, std::span<const R>(h));
}

/// First/second moment accumulators for one parameter group.
template <typename R>
struct AdamState {
    Vec<R> m;
    Vec<R> v;
    std::uint64_t step = 0;
    R beta1 = R(0.9);
    R beta2 = R(0.999);
    R eps = R(1e-8);

    explicit AdamState(std::size_t n = 0) : m(n, R(0)), v(n, R(0)) {}
};

/// Standard Adam update with bias correction. Throws on non-finite
/// gradients, naming the offending parameter group.
template <typename R>
inline void adam_step(AdamState<R>& state, std::span<R> params, std::span<const R> grads, R lr,
                      std::string_view group = "params") {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: shape mismatch for group '" + std::string(group) + "'");
    }
    if (!all_finite(grads)) {
        throw std::runtime_error("adam_step: non-finite gradient in group '" + std::string(group) + "'");
    }
    state.step += 1;
    const R b1 = state.beta1, b2 = state.beta2;
    const R c1 = R(1) - std::pow(b1, static_cast<R>(state.step));
    const R c2 = R(1) - std::pow(b2, static_cast<R>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const R g = grads[i];
        state.m[i] = b1 * state.m[i] + (R(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (R(1) - b2) * g * g;
        const R mhat = state.m[i] / c1;
        const R vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64_bytes(const void* p, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ull) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace detail

/// Counter-based RNG keyed by (seed, stream name). The output sequence is a
/// pure function of the key and the call counter, so streams drawn by
/// different modules never interleave and runs replay exactly.
struct Rng {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;

    Rng(std::uint64_t seed, std::string_view stream) {
        key = detail::splitmix64(seed ^ detail::fnv1a64(stream));
    }

    std::uint64_t next_u64() {
        ++counter;
        return detail::splitmix64(key + counter * 0x9E3779B97F4A7C15ull);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (non-caching: two draws per call).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }
};

/// One entry of a gradient-check report.
template <typename R>
struct GradCheckEntry {
    std::string group;
    std::size_t index = 0;
    R analytic = 0;
    R numeric = 0;
    R rel_err = 0;
};

template <typename R>
struct GradCheckReport {
    R max_rel_err = 0;
    std::size_t checked = 0;
    GradCheckEntry<R> worst;
    std::vector<GradCheckEntry<R>> flagged;

    bool passed() const { return flagged.empty(); }
};

/// A named view over a parameter block and its analytic gradient.
template <typename R>
struct ParamGroup {
    std::string name;
    R* values = nullptr;
    const R* analytic = nullptr;
    std::size_t size = 0;
};

/// Central-difference gradient check of loss_fn against the analytic
/// gradients carried by the parameter groups. loss_fn is re-evaluated with
/// each scalar perturbed by +/- h; relative error uses the symmetric
/// denominator max(1e-8, |a|+|n|). Entries above tol are flagged.
template <typename R, typename LossFn>
GradCheckReport<R> grad_check(LossFn&& loss_fn, std::vector<ParamGroup<R>> groups, R h, R tol) {
    GradCheckReport<R> report;
    for (auto& g : groups) {
        for (std::size_t i = 0; i < g.size; ++i) {
            const R saved = g.values[i];
            g.values[i] = saved + h;
            const R lp = loss_fn();
            g.values[i] = saved - h;
            const R lm = loss_fn();
            g.values[i] = saved;
            const R numeric = (lp - lm) / (R(2) * h);
            const R analytic = g.analytic[i];
            const R denom = std::max(R(1e-8), std::abs(analytic) + std::abs(numeric));
            const R rel = std::abs(analytic - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = {g.name, i, analytic, numeric, rel};
            }
            if (rel > tol) report.flagged.push_back({g.name, i, analytic, numeric, rel});
        }
    }
    return report;
}

}  // namespace splatseg
