#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "splatseg/numkit.hpp"

using namespace splatseg;

namespace {

// Independent softmax oracle in extended precision.
std::vector<double> softmax_oracle(const std::vector<double>& v) {
    long double sum = 0.0L;
    std::vector<long double> e(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        e[i] = expl(static_cast<long double>(v[i]));
        sum += e[i];
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(e[i] / sum);
    return out;
}

}  // namespace

TEST_CASE("softmax basics") {
    std::vector<double> v{0.0, 0.0};
    auto s = softmax<double>(v);
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));

    std::vector<double> big{1000.0, 1000.0, 1000.0};
    auto sb = softmax<double>(big);
    for (double x : sb) {
        CHECK(std::isfinite(x));
        CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
}

TEST_CASE("softmax matches extended-precision oracle on random vectors") {
    Rng rng(7, "softmax-test");
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(7);
        for (auto& x : v) x = rng.uniform_in(-5.0, 5.0);
        auto got = softmax<double>(v);
        auto want = softmax_oracle(v);
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
            CHECK(got[i] > 0.0);
            CHECK(got[i] < 1.0);
            sum += got[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax shift invariance and error path") {
    Rng rng(11, "softmax-shift");
    std::vector<double> v(9);
    for (auto& x : v) x = rng.uniform_in(-3.0, 3.0);
    auto a = softmax<double>(v);
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += 17.25;
    auto b = softmax<double>(shifted);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);

    std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS((void)softmax<double>(bad), std::invalid_argument);
    std::vector<double> inf{1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS((void)softmax<double>(inf), std::invalid_argument);
}

TEST_CASE("affine_forward identity, bias, and naive-loop oracle") {
    AffineLayer<double> id(2, 2);
    id.weight.at(0, 0) = 1.0;
    id.weight.at(1, 1) = 1.0;
    std::vector<double> x{3.0, 4.0};
    auto y = affine_forward(id, std::span<const double>(x));
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 4.0);

    AffineLayer<double> zero(2, 2);
    zero.bias = {1.0, 2.0};
    auto yb = affine_forward(zero, std::span<const double>(x));
    CHECK(yb[0] == 1.0);
    CHECK(yb[1] == 2.0);

    Rng rng(3, "affine-test");
    AffineLayer<double> layer(3, 4);
    for (auto& w : layer.weight.data) w = rng.uniform_in(-1.0, 1.0);
    for (auto& b : layer.bias) b = rng.uniform_in(-1.0, 1.0);
    std::vector<double> in(4);
    for (auto& v : in) v = rng.uniform_in(-2.0, 2.0);
    auto out = affine_forward(layer, std::span<const double>(in));
    for (std::size_t o = 0; o < 3; ++o) {
        double acc = layer.bias[o];
        for (std::size_t i = 0; i < 4; ++i) acc += layer.weight.at(o, i) * in[i];
        CHECK(out[o] == doctest::Approx(acc).epsilon(1e-15));
    }

    std::vector<double> wrong(5, 0.0);
    CHECK_THROWS_AS((void)affine_forward(layer, std::span<const double>(wrong)), std::invalid_argument);
}

TEST_CASE("mlp_forward composition") {
    Mlp<double> zero(2, 3, 2);
    std::vector<double> x{1.0, -1.0};
    auto y = mlp_forward(zero, std::span<const double>(x));
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);

    // All hidden pre-activations negative: output equals output-layer bias.
    Mlp<double> neg(2, 3, 2);
    for (auto& w : neg.hidden.weight.data) w = 0.0;
    neg.hidden.bias = {-1.0, -2.0, -0.5};
    for (auto& w : neg.output.weight.data) w = 5.0;
    neg.output.bias = {0.25, -0.75};
    auto yn = mlp_forward(neg, std::span<const double>(x));
    CHECK(yn[0] == 0.25);
    CHECK(yn[1] == -0.75);

    Rng rng(5, "mlp-test");
    Mlp<double> m(4, 6, 3);
    for (auto& w : m.hidden.weight.data) w = rng.uniform_in(-1.0, 1.0);
    for (auto& b : m.hidden.bias) b = rng.uniform_in(-0.5, 0.5);
    for (auto& w : m.output.weight.data) w = rng.uniform_in(-1.0, 1.0);
    for (auto& b : m.output.bias) b = rng.uniform_in(-0.5, 0.5);
    std::vector<double> in(4);
    for (auto& v : in) v = rng.uniform_in(-2.0, 2.0);
    auto got = mlp_forward(m, std::span<const double>(in));
    auto h = affine_forward(m.hidden, std::span<const double>(in));
    for (auto& v : h) v = v > 0 ? v : 0.0;
    auto want = affine_forward(m.output, std::span<const double>(h));
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
}

TEST_CASE("adam first step, zero gradient, descent on quadratic") {
    AdamState<double> st(1);
    std::vector<double> p{1.0};
    std::vector<double> g{1.0};
    adam_step<double>(st, p, g, 0.01);
    CHECK(std::abs(p[0] - 0.99) <= 1e-9);
    CHECK(st.step == 1);

    AdamState<double> st2(3);
    std::vector<double> p2{1.5, -2.0, 0.25};
    std::vector<double> before = p2;
    std::vector<double> zero(3, 0.0);
    adam_step<double>(st2, p2, zero, 0.1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p2[i] == before[i]);

    // 3 scripted steps on loss p^2; |p| strictly decreases each step.
    AdamState<double> st3(1);
    std::vector<double> q{3.0};
    for (int step = 0; step < 3; ++step) {
        double prev = std::abs(q[0]);
        std::vector<double> grad{2.0 * q[0]};
        adam_step<double>(st3, q, grad, 0.05);
        CHECK(std::abs(q[0]) < prev);
    }
}

TEST_CASE("adam rejects non-finite gradients naming the group") {
    AdamState<double> st(1);
    std::vector<double> p{1.0};
    std::vector<double> g{std::numeric_limits<double>::quiet_NaN()};
    try {
        adam_step<double>(st, p, g, 0.01, "referring");
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("referring") != std::string::npos);
    }
}

TEST_CASE("grad_check on simple losses") {
    // loss = p^2 at p=3: numeric ~ 6.
    std::vector<double> p{3.0};
    std::vector<double> analytic{6.0};
    auto loss = [&]() { return p[0] * p[0]; };
    std::vector<ParamGroup<double>> groups{{"p", p.data(), analytic.data(), 1}};
    auto report = grad_check<double>(loss, groups, 1e-4, 1e-6);
    CHECK(report.checked == 1);
    CHECK(report.max_rel_err < 1e-8);
    CHECK(report.passed());

    // Constant loss: zero gradients pass; nonzero analytic is flagged.
    std::vector<double> q{1.0, 2.0};
    std::vector<double> an{0.0, 0.5};
    auto closs = [&]() { return 42.0; };
    std::vector<ParamGroup<double>> g2{{"q", q.data(), an.data(), 2}};
    auto r2 = grad_check<double>(closs, g2, 1e-4, 1e-6);
    CHECK(r2.flagged.size() == 1);
    CHECK(r2.flagged[0].index == 1);
}

TEST_CASE("rng determinism and stream separation") {
    Rng a(42, "scene");
    Rng b(42, "scene");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42, "expressions");
    Rng d(43, "scene");
    Rng e(42, "scene");
    bool diff_stream = false, diff_seed = false;
    for (int i = 0; i < 8; ++i) {
        auto x = e.next_u64();
        if (c.next_u64() != x) diff_stream = true;
        if (d.next_u64() != x) diff_seed = true;
    }
    CHECK(diff_stream);
    CHECK(diff_seed);

    Rng u(1, "u");
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    Rng n(1, "n");
    double mean = 0.0;
    const int kSamples = 4000;
    for (int i = 0; i < kSamples; ++i) mean += n.normal();
    mean /= kSamples;
    CHECK(std::abs(mean) < 0.1);
}

TEST_CASE("float instantiation smoke test") {
    std::vector<float> v{0.0f, 1.0f, 2.0f};
    auto s = softmax<float>(v);
    float sum = s[0] + s[1] + s[2];
    CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));

    AffineLayer<float> layer(2, 3);
    layer.weight.at(0, 0) = 1.0f;
    layer.bias[1] = 2.0f;
    std::vector<float> x{4.0f, 0.0f, 0.0f};
    auto y = affine_forward(layer, std::span<const float>(x));
    CHECK(y[0] == 4.0f);
    CHECK(y[1] == 2.0f);
}
