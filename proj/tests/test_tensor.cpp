#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "sml/rng.hpp"
#include "sml/tensor.hpp"

using sml::Rng;
using sml::Shape;
using D = double;
using TensorD = sml::Tensor<double>;
using TapeD = sml::Tape<double>;

namespace {

std::vector<double> random_values(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    oracle::fill_uniform(v, rng, lo, hi);
    return v;
}

// Checks every leaf gradient of a freshly built scalar loss against central
// finite differences. Leaves are recreated inside build() from the given
// storage vectors so perturbations flow through.
void check_gradients(std::vector<std::vector<double>*> leaf_storage,
                     const std::function<double(bool accumulate)>& run,
                     const std::function<std::vector<std::vector<double>>()>& analytic,
                     double tol = 1e-4) {
    run(true);
    auto grads = analytic();
    REQUIRE(grads.size() == leaf_storage.size());
    for (std::size_t l = 0; l < leaf_storage.size(); ++l) {
        auto& storage = *leaf_storage[l];
        REQUIRE(grads[l].size() == storage.size());
        for (std::size_t i = 0; i < storage.size(); ++i) {
            double fd = oracle::central_difference(storage, i, [&] { return run(false); });
            INFO("leaf ", l, " index ", i, " analytic ", grads[l][i], " fd ", fd);
            CHECK(oracle::rel_err(grads[l][i], fd, 1e-6) < tol);
        }
    }
}

} // namespace

TEST_CASE("conv2d 1x1 kernel is a scalar multiply") {
    TapeD tape;
    auto in = TensorD::constant({1, 1, 1}, {2.0});
    auto k = TensorD::constant({1, 1, 1, 1}, {3.0});
    auto b = TensorD::constant({1}, {0.0});
    auto out = tape.conv2d(in, k, b);
    CHECK(out.values()[0] == doctest::Approx(6.0));
}

TEST_CASE("conv2d with zero kernel and bias gives zero output") {
    Rng rng(7);
    TapeD tape;
    auto in = TensorD::constant({4, 5, 3}, random_values(60, rng));
    auto k = TensorD::zeros({3, 3, 3, 2});
    auto b = TensorD::zeros({2});
    auto out = tape.conv2d(in, k, b);
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("conv2d matches the six-loop oracle") {
    Rng rng(11);
    auto in = random_values(5 * 5 * 2, rng);
    auto ker = random_values(3 * 3 * 2 * 3, rng);
    auto bias = random_values(3, rng);
    TapeD tape;
    auto out = tape.conv2d(TensorD::constant({5, 5, 2}, in), TensorD::constant({3, 3, 2, 3}, ker),
                           TensorD::constant({3}, bias));
    auto want = oracle::conv2d(in, 5, 5, 2, ker, 3, 3, bias);
    REQUIRE(out.numel() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(std::fabs(out.values()[i] - want[i]) < 1e-6);
}

TEST_CASE("conv2d rejects malformed shapes") {
    TapeD tape;
    auto in = TensorD::zeros({4, 4, 2});
    CHECK_THROWS_AS(tape.conv2d(in, TensorD::zeros({2, 2, 2, 1}), TensorD::zeros({1})),
                    sml::ContractError);
    CHECK_THROWS_AS(tape.conv2d(in, TensorD::zeros({3, 3, 3, 1}), TensorD::zeros({1})),
                    sml::ContractError);
    CHECK_THROWS_AS(tape.conv2d(in, TensorD::zeros({3, 3, 2, 1}), TensorD::zeros({2})),
                    sml::ContractError);
}

TEST_CASE("elementwise basics") {
    TapeD tape;
    auto r = tape.relu(TensorD::constant({2}, {-1.0, 2.0}));
    CHECK(r.values() == std::vector<double>{0.0, 2.0});

    auto m = tape.mul(TensorD::constant({2}, {1.0, 2.0}), TensorD::constant({2}, {3.0, 4.0}));
    CHECK(m.values() == std::vector<double>{3.0, 8.0});

    auto s = tape.add(TensorD::constant({3}, {1.0, 2.0, 3.0}), TensorD::scalar(10.0));
    CHECK(s.values() == std::vector<double>{11.0, 12.0, 13.0});

    CHECK_THROWS_AS(tape.add(TensorD::zeros({2}), TensorD::zeros({3})), sml::ContractError);
    CHECK_THROWS_AS(tape.log(TensorD::constant({1}, {0.0})), std::domain_error);
}

TEST_CASE("exp backward at zero equals one within finite-difference tolerance") {
    std::vector<double> x0{0.0};
    double analytic = 0.0;
    auto run = [&](bool accumulate) {
        TapeD tape;
        auto x = TensorD::variable({1}, x0);
        auto loss = tape.sum(tape.exp(x));
        if (accumulate) {
            tape.backward(loss);
            analytic = x.grad()[0];
        }
        return loss.values()[0];
    };
    run(true);
    double fd = oracle::central_difference(x0, 0, [&] { return run(false); });
    CHECK(std::fabs(analytic - 1.0) < 1e-12);
    CHECK(std::fabs(analytic - fd) < 1e-6);
}

TEST_CASE("matmul trivial products") {
    TapeD tape;
    auto id = TensorD::constant({2, 2}, {1.0, 0.0, 0.0, 1.0});
    auto v = TensorD::constant({2, 1}, {1.0, 2.0});
    CHECK(tape.matmul(id, v).values() == std::vector<double>{1.0, 2.0});

    auto a = TensorD::constant({2, 2}, {1.0, 2.0, 3.0, 4.0});
    auto ones = TensorD::constant({2, 1}, {1.0, 1.0});
    CHECK(tape.matmul(a, ones).values() == std::vector<double>{3.0, 7.0});

    CHECK_THROWS_AS(tape.matmul(a, TensorD::zeros({3, 1})), sml::ContractError);
}

TEST_CASE("matmul matches the triple-loop oracle") {
    Rng rng(13);
    auto a = random_values(4 * 3, rng);
    auto b = random_values(3 * 5, rng);
    TapeD tape;
    auto out = tape.matmul(TensorD::constant({4, 3}, a), TensorD::constant({3, 5}, b));
    auto want = oracle::matmul(a, 4, 3, b, 5);
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(std::fabs(out.values()[i] - want[i]) < 1e-9);
}

TEST_CASE("l2_normalize fixtures and property") {
    TapeD tape;
    auto n = tape.l2_normalize(TensorD::constant({2}, {3.0, 4.0}));
    CHECK(n.values()[0] == doctest::Approx(0.6));
    CHECK(n.values()[1] == doctest::Approx(0.8));

    auto z = tape.l2_normalize(TensorD::constant({2}, {0.0, 0.0}), 1e-8);
    CHECK(z.values() == std::vector<double>{0.0, 0.0});

    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        int d = 1 + static_cast<int>(rng.below(6));
        std::vector<double> v(d);
        double norm = 0.0;
        do {
            oracle::fill_uniform(v, rng);
            norm = 0.0;
            for (double x : v) norm += x * x;
        } while (norm < 1e-3);
        auto u = tape.l2_normalize(TensorD::constant({d}, v));
        double got = 0.0;
        for (double x : u.values()) got += x * x;
        CHECK(std::fabs(std::sqrt(got) - 1.0) < 1e-6);
    }
}

TEST_CASE("l2_normalize_or_zero hard-zeroes vanishing vectors") {
    TapeD tape;
    auto z = tape.l2_normalize_or_zero(TensorD::constant({3}, {1e-9, -1e-9, 1e-9}), 1e-6);
    CHECK(z.values() == std::vector<double>{0.0, 0.0, 0.0});
    auto u = tape.l2_normalize_or_zero(TensorD::constant({2}, {3.0, 4.0}), 1e-6);
    CHECK(u.values()[0] == doctest::Approx(0.6));
}

TEST_CASE("backward of a plain sum seeds ones into the leaf") {
    Rng rng(19);
    TapeD tape;
    auto x = TensorD::variable({2, 3}, random_values(6, rng));
    tape.backward(tape.sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of half squared norm reproduces the leaf values") {
    Rng rng(23);
    auto vals = random_values(5, rng);
    TapeD tape;
    auto x = TensorD::variable({5}, vals);
    auto loss = tape.scale(tape.sum(tape.mul(x, x)), 0.5);
    tape.backward(loss);
    for (std::size_t i = 0; i < vals.size(); ++i)
        CHECK(x.grad()[i] == doctest::Approx(vals[i]));
}

TEST_CASE("backward requires a recorded scalar loss") {
    TapeD tape;
    auto x = TensorD::variable({2}, {1.0, 2.0});
    auto y = tape.mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), sml::ContractError);       // not scalar
    CHECK_THROWS_AS(tape.backward(x), sml::ContractError);       // leaf, not on tape
    TapeD other;
    auto loss = other.sum(x);
    CHECK_THROWS_AS(tape.backward(loss), sml::ContractError);    // wrong tape
}

TEST_CASE("composite conv-relu-pool-dot gradients match finite differences") {
    Rng rng(29);
    std::vector<double> in0 = random_values(4 * 4 * 2, rng);
    std::vector<double> k0 = random_values(3 * 3 * 2 * 2, rng);
    std::vector<double> b0 = random_values(2, rng);
    std::vector<double> w0 = random_values(2, rng);
    // keep relu inputs away from the kink
    for (auto& v : in0) v += (v >= 0 ? 0.05 : -0.05);

    std::vector<std::vector<double>> grads;
    auto run = [&](bool accumulate) {
        TapeD tape;
        auto in = TensorD::variable({4, 4, 2}, in0);
        auto k = TensorD::variable({3, 3, 2, 2}, k0);
        auto b = TensorD::variable({2}, b0);
        auto act = tape.relu(tape.conv2d(in, k, b));
        auto pooled = tape.scale(tape.reshape(act, {16, 2}), 1.0 / 16.0);
        auto dotted = tape.matmul(pooled, TensorD::constant({2, 1}, w0));
        auto loss = tape.sum(dotted);
        if (accumulate) {
            tape.backward(loss);
            grads = {in.grad(), k.grad(), b.grad()};
        }
        return loss.values()[0];
    };
    check_gradients({&in0, &k0, &b0}, run, [&] { return grads; }, 1e-4);
}

TEST_CASE("randomized per-op gradient checks") {
    Rng rng(31);
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<double> a0 = random_values(6, rng);
        std::vector<double> b0 = random_values(6, rng);
        std::vector<double> s0 = {rng.uniform(0.5, 1.5)};
        for (auto& v : a0) v += (v >= 0 ? 0.05 : -0.05);

        std::vector<std::vector<double>> grads;
        auto run = [&](bool accumulate) {
            TapeD tape;
            auto a = TensorD::variable({2, 3}, a0);
            auto b = TensorD::variable({2, 3}, b0);
            auto s = TensorD::variable({1}, s0);
            auto y = tape.mul(tape.add(tape.relu(a), b), s);
            auto z = tape.exp(tape.scale(y, 0.3));
            auto n = tape.l2_normalize(tape.reshape(tape.sub(z, b), {6}));
            auto loss = tape.sum(tape.mul(n, tape.exp(n)));
            loss = tape.add(loss, tape.sum(tape.log(tape.exp(y))));
            if (accumulate) {
                tape.backward(loss);
                grads = {a.grad(), b.grad(), s.grad()};
            }
            return loss.values()[0];
        };
        check_gradients({&a0, &b0, &s0}, run, [&] { return grads; }, 1e-4);
    }
}

TEST_CASE("forward results are bit-identical across repeated evaluation") {
    Rng rng(37);
    auto in = random_values(6 * 6 * 3, rng);
    auto k = random_values(3 * 3 * 3 * 4, rng);
    auto b = random_values(4, rng);
    std::vector<double> first;
    for (int run = 0; run < 2; ++run) {
        TapeD tape;
        auto out = tape.l2_normalize_pixels(tape.relu(tape.conv2d(
            TensorD::constant({6, 6, 3}, in), TensorD::constant({3, 3, 3, 4}, k),
            TensorD::constant({4}, b))));
        if (run == 0) {
            first = out.values();
        } else {
            REQUIRE(first.size() == out.values().size());
            CHECK(std::memcmp(first.data(), out.values().data(),
                              first.size() * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("tape is linear: backward of a sum equals summed backwards") {
    Rng rng(41);
    auto vals = random_values(4, rng);

    TapeD t1;
    auto x1 = TensorD::variable({4}, vals);
    auto l1 = t1.add(t1.sum(t1.mul(x1, x1)), t1.sum(t1.scale(x1, 3.0)));
    t1.backward(l1);
    auto combined = x1.grad();

    TapeD t2;
    auto x2 = TensorD::variable({4}, vals);
    auto a = t2.sum(t2.mul(x2, x2));
    auto b = t2.sum(t2.scale(x2, 3.0));
    t2.backward(a);
    t2.backward(b);
    for (int i = 0; i < 4; ++i) CHECK(x2.grad()[i] == doctest::Approx(combined[i]));
}

TEST_CASE("repeated backward without zeroing accumulates leaf gradients") {
    TapeD tape;
    auto x = TensorD::variable({3}, {1.0, 2.0, 3.0});
    auto loss = tape.sum(x);
    tape.backward(loss);
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 2.0);
    x.zero_grad();
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("cleared tape drops recorded operations") {
    TapeD tape;
    auto x = TensorD::variable({2}, {1.0, 2.0});
    auto loss = tape.sum(x);
    CHECK(tape.recorded() == 1);
    tape.clear();
    CHECK(tape.recorded() == 0);
    CHECK_THROWS_AS(tape.backward(loss), sml::ContractError);
}

TEST_CASE("recording can be suspended for inference") {
    TapeD tape;
    tape.set_recording(false);
    auto x = TensorD::variable({2}, {1.0, 2.0});
    auto y = tape.mul(x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK(tape.recorded() == 0);
}
