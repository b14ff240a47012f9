#include "helpers.hpp"

#include "cyclone/nn.hpp"

#include <cmath>
#include <numbers>

using namespace cyclone::nn;
using Md = Matrix<double>;

namespace {

Tensor<double> random_tensor(int channels, int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor<double> t(channels, rows, cols);
    for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values.data()[i] = n(rng);
    return t;
}

// Straight loop definition: zero padding past the bottom and right edges.
Tensor<double> naive_conv(const Conv2d<double>& conv, const Tensor<double>& x) {
    const int k = conv.kernel();
    Tensor<double> out(conv.out_channels(), x.rows, x.cols);
    for (int o = 0; o < conv.out_channels(); ++o) {
        for (int r = 0; r < x.rows; ++r) {
            for (int c = 0; c < x.cols; ++c) {
                double acc = conv.bias.value(o, 0);
                for (int ch = 0; ch < conv.in_channels(); ++ch) {
                    for (int di = 0; di < k; ++di) {
                        for (int dj = 0; dj < k; ++dj) {
                            if (r + di >= x.rows || c + dj >= x.cols) continue;
                            acc += conv.weight.value(o, conv.tap(ch, di, dj)) * x(ch, r + di, c + dj);
                        }
                    }
                }
                out(o, r, c) = acc;
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("conv2d forward") {
    Conv2d<double> identity(1, 1, 1);
    identity.weight.value(0, 0) = 1.0;
    const auto x = random_tensor(1, 4, 5, 1);
    CHECK(identity.forward(x).values == x.values);

    Conv2d<double> ones(1, 1, 2);
    ones.weight.value.setOnes();
    Tensor<double> flat(Md::Constant(1, 9, 3.0), 3, 3);
    const auto y = ones.forward(flat);
    CHECK(y(0, 0, 0) == 12.0);
    CHECK(y(0, 0, 2) == 6.0);
    CHECK(y(0, 2, 0) == 6.0);
    CHECK(y(0, 2, 2) == 3.0);

    for (int k = 1; k <= 3; ++k) {
        Conv2d<double> conv(3, 4, k);
        std::mt19937_64 rng(k);
        conv.init_kaiming(rng);
        conv.bias.value.setRandom();
        const auto in = random_tensor(3, 6, 7, 10 + k);
        const auto fast = conv.forward(in);
        const auto slow = naive_conv(conv, in);
        CHECK((fast.values - slow.values).cwiseAbs().maxCoeff() < 1e-12);
        const Md patches = conv.patches(in);
        CHECK(conv.forward_patches(patches, 6, 7).values == fast.values);
    }
    CHECK_THROWS_AS(Conv2d<double>(0, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(ones.forward(random_tensor(2, 3, 3, 1)), std::invalid_argument);
}

TEST_CASE("conv2d backward") {
    Conv2d<double> conv(2, 3, 2);
    CHECK_THROWS_AS(conv.backward(Tensor<double>(3, 4, 4)), std::logic_error);
    std::mt19937_64 rng(5);
    conv.init_kaiming(rng);
    const auto x = random_tensor(2, 4, 4, 6);
    conv.forward(x);

    const auto zero = conv.backward(Tensor<double>(3, 4, 4));
    CHECK(conv.weight.grad.isZero());
    CHECK(zero.values.isZero());

    // A unit upstream at one pixel gives the input patch at that pixel.
    Tensor<double> spike(3, 4, 4);
    spike(1, 1, 2) = 1.0;
    conv.backward(spike);
    for (int ch = 0; ch < 2; ++ch) {
        for (int di = 0; di < 2; ++di) {
            for (int dj = 0; dj < 2; ++dj) {
                CHECK(conv.weight.grad(1, conv.tap(ch, di, dj)) == x(ch, 1 + di, 2 + dj));
                CHECK(conv.weight.grad(0, conv.tap(ch, di, dj)) == 0.0);
            }
        }
    }
    CHECK(conv.bias.grad(1, 0) == 1.0);

    // Finite differences on L = sum(out * g).
    conv.weight.zero_grad();
    conv.bias.zero_grad();
    const auto g = random_tensor(3, 4, 4, 7);
    conv.forward(x);
    const auto dx = conv.backward(g);
    auto loss = [&](const Tensor<double>& in) { return (conv.forward(in).values.array() * g.values.array()).sum(); };
    const double h = 1e-4;
    for (Eigen::Index i = 0; i < x.values.size(); ++i) {
        auto xp = x, xm = x;
        xp.values.data()[i] += h;
        xm.values.data()[i] -= h;
        CHECK(std::abs((loss(xp) - loss(xm)) / (2 * h) - dx.values.data()[i]) < 1e-6);
    }
    const Md wgrad = conv.weight.grad;
    for (Eigen::Index i = 0; i < conv.weight.value.size(); ++i) {
        const double w0 = conv.weight.value.data()[i];
        conv.weight.value.data()[i] = w0 + h;
        const double lp = loss(x);
        conv.weight.value.data()[i] = w0 - h;
        const double lm = loss(x);
        conv.weight.value.data()[i] = w0;
        CHECK(std::abs((lp - lm) / (2 * h) - wgrad.data()[i]) < 1e-6);
    }
}

TEST_CASE("dense layer") {
    Dense<double> dense(3, 2);
    CHECK_THROWS_AS(dense.backward(Md::Zero(2, 1)), std::logic_error);
    dense.weight.value << 1, 2, 3, 4, 5, 6;
    dense.bias.value << 0.5, -0.5;
    Md x(3, 1);
    x << 1, 0, -1;
    const Md y = dense.forward(x);
    CHECK(y(0, 0) == -1.5);
    CHECK(y(1, 0) == -2.5);
    Md up(2, 1);
    up << 1, 2;
    const Md dx = dense.backward(up);
    CHECK(dx(0, 0) == 9.0);
    CHECK(dx(2, 0) == 15.0);
    CHECK(dense.weight.grad(1, 2) == -2.0);
    CHECK_THROWS_AS(dense.forward(Md::Zero(2, 1)), std::invalid_argument);
}

TEST_CASE("softplus") {
    CHECK(softplus(0.0) == doctest::Approx(std::numbers::ln2));
    CHECK(softplus(100.0) == 100.0);
    CHECK(softplus(-100.0) == doctest::Approx(std::exp(-100.0)).epsilon(1e-12));
    CHECK(softplus(1.0) == doctest::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-15));

    Softplus<double> layer;
    CHECK_THROWS_AS(layer.backward(Md::Ones(1, 1)), std::logic_error);
    Md x(1, 6);
    x << -800, -20, -1e-9, 0, 3, 800;
    const Md y = layer.forward(x);
    for (int i = 0; i < 6; ++i) CHECK(y(0, i) == doctest::Approx(softplus(x(0, i))).epsilon(1e-14));
    const Md d = layer.backward(Md::Ones(1, 6));
    CHECK(d(0, 3) == 0.5);
    for (int i = 0; i < 6; ++i) CHECK(d(0, i) == doctest::Approx(logistic(x(0, i))).epsilon(1e-14));
}

TEST_CASE("kaiming initialization") {
    std::mt19937_64 rng(3);
    const Md w = kaiming_normal<double>(50, 100, 1000, rng);
    const double var = (w.array() - w.mean()).square().mean();
    CHECK(std::abs(var - 2.0 / 50) < 0.03 * (2.0 / 50));
    std::mt19937_64 rng2(3);
    const Md w2 = kaiming_normal<double>(2, 100, 1000, rng2);
    CHECK(std::abs((w2.array() - w2.mean()).square().mean() - 1.0) < 0.03);
    std::mt19937_64 a(9), b(9);
    CHECK(kaiming_normal<double>(4, 3, 3, a) == kaiming_normal<double>(4, 3, 3, b));
    CHECK_THROWS_AS(kaiming_normal<double>(0, 1, 1, a), std::invalid_argument);
}

TEST_CASE("adam") {
    Parameter<double> p(2, 1);
    p.value << 1.0, -2.0;
    std::vector<Parameter<double>*> params{&p};
    Adam<double> zero;
    zero.step(params);
    CHECK(p.value(0, 0) == 1.0);
    CHECK(p.value(1, 0) == -2.0);

    Adam<double> adam(AdamConfig{0.01, 0.9, 0.999, 1e-8});
    p.grad << 4.0, -0.5;
    adam.step(params);
    // After bias correction the first step is lr * g / (|g| + eps).
    CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
    CHECK(p.value(1, 0) == doctest::Approx(-2.0 + 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));

    Parameter<double> q(1, 1);
    std::vector<Parameter<double>*> qs{&q};
    Adam<double> steady(AdamConfig{1e-3});
    for (int i = 0; i < 10000; ++i) {
        q.grad(0, 0) = 3.0;
        steady.step(qs);
    }
    CHECK(q.value(0, 0) == doctest::Approx(-10.0).epsilon(1e-6));
    CHECK(steady.steps() == 10000);

    q.grad(0, 0) = std::nan("");
    CHECK_THROWS_AS(steady.step(qs), TrainingAborted);
}

TEST_CASE("parameter json round trip") {
    Parameter<float> p(2, 3);
    p.value << 0.1f, -2.5f, 3e-8f, 1e20f, 0.f, -0.f;
    Parameter<float> q(2, 3);
    parameter_from_json(parameter_to_json(p), q);
    CHECK(q.value == p.value);
    Parameter<float> wrong(3, 2);
    CHECK_THROWS(parameter_from_json(parameter_to_json(p), wrong));
    CHECK_THROWS_AS(Parameter<float>(0, 2), std::invalid_argument);
}
