#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "synth/error.hpp"
#include "synth/net.hpp"

using namespace synth;

namespace {

// scalar loss used by the finite-difference checks
double quadratic_loss(const DenseNet& net, const Matrix& input, const Matrix& target) {
    Matrix y = forward(net, input);
    return 0.5 * (y - target).squaredNorm();
}

Matrix upstream_of(const DenseNet& net, const Matrix& input, const Matrix& target) {
    return forward(net, input) - target;
}

DenseNet random_net(RngStream& rng, int in, int out, bool softmax_head) {
    std::vector<Segment> segs;
    if (softmax_head && out >= 5) segs = {{0, 3}, {3, 2}};
    return make_mlp(in, {8, 6}, out,
                    softmax_head ? Act::SoftmaxSegments : Act::Tanh, segs, rng);
}

}  // namespace

TEST_CASE("batch gradient matches central finite differences") {
    RngStream rng = RngStream::derive(11, "fd");
    const double h = 1e-5;
    for (int trial = 0; trial < 5; ++trial) {
        DenseNet net = random_net(rng, 4, 7, trial % 2 == 0);
        Matrix input(3, 4), target(3, 7);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 4; ++j) input(i, j) = rng.next_gaussian();
            for (int j = 0; j < 7; ++j) target(i, j) = 0.3 * rng.next_gaussian();
        }
        ForwardCache cache;
        forward(net, input, &cache);
        auto bb = backward_batch(net, cache, upstream_of(net, input, target));

        for (size_t k = 0; k < net.layers.size(); ++k) {
            for (Eigen::Index a = 0; a < net.layers[k].weights.rows(); ++a) {
                for (Eigen::Index b = 0; b < net.layers[k].weights.cols(); ++b) {
                    DenseNet plus = net, minus = net;
                    plus.layers[k].weights(a, b) += h;
                    minus.layers[k].weights(a, b) -= h;
                    double fd = (quadratic_loss(plus, input, target) -
                                 quadratic_loss(minus, input, target)) /
                                (2.0 * h);
                    CHECK(bb.grads.d_weights[k](a, b) ==
                          doctest::Approx(fd).epsilon(1e-4));
                }
            }
            for (Eigen::Index a = 0; a < net.layers[k].bias.size(); ++a) {
                DenseNet plus = net, minus = net;
                plus.layers[k].bias(a) += h;
                minus.layers[k].bias(a) -= h;
                double fd = (quadratic_loss(plus, input, target) -
                             quadratic_loss(minus, input, target)) /
                            (2.0 * h);
                CHECK(bb.grads.d_bias[k](a) == doctest::Approx(fd).epsilon(1e-4));
            }
        }
    }
}

TEST_CASE("input gradients match finite differences") {
    RngStream rng = RngStream::derive(12, "fd-in");
    DenseNet net = random_net(rng, 5, 6, true);
    Matrix input(4, 5), target(4, 6);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 5; ++j) input(i, j) = rng.next_gaussian();
        for (int j = 0; j < 6; ++j) target(i, j) = 0.2 * rng.next_gaussian();
    }
    ForwardCache cache;
    forward(net, input, &cache);
    auto bb = backward_batch(net, cache, upstream_of(net, input, target));
    const double h = 1e-5;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 5; ++j) {
            Matrix plus = input, minus = input;
            plus(i, j) += h;
            minus(i, j) -= h;
            double fd = (quadratic_loss(net, plus, target) -
                         quadratic_loss(net, minus, target)) /
                        (2.0 * h);
            CHECK(bb.input_grads(i, j) == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("per-example gradients sum to the batch gradient") {
    RngStream rng = RngStream::derive(13, "sum");
    DenseNet net = random_net(rng, 4, 7, true);
    Matrix input(6, 4);
    Matrix upstream(6, 7);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 4; ++j) input(i, j) = rng.next_gaussian();
        for (int j = 0; j < 7; ++j) upstream(i, j) = rng.next_gaussian();
    }
    ForwardCache cache;
    forward(net, input, &cache);
    auto per = backward_per_example(net, cache, upstream);
    auto batch = backward_batch(net, cache, upstream);

    GradientSet sum = GradientSet::zeros_like(net);
    for (const auto& g : per.per_example) sum.add(g);
    for (size_t k = 0; k < net.layers.size(); ++k) {
        CHECK((sum.d_weights[k] - batch.grads.d_weights[k]).lpNorm<Eigen::Infinity>() < 1e-10);
        CHECK((sum.d_bias[k] - batch.grads.d_bias[k]).lpNorm<Eigen::Infinity>() < 1e-10);
    }
    CHECK((per.input_grads - batch.input_grads).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("per-example gradient i is independent of other rows") {
    RngStream rng = RngStream::derive(14, "indep");
    DenseNet net = random_net(rng, 3, 6, false);
    Matrix input(2, 3), upstream(2, 6);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j) input(i, j) = rng.next_gaussian();
        for (int j = 0; j < 6; ++j) upstream(i, j) = rng.next_gaussian();
    }
    ForwardCache cache;
    forward(net, input, &cache);
    auto both = backward_per_example(net, cache, upstream);

    // recompute example 0 alone
    ForwardCache solo_cache;
    forward(net, input.topRows(1), &solo_cache);
    auto solo = backward_per_example(net, solo_cache, upstream.topRows(1));
    for (size_t k = 0; k < net.layers.size(); ++k) {
        CHECK((both.per_example[0].d_weights[k] - solo.per_example[0].d_weights[k])
                  .lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("forward validates shapes and finiteness") {
    RngStream rng = RngStream::derive(15, "err");
    DenseNet net = make_mlp(4, {5}, 2, Act::Sigmoid, {}, rng);
    Matrix wrong(3, 5);
    wrong.setZero();
    CHECK_THROWS_AS(forward(net, wrong), ShapeError);
    Matrix bad(1, 4);
    bad.setZero();
    bad(0, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(net, bad), ValidationError);
}

TEST_CASE("backward without a cache is a state error") {
    RngStream rng = RngStream::derive(16, "state");
    DenseNet net = make_mlp(2, {3}, 1, Act::Sigmoid, {}, rng);
    ForwardCache cache;  // never filled
    Matrix upstream = Matrix::Zero(1, 1);
    CHECK_THROWS_AS(backward_batch(net, cache, upstream), StateError);
}

TEST_CASE("network validation catches bad chaining and segments") {
    RngStream rng = RngStream::derive(17, "val");
    DenseNet net = make_mlp(2, {3}, 4, Act::SoftmaxSegments, {{0, 4}}, rng);
    net.layers[1].segments = {{2, 5}};  // runs past the output dim
    CHECK_THROWS_AS(net.validate(), ShapeError);
    net.layers[1].segments = {{0, 4}};
    net.layers[0].bias = Vector::Zero(2);  // wrong size
    CHECK_THROWS_AS(net.validate(), ShapeError);
}

TEST_CASE("softmax segments emit simplex blocks and tanh elsewhere") {
    RngStream rng = RngStream::derive(18, "soft");
    DenseNet net = make_mlp(3, {4}, 6, Act::SoftmaxSegments, {{0, 3}, {3, 2}}, rng);
    Matrix input(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) input(i, j) = rng.next_gaussian();
    Matrix y = forward(net, input);
    for (int i = 0; i < 5; ++i) {
        CHECK(y.row(i).segment(0, 3).sum() == doctest::Approx(1.0));
        CHECK(y.row(i).segment(3, 2).sum() == doctest::Approx(1.0));
        CHECK(y(i, 5) > -1.0);
        CHECK(y(i, 5) < 1.0);
        for (int j = 0; j < 5; ++j) CHECK(y(i, j) > 0.0);
    }
}

TEST_CASE("sgd_step applies p -= eta * g") {
    RngStream rng = RngStream::derive(19, "sgd");
    DenseNet net = make_mlp(2, {}, 2, Act::Identity, {}, rng);
    DenseNet before = net;
    GradientSet g = GradientSet::zeros_like(net);
    g.d_weights[0].setConstant(2.0);
    g.d_bias[0].setConstant(-1.0);
    sgd_step(net, g, 0.5);
    CHECK((net.layers[0].weights - (before.layers[0].weights.array() - 1.0).matrix())
              .lpNorm<Eigen::Infinity>() < 1e-15);
    CHECK((net.layers[0].bias - (before.layers[0].bias.array() + 0.5).matrix())
              .lpNorm<Eigen::Infinity>() < 1e-15);
    CHECK_THROWS_AS(sgd_step(net, g, 0.0), ValidationError);
}

TEST_CASE("adam first step moves each coordinate by about lr") {
    // with m=g(1-b1)/bc1 = g and v=g^2, the bias-corrected step is
    // lr * g / (|g| + eps): magnitude ~lr, direction -sign(g)
    RngStream rng = RngStream::derive(20, "adam");
    DenseNet net = make_mlp(2, {}, 2, Act::Identity, {}, rng);
    DenseNet before = net;
    GradientSet g = GradientSet::zeros_like(net);
    g.d_weights[0] << 3.0, -0.5, 0.25, 10.0;
    AdamState state = AdamState::zeros_like(net);
    AdamParams params;
    adam_step(net, g, state, params);
    for (Eigen::Index i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < 2; ++j) {
            double gij = g.d_weights[0](i, j);
            double expected = params.lr * gij / (std::abs(gij) + params.eps);
            CHECK(net.layers[0].weights(i, j) ==
                  doctest::Approx(before.layers[0].weights(i, j) - expected).epsilon(1e-9));
        }
    }
    CHECK(state.step == 1);
}

TEST_CASE("adam trajectory matches a scalar reference simulation") {
    RngStream rng = RngStream::derive(21, "adam2");
    DenseNet net = make_mlp(1, {}, 1, Act::Identity, {}, rng);
    net.layers[0].weights(0, 0) = 0.7;
    AdamState state = AdamState::zeros_like(net);
    AdamParams params;

    double p = 0.7, m = 0.0, v = 0.0;
    std::vector<double> grads = {1.0, -2.0, 0.5, 0.0, 3.0};
    for (size_t t = 0; t < grads.size(); ++t) {
        GradientSet g = GradientSet::zeros_like(net);
        g.d_weights[0](0, 0) = grads[t];
        adam_step(net, g, state, params);

        m = params.beta1 * m + (1.0 - params.beta1) * grads[t];
        v = params.beta2 * v + (1.0 - params.beta2) * grads[t] * grads[t];
        double bc1 = 1.0 - std::pow(params.beta1, static_cast<double>(t + 1));
        double bc2 = 1.0 - std::pow(params.beta2, static_cast<double>(t + 1));
        p -= params.lr * (m / bc1) / (std::sqrt(v / bc2) + params.eps);
        CHECK(net.layers[0].weights(0, 0) == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("gradient set norms and scaling") {
    RngStream rng = RngStream::derive(22, "gs");
    DenseNet net = make_mlp(2, {}, 1, Act::Identity, {}, rng);
    GradientSet g = GradientSet::zeros_like(net);
    g.d_weights[0] << 3.0, 4.0;
    g.d_bias[0] << 0.0;
    CHECK(g.global_l2_norm() == doctest::Approx(5.0));
    g.scale(0.5);
    CHECK(g.global_l2_norm() == doctest::Approx(2.5));
    CHECK(g.all_finite());
    g.d_bias[0](0) = std::numeric_limits<double>::infinity();
    CHECK_FALSE(g.all_finite());
}
