#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qmdpnet/errors.hpp"
#include "qmdpnet/graph.hpp"
#include "qmdpnet/ops.hpp"
#include "qmdpnet/rng.hpp"

using namespace qmdpnet;

namespace {
Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.vec()) v = rng.next_range(lo, hi);
    return t;
}
}  // namespace

TEST_CASE("conv2d identity kernel reproduces the input") {
    Tensor in = Tensor::full({3, 3, 1}, 1.0);
    Tensor k({3, 3, 1, 1});
    k.at(1, 1, 0, 0) = 1.0;
    Tensor out = conv2d(in, k);
    for (int i = 0; i < out.numel(); ++i) CHECK(out[i] == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(3);
    Tensor rnd = random_tensor({4, 5, 2}, rng);
    Tensor k2({3, 3, 2, 2});
    k2.at(1, 1, 0, 0) = 1.0;
    k2.at(1, 1, 1, 1) = 1.0;
    Tensor out2 = conv2d(rnd, k2);
    for (int i = 0; i < rnd.numel(); ++i) CHECK(out2[i] == doctest::Approx(rnd[i]).epsilon(1e-15));
}

TEST_CASE("conv2d zero padding: single cell under an averaging kernel") {
    Tensor in({1, 1, 1}, {4.2});
    Tensor k = Tensor::full({3, 3, 1, 1}, 1.0 / 9.0);
    Tensor out = conv2d(in, k);
    CHECK(out.numel() == 1);
    // only the center tap lands in bounds
    CHECK(out[0] == doctest::Approx(4.2 / 9.0).epsilon(1e-15));
}

TEST_CASE("conv2d rejects even kernels and shape mismatches") {
    CHECK_THROWS_AS(conv2d(Tensor({3, 3, 1}), Tensor({2, 2, 1, 1})), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(Tensor({3, 3, 2}), Tensor({3, 3, 1, 1})), std::invalid_argument);
}

TEST_CASE("conv2d gradients match central finite differences") {
    Rng rng(7);
    Tensor in = random_tensor({5, 5, 2}, rng);
    Tensor kern = random_tensor({3, 3, 2, 4}, rng);
    Tensor probe = random_tensor({5, 5, 4}, rng);
    auto build = [&](Graph& g, const std::vector<NodeId>& p) {
        return g.dot(g.conv2d(p[0], p[1]), g.constant(probe));
    };
    GradCheckReport rep = grad_check(build, {in, kern}, 1e-6, 200, 1);
    CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("conv2d adjoint identity") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = random_tensor({6, 4, 3}, rng);
        Tensor k = random_tensor({3, 3, 3, 2}, rng);
        Tensor y = random_tensor({6, 4, 2}, rng);
        Tensor cx = conv2d(x, k);
        Tensor aty = conv2d_backward_input(k, y);
        double lhs = 0.0, rhs = 0.0;
        for (int i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
        for (int i = 0; i < x.numel(); ++i) rhs += x[i] * aty[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("channel_group_max basics and tie rule") {
    Tensor in({1, 1, 3}, {1.0, 3.0, 2.0});
    std::vector<int> argmax;
    Tensor out = channel_group_max(in, 1, &argmax);
    CHECK(out[0] == 3.0);
    Tensor din, g = Tensor::full({1, 1, 1}, 1.0);
    channel_group_max_backward(argmax, 1, in, g, din);
    CHECK(din[0] == 0.0);
    CHECK(din[1] == 1.0);
    CHECK(din[2] == 0.0);

    Tensor tie({1, 1, 2}, {2.0, 2.0});
    out = channel_group_max(tie, 1, &argmax);
    CHECK(out[0] == 2.0);
    Tensor din2, g2 = Tensor::full({1, 1, 1}, 1.0);
    channel_group_max_backward(argmax, 1, tie, g2, din2);
    CHECK(din2[0] == 1.0);  // lowest channel wins the tie
    CHECK(din2[1] == 0.0);

    CHECK_THROWS_AS(channel_group_max(Tensor({2, 2, 3}), 2), std::invalid_argument);
}

TEST_CASE("channel_group_max equals brute force and routes a 0/1 mask") {
    Rng rng(13);
    Tensor in = random_tensor({4, 4, 8}, rng);
    std::vector<int> argmax;
    Tensor out = channel_group_max(in, 2, &argmax);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int g = 0; g < 2; ++g) {
                double best = -1e300;
                for (int c = 0; c < 4; ++c) best = std::max(best, in.at(x, y, g * 4 + c));
                CHECK(out.at(x, y, g) == best);
            }
    Tensor din, ones = Tensor::full({4, 4, 2}, 1.0);
    channel_group_max_backward(argmax, 2, in, ones, din);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int g = 0; g < 2; ++g) {
                int nonzero = 0;
                for (int c = 0; c < 4; ++c) {
                    double v = din.at(x, y, g * 4 + c);
                    CHECK((v == 0.0 || v == 1.0));
                    nonzero += v == 1.0 ? 1 : 0;
                }
                CHECK(nonzero == 1);  // exactly one selected channel per group
            }
}

TEST_CASE("fully_connected identity and bias-only cases") {
    Tensor x({3}, {1.5, -2.0, 0.25});
    Tensor w({3, 3});
    for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0;
    Tensor b({3});
    Tensor out = fully_connected(x, w, b);
    for (int i = 0; i < 3; ++i) CHECK(out[i] == x[i]);

    Tensor zw({3, 2});
    Tensor bias({2}, {0.5, -1.0});
    out = fully_connected(x, zw, bias);
    CHECK(out[0] == 0.5);
    CHECK(out[1] == -1.0);

    CHECK_THROWS_AS(fully_connected(Tensor({3}), Tensor({4, 2}), Tensor({2})),
                    std::invalid_argument);
}

TEST_CASE("fully_connected gradients match finite differences") {
    Rng rng(17);
    Tensor x = random_tensor({4}, rng);
    Tensor w = random_tensor({4, 17}, rng);
    Tensor b = random_tensor({17}, rng);
    Tensor probe = random_tensor({17}, rng);
    auto build = [&](Graph& g, const std::vector<NodeId>& p) {
        return g.dot(g.fully_connected(p[0], p[1], p[2]), g.constant(probe));
    };
    GradCheckReport rep = grad_check(build, {x, w, b}, 1e-6, 200, 2);
    CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("pointwise activations and softmax") {
    Tensor z({3});
    Tensor sm = softmax_vec(z);
    for (int i = 0; i < 3; ++i) CHECK(sm[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    Graph g;
    NodeId x = g.param(Tensor({2}, {-2.0, 3.0}));
    NodeId r = g.relu(x);
    CHECK(g.value(r)[0] == 0.0);
    CHECK(g.value(r)[1] == 3.0);
    NodeId loss = g.reduce_sum(r);
    g.backward(loss);
    CHECK(g.grad(x)[0] == 0.0);  // zero gradient left of the kink
    CHECK(g.grad(x)[1] == 1.0);
}

TEST_CASE("softmax sums to one and passes a gradient check") {
    Rng rng(19);
    Tensor x = random_tensor({9}, rng, -3.0, 3.0);
    Tensor out = softmax_vec(x);
    CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-12));

    Tensor probe = random_tensor({9}, rng);
    auto build = [&](Graph& g, const std::vector<NodeId>& p) {
        return g.dot(g.softmax_vec(p[0]), g.constant(probe));
    };
    GradCheckReport rep = grad_check(build, {x}, 1e-6, 200, 3);
    CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("kernel_softmax normalizes each output-channel slice") {
    Rng rng(23);
    Tensor k = random_tensor({3, 3, 2, 5}, rng, -2.0, 2.0);
    Tensor out = kernel_softmax(k);
    for (int co = 0; co < 5; ++co) {
        double sum = 0.0;
        for (int dx = 0; dx < 3; ++dx)
            for (int dy = 0; dy < 3; ++dy)
                for (int ci = 0; ci < 2; ++ci) sum += out.at(dx, dy, ci, co);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    Tensor probe = random_tensor({3, 3, 2, 5}, rng);
    auto build = [&](Graph& g, const std::vector<NodeId>& p) {
        return g.dot(g.kernel_softmax(p[0]), g.constant(probe));
    };
    GradCheckReport rep = grad_check(build, {k}, 1e-6, 120, 4);
    CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("weighted_channel_sum: soft indexing reduces to hard indexing") {
    Rng rng(29);
    Tensor in = random_tensor({3, 3, 5}, rng);
    for (int j = 0; j < 5; ++j) {
        Tensor w({5});
        w[j] = 1.0;
        Tensor out = group_weighted_channel_sum(in, w, 1);
        for (int x = 0; x < 3; ++x)
            for (int y = 0; y < 3; ++y) CHECK(out.at(x, y, 0) == in.at(x, y, j));
    }
    Tensor uniform = Tensor::full({5}, 1.0 / 5.0);
    Tensor mean = group_weighted_channel_sum(in, uniform, 1);
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y) {
            double m = 0.0;
            for (int c = 0; c < 5; ++c) m += in.at(x, y, c);
            CHECK(mean.at(x, y, 0) == doctest::Approx(m / 5.0).epsilon(1e-12));
        }
    // brute-force dot per cell with random weights
    Tensor w = random_tensor({5}, rng);
    Tensor out = group_weighted_channel_sum(in, w, 1);
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y) {
            double acc = 0.0;
            for (int c = 0; c < 5; ++c) acc += in.at(x, y, c) * w[c];
            CHECK(out.at(x, y, 0) == doctest::Approx(acc).epsilon(1e-12));
        }
    CHECK_THROWS_AS(group_weighted_channel_sum(in, Tensor({4}), 1), std::invalid_argument);
}

TEST_CASE("weighted sums are differentiable in both arguments") {
    Rng rng(31);
    Tensor in = random_tensor({3, 3, 6}, rng);
    Tensor w = random_tensor({3}, rng, 0.1, 1.0);
    Tensor probe = random_tensor({3, 3, 2}, rng);
    auto build = [&](Graph& g, const std::vector<NodeId>& p) {
        return g.dot(g.group_weighted_channel_sum(p[0], p[1], 2), g.constant(probe));
    };
    GradCheckReport rep = grad_check(build, {in, w}, 1e-6, 200, 5);
    CHECK(rep.max_rel_error < 1e-6);

    Tensor sw = random_tensor({3, 3, 2}, rng);
    Tensor probe2 = random_tensor({3}, rng);
    auto build2 = [&](Graph& g, const std::vector<NodeId>& p) {
        return g.dot(g.group_spatial_weighted_sum(p[0], p[1], 2), g.constant(probe2));
    };
    GradCheckReport rep2 = grad_check(build2, {in, sw}, 1e-6, 200, 6);
    CHECK(rep2.max_rel_error < 1e-6);
}

TEST_CASE("normalize_sum1 contract") {
    Tensor t({2}, {2.0, 2.0});
    Tensor out = normalize_sum1(t);
    CHECK(out[0] == 0.5);
    CHECK(out[1] == 0.5);

    Tensor already({3}, {0.2, 0.3, 0.5});
    Tensor out2 = normalize_sum1(already);
    for (int i = 0; i < 3; ++i) CHECK(out2[i] == doctest::Approx(already[i]).epsilon(1e-12));

    CHECK_THROWS_AS(normalize_sum1(Tensor({2})), DegenerateBeliefError);
    CHECK_THROWS_AS(normalize_sum1(Tensor({2}, {-0.5, 1.5})), std::invalid_argument);

    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor({7}, rng, 0.0, 2.0);
        CHECK(normalize_sum1(x).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    Tensor x = random_tensor({7}, rng, 0.1, 2.0);
    Tensor probe = random_tensor({7}, rng);
    auto build = [&](Graph& g, const std::vector<NodeId>& p) {
        return g.dot(g.normalize_sum1(p[0]), g.constant(probe));
    };
    GradCheckReport rep = grad_check(build, {x}, 1e-6, 100, 7);
    CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("cross_entropy values and gradient") {
    Tensor onehot({4}, {0.0, 1.0, 0.0, 0.0});
    CHECK(cross_entropy(onehot, 1) <= 1e-10);

    Tensor uniform = Tensor::full({5}, 0.2);
    CHECK(cross_entropy(uniform, 3) == doctest::Approx(std::log(5.0)).epsilon(1e-9));

    CHECK_THROWS_AS(cross_entropy(onehot, 7), std::invalid_argument);

    Rng rng(41);
    Tensor logits = random_tensor({6}, rng);
    auto build = [&](Graph& g, const std::vector<NodeId>& p) {
        return g.cross_entropy(g.softmax_vec(p[0]), 2);
    };
    GradCheckReport rep = grad_check(build, {logits}, 1e-6, 100, 8);
    CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("backward on simple closed-form losses") {
    Rng rng(43);
    Tensor p0 = random_tensor({5}, rng);
    {
        Graph g;
        NodeId p = g.param(p0);
        g.backward(g.reduce_sum(p));
        for (int i = 0; i < 5; ++i) CHECK(g.grad(p)[i] == 1.0);
    }
    {
        Graph g;
        NodeId p = g.param(p0);
        g.backward(g.dot(p, p));
        for (int i = 0; i < 5; ++i)
            CHECK(g.grad(p)[i] == doctest::Approx(2.0 * p0[i]).epsilon(1e-12));
    }
}

TEST_CASE("gradients accumulate additively at fan-out") {
    Tensor p0({2}, {0.3, -0.7});
    Graph g;
    NodeId p = g.param(p0);
    NodeId doubled = g.add(p, p);
    g.backward(g.reduce_sum(doubled));
    CHECK(g.grad(p)[0] == 2.0);
    CHECK(g.grad(p)[1] == 2.0);
}

TEST_CASE("backward demands a scalar loss and finite values") {
    Graph g;
    NodeId p = g.param(Tensor({3}, {1.0, 2.0, 3.0}));
    CHECK_THROWS_AS(g.backward(p), std::invalid_argument);
    CHECK_THROWS_AS(g.constant(Tensor({1}, {INFINITY})), std::runtime_error);
}
