#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "llf/adam.hpp"
#include "llf/param_store.hpp"
#include "llf/rng.hpp"
#include "llf/tape.hpp"
#include "test_util.hpp"

using namespace llf;
using namespace llf::testutil;

namespace {

ParamStore scalar_store(const char* name, double v) {
    ParamStore store;
    store.add(name, 1, 1);
    store.matrix(name)(0, 0) = v;
    return store;
}

void fill_random(ParamStore& store, Rng& rng, double scale) {
    for (double& v : store.values()) v = scale * rng.normal();
}

// Tiny two-layer network loss used against the straight-line oracle below:
// loss = sum(square(tanh(x W1 + b1) W2 + b2))
struct TinyNet {
    ParamStore store;
    Eigen::MatrixXd x;

    TinyNet(int in, int hidden, int out, int n, Rng& rng) {
        store.add("W1", in, hidden);
        store.add("b1", 1, hidden);
        store.add("W2", hidden, out);
        store.add("b2", 1, out);
        fill_random(store, rng, 0.7);
        x.resize(n, in);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    }

    NodeId build(Tape& t) const {
        const NodeId h = t.tanh(t.add_rowvec(t.matmul(t.constant(x), t.param("W1")), t.param("b1")));
        const NodeId o = t.add_rowvec(t.matmul(h, t.param("W2")), t.param("b2"));
        return t.sum(t.square(o));
    }

    // independent straight-line re-evaluation with plain loops
    double interpret() const {
        const auto W1 = store.matrix("W1");
        const auto b1 = store.matrix("b1");
        const auto W2 = store.matrix("W2");
        const auto b2 = store.matrix("b2");
        double loss = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            std::vector<double> h(static_cast<std::size_t>(W1.cols()), 0.0);
            for (Eigen::Index k = 0; k < W1.cols(); ++k) {
                double acc = b1(0, k);
                for (Eigen::Index j = 0; j < W1.rows(); ++j) acc += x(i, j) * W1(j, k);
                h[static_cast<std::size_t>(k)] = std::tanh(acc);
            }
            for (Eigen::Index k = 0; k < W2.cols(); ++k) {
                double acc = b2(0, k);
                for (Eigen::Index j = 0; j < W2.rows(); ++j)
                    acc += h[static_cast<std::size_t>(j)] * W2(j, k);
                loss += acc * acc;
            }
        }
        return loss;
    }
};

} // namespace

TEST_CASE("square of a scalar parameter") {
    ParamStore store = scalar_store("x", 3.0);
    Tape t(&store);
    const NodeId loss = t.square(t.param("x"));
    CHECK(t.forward(loss) == doctest::Approx(9.0));
    const auto grad = t.backward(loss);
    CHECK(grad[0] == doctest::Approx(6.0));
}

TEST_CASE("log of exp is identity") {
    ParamStore store = scalar_store("x", 0.7);
    Tape t(&store);
    const NodeId loss = t.log(t.exp(t.param("x")));
    CHECK(t.forward(loss) == doctest::Approx(0.7).epsilon(1e-14));
    const auto grad = t.backward(loss);
    CHECK(grad[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant function has zero gradient") {
    ParamStore store = scalar_store("x", 2.0);
    Tape t(&store);
    t.param("x"); // present on the tape but unused by the root
    const NodeId loss = t.scalar(5.0);
    CHECK(t.forward(loss) == doctest::Approx(5.0));
    const auto grad = t.backward(loss);
    CHECK(grad[0] == 0.0);
}

TEST_CASE("backward before any forward is an error") {
    Tape t;
    CHECK_THROWS(t.backward(0));
}

TEST_CASE("tape matches a straight-line interpreter") {
    Rng rng(42);
    for (int rep = 0; rep < 5; ++rep) {
        TinyNet net(3, 6, 2, 4, rng);
        Tape t(&net.store);
        const NodeId loss = net.build(t);
        const double got = t.forward(loss);
        const double want = net.interpret();
        CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("gradients match central finite differences over random draws") {
    Rng rng(7);
    TinyNet net(3, 8, 1, 5, rng);
    Tape t(&net.store);
    const NodeId loss = net.build(t);
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        fill_random(net.store, rng, 0.5);
        t.forward(loss);
        const auto ad = t.backward(loss);
        const auto fd = fd_gradient(t, loss, net.store);
        worst = std::max(worst, max_rel_err(ad, fd, 1e-3));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("every primitive differentiates correctly") {
    Rng rng(11);
    ParamStore store;
    store.add("A", 3, 2);
    store.add("B", 3, 2);
    store.add("C", 2, 4);
    store.add("r", 1, 4);
    fill_random(store, rng, 0.8);
    // keep log's argument positive and clamp/relu away from their kinks
    auto A = store.matrix("A");
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = 0.5 + std::abs(A.data()[i]);

    Tape t(&store);
    const NodeId a = t.param("A");
    const NodeId b = t.param("B");
    const NodeId m = t.matmul(t.mul(t.add(a, b), t.sub(a, b)), t.param("C"));
    const NodeId r = t.add_rowvec(m, t.param("r"));
    const NodeId mix = t.add(t.add(t.sum(t.tanh(r)), t.sum(t.exp(t.scale(r, 0.3)))),
                             t.add(t.sum(t.log(a)), t.mean(t.square(b))));
    const NodeId kinks = t.add(t.sum(t.relu(t.add_scalar(r, 0.05))), t.sum(t.clamp(r, -4.0, 4.0)));
    const NodeId loss = t.add(t.add(mix, kinks), t.sum(t.col(r, 2)));

    t.forward(loss);
    const auto ad = t.backward(loss);
    const auto fd = fd_gradient(t, loss, store);
    CHECK(max_rel_err(ad, fd, 1e-3) < 1e-4);
}

TEST_CASE("forward is deterministic bit for bit") {
    Rng rng(3);
    TinyNet net(4, 5, 3, 6, rng);
    Tape t1(&net.store);
    Tape t2(&net.store);
    const double v1 = t1.forward(net.build(t1));
    const double v2 = t2.forward(net.build(t2));
    CHECK(v1 == v2);
}

TEST_CASE("non-finite intermediates are reported with a node index") {
    ParamStore store = scalar_store("x", -1.0);
    Tape t(&store);
    const NodeId loss = t.sum(t.log(t.param("x"))); // log of a negative value
    CHECK_THROWS_WITH_AS(t.forward(loss), doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    ParamStore store = scalar_store("x", 1.25);
    AdamState adam(store.total_dim());
    const std::vector<double> zero(store.total_dim(), 0.0);
    for (int s = 0; s < 3; ++s) adam_step(store, zero, adam, adam.lr0);
    CHECK(store.matrix("x")(0, 0) == 1.25);
}

TEST_CASE("first adam step moves by about lr") {
    // f(x) = x from x = 0: gradient 1, bias-corrected first step = lr/(1+eps)
    ParamStore store = scalar_store("x", 0.0);
    AdamState adam(store.total_dim());
    adam_step(store, {1.0}, adam, 0.001);
    CHECK(store.matrix("x")(0, 0) == doctest::Approx(-0.001).epsilon(1e-6));
}

TEST_CASE("learning-rate schedule decays per epoch") {
    AdamState adam(1, 0.001, 0.996);
    CHECK(adam.lr_at_epoch(0) == doctest::Approx(0.001));
    CHECK(adam.lr_at_epoch(1) == doctest::Approx(0.001 * 0.996));
    CHECK(adam.lr_at_epoch(250) == doctest::Approx(0.001 * std::pow(0.996, 250)).epsilon(1e-12));
}

TEST_CASE("non-finite gradients abort the step") {
    ParamStore store = scalar_store("x", 0.0);
    AdamState adam(store.total_dim());
    CHECK_THROWS_AS(adam_step(store, {std::nan("")}, adam, 0.001), std::runtime_error);
    CHECK(store.matrix("x")(0, 0) == 0.0);
}
