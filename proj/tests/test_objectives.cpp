#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "llf/flows.hpp"
#include "llf/objectives.hpp"
#include "llf/rng.hpp"
#include "test_util.hpp"

using namespace llf;
using namespace llf::testutil;

namespace {

double hinge(double v) { return v > 0.0 ? v : 0.0; }

// Independent enumeration of the classification penalty, element by element.
double enumerate_penalty(const Eigen::MatrixXd& Y, const ClassificationSignals& sig,
                         const PenaltyConfig& cfg) {
    double box_below = 0.0, box_above = 0.0, simplex = 0.0, weak = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        for (int j = 0; j < 2; ++j) {
            if (cfg.literal_box) {
                box_below += hinge(Y(i, j)) * hinge(Y(i, j));
                box_above += hinge(1.0 - Y(i, j)) * hinge(1.0 - Y(i, j));
            } else {
                box_below += hinge(-Y(i, j)) * hinge(-Y(i, j));
                box_above += hinge(Y(i, j) - 1.0) * hinge(Y(i, j) - 1.0);
            }
        }
        const double rs = Y(i, 0) + Y(i, 1) - 1.0;
        simplex += rs * rs;
    }
    for (int j = 0; j < 2; ++j) {
        for (Eigen::Index m = 0; m < sig.signal_count(); ++m) {
            double lhs = 0.0;
            long n_m = 0;
            for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                if (sig.is_null(i, m)) continue;
                const double qj = j == 1 ? sig.q(i, m) : 1.0 - sig.q(i, m);
                lhs += (1.0 - Y(i, j)) * qj + Y(i, j) * (1.0 - qj);
                ++n_m;
            }
            const double slack = lhs - static_cast<double>(n_m) * sig.bounds(m, j);
            weak += hinge(slack) * hinge(slack);
        }
    }
    return cfg.lambda1 * box_below + cfg.lambda2 * box_above + cfg.lambda3 * simplex +
           cfg.lambda4 * weak;
}

double tape_penalty(const Eigen::MatrixXd& Y, const ClassificationSignals& sig,
                    const PenaltyConfig& cfg) {
    Tape t;
    const std::vector<NodeId> cols = {t.constant(Y.col(0)), t.constant(Y.col(1))};
    return t.forward(classification_penalty(t, cols, sig, cfg));
}

ClassificationSignals random_signals(Eigen::Index n, Eigen::Index m, Rng& rng, double null_frac) {
    ClassificationSignals sig;
    sig.q.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < m; ++k)
            sig.q(i, k) = rng.uniform() < null_frac ? std::nan("") : rng.uniform();
    sig.bounds.resize(m, 2);
    for (Eigen::Index k = 0; k < m; ++k) {
        sig.bounds(k, 0) = rng.uniform(0.0, 0.5);
        sig.bounds(k, 1) = rng.uniform(0.0, 0.5);
    }
    return sig;
}

} // namespace

TEST_CASE("weak-signal hinge is zero when bounds equal the realized error") {
    // hard one-hot labels, hard signals, bounds set to the exact disagreement rate
    Eigen::MatrixXd Y(4, 2);
    Y << 0, 1, 1, 0, 0, 1, 1, 0; // classes: 1, 0, 1, 0
    ClassificationSignals sig;
    sig.q.resize(4, 1);
    sig.q << 1.0, 0.0, 0.0, 0.0; // labeler disagrees on sample 2 only
    sig.bounds.resize(1, 2);
    sig.bounds << 0.25, 0.25; // 1 error over 4 covered samples, both dims

    PenaltyConfig cfg;
    cfg.lambda1 = cfg.lambda2 = cfg.lambda3 = 0.0; // isolate the weak term
    CHECK(tape_penalty(Y, sig, cfg) == 0.0);

    // any tighter bound leaves a positive hinge
    sig.bounds << 0.2, 0.2;
    CHECK(tape_penalty(Y, sig, cfg) > 0.0);
}

TEST_CASE("rows on the simplex have zero simplex and box penalty") {
    Rng rng(1);
    Eigen::MatrixXd Y(6, 2);
    for (Eigen::Index i = 0; i < 6; ++i) {
        const double a = rng.uniform();
        Y(i, 0) = a;
        Y(i, 1) = 1.0 - a;
    }
    ClassificationSignals sig = random_signals(6, 2, rng, 0.0);
    PenaltyConfig cfg;
    cfg.lambda4 = 0.0; // isolate box + simplex
    CHECK(tape_penalty(Y, sig, cfg) == 0.0);
}

TEST_CASE("vectorized penalty equals per-element enumeration") {
    Rng rng(2);
    // the spec's miniature example first
    {
        Eigen::MatrixXd Y(3, 2);
        Y << 0.2, 0.9, -0.3, 1.4, 0.5, 0.5;
        ClassificationSignals sig = random_signals(3, 1, rng, 0.3);
        PenaltyConfig cfg;
        const double a = tape_penalty(Y, sig, cfg);
        const double b = enumerate_penalty(Y, sig, cfg);
        CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
    }
    // and a wide sweep with nulls
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 12);
        const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.next_u64() % 4);
        Eigen::MatrixXd Y(n, 2);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int j = 0; j < 2; ++j) Y(i, j) = rng.normal();
        ClassificationSignals sig = random_signals(n, m, rng, 0.25);
        PenaltyConfig cfg;
        cfg.lambda1 = rng.uniform(0.0, 20.0);
        cfg.lambda2 = rng.uniform(0.0, 20.0);
        cfg.lambda3 = rng.uniform(0.0, 20.0);
        cfg.lambda4 = rng.uniform(0.0, 20.0);
        const double a = tape_penalty(Y, sig, cfg);
        const double b = enumerate_penalty(Y, sig, cfg);
        CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
    }
}

TEST_CASE("penalty is permutation-equivariant in samples") {
    Rng rng(3);
    const Eigen::Index n = 8;
    Eigen::MatrixXd Y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < 2; ++j) Y(i, j) = rng.normal();
    ClassificationSignals sig = random_signals(n, 3, rng, 0.2);

    std::vector<Eigen::Index> perm = {3, 0, 7, 1, 5, 2, 6, 4};
    Eigen::MatrixXd Yp(n, 2);
    ClassificationSignals sigp = sig;
    for (Eigen::Index i = 0; i < n; ++i) {
        Yp.row(i) = Y.row(perm[static_cast<std::size_t>(i)]);
        sigp.q.row(i) = sig.q.row(perm[static_cast<std::size_t>(i)]);
    }
    PenaltyConfig cfg;
    const double a = tape_penalty(Y, sig, cfg);
    const double b = tape_penalty(Yp, sigp, cfg);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
}

TEST_CASE("literal box form penalizes values inside the unit box") {
    Eigen::MatrixXd Y(1, 2);
    Y << 0.4, 0.6; // feasible point
    Rng rng(4);
    ClassificationSignals sig = random_signals(1, 1, rng, 0.0);
    PenaltyConfig cfg;
    cfg.lambda3 = cfg.lambda4 = 0.0;
    CHECK(tape_penalty(Y, sig, cfg) == 0.0);
    cfg.literal_box = true;
    // [y]_+^2 + [1-y]_+^2 = 0.16+0.36 + 0.36+0.16 at lambda 10 each
    CHECK(tape_penalty(Y, sig, cfg) == doctest::Approx(10.0 * 1.04));
}

TEST_CASE("regression penalty closed forms") {
    RegressionRuleSignals rules;
    rules.rules.push_back({0, 0.0, 0.6, 0.6});
    Eigen::MatrixXd X(4, 1);
    X << 1.0, 2.0, -1.0, -2.0;

    PenaltyConfig cfg;
    // constant labels equal to both estimates: zero equality penalty, zero box
    {
        Tape t;
        const NodeId y = t.constant(Eigen::MatrixXd::Constant(4, 1, 0.6));
        CHECK(t.forward(regression_penalty(t, y, rules, X, cfg)) == 0.0);
    }
    // both group means off by delta: lambda3 * 2 delta^2
    {
        const double delta = 0.15;
        Tape t;
        const NodeId y = t.constant(Eigen::MatrixXd::Constant(4, 1, 0.6 + delta));
        const double got = t.forward(regression_penalty(t, y, rules, X, cfg));
        CHECK(got == doctest::Approx(cfg.lambda3 * 2.0 * delta * delta).epsilon(1e-12));
    }
}

TEST_CASE("regression penalty matches a brute-force oracle") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.next_u64() % 10);
        Eigen::MatrixXd X(n, 2);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            X(i, 0) = rng.normal();
            X(i, 1) = rng.normal();
            y(i) = rng.uniform(-0.5, 1.5);
        }
        RegressionRuleSignals rules;
        rules.rules.push_back({0, 0.0, rng.uniform(), rng.uniform()});
        rules.rules.push_back({1, 0.1, rng.uniform(), rng.uniform()});
        // keep both groups nonempty
        X(0, 0) = 1.0;
        X(1, 0) = -1.0;
        X(0, 1) = 1.0;
        X(1, 1) = -1.0;

        PenaltyConfig cfg;
        cfg.lambda1 = 3.0;
        cfg.lambda2 = 4.0;
        cfg.lambda3 = 5.0;
        Tape t;
        const double got = t.forward(regression_penalty(t, t.constant(y), rules, X, cfg));

        double box_b = 0.0, box_a = 0.0, dev = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            box_b += hinge(-y(i)) * hinge(-y(i));
            box_a += hinge(y(i) - 1.0) * hinge(y(i) - 1.0);
        }
        for (const RegressionRule& r : rules.rules) {
            double hi = 0.0, lo = 0.0;
            long nh = 0, nl = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (X(i, r.feature) >= r.threshold) {
                    hi += y(i);
                    ++nh;
                } else {
                    lo += y(i);
                    ++nl;
                }
            }
            dev += (hi / nh - r.b_high) * (hi / nh - r.b_high);
            dev += (lo / nl - r.b_low) * (lo / nl - r.b_low);
        }
        const double want = cfg.lambda1 * box_b + cfg.lambda2 * box_a + cfg.lambda3 * dev;
        CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("nll term closed forms") {
    Rng rng(6);
    // identity flow: zero logdet, nll is minus the prior log density
    {
        FlowConfig fc;
        fc.task = Task::Classification;
        fc.feature_dim = 2;
        FlowModel model(fc);
        model.zero_params();
        const Eigen::MatrixXd X = draw_gaussian(5, 2, rng);
        const Eigen::MatrixXd Z = draw_gaussian(5, 2, rng);
        Tape t(&model.params());
        const FlowModel::TapeGen gen = model.build_generate(t, t.constant(X), t.constant(Z));
        const NllTerm term = nll_term(t, Z, gen.logdet);
        CHECK(t.forward(term.term) == doctest::Approx(-gauss_log_density(Z).sum()).epsilon(1e-12));
    }
    // scalar affine with s = 2:each sample adds log 2 to the nll
    {
        FlowConfig fc;
        fc.task = Task::Regression;
        fc.feature_dim = 2;
        fc.steps = 1;
        FlowModel model(fc);
        model.zero_params();
        model.params().matrix("aff0.s.2.b")(0, 0) = std::log(2.0);
        const Eigen::MatrixXd X = draw_gaussian(4, 2, rng);
        const Eigen::MatrixXd Z = draw_gaussian(4, 1, rng);
        Tape t(&model.params());
        const FlowModel::TapeGen gen = model.build_generate(t, t.constant(X), t.constant(Z));
        const NllTerm term = nll_term(t, Z, gen.logdet);
        const double want = -gauss_log_density(Z).sum() + 4.0 * std::log(2.0);
        CHECK(t.forward(term.term) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("full objective gradient matches finite differences") {
    Rng rng(7);
    FlowConfig fc;
    fc.task = Task::Classification;
    fc.feature_dim = 3;
    fc.steps = 2; // small stack keeps the finite-difference sweep quick
    FlowModel model(fc);
    model.init_params(17);

    const Eigen::Index n = 6;
    const Eigen::MatrixXd X = draw_gaussian(n, 3, rng);
    const Eigen::MatrixXd Z = draw_gaussian(n, 2, rng);
    ClassificationSignals sig = random_signals(n, 2, rng, 0.2);

    Tape t(&model.params());
    const FlowModel::TapeGen gen = model.build_generate(t, t.constant(X), t.constant(Z));
    const NllTerm nll = nll_term(t, Z, gen.logdet);
    PenaltyConfig cfg;
    const NodeId loss = t.add(nll.term, classification_penalty(t, gen.y_cols, sig, cfg));

    t.forward(loss);
    const auto ad = t.backward(loss);
    const auto fd = fd_gradient(t, loss, model.params());
    CHECK(max_rel_err(ad, fd, 1.0) < 1e-4);
}

TEST_CASE("violation report: feasible labels show no violation") {
    Eigen::MatrixXd Y(3, 2);
    Y << 0, 1, 1, 0, 0.5, 0.5;
    ClassificationSignals sig;
    sig.q.resize(3, 1);
    sig.q << 0.9, 0.1, 0.6;
    sig.bounds = Eigen::MatrixXd::Constant(1, 2, 1.0); // vacuous bounds
    const ViolationReport rep = violation_report(Y, sig);
    CHECK(rep.weak_total == 0.0);
    CHECK(rep.box_total == 0.0);
    CHECK(rep.simplex_total == 0.0);
    CHECK(rep.weak_slack(0, 0) <= 0.0);
    CHECK(rep.weak_slack(0, 1) <= 0.0);
}

TEST_CASE("violation slack equals the raw disagreement count at zero bounds") {
    // labels equal the rounded signals except for two flips
    Eigen::MatrixXd Y(5, 2);
    Y << 0, 1, 0, 1, 1, 0, 1, 0, 0, 1;
    ClassificationSignals sig;
    sig.q.resize(5, 1);
    sig.q << 1.0, 1.0, 0.0, 1.0, 0.0; // disagrees on rows 3 and 4
    sig.bounds = Eigen::MatrixXd::Zero(1, 2);
    const ViolationReport rep = violation_report(Y, sig);
    CHECK(rep.weak_slack(0, 0) == doctest::Approx(2.0));
    CHECK(rep.weak_slack(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("violation report is invariant to signal permutation") {
    Rng rng(8);
    Eigen::MatrixXd Y(10, 2);
    for (Eigen::Index i = 0; i < 10; ++i) {
        Y(i, 1) = rng.uniform();
        Y(i, 0) = 1.0 - Y(i, 1);
    }
    ClassificationSignals sig = random_signals(10, 3, rng, 0.2);
    ClassificationSignals perm = sig;
    perm.q.col(0) = sig.q.col(2);
    perm.q.col(2) = sig.q.col(0);
    perm.bounds.row(0) = sig.bounds.row(2);
    perm.bounds.row(2) = sig.bounds.row(0);
    const ViolationReport a = violation_report(Y, sig);
    const ViolationReport b = violation_report(Y, perm);
    CHECK(a.weak_total == doctest::Approx(b.weak_total).epsilon(1e-14));
    CHECK(a.box_total == b.box_total);
    CHECK(a.simplex_total == b.simplex_total);
}
