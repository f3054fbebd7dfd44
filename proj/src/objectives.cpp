#include "llf/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "llf/flows.hpp"

namespace llf {

namespace {

// box terms: corrected form penalizes y < 0 and y > 1
NodeId box_terms(Tape& t, NodeId y, const PenaltyConfig& cfg) {
    NodeId below, above;
    if (cfg.literal_box) {
        below = t.sum(t.square(t.relu(y)));                                // [y]_+^2
        above = t.sum(t.square(t.relu(t.add_scalar(t.scale(y, -1.0), 1.0)))); // [1-y]_+^2
    } else {
        below = t.sum(t.square(t.relu(t.scale(y, -1.0))));     // [-y]_+^2
        above = t.sum(t.square(t.relu(t.add_scalar(y, -1.0)))); // [y-1]_+^2
    }
    return t.add(t.scale(below, cfg.lambda1), t.scale(above, cfg.lambda2));
}

} // namespace

NodeId classification_penalty(Tape& t, const std::vector<NodeId>& y_cols,
                              const ClassificationSignals& signals, const PenaltyConfig& cfg) {
    if (y_cols.size() != 2) throw std::invalid_argument("classification_penalty: expected 2 label columns");
    const Eigen::Index n = t.value(y_cols[0]).rows();
    if (signals.count() != n)
        throw std::invalid_argument("classification_penalty: signals not aligned to labels");

    NodeId total = t.scalar(0.0);
    for (const NodeId y : y_cols) total = t.add(total, box_terms(t, y, cfg));

    // simplex: (y^[0] + y^[1] - 1)^2 per row
    total = t.add(total, t.scale(t.sum(t.square(t.add_scalar(t.add(y_cols[0], y_cols[1]), -1.0))),
                                 cfg.lambda3));

    // weak signals: LHS is affine in y^[j]:
    //   sum_i mask (q + y (1 - 2q)) = c + sum_i (mask (1 - 2q)) y
    NodeId weak = t.scalar(0.0);
    for (int j = 0; j < 2; ++j) {
        for (Eigen::Index m = 0; m < signals.signal_count(); ++m) {
            Eigen::MatrixXd coef(n, 1);
            double c = 0.0;
            long n_m = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (signals.is_null(i, m)) {
                    coef(i, 0) = 0.0;
                    continue;
                }
                const double qj = j == 1 ? signals.q(i, m) : 1.0 - signals.q(i, m);
                coef(i, 0) = 1.0 - 2.0 * qj;
                c += qj;
                ++n_m;
            }
            const double rhs = static_cast<double>(n_m) * signals.bounds(m, j);
            const NodeId lhs = t.add_scalar(t.sum(t.mul(t.constant(coef), y_cols[static_cast<std::size_t>(j)])),
                                            c - rhs);
            weak = t.add(weak, t.square(t.relu(lhs)));
        }
    }
    return t.add(total, t.scale(weak, cfg.lambda4));
}

NodeId regression_penalty(Tape& t, NodeId y, const RegressionRuleSignals& rules,
                          const Eigen::MatrixXd& X_rows, const PenaltyConfig& cfg) {
    const Eigen::Index n = t.value(y).rows();
    if (X_rows.rows() != n) throw std::invalid_argument("regression_penalty: feature rows not aligned");

    NodeId total = box_terms(t, y, cfg);

    NodeId dev = t.scalar(0.0);
    const auto masks = rules.high_masks(X_rows);
    for (std::size_t r = 0; r < rules.rules.size(); ++r) {
        Eigen::MatrixXd hi = Eigen::MatrixXd::Zero(n, 1);
        Eigen::MatrixXd lo = Eigen::MatrixXd::Zero(n, 1);
        long n_hi = 0, n_lo = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (masks[r][static_cast<std::size_t>(i)]) {
                hi(i, 0) = 1.0;
                ++n_hi;
            } else {
                lo(i, 0) = 1.0;
                ++n_lo;
            }
        }
        if (n_hi == 0 || n_lo == 0)
            throw std::runtime_error("regression_penalty: empty group for rule on feature " +
                                     std::to_string(rules.rules[r].feature));
        const NodeId mean_hi = t.scale(t.sum(t.mul(t.constant(hi), y)), 1.0 / static_cast<double>(n_hi));
        const NodeId mean_lo = t.scale(t.sum(t.mul(t.constant(lo), y)), 1.0 / static_cast<double>(n_lo));
        dev = t.add(dev, t.square(t.add_scalar(mean_hi, -rules.rules[r].b_high)));
        dev = t.add(dev, t.square(t.add_scalar(mean_lo, -rules.rules[r].b_low)));
    }
    return t.add(total, t.scale(dev, cfg.lambda3));
}

NllTerm nll_term(Tape& t, const Eigen::MatrixXd& Z, NodeId logdets) {
    if (t.value(logdets).rows() != Z.rows() || t.value(logdets).cols() != 1)
        throw std::invalid_argument("nll_term: logdet batch shape mismatch");
    NllTerm out;
    Eigen::MatrixXd prior(1, 1);
    prior(0, 0) = gauss_log_density(Z).sum();
    out.log_prior = t.constant(prior);
    out.term = t.sub(t.sum(logdets), out.log_prior);
    return out;
}

ViolationReport violation_report(const Eigen::MatrixXd& Y, const ClassificationSignals& signals) {
    if (Y.cols() != 2) throw std::invalid_argument("violation_report: expected N x 2 labels");
    if (signals.count() != Y.rows())
        throw std::invalid_argument("violation_report: signals not aligned to labels");

    ViolationReport rep;
    rep.weak_slack.resize(signals.signal_count(), 2);
    for (int j = 0; j < 2; ++j) {
        for (Eigen::Index m = 0; m < signals.signal_count(); ++m) {
            double lhs = 0.0;
            long n_m = 0;
            for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                if (signals.is_null(i, m)) continue;
                const double qj = j == 1 ? signals.q(i, m) : 1.0 - signals.q(i, m);
                lhs += (1.0 - Y(i, j)) * qj + Y(i, j) * (1.0 - qj);
                ++n_m;
            }
            const double slack = lhs - static_cast<double>(n_m) * signals.bounds(m, j);
            rep.weak_slack(m, j) = slack;
            rep.weak_total += std::max(slack, 0.0);
        }
    }
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        for (int j = 0; j < 2; ++j) {
            rep.box_total += std::max(-Y(i, j), 0.0) + std::max(Y(i, j) - 1.0, 0.0);
        }
        rep.simplex_total += std::abs(Y(i, 0) + Y(i, 1) - 1.0);
    }
    return rep;
}

ViolationReport violation_report_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_rows,
                                            const RegressionRuleSignals& rules) {
    if (X_rows.rows() != y.size())
        throw std::invalid_argument("violation_report_regression: rows not aligned");
    ViolationReport rep;
    rep.weak_slack.resize(static_cast<Eigen::Index>(rules.rules.size()), 2);
    const auto masks = rules.high_masks(X_rows);
    for (std::size_t r = 0; r < rules.rules.size(); ++r) {
        double sum_hi = 0.0, sum_lo = 0.0;
        long n_hi = 0, n_lo = 0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (masks[r][static_cast<std::size_t>(i)]) {
                sum_hi += y(i);
                ++n_hi;
            } else {
                sum_lo += y(i);
                ++n_lo;
            }
        }
        const double dev_hi = n_hi > 0 ? sum_hi / n_hi - rules.rules[r].b_high : 0.0;
        const double dev_lo = n_lo > 0 ? sum_lo / n_lo - rules.rules[r].b_low : 0.0;
        rep.weak_slack(static_cast<Eigen::Index>(r), 0) = dev_hi;
        rep.weak_slack(static_cast<Eigen::Index>(r), 1) = dev_lo;
        rep.weak_total += std::abs(dev_hi) + std::abs(dev_lo);
    }
    for (Eigen::Index i = 0; i < y.size(); ++i)
        rep.box_total += std::max(-y(i), 0.0) + std::max(y(i) - 1.0, 0.0);
    return rep;
}

} // namespace llf
