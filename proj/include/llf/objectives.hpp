#pragma once

#include <vector>

#include <Eigen/Dense>

#include "llf/tape.hpp"
#include "llf/weak_signals.hpp"

namespace llf {

// Penalty coefficients for the reformulated constraints. lambda1/lambda2
// weight the box terms, lambda3 the simplex (classification) or group-mean
// (regression) terms, lambda4 the weak-signal hinge terms.
struct PenaltyConfig {
    double lambda1 = 10.0;
    double lambda2 = 10.0;
    double lambda3 = 10.0;
    double lambda4 = 10.0;
    bool include_nll = true;
    // Audit switch: use the box terms exactly as printed ([y]_+^2 and
    // [1-y]_+^2), which penalize values inside [0,1]. The default corrected
    // form penalizes y < 0 and y > 1.
    bool literal_box = false;
};

// Classification penalty on generated labels. y_cols are the two N x 1 label
// columns on the tape; signals must be restricted to the same N rows. The
// weak-signal term hinges
//   sum_i (1 - y_i^j) q_{i,m}^j + y_i^j (1 - q_{i,m}^j)  <=  N_m b_m^j
// per signal m and class j, skipping null entries. All penalty constants are
// baked at build time, so the node can be re-run each epoch.
NodeId classification_penalty(Tape& tape, const std::vector<NodeId>& y_cols,
                              const ClassificationSignals& signals, const PenaltyConfig& cfg);

// Regression penalty: box terms plus squared deviations of the per-rule group
// means from their estimates. X_rows supplies the feature values (aligned to
// y) used to recompute the group masks.
NodeId regression_penalty(Tape& tape, NodeId y, const RegressionRuleSignals& rules,
                          const Eigen::MatrixXd& X_rows, const PenaltyConfig& cfg);

// Negative log-likelihood of the inverse-flow objective:
//   -(sum_i log N(z_i) - sum_i logdet_i).
// The prior term is constant in the parameters (z is drawn from the prior),
// so it enters through a constant node the trainer refreshes together with z.
struct NllTerm {
    NodeId term;      // scalar node
    NodeId log_prior; // 1 x 1 constant holding sum_i log N(z_i)
};
NllTerm nll_term(Tape& tape, const Eigen::MatrixXd& Z, NodeId logdets);

// Unweighted constraint diagnostics for monitoring; zero iff all constraints
// hold on the given labels.
struct ViolationReport {
    Eigen::MatrixXd weak_slack; // per (m, j) or per (rule, side): LHS - RHS
    double weak_total = 0.0;    // hinge slacks (classification) / abs deviations (regression)
    double box_total = 0.0;     // sum of [-y]_+ and [y-1]_+
    double simplex_total = 0.0; // sum of |row sum - 1| (classification only)

    double total() const { return weak_total + box_total + simplex_total; }
};

ViolationReport violation_report(const Eigen::MatrixXd& Y, const ClassificationSignals& signals);
ViolationReport violation_report_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_rows,
                                            const RegressionRuleSignals& rules);

} // namespace llf
