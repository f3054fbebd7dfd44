#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llf/dataset.hpp"

namespace llf {

// Soft weak labels for binary classification. q(i, m) is labeler m's
// positive-class probability for row i, NaN marking a null (abstained) entry.
// The two-dimensional form is recovered as q^[1] = q, q^[0] = 1 - q.
// bounds(m, j) is the error-rate bound of labeler m for class j.
struct ClassificationSignals {
    Eigen::MatrixXd q;      // N x M, NaN = null
    Eigen::MatrixXd bounds; // M x 2

    Eigen::Index count() const { return q.rows(); }
    Eigen::Index signal_count() const { return q.cols(); }
    bool is_null(Eigen::Index i, Eigen::Index m) const { return std::isnan(q(i, m)); }

    // Non-null entries per signal over the stored rows.
    Eigen::VectorXi coverage() const;

    // Row subset with the same bounds; used to restrict signals to a split.
    ClassificationSignals rows(const std::vector<Eigen::Index>& idx) const;

    void validate() const;
};

// Threshold rule for weakly supervised regression: rows with
// x[feature] >= threshold have estimated mean label b_high, the rest b_low
// (estimates live in the normalized [0,1] label space).
struct RegressionRule {
    int feature = 0;
    double threshold = 0.0;
    double b_high = 0.0;
    double b_low = 0.0;
};

struct RegressionRuleSignals {
    std::vector<RegressionRule> rules;

    // Per-rule membership of the high-side group for the given rows.
    std::vector<std::vector<bool>> high_masks(const Eigen::MatrixXd& X) const;
};

// Affine map between the original label range [lo, hi] and [0, 1].
struct LabelScaler {
    double lo = 0.0;
    double hi = 1.0;

    LabelScaler() = default;
    LabelScaler(double lo_, double hi_);

    double normalize(double y) const { return (y - lo) / (hi - lo); }
    double denormalize(double y) const { return y * (hi - lo) + lo; }
    Eigen::VectorXd normalize(const Eigen::VectorXd& y) const;
    Eigen::VectorXd denormalize(const Eigen::VectorXd& y) const;
};

// One-feature logistic labeler fitted by full-batch gradient descent
// (2000 iterations, step 0.1) on the sim split, inputs z-scored with
// sim-split statistics.
struct LogisticLabeler {
    int feature = 0;
    double mu = 0.0;
    double sigma = 1.0;
    double w = 0.0;
    double c = 0.0;

    double predict_prob(double x) const;
};

LogisticLabeler fit_logistic_labeler(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int feature);

// Fit one logistic labeler per chosen feature on the sim split, emit its
// probabilities for every dataset row, and estimate per-class error bounds on
// the sim split: bounds(m, j) = (# sim rows of class j misclassified by m) /
// (# sim rows of class j), with 0 for a class absent from the sim split.
ClassificationSignals synth_classification_signals(const TabularDataset& data,
                                                   const SplitAssignment& split,
                                                   const std::vector<int>& feature_idxs);

// Threshold rules from the sim split: threshold = sim mean of the feature,
// b_high/b_low = mean normalized sim label on each side. Rules whose high or
// low group is empty on the training split are dropped with a warning.
RegressionRuleSignals synth_regression_signals(const TabularDataset& data,
                                               const SplitAssignment& split,
                                               const std::vector<int>& feature_idxs,
                                               const LabelScaler& scaler,
                                               std::vector<std::string>* warnings = nullptr);

// Signals CSV: header signal_1..signal_M, one row per covered sample, empty
// cell = null. The optional bounds sidecar holds M rows x 2 columns; when
// absent every bound defaults to 0.01.
ClassificationSignals load_signals(const std::string& path, const std::string& bounds_path = "");
void save_signals(const ClassificationSignals& signals, const std::string& path,
                  const std::string& bounds_path = "");

// AVG baseline, classification: per-sample mean of non-null positive-class
// probabilities (0.5 when all signals are null).
Eigen::VectorXd avg_scores(const ClassificationSignals& signals);
// Thresholded at 0.5, ties to the positive class.
Eigen::VectorXd avg_predict_classification(const ClassificationSignals& signals);

// AVG baseline, regression (normalized space): per-sample mean over rules of
// the applicable side estimate.
Eigen::VectorXd avg_predict_regression(const Eigen::MatrixXd& X, const RegressionRuleSignals& rules);

} // namespace llf
