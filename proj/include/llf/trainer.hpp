#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llf/flows.hpp"
#include "llf/objectives.hpp"
#include "llf/weak_signals.hpp"

namespace llf {

struct TrainConfig {
    int max_epochs = 2000;
    double lr0 = 1e-3;
    double decay = 0.996;
    int L_t = 1; // prior draws per sample per epoch
    std::uint64_t seed = 0;
    int stop_window = 10;
    double stop_rel_tol = 1e-6;
    PenaltyConfig penalty;
};

struct RunResult {
    std::vector<double> loss_trace;      // one entry per executed epoch
    std::vector<double> violation_trace; // weak-signal violation total per epoch
    int epochs = 0;
    double wall_seconds = 0.0;
    bool aborted = false;
    int abort_epoch = -1;
    std::string abort_reason;
};

// Training inputs: feature rows of the training split (already in the
// conditioning representation) plus the weak supervision for those rows.
// Regression rule thresholds apply to raw feature values, so X_rules carries
// the unstandardized rows; empty means X is already raw.
struct TrainInputs {
    Eigen::MatrixXd X;
    Eigen::MatrixXd X_rules;
    const ClassificationSignals* signals = nullptr; // classification, aligned to X rows
    const RegressionRuleSignals* rules = nullptr;   // regression
};

// Full-batch inverse-flow training: every epoch draws fresh z ~ N(0, I) for
// each training sample, evaluates the generated labels, takes one Adam step
// on nll + penalty, and decays the step size. Stops early once the best loss
// has not improved by stop_rel_tol (relative) for stop_window epochs. A
// non-finite loss or gradient aborts the run and restores the last parameters
// that evaluated finite.
RunResult train_llf(FlowModel& model, const TrainInputs& in, const TrainConfig& cfg);

// Ablation: penalty terms only.
RunResult train_llf_wo_nll(FlowModel& model, const TrainInputs& in, const TrainConfig& cfg);

// Sample-average prediction (L_p prior draws per sample).
struct Prediction {
    Eigen::MatrixXd soft;   // N x label_dim mean generated labels
    Eigen::VectorXd label;  // classification: argmax in {0,1}; regression: original scale
};
Prediction predict(const FlowModel& model, const Eigen::MatrixXd& X, int L_p, std::uint64_t seed,
                   const LabelScaler* scaler = nullptr);

// argmax over the two label dimensions, exact ties to the positive class
Eigen::VectorXd soft_to_class(const Eigen::MatrixXd& soft);

// Downstream classifier for the two-stage variant: one hidden tanh layer
// (width 512), softmax output, cross-entropy on soft targets, Adam 1e-3,
// 200 full-batch epochs.
class TwoStageClassifier {
public:
    TwoStageClassifier(int feature_dim, int hidden = 512);

    void train(const Eigen::MatrixXd& X, const Eigen::MatrixXd& soft_targets, std::uint64_t seed,
               int epochs = 200, double lr = 1e-3);
    // positive-class probability per row
    Eigen::VectorXd predict_prob(const Eigen::MatrixXd& X) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const; // argmax, ties positive

private:
    ParamStore params_;
    Mlp net_;
};

// Accuracy in percent for {0,1} labels, or root mean squared error.
double accuracy_percent(const Eigen::VectorXd& pred, const Eigen::VectorXd& gold);
double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& gold);
double evaluate(const Eigen::VectorXd& pred, const Eigen::VectorXd& gold, Task task);

} // namespace llf
