#include "llf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "llf/adam.hpp"

namespace llf {

RunResult train_llf(FlowModel& model, const TrainInputs& in, const TrainConfig& cfg) {
    const Task task = model.config().task;
    if (task == Task::Classification && (!in.signals || in.signals->count() != in.X.rows()))
        throw std::invalid_argument("train_llf: classification signals missing or misaligned");
    if (task == Task::Regression && (!in.rules || in.rules->rules.empty()))
        throw std::invalid_argument("train_llf: regression rules missing");
    if (in.X.rows() == 0) throw std::invalid_argument("train_llf: empty training split");
    if (cfg.L_t != 1) throw std::invalid_argument("train_llf: only L_t = 1 is supported");

    const auto t_start = std::chrono::steady_clock::now();
    const Eigen::Index n = in.X.rows();
    const int d = model.config().label_dim();

    const Eigen::MatrixXd& X_rules = in.X_rules.size() > 0 ? in.X_rules : in.X;
    if (X_rules.rows() != n) throw std::invalid_argument("train_llf: rule feature rows misaligned");

    Tape tape(&model.params());
    const NodeId x_node = tape.constant(in.X);
    const NodeId z_node = tape.constant(Eigen::MatrixXd::Zero(n, d));
    const FlowModel::TapeGen gen = model.build_generate(tape, x_node, z_node);
    const NllTerm nll = nll_term(tape, Eigen::MatrixXd::Zero(n, d), gen.logdet);

    NodeId penalty;
    if (task == Task::Classification)
        penalty = classification_penalty(tape, gen.y_cols, *in.signals, cfg.penalty);
    else
        penalty = regression_penalty(tape, gen.y_cols[0], *in.rules, X_rules, cfg.penalty);
    const NodeId loss_node = cfg.penalty.include_nll ? tape.add(nll.term, penalty) : penalty;

    AdamState adam(model.params().total_dim(), cfg.lr0, cfg.decay);
    Rng z_rng(derive_seed(cfg.seed, "epoch-z"));

    RunResult result;
    std::vector<double> last_good = model.params().values();
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    Eigen::MatrixXd prior(1, 1);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const Eigen::MatrixXd Z = draw_gaussian(n, d, z_rng);
        tape.set_constant(z_node, Z);
        prior(0, 0) = gauss_log_density(Z).sum();
        tape.set_constant(nll.log_prior, prior);

        double loss;
        std::vector<double> grad;
        try {
            loss = tape.forward(loss_node);
            grad = tape.backward(loss_node);
        } catch (const std::exception& e) {
            model.params().values() = last_good;
            result.aborted = true;
            result.abort_epoch = epoch;
            result.abort_reason = e.what();
            break;
        }

        result.loss_trace.push_back(loss);
        if (task == Task::Classification) {
            Eigen::MatrixXd Y(n, 2);
            Y.col(0) = tape.value(gen.y_cols[0]);
            Y.col(1) = tape.value(gen.y_cols[1]);
            result.violation_trace.push_back(violation_report(Y, *in.signals).weak_total);
        } else {
            const Eigen::VectorXd y = tape.value(gen.y_cols[0]).col(0);
            result.violation_trace.push_back(
                violation_report_regression(y, X_rules, *in.rules).weak_total);
        }

        last_good = model.params().values();
        try {
            adam_step(model.params(), grad, adam, adam.lr_at_epoch(epoch));
        } catch (const std::exception& e) {
            model.params().values() = last_good;
            result.aborted = true;
            result.abort_epoch = epoch;
            result.abort_reason = e.what();
            break;
        }

        // plateau rule on the trailing-window mean: the fresh prior draw makes
        // the raw loss noisy, so single-epoch minima say little about the
        // trend. Stop once the smoothed loss has not improved relatively by
        // stop_rel_tol for stop_window consecutive epochs.
        if (static_cast<int>(result.loss_trace.size()) >= cfg.stop_window) {
            double smoothed = 0.0;
            for (int k = 0; k < cfg.stop_window; ++k)
                smoothed += result.loss_trace[result.loss_trace.size() - 1 - static_cast<std::size_t>(k)];
            smoothed /= cfg.stop_window;
            if (!std::isfinite(best) || smoothed < best - cfg.stop_rel_tol * std::max(1.0, std::abs(best))) {
                best = smoothed;
                stale = 0;
            } else {
                ++stale;
            }
            if (stale >= cfg.stop_window) break;
        }
    }

    result.epochs = static_cast<int>(result.loss_trace.size());
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

RunResult train_llf_wo_nll(FlowModel& model, const TrainInputs& in, const TrainConfig& cfg) {
    TrainConfig ablated = cfg;
    ablated.penalty.include_nll = false;
    return train_llf(model, in, ablated);
}

Prediction predict(const FlowModel& model, const Eigen::MatrixXd& X, int L_p, std::uint64_t seed,
                   const LabelScaler* scaler) {
    Rng rng(derive_seed(seed, "predict"));
    Prediction pred;
    pred.soft = model.sample_labels(X, L_p, rng);
    pred.label.resize(X.rows());
    if (model.config().task == Task::Classification) {
        pred.label = soft_to_class(pred.soft);
    } else {
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double y = std::min(std::max(pred.soft(i, 0), 0.0), 1.0);
            pred.label(i) = scaler ? scaler->denormalize(y) : y;
        }
    }
    return pred;
}

TwoStageClassifier::TwoStageClassifier(int feature_dim, int hidden)
    : net_(Mlp::create(params_, "ts", {{feature_dim, hidden, 2}})) {}

void TwoStageClassifier::train(const Eigen::MatrixXd& X, const Eigen::MatrixXd& soft_targets,
                               std::uint64_t seed, int epochs, double lr) {
    if (soft_targets.rows() != X.rows() || soft_targets.cols() != 2)
        throw std::invalid_argument("TwoStageClassifier::train: target shape mismatch");

    Rng rng(derive_seed(seed, "two-stage-init"));
    net_.init(params_, rng, 0.01);

    // soft targets: clamp to [0,1] and renormalize rows
    Eigen::MatrixXd T(X.rows(), 2);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double t0 = std::min(std::max(soft_targets(i, 0), 0.0), 1.0);
        double t1 = std::min(std::max(soft_targets(i, 1), 0.0), 1.0);
        const double s = t0 + t1;
        if (s < 1e-12) {
            t0 = t1 = 0.5;
        } else {
            t0 /= s;
            t1 /= s;
        }
        T(i, 0) = t0;
        T(i, 1) = t1;
    }

    Tape tape(&params_);
    const NodeId x_node = tape.constant(X);
    const NodeId logits = net_.build(tape, x_node);
    // two-class softmax via the logit difference; clamp keeps log() finite
    const NodeId u = tape.clamp(tape.sub(tape.col(logits, 1), tape.col(logits, 0)), -30.0, 30.0);
    const NodeId p1 = tape.add_scalar(tape.scale(tape.tanh(tape.scale(u, 0.5)), 0.5), 0.5);
    const NodeId p0 = tape.add_scalar(tape.scale(p1, -1.0), 1.0);
    const NodeId ce = tape.scale(tape.add(tape.sum(tape.mul(tape.constant(T.col(1)), tape.log(p1))),
                                          tape.sum(tape.mul(tape.constant(T.col(0)), tape.log(p0)))),
                                 -1.0);

    AdamState adam(params_.total_dim(), lr, 1.0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        tape.forward(ce);
        adam_step(params_, tape.backward(ce), adam, lr);
    }
}

Eigen::VectorXd TwoStageClassifier::predict_prob(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd logits = net_.eval(params_, X);
    Eigen::VectorXd p(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double u = std::min(std::max(logits(i, 1) - logits(i, 0), -30.0), 30.0);
        p(i) = 0.5 * (1.0 + std::tanh(0.5 * u));
    }
    return p;
}

Eigen::VectorXd TwoStageClassifier::predict(const Eigen::MatrixXd& X) const {
    const Eigen::VectorXd p = predict_prob(X);
    Eigen::VectorXd label(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) label(i) = p(i) >= 0.5 ? 1.0 : 0.0;
    return label;
}

Eigen::VectorXd soft_to_class(const Eigen::MatrixXd& soft) {
    if (soft.cols() != 2) throw std::invalid_argument("soft_to_class: expected 2 label dimensions");
    Eigen::VectorXd label(soft.rows());
    for (Eigen::Index i = 0; i < soft.rows(); ++i) label(i) = soft(i, 1) >= soft(i, 0) ? 1.0 : 0.0;
    return label;
}

double accuracy_percent(const Eigen::VectorXd& pred, const Eigen::VectorXd& gold) {
    if (pred.size() != gold.size()) throw std::invalid_argument("accuracy_percent: length mismatch");
    if (pred.size() == 0) throw std::invalid_argument("accuracy_percent: empty inputs");
    long hits = 0;
    for (Eigen::Index i = 0; i < pred.size(); ++i)
        if ((pred(i) >= 0.5) == (gold(i) >= 0.5)) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& gold) {
    if (pred.size() != gold.size()) throw std::invalid_argument("rmse: length mismatch");
    if (pred.size() == 0) throw std::invalid_argument("rmse: empty inputs");
    return std::sqrt((pred - gold).squaredNorm() / static_cast<double>(pred.size()));
}

double evaluate(const Eigen::VectorXd& pred, const Eigen::VectorXd& gold, Task task) {
    return task == Task::Classification ? accuracy_percent(pred, gold) : rmse(pred, gold);
}

} // namespace llf
