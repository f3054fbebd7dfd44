#include "llf/weak_signals.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace llf {

namespace {
const double kNull = std::numeric_limits<double>::quiet_NaN();

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}
} // namespace

Eigen::VectorXi ClassificationSignals::coverage() const {
    Eigen::VectorXi cov = Eigen::VectorXi::Zero(q.cols());
    for (Eigen::Index m = 0; m < q.cols(); ++m)
        for (Eigen::Index i = 0; i < q.rows(); ++i)
            if (!std::isnan(q(i, m))) ++cov(m);
    return cov;
}

ClassificationSignals ClassificationSignals::rows(const std::vector<Eigen::Index>& idx) const {
    ClassificationSignals out;
    out.q.resize(static_cast<Eigen::Index>(idx.size()), q.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.q.row(static_cast<Eigen::Index>(i)) = q.row(idx[i]);
    out.bounds = bounds;
    return out;
}

void ClassificationSignals::validate() const {
    if (bounds.rows() != q.cols() || bounds.cols() != 2)
        throw std::runtime_error("signals: bounds must be M x 2");
    for (Eigen::Index m = 0; m < q.cols(); ++m)
        for (int j = 0; j < 2; ++j)
            if (!(bounds(m, j) >= 0.0 && bounds(m, j) <= 1.0))
                throw std::runtime_error("signals: bound out of [0,1] for signal " + std::to_string(m + 1));
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index m = 0; m < q.cols(); ++m) {
            const double v = q(i, m);
            if (!std::isnan(v) && !(v >= 0.0 && v <= 1.0))
                throw std::runtime_error("signals: probability out of [0,1] at row " + std::to_string(i + 1) +
                                         ", signal " + std::to_string(m + 1));
        }
}

std::vector<std::vector<bool>> RegressionRuleSignals::high_masks(const Eigen::MatrixXd& X) const {
    std::vector<std::vector<bool>> masks;
    for (const RegressionRule& r : rules) {
        std::vector<bool> m(static_cast<std::size_t>(X.rows()));
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            m[static_cast<std::size_t>(i)] = X(i, r.feature) >= r.threshold;
        masks.push_back(std::move(m));
    }
    return masks;
}

LabelScaler::LabelScaler(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(hi > lo)) throw std::invalid_argument("LabelScaler: upper bound must exceed lower bound");
}

Eigen::VectorXd LabelScaler::normalize(const Eigen::VectorXd& y) const {
    return (y.array() - lo) / (hi - lo);
}

Eigen::VectorXd LabelScaler::denormalize(const Eigen::VectorXd& y) const {
    return y.array() * (hi - lo) + lo;
}

double LogisticLabeler::predict_prob(double x) const { return sigmoid(w * (x - mu) / sigma + c); }

LogisticLabeler fit_logistic_labeler(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int feature) {
    const Eigen::Index n = x.size();
    if (n == 0 || y.size() != n) throw std::invalid_argument("fit_logistic_labeler: bad inputs");

    LogisticLabeler lab;
    lab.feature = feature;
    lab.mu = x.mean();
    const double var = (x.array() - lab.mu).square().mean();
    if (var < 1e-24)
        throw std::runtime_error("degenerate feature " + std::to_string(feature) +
                                 ": zero variance on the sim split");
    lab.sigma = std::sqrt(var);

    const Eigen::ArrayXd u = (x.array() - lab.mu) / lab.sigma;
    const Eigen::ArrayXd t = y.array();
    double w = 0.0, c = 0.0;
    const int iters = 2000;
    const double step = 0.1;
    for (int it = 0; it < iters; ++it) {
        Eigen::ArrayXd p(n);
        for (Eigen::Index i = 0; i < n; ++i) p(i) = sigmoid(w * u(i) + c);
        const Eigen::ArrayXd r = p - t;
        w -= step * (r * u).mean();
        c -= step * r.mean();
    }
    lab.w = w;
    lab.c = c;
    return lab;
}

ClassificationSignals synth_classification_signals(const TabularDataset& data,
                                                   const SplitAssignment& split,
                                                   const std::vector<int>& feature_idxs) {
    if (!data.has_labels()) throw std::runtime_error("synth_classification_signals: dataset has no labels");
    if (split.rows.size() != static_cast<std::size_t>(data.size()))
        throw std::runtime_error("synth_classification_signals: split size mismatch");
    const std::vector<Eigen::Index> sim = split.indices(Split::Sim);
    if (sim.empty()) throw std::runtime_error("synth_classification_signals: empty sim split");
    for (int f : feature_idxs)
        if (f < 0 || f >= data.dim())
            throw std::runtime_error("synth_classification_signals: feature index " + std::to_string(f) +
                                     " out of range");

    const Eigen::VectorXd y_sim = take_rows(*data.labels, sim);
    const Eigen::Index M = static_cast<Eigen::Index>(feature_idxs.size());

    ClassificationSignals sig;
    sig.q.resize(data.size(), M);
    sig.bounds.resize(M, 2);
    for (Eigen::Index m = 0; m < M; ++m) {
        const int f = feature_idxs[static_cast<std::size_t>(m)];
        Eigen::VectorXd x_sim(sim.size());
        for (std::size_t i = 0; i < sim.size(); ++i) x_sim(static_cast<Eigen::Index>(i)) = data.X(sim[i], f);
        const LogisticLabeler lab = fit_logistic_labeler(x_sim, y_sim, f);

        for (Eigen::Index i = 0; i < data.size(); ++i) sig.q(i, m) = lab.predict_prob(data.X(i, f));

        // per-class error rate of the hard-thresholded labeler on the sim split
        long n_class[2] = {0, 0};
        long n_err[2] = {0, 0};
        for (std::size_t i = 0; i < sim.size(); ++i) {
            const int gold = y_sim(static_cast<Eigen::Index>(i)) >= 0.5 ? 1 : 0;
            const int pred = lab.predict_prob(data.X(sim[i], f)) >= 0.5 ? 1 : 0;
            ++n_class[gold];
            if (pred != gold) ++n_err[gold];
        }
        for (int j = 0; j < 2; ++j)
            sig.bounds(m, j) = n_class[j] > 0 ? static_cast<double>(n_err[j]) / static_cast<double>(n_class[j])
                                              : 0.0;
    }
    sig.validate();
    return sig;
}

RegressionRuleSignals synth_regression_signals(const TabularDataset& data, const SplitAssignment& split,
                                               const std::vector<int>& feature_idxs,
                                               const LabelScaler& scaler,
                                               std::vector<std::string>* warnings) {
    if (!data.has_labels()) throw std::runtime_error("synth_regression_signals: dataset has no labels");
    if (split.rows.size() != static_cast<std::size_t>(data.size()))
        throw std::runtime_error("synth_regression_signals: split size mismatch");
    const std::vector<Eigen::Index> sim = split.indices(Split::Sim);
    const std::vector<Eigen::Index> train = split.indices(Split::Train);
    if (sim.empty() || train.empty())
        throw std::runtime_error("synth_regression_signals: empty sim or train split");

    RegressionRuleSignals out;
    for (int f : feature_idxs) {
        if (f < 0 || f >= data.dim())
            throw std::runtime_error("synth_regression_signals: feature index " + std::to_string(f) +
                                     " out of range");
        RegressionRule rule;
        rule.feature = f;
        double mean = 0.0;
        for (Eigen::Index i : sim) mean += data.X(i, f);
        rule.threshold = mean / static_cast<double>(sim.size());

        double sum_hi = 0.0, sum_lo = 0.0;
        long n_hi = 0, n_lo = 0;
        for (Eigen::Index i : sim) {
            const double yn = scaler.normalize((*data.labels)(i));
            if (data.X(i, f) >= rule.threshold) {
                sum_hi += yn;
                ++n_hi;
            } else {
                sum_lo += yn;
                ++n_lo;
            }
        }
        if (n_hi == 0 || n_lo == 0) {
            const std::string msg = "rule on feature " + std::to_string(f) +
                                    " dropped: one-sided threshold on the sim split";
            if (warnings) warnings->push_back(msg);
            std::cerr << "warning: " << msg << "\n";
            continue;
        }
        rule.b_high = sum_hi / static_cast<double>(n_hi);
        rule.b_low = sum_lo / static_cast<double>(n_lo);

        long t_hi = 0, t_lo = 0;
        for (Eigen::Index i : train) (data.X(i, f) >= rule.threshold ? t_hi : t_lo)++;
        if (t_hi == 0 || t_lo == 0) {
            const std::string msg = "rule on feature " + std::to_string(f) +
                                    " dropped: empty group on the training split";
            if (warnings) warnings->push_back(msg);
            std::cerr << "warning: " << msg << "\n";
            continue;
        }
        out.rules.push_back(rule);
    }
    return out;
}

namespace {
std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}
} // namespace

ClassificationSignals load_signals(const std::string& path, const std::string& bounds_path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open signals file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty signals file: " + path);
    const std::size_t M = split_cells(line).size();

    std::vector<double> flat;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_cells(line);
        if (cells.size() != M)
            throw std::runtime_error("signals file " + path + " row " + std::to_string(row) +
                                     ": cell count mismatch");
        for (const std::string& cell : cells) {
            if (cell.empty()) {
                flat.push_back(kNull);
                continue;
            }
            errno = 0;
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0' || errno == ERANGE)
                throw std::runtime_error("signals file " + path + " row " + std::to_string(row) +
                                         ": bad value '" + cell + "'");
            flat.push_back(v);
        }
    }

    ClassificationSignals sig;
    const Eigen::Index n = static_cast<Eigen::Index>(flat.size() / M);
    sig.q.resize(n, static_cast<Eigen::Index>(M));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index m = 0; m < sig.q.cols(); ++m)
            sig.q(i, m) = flat[static_cast<std::size_t>(i) * M + static_cast<std::size_t>(m)];

    sig.bounds = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(M), 2, 0.01);
    if (!bounds_path.empty()) {
        std::ifstream bin(bounds_path);
        if (!bin) throw std::runtime_error("cannot open bounds file: " + bounds_path);
        for (Eigen::Index m = 0; m < sig.bounds.rows(); ++m) {
            if (!std::getline(bin, line))
                throw std::runtime_error("bounds file " + bounds_path + ": expected " + std::to_string(M) +
                                         " rows");
            const std::vector<std::string> cells = split_cells(line);
            if (cells.size() != 2)
                throw std::runtime_error("bounds file " + bounds_path + " row " + std::to_string(m + 1) +
                                         ": expected 2 columns");
            sig.bounds(m, 0) = std::strtod(cells[0].c_str(), nullptr);
            sig.bounds(m, 1) = std::strtod(cells[1].c_str(), nullptr);
        }
    }
    sig.validate();
    return sig;
}

void save_signals(const ClassificationSignals& signals, const std::string& path,
                  const std::string& bounds_path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write signals file: " + path);
    for (Eigen::Index m = 0; m < signals.q.cols(); ++m) {
        if (m) out << ',';
        out << "signal_" << (m + 1);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < signals.q.rows(); ++i) {
        for (Eigen::Index m = 0; m < signals.q.cols(); ++m) {
            if (m) out << ',';
            if (!signals.is_null(i, m)) out << format_double(signals.q(i, m));
        }
        out << '\n';
    }
    if (!bounds_path.empty()) {
        std::ofstream bout(bounds_path);
        if (!bout) throw std::runtime_error("cannot write bounds file: " + bounds_path);
        for (Eigen::Index m = 0; m < signals.bounds.rows(); ++m)
            bout << format_double(signals.bounds(m, 0)) << ',' << format_double(signals.bounds(m, 1)) << '\n';
    }
}

Eigen::VectorXd avg_scores(const ClassificationSignals& signals) {
    Eigen::VectorXd s(signals.q.rows());
    for (Eigen::Index i = 0; i < signals.q.rows(); ++i) {
        double acc = 0.0;
        int k = 0;
        for (Eigen::Index m = 0; m < signals.q.cols(); ++m) {
            if (signals.is_null(i, m)) continue;
            acc += signals.q(i, m);
            ++k;
        }
        s(i) = k > 0 ? acc / k : 0.5; // all-null samples fall back to the tie score
    }
    return s;
}

Eigen::VectorXd avg_predict_classification(const ClassificationSignals& signals) {
    const Eigen::VectorXd s = avg_scores(signals);
    Eigen::VectorXd pred(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) pred(i) = s(i) >= 0.5 ? 1.0 : 0.0;
    return pred;
}

Eigen::VectorXd avg_predict_regression(const Eigen::MatrixXd& X, const RegressionRuleSignals& rules) {
    if (rules.rules.empty()) throw std::runtime_error("avg_predict_regression: no rules");
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(X.rows());
    for (const RegressionRule& r : rules.rules)
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            pred(i) += X(i, r.feature) >= r.threshold ? r.b_high : r.b_low;
    return pred / static_cast<double>(rules.rules.size());
}

} // namespace llf
