#include "llf/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "llf/rng.hpp"

namespace llf {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_known_method(const std::string& method) {
    return method == "llf" || method == "llf_wo_nll" || method == "llf_ts" || method == "avg";
}

const MethodAggregate* ExperimentResult::find(const std::string& method) const {
    for (const MethodAggregate& a : aggregates)
        if (a.method == method) return &a;
    return nullptr;
}

namespace {

struct Prepared {
    TabularDataset data;
    SplitAssignment split;
    std::vector<Eigen::Index> train_idx, sim_idx, test_idx;
    Eigen::MatrixXd X_train_cond, X_test_cond; // conditioning representation
    Eigen::MatrixXd X_train_raw, X_test_raw;
    Eigen::VectorXd gold_test;
    std::optional<Standardizer> standardizer;

    // classification
    std::optional<ClassificationSignals> signals_all;   // synthesized, dataset rows
    std::optional<ClassificationSignals> signals_train; // aligned to train rows
    bool signals_cover_test = false;

    // regression
    std::optional<LabelScaler> scaler;
    std::optional<RegressionRuleSignals> rules;
};

Prepared prepare(const ExperimentConfig& cfg, const TabularDataset* preloaded) {
    Prepared prep;
    prep.data = preloaded ? *preloaded : load_dataset_csv(cfg.dataset_path);
    if (!prep.data.has_labels())
        throw std::runtime_error("experiment: dataset has no gold labels to evaluate against");

    prep.split = cfg.split_path.empty()
                     ? make_split(prep.data.size(), cfg.ratio_train, cfg.ratio_sim, cfg.ratio_test,
                                  cfg.split_seed)
                     : load_split_file(cfg.split_path);
    if (prep.split.rows.size() != static_cast<std::size_t>(prep.data.size()))
        throw std::runtime_error("experiment: split length does not match the dataset");

    prep.train_idx = prep.split.indices(Split::Train);
    prep.sim_idx = prep.split.indices(Split::Sim);
    prep.test_idx = prep.split.indices(Split::Test);
    if (prep.train_idx.empty() || prep.test_idx.empty())
        throw std::runtime_error("experiment: empty train or test split");

    prep.X_train_raw = take_rows(prep.data.X, prep.train_idx);
    prep.X_test_raw = take_rows(prep.data.X, prep.test_idx);
    if (cfg.standardize) {
        prep.standardizer = Standardizer::fit(prep.data.X, prep.train_idx);
        prep.X_train_cond = prep.standardizer->transform(prep.X_train_raw);
        prep.X_test_cond = prep.standardizer->transform(prep.X_test_raw);
    } else {
        prep.X_train_cond = prep.X_train_raw;
        prep.X_test_cond = prep.X_test_raw;
    }
    prep.gold_test = take_rows(*prep.data.labels, prep.test_idx);

    if (cfg.task == Task::Classification) {
        if (!cfg.signals_path.empty()) {
            ClassificationSignals sig = load_signals(cfg.signals_path, cfg.bounds_path);
            if (sig.count() != static_cast<Eigen::Index>(prep.train_idx.size()))
                throw std::runtime_error("experiment: external signals must have one row per training sample");
            prep.signals_train = std::move(sig);
            prep.signals_cover_test = false;
        } else {
            if (cfg.signal_features.empty())
                throw std::runtime_error("experiment: no signal features configured");
            prep.signals_all = synth_classification_signals(prep.data, prep.split, cfg.signal_features);
            prep.signals_train = prep.signals_all->rows(prep.train_idx);
            prep.signals_cover_test = true;
        }
    } else {
        const double lo = prep.data.labels->minCoeff();
        const double hi = prep.data.labels->maxCoeff();
        prep.scaler = LabelScaler(lo, hi);
        if (cfg.signal_features.empty())
            throw std::runtime_error("experiment: no signal features configured");
        prep.rules = synth_regression_signals(prep.data, prep.split, cfg.signal_features, *prep.scaler);
        if (prep.rules->rules.empty())
            throw std::runtime_error("experiment: all regression rules were dropped");
    }
    return prep;
}

FlowConfig flow_config(const ExperimentConfig& cfg, int feature_dim) {
    FlowConfig fc;
    fc.task = cfg.task;
    fc.feature_dim = feature_dim;
    fc.steps = cfg.steps;
    fc.hidden = cfg.hidden;
    fc.couplings_per_step = 2;
    return fc;
}

RunRecord run_one(const ExperimentConfig& cfg, const Prepared& prep, const std::string& method,
                  std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.dataset = cfg.name;
    rec.method = method;
    rec.seed = seed;

    const auto finish = [&](double metric) {
        rec.metric = metric;
        rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (method == "avg") {
        if (cfg.task == Task::Classification) {
            if (!prep.signals_cover_test) {
                rec.aborted = true;
                rec.abort_reason = "external signals cover the training split only";
                finish(0.0);
                return rec;
            }
            const Eigen::VectorXd pred = avg_predict_classification(prep.signals_all->rows(prep.test_idx));
            finish(accuracy_percent(pred, prep.gold_test));
        } else {
            const Eigen::VectorXd pred_norm = avg_predict_regression(prep.X_test_raw, *prep.rules);
            finish(rmse(prep.scaler->denormalize(pred_norm), prep.gold_test));
        }
        return rec;
    }

    // flow-based methods
    FlowModel model(flow_config(cfg, static_cast<int>(prep.data.dim())));
    model.init_params(seed);

    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.penalty.include_nll = method != "llf_wo_nll";

    TrainInputs in;
    in.X = prep.X_train_cond;
    if (cfg.task == Task::Classification) {
        in.signals = &*prep.signals_train;
    } else {
        in.rules = &*prep.rules;
        in.X_rules = prep.X_train_raw;
    }

    const RunResult train_res = train_llf(model, in, tc);
    rec.epochs = train_res.epochs;
    rec.loss_trace = train_res.loss_trace;
    rec.violation_trace = train_res.violation_trace;
    if (train_res.aborted) {
        rec.aborted = true;
        rec.abort_reason = "training aborted at epoch " + std::to_string(train_res.abort_epoch) + ": " +
                           train_res.abort_reason;
        finish(0.0);
        return rec;
    }

    const LabelScaler* scaler = prep.scaler ? &*prep.scaler : nullptr;
    if (method == "llf_ts") {
        const Prediction train_pred = predict(model, prep.X_train_cond, cfg.L_p, seed, scaler);
        TwoStageClassifier ts(static_cast<int>(prep.data.dim()));
        ts.train(prep.X_train_cond, train_pred.soft, seed);
        finish(accuracy_percent(ts.predict(prep.X_test_cond), prep.gold_test));
        return rec;
    }

    const Prediction pred = predict(model, prep.X_test_cond, cfg.L_p, seed, scaler);
    finish(evaluate(pred.label, prep.gold_test, cfg.task));
    return rec;
}

MethodAggregate aggregate_method(const std::string& method, const std::vector<RunRecord>& records) {
    MethodAggregate agg;
    agg.method = method;
    for (const RunRecord& r : records) {
        if (r.method != method) continue;
        if (r.aborted) {
            agg.complete = false;
            continue;
        }
        agg.values.push_back(r.metric);
    }
    if (!agg.values.empty()) {
        double s = 0.0;
        for (double v : agg.values) s += v;
        agg.mean = s / static_cast<double>(agg.values.size());
        double ss = 0.0;
        for (double v : agg.values) ss += (v - agg.mean) * (v - agg.mean);
        agg.stddev = std::sqrt(ss / static_cast<double>(agg.values.size()));
    }
    return agg;
}

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

} // namespace

TabularDataset make_synthetic_regression(Eigen::Index n, int dim, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("make_synthetic_regression: dim must be >= 1");
    Rng rng(derive_seed(seed, "synthetic-regression"));
    TabularDataset data;
    data.X.resize(n, dim);
    for (int j = 0; j < dim; ++j) data.feature_names.push_back("x" + std::to_string(j));

    Eigen::VectorXd w(dim);
    const double base[5] = {2.0, -1.2, 0.8, 1.6, -0.5};
    for (int j = 0; j < dim; ++j) w(j) = base[j % 5];

    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) data.X(i, j) = rng.uniform();
        y(i) = data.X.row(i).dot(w) + 0.05 * rng.normal();
    }
    data.labels = std::move(y);
    return data;
}

std::string render_results_jsonl(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    for (const RunRecord& r : records) {
        json j;
        j["dataset"] = r.dataset;
        j["method"] = r.method;
        j["seed"] = r.seed;
        j["metric"] = r.metric;
        j["epochs"] = r.epochs;
        j["wall_s"] = r.wall_s;
        if (r.aborted) {
            j["aborted"] = true;
            j["reason"] = r.abort_reason;
        }
        out << j.dump() << '\n';
    }
    return out.str();
}

std::string render_aggregate_text(const ExperimentConfig& cfg, const ExperimentResult& result) {
    std::ostringstream out;
    out << "# experiment: " << cfg.name << '\n';
    out << "# dataset: " << (cfg.dataset_path.empty() ? "(in-memory)" : cfg.dataset_path) << '\n';
    out << "# task: " << task_name(cfg.task) << '\n';
    if (cfg.split_path.empty())
        out << "# split: ratio " << cfg.ratio_train << ':' << cfg.ratio_sim << ':' << cfg.ratio_test
            << " seed " << cfg.split_seed << '\n';
    else
        out << "# split: file " << cfg.split_path << '\n';
    if (cfg.signals_path.empty()) {
        out << "# signals: features";
        for (int f : cfg.signal_features) out << ' ' << f;
        out << '\n';
    } else {
        out << "# signals: file " << cfg.signals_path
            << (cfg.bounds_path.empty() ? " (default bounds 0.01)" : " bounds " + cfg.bounds_path) << '\n';
    }
    out << "# flow: steps " << cfg.steps << " hidden " << cfg.hidden << " standardize "
        << (cfg.standardize ? "on" : "off") << '\n';
    out << "# train: max_epochs " << cfg.train.max_epochs << " lr0 " << cfg.train.lr0 << " decay "
        << cfg.train.decay << " lambda " << cfg.train.penalty.lambda1 << ',' << cfg.train.penalty.lambda2
        << ',' << cfg.train.penalty.lambda3 << ',' << cfg.train.penalty.lambda4 << " stop "
        << cfg.train.stop_window << '@' << cfg.train.stop_rel_tol << " L_t " << cfg.train.L_t << " L_p "
        << cfg.L_p << '\n';
    out << "# seeds:";
    for (std::uint64_t s : cfg.seeds) out << ' ' << s;
    out << '\n';
    out << "# metric: " << (cfg.task == Task::Classification ? "accuracy %" : "RMSE (original scale)")
        << '\n';

    for (const MethodAggregate& a : result.aggregates) {
        out << a.method << '\t';
        if (a.values.empty()) {
            out << "(no completed runs)";
        } else {
            out << fixed3(a.mean) << "_{" << fixed3(a.stddev) << "}\t[";
            for (std::size_t i = 0; i < a.values.size(); ++i) {
                if (i) out << ", ";
                out << fixed3(a.values[i]);
            }
            out << ']';
        }
        if (!a.complete) out << "\t(missing seeds: aborted runs)";
        out << '\n';
    }
    return out.str();
}

std::string render_aggregate_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "method,mean,std,values\n";
    for (const MethodAggregate& a : result.aggregates) {
        out << a.method << ',';
        if (!a.values.empty()) out << format_double(a.mean) << ',' << format_double(a.stddev);
        else out << ',';
        for (double v : a.values) out << ',' << format_double(v);
        out << '\n';
    }
    return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TabularDataset* preloaded) {
    for (const std::string& m : cfg.methods)
        if (!is_known_method(m)) throw std::invalid_argument("unknown method: " + m);
    if (cfg.seeds.empty()) throw std::invalid_argument("experiment: seed list is empty");

    const Prepared prep = prepare(cfg, preloaded);

    ExperimentResult result;
    for (const std::string& method : cfg.methods)
        for (std::uint64_t seed : cfg.seeds) result.records.push_back(run_one(cfg, prep, method, seed));
    for (const std::string& method : cfg.methods)
        result.aggregates.push_back(aggregate_method(method, result.records));

    if (!cfg.outdir.empty()) {
        fs::create_directories(cfg.outdir);
        {
            std::ofstream out(fs::path(cfg.outdir) / "results.jsonl");
            out << render_results_jsonl(result.records);
        }
        {
            std::ofstream out(fs::path(cfg.outdir) / "aggregate.txt");
            out << render_aggregate_text(cfg, result);
        }
        {
            std::ofstream out(fs::path(cfg.outdir) / "aggregate.csv");
            out << render_aggregate_csv(result);
        }
        fs::create_directories(fs::path(cfg.outdir) / "traces");
        for (const RunRecord& r : result.records) {
            if (r.loss_trace.empty()) continue;
            std::ofstream out(fs::path(cfg.outdir) / "traces" /
                              (r.method + "_seed" + std::to_string(r.seed) + ".csv"));
            out << "epoch,loss,violation\n";
            for (std::size_t e = 0; e < r.loss_trace.size(); ++e)
                out << e << ',' << format_double(r.loss_trace[e]) << ','
                    << format_double(r.violation_trace[e]) << '\n';
        }
    }
    return result;
}

} // namespace llf
