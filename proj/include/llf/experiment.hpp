#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "llf/dataset.hpp"
#include "llf/trainer.hpp"
#include "llf/weak_signals.hpp"

namespace llf {

// One dataset x methods x seeds experiment. The split and the weak-signal
// synthesis are fixed per experiment (they depend on split_seed only); the
// training seeds drive parameter init, the per-epoch prior draws and the
// prediction draws.
struct ExperimentConfig {
    std::string name = "dataset";
    std::string dataset_path;
    Task task = Task::Classification;

    // split: file wins when set, otherwise ratio + split_seed
    std::string split_path;
    int ratio_train = 4, ratio_sim = 3, ratio_test = 3;
    std::uint64_t split_seed = 7;

    // weak signals: external file wins when set (classification only),
    // otherwise synthesized from these feature indices
    std::vector<int> signal_features;
    std::string signals_path;
    std::string bounds_path;

    // flow architecture
    int steps = 8;
    int hidden = 64;
    bool standardize = true;

    TrainConfig train;
    int L_p = 10;
    std::vector<std::uint64_t> seeds = {0, 10, 100, 123, 1234};
    std::vector<std::string> methods = {"llf", "avg"};

    std::string outdir; // artifacts written when non-empty
};

struct RunRecord {
    std::string dataset;
    std::string method;
    std::uint64_t seed = 0;
    double metric = 0.0;
    int epochs = 0;
    double wall_s = 0.0;
    bool aborted = false;
    std::string abort_reason;
    std::vector<double> loss_trace;
    std::vector<double> violation_trace;
};

struct MethodAggregate {
    std::string method;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> values;
    bool complete = true; // false when any seed aborted
};

struct ExperimentResult {
    std::vector<RunRecord> records;
    std::vector<MethodAggregate> aggregates;

    const MethodAggregate* find(const std::string& method) const;
};

// Runs every requested method x seed. `preloaded` skips the CSV load (used
// for generated datasets). Artifacts land in cfg.outdir when set: results
// JSON-lines, aggregate table (text + CSV) and per-run loss/violation traces.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const TabularDataset* preloaded = nullptr);

// Known methods: llf, llf_wo_nll, llf_ts, avg.
bool is_known_method(const std::string& method);

// Linear-response regression dataset with gold labels, for weak-signal
// experiments that need no external data.
TabularDataset make_synthetic_regression(Eigen::Index n, int dim, std::uint64_t seed);

// Aggregate table writers (also used by the CLI).
std::string render_aggregate_text(const ExperimentConfig& cfg, const ExperimentResult& result);
std::string render_aggregate_csv(const ExperimentResult& result);
std::string render_results_jsonl(const std::vector<RunRecord>& records);

} // namespace llf
