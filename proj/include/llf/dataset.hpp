#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace llf {

// Feature matrix with optional gold labels. Loaded from CSV with a header
// row; a final column named "label" is treated as the gold label.
struct TabularDataset {
    std::vector<std::string> feature_names;
    Eigen::MatrixXd X; // N x D
    std::optional<Eigen::VectorXd> labels;

    Eigen::Index size() const { return X.rows(); }
    Eigen::Index dim() const { return X.cols(); }
    bool has_labels() const { return labels.has_value(); }
};

TabularDataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const TabularDataset& data, const std::string& path);

enum class Split : std::uint8_t { Train = 0, Sim = 1, Test = 2 };

const char* split_name(Split s);

struct SplitAssignment {
    std::vector<Split> rows;

    std::vector<Eigen::Index> indices(Split s) const;
    Eigen::Index count(Split s) const;
};

// Deterministic shuffled partition with the given integer ratio. The shuffle
// seed is independent of any training seed.
SplitAssignment make_split(Eigen::Index n, int r_train, int r_sim, int r_test, std::uint64_t seed);

SplitAssignment load_split_file(const std::string& path);
void save_split_file(const SplitAssignment& split, const std::string& path);

// Column-wise z-scoring fitted on a row subset.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    static Standardizer fit(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;
};

// Row gather helpers.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows);
Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows);

// Exact round-trip formatting for 64-bit reals in all CSV output.
std::string format_double(double v);

} // namespace llf
