#include "llf/dataset.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "llf/rng.hpp"

namespace llf {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
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

double parse_double(const std::string& s, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw std::runtime_error("CSV parse error at " + where + ": '" + s + "' is not a number");
    return v;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

TabularDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
    std::vector<std::string> header = split_csv_line(line);
    if (header.empty()) throw std::runtime_error("dataset header missing: " + path);

    const bool has_label = header.back() == "label";
    const std::size_t n_feat = header.size() - (has_label ? 1 : 0);
    if (n_feat == 0) throw std::runtime_error("dataset has no feature columns: " + path);

    TabularDataset data;
    data.feature_names.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(n_feat));

    std::vector<double> xs;
    std::vector<double> ys;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("CSV row " + std::to_string(row) + " in " + path + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        for (std::size_t j = 0; j < n_feat; ++j)
            xs.push_back(parse_double(cells[j], path + ":" + std::to_string(row)));
        if (has_label) ys.push_back(parse_double(cells.back(), path + ":" + std::to_string(row)));
    }

    const Eigen::Index n = static_cast<Eigen::Index>(xs.size() / n_feat);
    data.X.resize(n, static_cast<Eigen::Index>(n_feat));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < data.X.cols(); ++j)
            data.X(i, j) = xs[static_cast<std::size_t>(i) * n_feat + static_cast<std::size_t>(j)];
    if (has_label) {
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) y(i) = ys[static_cast<std::size_t>(i)];
        data.labels = std::move(y);
    }
    return data;
}

void save_dataset_csv(const TabularDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (std::size_t j = 0; j < data.feature_names.size(); ++j) {
        if (j) out << ',';
        out << data.feature_names[j];
    }
    if (data.has_labels()) out << ",label";
    out << '\n';
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.dim(); ++j) {
            if (j) out << ',';
            out << format_double(data.X(i, j));
        }
        if (data.has_labels()) out << ',' << format_double((*data.labels)(i));
        out << '\n';
    }
}

const char* split_name(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Sim: return "sim";
    case Split::Test: return "test";
    }
    return "?";
}

std::vector<Eigen::Index> SplitAssignment::indices(Split s) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i] == s) out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

Eigen::Index SplitAssignment::count(Split s) const {
    Eigen::Index c = 0;
    for (Split r : rows)
        if (r == s) ++c;
    return c;
}

SplitAssignment make_split(Eigen::Index n, int r_train, int r_sim, int r_test, std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("make_split: need at least 3 samples");
    if (r_train <= 0 || r_sim <= 0 || r_test <= 0)
        throw std::invalid_argument("make_split: ratio components must be positive");

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(seed, "split"));
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
        // unbiased enough for data splitting; multiply-shift bounded draw
        const std::size_t j = static_cast<std::size_t>(
            (static_cast<unsigned __int128>(rng.next_u64()) * (i + 1)) >> 64);
        std::swap(perm[i], perm[j]);
    }

    const long total = static_cast<long>(r_train) + r_sim + r_test;
    const auto cut1 = static_cast<std::size_t>((static_cast<long>(n) * r_train) / total);
    const auto cut2 = static_cast<std::size_t>((static_cast<long>(n) * (r_train + r_sim)) / total);

    SplitAssignment split;
    split.rows.assign(static_cast<std::size_t>(n), Split::Test);
    for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
        const auto idx = static_cast<std::size_t>(perm[k]);
        split.rows[idx] = k < cut1 ? Split::Train : (k < cut2 ? Split::Sim : Split::Test);
    }
    return split;
}

SplitAssignment load_split_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open split file: " + path);
    SplitAssignment split;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "train")
            split.rows.push_back(Split::Train);
        else if (line == "sim")
            split.rows.push_back(Split::Sim);
        else if (line == "test")
            split.rows.push_back(Split::Test);
        else
            throw std::runtime_error("split file " + path + " line " + std::to_string(row) +
                                     ": expected train|sim|test, got '" + line + "'");
    }
    return split;
}

void save_split_file(const SplitAssignment& split, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write split file: " + path);
    for (Split s : split.rows) out << split_name(s) << '\n';
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
    if (rows.empty()) throw std::invalid_argument("Standardizer::fit: empty row set");
    Standardizer st;
    st.mean = Eigen::VectorXd::Zero(X.cols());
    st.stddev = Eigen::VectorXd::Zero(X.cols());
    for (Eigen::Index r : rows) st.mean += X.row(r).transpose();
    st.mean /= static_cast<double>(rows.size());
    for (Eigen::Index r : rows)
        st.stddev += (X.row(r).transpose() - st.mean).cwiseAbs2();
    st.stddev = (st.stddev / static_cast<double>(rows.size())).cwiseSqrt();
    for (Eigen::Index j = 0; j < st.stddev.size(); ++j)
        if (st.stddev(j) < 1e-12) st.stddev(j) = 1.0; // constant column passes through
    return st;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& X) const {
    if (X.cols() != mean.size()) throw std::invalid_argument("Standardizer: dimension mismatch");
    return (X.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    return out;
}

} // namespace llf
