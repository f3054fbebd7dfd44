#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace llf {

// Flat store of named parameter tensors (64-bit, column-major flattening).
// All trainable state of a model lives here; gradients and Adam moments are
// plain vectors aligned to the same layout.
class ParamStore {
public:
    struct Entry {
        std::string name;
        int rows = 0;
        int cols = 0;
        std::size_t offset = 0;
        std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
    };

    int add(const std::string& name, int rows, int cols) {
        if (rows <= 0 || cols <= 0)
            throw std::invalid_argument("ParamStore::add: non-positive shape for " + name);
        if (index_.count(name))
            throw std::invalid_argument("ParamStore::add: duplicate tensor name " + name);
        Entry e;
        e.name = name;
        e.rows = rows;
        e.cols = cols;
        e.offset = values_.size();
        values_.resize(values_.size() + e.size(), 0.0);
        index_[name] = static_cast<int>(entries_.size());
        entries_.push_back(e);
        return static_cast<int>(entries_.size()) - 1;
    }

    int find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw std::out_of_range("ParamStore: unknown tensor " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const Entry& entry(int id) const { return entries_.at(static_cast<std::size_t>(id)); }
    std::size_t entry_count() const { return entries_.size(); }
    std::size_t total_dim() const { return values_.size(); }

    Eigen::Map<Eigen::MatrixXd> matrix(int id) {
        const Entry& e = entry(id);
        return {values_.data() + e.offset, e.rows, e.cols};
    }
    Eigen::Map<const Eigen::MatrixXd> matrix(int id) const {
        const Entry& e = entry(id);
        return {values_.data() + e.offset, e.rows, e.cols};
    }
    Eigen::Map<Eigen::MatrixXd> matrix(const std::string& name) { return matrix(find(name)); }
    Eigen::Map<const Eigen::MatrixXd> matrix(const std::string& name) const { return matrix(find(name)); }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
    std::vector<double> values_;
};

} // namespace llf
