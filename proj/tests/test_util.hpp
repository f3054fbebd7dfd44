#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "llf/param_store.hpp"
#include "llf/tape.hpp"

namespace llf::testutil {

// Central finite differences of the tape's root w.r.t. every parameter.
// Exploits that forward() re-reads the bound store, so we can perturb in
// place and restore.
inline std::vector<double> fd_gradient(Tape& tape, NodeId root, ParamStore& store, double h = 1e-5) {
    std::vector<double> grad(store.total_dim(), 0.0);
    std::vector<double>& x = store.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = tape.forward(root);
        x[i] = saved - h;
        const double fm = tape.forward(root);
        x[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    tape.forward(root); // restore recorded values
    return grad;
}

// |a-b| / max(|a|, |b|, floor); the floor absorbs finite-difference round-off
// on near-zero gradient entries.
inline double rel_err(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i], floor));
    return worst;
}

} // namespace llf::testutil
