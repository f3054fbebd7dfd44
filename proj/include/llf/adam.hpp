#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "llf/param_store.hpp"

namespace llf {

// Adam with bias correction plus the per-epoch exponential step-size decay
// used by all trainers (one full-batch step == one epoch).
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;
    double lr0 = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double decay = 0.996; // multiplier applied once per epoch

    explicit AdamState(std::size_t dim, double lr0_ = 1e-3, double decay_ = 0.996)
        : m(dim, 0.0), v(dim, 0.0), lr0(lr0_), decay(decay_) {}

    double lr_at_epoch(std::int64_t epoch) const { return lr0 * std::pow(decay, static_cast<double>(epoch)); }
};

inline void adam_step(ParamStore& params, const std::vector<double>& grad, AdamState& s, double lr) {
    std::vector<double>& x = params.values();
    if (grad.size() != x.size() || s.m.size() != x.size())
        throw std::invalid_argument("adam_step: dimension mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient");

    s.t += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double g = grad[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        x[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

// Convenience overload: step at the schedule's rate for the given epoch.
inline void adam_step(ParamStore& params, const std::vector<double>& grad, AdamState& s, std::int64_t epoch,
                      bool use_schedule) {
    adam_step(params, grad, s, use_schedule ? s.lr_at_epoch(epoch) : s.lr0);
}

} // namespace llf
