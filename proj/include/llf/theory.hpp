#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "llf/flows.hpp"

namespace llf {

// Adaptive Simpson quadrature to an absolute tolerance. The interval is first
// cut into initial_segments equal pieces so narrow density spikes cannot be
// skipped by the coarse first pass. Throws on non-convergence.
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-8,
                 int initial_segments = 16);

// 1-dim conditional density under test.
class Density1D {
public:
    virtual ~Density1D() = default;
    virtual double log_prob(double y) const = 0;
};

class FlowDensity : public Density1D {
public:
    FlowDensity(const FlowModel& model, Eigen::RowVectorXd x);
    double log_prob(double y) const override;

private:
    const FlowModel* model_;
    Eigen::MatrixXd x_;
};

// Exactly uniform density on [lo, hi]; the equality case of the Jensen step.
class UniformDensity : public Density1D {
public:
    UniformDensity(double lo, double hi);
    double log_prob(double y) const override;

private:
    double lo_, hi_;
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
};

// Per-sample label regions; regions of distinct labels must be disjoint and
// every width positive.
struct ConstrainedRegion {
    std::vector<Interval> intervals;

    double max_inverse_volume() const; // M
    void validate() const;
};

struct BoundCheck {
    double lhs = 0.0;        // mean of log p over the region
    double q = 0.0;          // integral of p over the region
    double jensen_rhs = 0.0; // log q - log |region|
    double paper_rhs = 0.0;  // M * log q
    bool jensen_ok = false;  // lhs <= jensen_rhs + 1e-9
    bool paper_ok = false;   // lhs <= paper_rhs (reported, not asserted)
};

// Evaluates both sides of the dequantization bound by quadrature. Only the
// Jensen-corrected inequality lhs <= log q - log|region| is flagged as a
// failure; the M * log q form is reported per instance because it does not
// hold in general (a uniform density on a region of volume < 1 already
// violates it).
BoundCheck check_bound(const Density1D& density, const Interval& region, double M,
                       double quad_tol = 1e-8);

// q = integral of exp(log_prob) over the region; clipped sanity range [0, 1+1e-6].
double relation_q(const Density1D& density, const Interval& region, double quad_tol = 1e-8);

struct TheoremInstance {
    std::string kind; // "uniform" or "flow"
    Interval region;
    BoundCheck check;
};

// Instance 0 is the exact uniform construction; the rest are random 1-dim
// flows with regions placed where they carry mass.
std::vector<TheoremInstance> run_theorem_check(int n_random, std::uint64_t seed);

} // namespace llf
