#include "llf/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace llf {

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa, double m, double fm,
               double b, double fb) {
    (void)m;
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double fa, double b, double fb,
             double m, double fm, double whole, double tol, int depth) {
    if (depth <= 0) throw std::runtime_error("integrate: quadrature did not converge");
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(f, a, fa, lm, flm, m, fm);
    const double right = simpson(f, m, fm, rm, frm, b, fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 int initial_segments) {
    if (!(b > a)) throw std::invalid_argument("integrate: empty interval");
    if (initial_segments < 1) initial_segments = 1;
    const double h = (b - a) / initial_segments;
    const double seg_tol = abs_tol / initial_segments;
    double total = 0.0;
    for (int k = 0; k < initial_segments; ++k) {
        const double lo = a + k * h;
        const double hi = k + 1 == initial_segments ? b : lo + h;
        const double mid = 0.5 * (lo + hi);
        const double flo = f(lo), fmid = f(mid), fhi = f(hi);
        const double whole = simpson(f, lo, flo, mid, fmid, hi, fhi);
        total += adapt(f, lo, flo, hi, fhi, mid, fmid, whole, seg_tol, 48);
    }
    return total;
}

FlowDensity::FlowDensity(const FlowModel& model, Eigen::RowVectorXd x) : model_(&model) {
    if (model.config().label_dim() != 1)
        throw std::invalid_argument("FlowDensity: needs a 1-dim label model");
    x_ = x;
}

double FlowDensity::log_prob(double y) const {
    Eigen::MatrixXd Y(1, 1);
    Y(0, 0) = y;
    return model_->log_prob(x_, Y)(0);
}

UniformDensity::UniformDensity(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!(hi > lo)) throw std::invalid_argument("UniformDensity: empty support");
}

double UniformDensity::log_prob(double y) const {
    if (y < lo_ || y > hi_) return -std::numeric_limits<double>::infinity();
    return -std::log(hi_ - lo_);
}

double ConstrainedRegion::max_inverse_volume() const {
    double M = 0.0;
    for (const Interval& iv : intervals) M = std::max(M, 1.0 / iv.width());
    return M;
}

void ConstrainedRegion::validate() const {
    for (const Interval& iv : intervals)
        if (!(iv.hi > iv.lo)) throw std::runtime_error("ConstrainedRegion: interval has no volume");
    for (std::size_t i = 0; i < intervals.size(); ++i)
        for (std::size_t j = i + 1; j < intervals.size(); ++j) {
            const Interval& a = intervals[i];
            const Interval& b = intervals[j];
            if (a.lo < b.hi && b.lo < a.hi)
                throw std::runtime_error("ConstrainedRegion: intervals overlap");
        }
}

BoundCheck check_bound(const Density1D& density, const Interval& region, double M, double quad_tol) {
    if (!(region.hi > region.lo)) throw std::invalid_argument("check_bound: empty region");
    BoundCheck out;
    const auto log_p = [&](double y) { return density.log_prob(y); };
    const auto p = [&](double y) { return std::exp(density.log_prob(y)); };
    out.lhs = integrate(log_p, region.lo, region.hi, quad_tol) / region.width();
    out.q = integrate(p, region.lo, region.hi, quad_tol);
    out.jensen_rhs = std::log(out.q) - std::log(region.width());
    out.paper_rhs = M * std::log(out.q);
    out.jensen_ok = out.lhs <= out.jensen_rhs + 1e-9;
    out.paper_ok = out.lhs <= out.paper_rhs;
    return out;
}

double relation_q(const Density1D& density, const Interval& region, double quad_tol) {
    const auto p = [&](double y) { return std::exp(density.log_prob(y)); };
    const double q = integrate(p, region.lo, region.hi, quad_tol);
    if (q < -quad_tol || q > 1.0 + 1e-6)
        throw std::runtime_error("relation_q: integral outside [0, 1]");
    return std::max(q, 0.0);
}

std::vector<TheoremInstance> run_theorem_check(int n_random, std::uint64_t seed) {
    std::vector<TheoremInstance> out;

    // exact Jensen equality: uniform density on a region of width 0.1
    {
        TheoremInstance inst;
        inst.kind = "uniform";
        inst.region = {0.2, 0.3};
        const UniformDensity u(inst.region.lo, inst.region.hi);
        inst.check = check_bound(u, inst.region, 1.0 / inst.region.width());
        out.push_back(inst);
    }

    Rng rng(derive_seed(seed, "theorem"));
    for (int k = 0; k < n_random; ++k) {
        FlowConfig cfg;
        cfg.task = Task::Regression;
        cfg.feature_dim = 3;
        FlowModel model(cfg);
        model.init_params(derive_seed(seed, "theorem-model") + static_cast<std::uint64_t>(k));
        // perturb so the density is a genuinely non-Gaussian pushforward while
        // keeping total scale/shift moderate for the quadrature window
        for (double& v : model.params().values()) v += 0.1 * rng.normal();

        Eigen::RowVectorXd x(3);
        for (int j = 0; j < 3; ++j) x(j) = rng.normal();

        // center the region near the image of a moderate latent value
        Eigen::MatrixXd z(1, 1);
        z(0, 0) = rng.uniform(-1.0, 1.0);
        const double center = model.generate(x, z).out(0, 0);
        const double width = rng.uniform(0.05, 1.0);
        const double offset = rng.uniform(-0.5, 0.5);

        TheoremInstance inst;
        inst.kind = "flow";
        inst.region = {center + offset - 0.5 * width, center + offset + 0.5 * width};
        const FlowDensity d(model, x);
        inst.check = check_bound(d, inst.region, 1.0 / inst.region.width());
        out.push_back(inst);
    }
    return out;
}

} // namespace llf
