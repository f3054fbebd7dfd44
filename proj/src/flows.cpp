#include "llf/flows.hpp"

#include <cmath>
#include <stdexcept>

namespace llf {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
} // namespace

double squash_log_scale(double r) {
    if (r > kScaleLinear) return kScaleLinear + std::tanh(r - kScaleLinear);
    if (r < -kScaleLinear) return -kScaleLinear - std::tanh(-kScaleLinear - r);
    return r;
}

Eigen::MatrixXd squash_log_scale(const Eigen::MatrixXd& r) {
    // composed exactly like the tape version so both paths round identically
    const Eigen::MatrixXd mid = r.cwiseMax(-kScaleLinear).cwiseMin(kScaleLinear);
    const Eigen::MatrixXd above = (r.array() - kScaleLinear).max(0.0).tanh();
    const Eigen::MatrixXd below = (-kScaleLinear - r.array()).max(0.0).tanh();
    Eigen::MatrixXd out = mid + above;
    out -= below;
    return out;
}

NodeId squash_log_scale(Tape& t, NodeId r) {
    const NodeId mid = t.clamp(r, -kScaleLinear, kScaleLinear);
    const NodeId above = t.tanh(t.relu(t.add_scalar(r, -kScaleLinear)));
    const NodeId below = t.tanh(t.relu(t.scale(t.add_scalar(r, kScaleLinear), -1.0)));
    return t.sub(t.add(mid, above), below);
}

const char* task_name(Task t) { return t == Task::Classification ? "classification" : "regression"; }

Task task_from_name(const std::string& name) {
    if (name == "classification") return Task::Classification;
    if (name == "regression") return Task::Regression;
    throw std::invalid_argument("unknown task: " + name);
}

Mlp Mlp::create(ParamStore& store, const std::string& prefix, const MlpSpec& spec) {
    if (spec.widths.size() < 2) throw std::invalid_argument("MlpSpec needs at least one layer");
    for (int w : spec.widths)
        if (w <= 0) throw std::invalid_argument("MlpSpec widths must be positive");
    Mlp mlp;
    mlp.spec = spec;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const std::string tag = prefix + "." + std::to_string(l);
        mlp.weights.push_back(store.add(tag + ".W", spec.widths[l], spec.widths[l + 1]));
        mlp.biases.push_back(store.add(tag + ".b", 1, spec.widths[l + 1]));
    }
    return mlp;
}

void Mlp::init(ParamStore& store, Rng& rng, double weight_std) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto W = store.matrix(weights[l]);
        for (Eigen::Index j = 0; j < W.cols(); ++j)
            for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = weight_std * rng.normal();
        store.matrix(biases[l]).setZero();
    }
}

NodeId Mlp::build(Tape& tape, NodeId input) const {
    NodeId h = input;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = tape.add_rowvec(tape.matmul(h, tape.param(weights[l])), tape.param(biases[l]));
        if (l + 1 < weights.size()) h = tape.tanh(h);
    }
    return h;
}

Eigen::MatrixXd Mlp::eval(const ParamStore& store, const Eigen::MatrixXd& input) const {
    // mirrors the tape's op sequence exactly (GEMM into a temporary, then the
    // bias broadcast), so tape and plain evaluation agree bit for bit
    Eigen::MatrixXd h = input;
    Eigen::MatrixXd p;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        p.noalias() = h * store.matrix(weights[l]);
        h = p.rowwise() + store.matrix(biases[l]).row(0);
        if (l + 1 < weights.size()) h = h.array().tanh();
    }
    return h;
}

FlowModel::FlowModel(FlowConfig cfg) : cfg_(cfg) {
    if (cfg_.feature_dim <= 0) throw std::invalid_argument("FlowModel: feature_dim must be positive");
    if (cfg_.steps <= 0) throw std::invalid_argument("FlowModel: steps must be positive");

    const int D = cfg_.feature_dim;
    const int H = cfg_.hidden;
    if (cfg_.task == Task::Classification) {
        if (cfg_.couplings_per_step != 2)
            throw std::invalid_argument("FlowModel: classification flow uses 2 couplings per step");
        for (int k = 0; k < cfg_.layer_count(); ++k) {
            const std::string p = "cpl" + std::to_string(k);
            CouplingLayer layer{
                Mlp::create(params_, p + ".wy", {{1, H, H}}),
                Mlp::create(params_, p + ".wx", {{D, H, H}}),
                Mlp::create(params_, p + ".wb", {{D, H, H}}),
                Mlp::create(params_, p + ".cy", {{1, H, H}}),
                Mlp::create(params_, p + ".cx", {{D, H, H}}),
                Mlp::create(params_, p + ".cb", {{D, H, H}}),
                Mlp::create(params_, p + ".ms", {{H, 1}}),
                Mlp::create(params_, p + ".mb", {{H, 1}}),
                k % 2, // the two couplings of a step transform complementary dims
            };
            couplings_.push_back(std::move(layer));
        }
    } else {
        for (int k = 0; k < cfg_.layer_count(); ++k) {
            const std::string p = "aff" + std::to_string(k);
            AffineLayer layer{
                Mlp::create(params_, p + ".s", {{D, H, H, 1}}),
                Mlp::create(params_, p + ".b", {{D, H, H, 1}}),
            };
            affines_.push_back(std::move(layer));
        }
    }
}

void FlowModel::init_params(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "flow-init"));
    const double std = 0.01;
    for (const CouplingLayer& l : couplings_)
        for (const Mlp* m : {&l.w_y, &l.w_x, &l.w_b, &l.c_y, &l.c_x, &l.c_b, &l.m_s, &l.m_b})
            m->init(params_, rng, std);
    for (const AffineLayer& l : affines_)
        for (const Mlp* m : {&l.s_net, &l.b_net}) m->init(params_, rng, std);
}

void FlowModel::zero_params() {
    for (double& v : params_.values()) v = 0.0;
}

void FlowModel::check_x(const Eigen::MatrixXd& X) const {
    if (X.cols() != cfg_.feature_dim)
        throw std::invalid_argument("FlowModel: feature dimension mismatch (got " +
                                    std::to_string(X.cols()) + ", expected " +
                                    std::to_string(cfg_.feature_dim) + ")");
}

FlowModel::TapeGen FlowModel::build_generate(Tape& tape, NodeId x_node, NodeId z_node) const {
    const int d = cfg_.label_dim();
    if (tape.value(z_node).cols() != d)
        throw std::invalid_argument("FlowModel::build_generate: latent dimension mismatch");
    const Eigen::Index n = tape.value(z_node).rows();

    TapeGen gen;
    for (int j = 0; j < d; ++j) gen.y_cols.push_back(tape.col(z_node, j));
    gen.logdet = tape.constant(Eigen::MatrixXd::Zero(n, 1));

    if (cfg_.task == Task::Classification) {
        for (const CouplingLayer& l : couplings_) {
            const NodeId ya = gen.y_cols[static_cast<std::size_t>(1 - l.active)];
            const NodeId yb = gen.y_cols[static_cast<std::size_t>(l.active)];
            const NodeId s_in = tape.add(tape.mul(l.w_y.build(tape, ya), l.w_x.build(tape, x_node)),
                                         l.w_b.build(tape, x_node));
            const NodeId logs = squash_log_scale(tape, l.m_s.build(tape, s_in));
            const NodeId b_in = tape.add(tape.mul(l.c_y.build(tape, ya), l.c_x.build(tape, x_node)),
                                         l.c_b.build(tape, x_node));
            const NodeId b = l.m_b.build(tape, b_in);
            gen.y_cols[static_cast<std::size_t>(l.active)] =
                tape.add(tape.mul(tape.exp(logs), yb), b);
            gen.logdet = tape.add(gen.logdet, logs);
        }
    } else {
        for (const AffineLayer& l : affines_) {
            const NodeId logs = squash_log_scale(tape, l.s_net.build(tape, x_node));
            const NodeId b = l.b_net.build(tape, x_node);
            gen.y_cols[0] = tape.add(tape.mul(tape.exp(logs), gen.y_cols[0]), b);
            gen.logdet = tape.add(gen.logdet, logs);
        }
    }
    return gen;
}

FlowEval FlowModel::generate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) const {
    check_x(X);
    if (Z.cols() != cfg_.label_dim() || Z.rows() != X.rows())
        throw std::invalid_argument("FlowModel::generate: latent shape mismatch");

    FlowEval ev;
    ev.out = Z;
    ev.logdet = Eigen::VectorXd::Zero(X.rows());
    // each intermediate is materialized to match the tape's rounding exactly
    if (cfg_.task == Task::Classification) {
        for (const CouplingLayer& l : couplings_) {
            const Eigen::MatrixXd ya = ev.out.col(1 - l.active);
            const Eigen::MatrixXd prod = l.w_y.eval(params_, ya).cwiseProduct(l.w_x.eval(params_, X));
            const Eigen::MatrixXd s_in = prod + l.w_b.eval(params_, X);
            const Eigen::MatrixXd logs = squash_log_scale(l.m_s.eval(params_, s_in));
            const Eigen::MatrixXd prod_b = l.c_y.eval(params_, ya).cwiseProduct(l.c_x.eval(params_, X));
            const Eigen::MatrixXd b_in = prod_b + l.c_b.eval(params_, X);
            const Eigen::MatrixXd b = l.m_b.eval(params_, b_in);
            const Eigen::MatrixXd s = logs.array().exp();
            const Eigen::MatrixXd sy = s.cwiseProduct(ev.out.col(l.active));
            ev.out.col(l.active) = sy + b;
            ev.logdet += logs.col(0);
        }
    } else {
        for (const AffineLayer& l : affines_) {
            const Eigen::MatrixXd logs = squash_log_scale(l.s_net.eval(params_, X));
            const Eigen::MatrixXd b = l.b_net.eval(params_, X);
            const Eigen::MatrixXd s = logs.array().exp();
            const Eigen::MatrixXd sy = s.cwiseProduct(ev.out.col(0));
            ev.out.col(0) = sy + b;
            ev.logdet += logs.col(0);
        }
    }
    return ev;
}

FlowEval FlowModel::invert(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const {
    check_x(X);
    if (Y.cols() != cfg_.label_dim() || Y.rows() != X.rows())
        throw std::invalid_argument("FlowModel::invert: label shape mismatch");

    FlowEval ev;
    ev.out = Y;
    ev.logdet = Eigen::VectorXd::Zero(X.rows());
    if (cfg_.task == Task::Classification) {
        for (auto it = couplings_.rbegin(); it != couplings_.rend(); ++it) {
            const CouplingLayer& l = *it;
            const Eigen::MatrixXd ya = ev.out.col(1 - l.active); // untransformed half passes through
            const Eigen::MatrixXd s_in =
                l.w_y.eval(params_, ya).cwiseProduct(l.w_x.eval(params_, X)) + l.w_b.eval(params_, X);
            const Eigen::MatrixXd logs = squash_log_scale(l.m_s.eval(params_, s_in));
            const Eigen::MatrixXd b_in =
                l.c_y.eval(params_, ya).cwiseProduct(l.c_x.eval(params_, X)) + l.c_b.eval(params_, X);
            const Eigen::MatrixXd b = l.m_b.eval(params_, b_in);
            ev.out.col(l.active) =
                (ev.out.col(l.active).array() - b.array()) / logs.array().exp();
            ev.logdet += logs.col(0);
        }
    } else {
        for (auto it = affines_.rbegin(); it != affines_.rend(); ++it) {
            const AffineLayer& l = *it;
            const Eigen::MatrixXd logs = squash_log_scale(l.s_net.eval(params_, X));
            const Eigen::MatrixXd b = l.b_net.eval(params_, X);
            ev.out.col(0) = (ev.out.col(0).array() - b.array()) / logs.array().exp();
            ev.logdet += logs.col(0);
        }
    }
    return ev;
}

Eigen::VectorXd FlowModel::log_prob(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const {
    const FlowEval inv = invert(X, Y);
    return gauss_log_density(inv.out) - inv.logdet;
}

Eigen::MatrixXd FlowModel::sample_labels(const Eigen::MatrixXd& X, int L_p, Rng& rng) const {
    if (L_p < 1) throw std::invalid_argument("FlowModel::sample_labels: L_p must be >= 1");
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(X.rows(), cfg_.label_dim());
    for (int j = 0; j < L_p; ++j) {
        const Eigen::MatrixXd Z = draw_gaussian(X.rows(), cfg_.label_dim(), rng);
        acc += generate(X, Z).out;
    }
    return acc / static_cast<double>(L_p);
}

Eigen::VectorXd gauss_log_density(const Eigen::MatrixXd& Z) {
    return (-0.5 * Z.array().square()).rowwise().sum() -
           0.5 * kLog2Pi * static_cast<double>(Z.cols());
}

Eigen::MatrixXd draw_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd Z(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) Z(i, j) = rng.normal();
    return Z;
}

} // namespace llf
