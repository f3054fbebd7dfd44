#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llf/param_store.hpp"
#include "llf/rng.hpp"
#include "llf/tape.hpp"

namespace llf {

// Small dense network: tanh on hidden layers, linear output. Parameters live
// in a ParamStore under a name prefix so models stay flat and serializable.
struct MlpSpec {
    std::vector<int> widths; // widths[0] = input dim, widths.back() = output dim
};

struct Mlp {
    MlpSpec spec;
    std::vector<int> weights; // ParamStore entry ids, one per linear layer
    std::vector<int> biases;

    static Mlp create(ParamStore& store, const std::string& prefix, const MlpSpec& spec);
    void init(ParamStore& store, Rng& rng, double weight_std) const;
    NodeId build(Tape& tape, NodeId input) const;
    Eigen::MatrixXd eval(const ParamStore& store, const Eigen::MatrixXd& input) const;
};

enum class Task { Classification, Regression };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

struct FlowConfig {
    Task task = Task::Classification;
    int feature_dim = 0;
    int steps = 8;              // flow steps
    int couplings_per_step = 2; // classification only
    int hidden = 64;

    int label_dim() const { return task == Task::Classification ? 2 : 1; }
    int layer_count() const {
        return task == Task::Classification ? steps * couplings_per_step : steps;
    }
};

// Raw scale head outputs are squashed to a bounded log-scale so every layer
// is invertible and log-determinants stay bounded: identity on
// [-kScaleLinear, kScaleLinear], saturating smoothly towards +-kScaleMax.
// The saturation keeps a nonzero gradient everywhere; a hard clamp leaves
// zero-gradient absorbing states that destabilize long training runs.
inline constexpr double kScaleLinear = 4.0;
inline constexpr double kScaleMax = 5.0;

// log-scale squash: r on |r| <= 4, sign(r) * (4 + tanh(|r| - 4)) beyond
double squash_log_scale(double r);
Eigen::MatrixXd squash_log_scale(const Eigen::MatrixXd& r);
NodeId squash_log_scale(Tape& tape, NodeId r);

struct FlowEval {
    Eigen::MatrixXd out;     // generate: labels y; invert: latents z
    Eigen::VectorXd logdet;  // per sample, measured along the generate direction
};

// Conditional flow over labels: a stack of conditional affine couplings
// (2-dim labels) or conditional scalar affine transforms (1-dim labels),
// parameterized in the generate direction y = s(x, .) * z + b(x, .).
class FlowModel {
public:
    explicit FlowModel(FlowConfig cfg);

    const FlowConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Near-identity start: all weights N(0, 0.01^2), all biases 0.
    void init_params(std::uint64_t seed);
    // Exact identity flow (s = 1, b = 0 everywhere).
    void zero_params();

    struct TapeGen {
        std::vector<NodeId> y_cols; // label_dim entries, each N x 1
        NodeId logdet;              // N x 1
    };
    // Differentiable generate pass for training; x_node is an N x D constant,
    // z_node an N x label_dim constant.
    TapeGen build_generate(Tape& tape, NodeId x_node, NodeId z_node) const;

    FlowEval generate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) const;
    FlowEval invert(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const;
    Eigen::VectorXd log_prob(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const;

    // Sample-average label estimate over L_p prior draws.
    Eigen::MatrixXd sample_labels(const Eigen::MatrixXd& X, int L_p, Rng& rng) const;

private:
    struct CouplingLayer {
        Mlp w_y, w_x, w_b; // scale conditioners
        Mlp c_y, c_x, c_b; // shift conditioners
        Mlp m_s, m_b;      // heads
        int active = 0;    // transformed coordinate
    };
    struct AffineLayer {
        Mlp s_net, b_net;
    };

    void check_x(const Eigen::MatrixXd& X) const;

    FlowConfig cfg_;
    ParamStore params_;
    std::vector<CouplingLayer> couplings_;
    std::vector<AffineLayer> affines_;
};

// log density of the standard normal prior, summed over label dimensions.
Eigen::VectorXd gauss_log_density(const Eigen::MatrixXd& Z);

// Standard-normal batch draw with a fixed fill order (row-major).
Eigen::MatrixXd draw_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng);

} // namespace llf
