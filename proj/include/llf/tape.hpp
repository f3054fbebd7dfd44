#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llf/param_store.hpp"

namespace llf {

using NodeId = int;

// Reverse-mode differentiation tape over matrix-valued nodes.
//
// Building the graph evaluates eagerly, so node values are available right
// away. forward() re-evaluates the recorded graph in place (parameters are
// re-read from the bound ParamStore, constants keep their values), which is
// what the training loop uses after each optimizer step. backward() seeds the
// root with 1 and sweeps the tape once in reverse, accumulating gradients for
// every parameter leaf.
class Tape {
public:
    enum class Op {
        Constant,
        Param,
        Add,
        Sub,
        Mul,       // elementwise
        MatMul,
        AddRowVec, // broadcast a 1xK row over an NxK matrix
        Col,       // extract one column
        Tanh,
        Exp,
        Log,
        Square,
        Relu,      // hinge positive part, subgradient 0 at 0
        Clamp,     // gradient 0 outside the open interval
        Scale,     // c * a
        AddScalar, // a + c
        Sum,
        Mean,
    };

    explicit Tape(const ParamStore* params = nullptr) : store_(params) {}

    // ---- leaves ----
    NodeId constant(Eigen::MatrixXd v);
    NodeId scalar(double v);
    NodeId param(int entry_id);
    NodeId param(const std::string& name);

    // ---- operations ----
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId matmul(NodeId a, NodeId b);
    NodeId add_rowvec(NodeId a, NodeId row);
    NodeId col(NodeId a, int j);
    NodeId tanh(NodeId a);
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId square(NodeId a);
    NodeId relu(NodeId a);
    NodeId clamp(NodeId a, double lo, double hi);
    NodeId scale(NodeId a, double c);
    NodeId add_scalar(NodeId a, double c);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);

    // ---- execution ----
    // Re-evaluates every node in topological (insertion) order and returns the
    // scalar value of `root`. Throws if any intermediate is non-finite, naming
    // the offending node index.
    double forward(NodeId root);

    // Gradient of scalar `root` w.r.t. every ParamStore entry, flattened to
    // the store layout. Throws if called before any forward evaluation.
    std::vector<double> backward(NodeId root);

    const Eigen::MatrixXd& value(NodeId id) const { return nodes_.at(check(id)).value; }
    const Eigen::MatrixXd& adjoint(NodeId id) const { return nodes_.at(check(id)).adjoint; }
    double scalar_value(NodeId id) const;

    // Replace the payload of a Constant node (shape must match). Used to feed
    // fresh latent draws into a recorded training graph each epoch.
    void set_constant(NodeId id, const Eigen::MatrixXd& v);

    std::size_t size() const { return nodes_.size(); }
    const ParamStore* store() const { return store_; }

private:
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        int param = -1;
        int col = 0;
        double c0 = 0.0;
        double c1 = 0.0;
        Eigen::MatrixXd value;
        Eigen::MatrixXd adjoint;
    };

    std::size_t check(NodeId id) const;
    NodeId push(Node n);
    void eval(std::size_t i);
    [[noreturn]] void fail(std::size_t i, const std::string& what) const;

    const ParamStore* store_ = nullptr;
    std::vector<Node> nodes_;
    bool evaluated_ = false;
};

} // namespace llf
