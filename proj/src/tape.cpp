#include "llf/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace llf {

std::size_t Tape::check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
        throw std::out_of_range("Tape: invalid node id " + std::to_string(id));
    return static_cast<std::size_t>(id);
}

void Tape::fail(std::size_t i, const std::string& what) const {
    throw std::runtime_error("Tape node " + std::to_string(i) + ": " + what);
}

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    const std::size_t i = nodes_.size() - 1;
    eval(i);
    evaluated_ = true;
    return static_cast<NodeId>(i);
}

NodeId Tape::constant(Eigen::MatrixXd v) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(v);
    return push(std::move(n));
}

NodeId Tape::scalar(double v) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

NodeId Tape::param(int entry_id) {
    if (!store_) throw std::logic_error("Tape::param: no ParamStore bound");
    Node n;
    n.op = Op::Param;
    n.param = entry_id;
    return push(std::move(n));
}

NodeId Tape::param(const std::string& name) {
    if (!store_) throw std::logic_error("Tape::param: no ParamStore bound");
    return param(store_->find(name));
}

#define LLF_BINARY(NAME, OPK)                            \
    NodeId Tape::NAME(NodeId a, NodeId b) {              \
        Node n;                                          \
        n.op = Op::OPK;                                  \
        n.a = static_cast<int>(check(a));                \
        n.b = static_cast<int>(check(b));                \
        return push(std::move(n));                       \
    }

LLF_BINARY(add, Add)
LLF_BINARY(sub, Sub)
LLF_BINARY(mul, Mul)
LLF_BINARY(matmul, MatMul)
LLF_BINARY(add_rowvec, AddRowVec)
#undef LLF_BINARY

#define LLF_UNARY(NAME, OPK)                             \
    NodeId Tape::NAME(NodeId a) {                        \
        Node n;                                          \
        n.op = Op::OPK;                                  \
        n.a = static_cast<int>(check(a));                \
        return push(std::move(n));                       \
    }

LLF_UNARY(tanh, Tanh)
LLF_UNARY(exp, Exp)
LLF_UNARY(log, Log)
LLF_UNARY(square, Square)
LLF_UNARY(relu, Relu)
LLF_UNARY(sum, Sum)
LLF_UNARY(mean, Mean)
#undef LLF_UNARY

NodeId Tape::col(NodeId a, int j) {
    Node n;
    n.op = Op::Col;
    n.a = static_cast<int>(check(a));
    n.col = j;
    return push(std::move(n));
}

NodeId Tape::clamp(NodeId a, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("Tape::clamp: lo must be < hi");
    Node n;
    n.op = Op::Clamp;
    n.a = static_cast<int>(check(a));
    n.c0 = lo;
    n.c1 = hi;
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = static_cast<int>(check(a));
    n.c0 = c;
    return push(std::move(n));
}

NodeId Tape::add_scalar(NodeId a, double c) {
    Node n;
    n.op = Op::AddScalar;
    n.a = static_cast<int>(check(a));
    n.c0 = c;
    return push(std::move(n));
}

void Tape::eval(std::size_t i) {
    Node& n = nodes_[i];
    const auto A = [&]() -> const Eigen::MatrixXd& { return nodes_[static_cast<std::size_t>(n.a)].value; };
    const auto B = [&]() -> const Eigen::MatrixXd& { return nodes_[static_cast<std::size_t>(n.b)].value; };

    switch (n.op) {
    case Op::Constant:
        break;
    case Op::Param: {
        n.value = store_->matrix(n.param);
        break;
    }
    case Op::Add:
        if (A().rows() != B().rows() || A().cols() != B().cols()) fail(i, "add: shape mismatch");
        n.value = A() + B();
        break;
    case Op::Sub:
        if (A().rows() != B().rows() || A().cols() != B().cols()) fail(i, "sub: shape mismatch");
        n.value = A() - B();
        break;
    case Op::Mul:
        if (A().rows() != B().rows() || A().cols() != B().cols()) fail(i, "mul: shape mismatch");
        n.value = A().cwiseProduct(B());
        break;
    case Op::MatMul:
        if (A().cols() != B().rows()) fail(i, "matmul: inner dimension mismatch");
        n.value.noalias() = A() * B();
        break;
    case Op::AddRowVec:
        if (B().rows() != 1 || B().cols() != A().cols()) fail(i, "add_rowvec: row vector shape mismatch");
        n.value = A().rowwise() + B().row(0);
        break;
    case Op::Col:
        if (n.col < 0 || n.col >= A().cols()) fail(i, "col: index out of range");
        n.value = A().col(n.col);
        break;
    case Op::Tanh:
        n.value = A().array().tanh();
        break;
    case Op::Exp:
        n.value = A().array().exp();
        break;
    case Op::Log:
        n.value = A().array().log();
        break;
    case Op::Square:
        n.value = A().array().square();
        break;
    case Op::Relu:
        n.value = A().cwiseMax(0.0);
        break;
    case Op::Clamp:
        n.value = A().cwiseMax(n.c0).cwiseMin(n.c1);
        break;
    case Op::Scale:
        n.value = n.c0 * A();
        break;
    case Op::AddScalar:
        n.value = A().array() + n.c0;
        break;
    case Op::Sum:
        n.value.resize(1, 1);
        n.value(0, 0) = A().sum();
        break;
    case Op::Mean:
        n.value.resize(1, 1);
        n.value(0, 0) = A().mean();
        break;
    }
}

double Tape::forward(NodeId root) {
    const std::size_t r = check(root);
    for (std::size_t i = 0; i < nodes_.size(); ++i) eval(i);
    evaluated_ = true;
    const Eigen::MatrixXd& v = nodes_[r].value;
    if (v.rows() != 1 || v.cols() != 1) fail(r, "forward: root is not scalar");
    if (!std::isfinite(v(0, 0))) {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (!nodes_[i].value.allFinite()) fail(i, "forward: non-finite intermediate");
        fail(r, "forward: non-finite output");
    }
    return v(0, 0);
}

double Tape::scalar_value(NodeId id) const {
    const Eigen::MatrixXd& v = value(id);
    if (v.rows() != 1 || v.cols() != 1)
        throw std::logic_error("Tape::scalar_value: node is not scalar");
    return v(0, 0);
}

void Tape::set_constant(NodeId id, const Eigen::MatrixXd& v) {
    Node& n = nodes_.at(check(id));
    if (n.op != Op::Constant) throw std::logic_error("Tape::set_constant: node is not a constant");
    if (n.value.rows() != v.rows() || n.value.cols() != v.cols())
        throw std::invalid_argument("Tape::set_constant: shape mismatch");
    n.value = v;
}

std::vector<double> Tape::backward(NodeId root) {
    if (nodes_.empty() || !evaluated_)
        throw std::logic_error("Tape::backward: no forward evaluation recorded");
    const std::size_t r = check(root);
    if (nodes_[r].value.rows() != 1 || nodes_[r].value.cols() != 1)
        fail(r, "backward: root is not scalar");

    for (Node& n : nodes_) {
        n.adjoint.resize(n.value.rows(), n.value.cols());
        n.adjoint.setZero();
    }
    nodes_[r].adjoint(0, 0) = 1.0;

    for (std::size_t k = r + 1; k-- > 0;) {
        Node& n = nodes_[k];
        const Eigen::MatrixXd& g = n.adjoint;
        Node* pa = n.a >= 0 ? &nodes_[static_cast<std::size_t>(n.a)] : nullptr;
        Node* pb = n.b >= 0 ? &nodes_[static_cast<std::size_t>(n.b)] : nullptr;

        switch (n.op) {
        case Op::Constant:
        case Op::Param:
            break;
        case Op::Add:
            pa->adjoint += g;
            pb->adjoint += g;
            break;
        case Op::Sub:
            pa->adjoint += g;
            pb->adjoint -= g;
            break;
        case Op::Mul:
            pa->adjoint += g.cwiseProduct(pb->value);
            pb->adjoint += g.cwiseProduct(pa->value);
            break;
        case Op::MatMul:
            pa->adjoint.noalias() += g * pb->value.transpose();
            pb->adjoint.noalias() += pa->value.transpose() * g;
            break;
        case Op::AddRowVec:
            pa->adjoint += g;
            pb->adjoint.row(0) += g.colwise().sum();
            break;
        case Op::Col:
            pa->adjoint.col(n.col) += g;
            break;
        case Op::Tanh:
            pa->adjoint.array() += g.array() * (1.0 - n.value.array().square());
            break;
        case Op::Exp:
            pa->adjoint.array() += g.array() * n.value.array();
            break;
        case Op::Log:
            pa->adjoint.array() += g.array() / pa->value.array();
            break;
        case Op::Square:
            pa->adjoint.array() += g.array() * 2.0 * pa->value.array();
            break;
        case Op::Relu:
            pa->adjoint.array() += g.array() * (pa->value.array() > 0.0).cast<double>();
            break;
        case Op::Clamp:
            pa->adjoint.array() +=
                g.array() * ((pa->value.array() > n.c0) && (pa->value.array() < n.c1)).cast<double>();
            break;
        case Op::Scale:
            pa->adjoint += n.c0 * g;
            break;
        case Op::AddScalar:
            pa->adjoint += g;
            break;
        case Op::Sum:
            pa->adjoint.array() += g(0, 0);
            break;
        case Op::Mean:
            pa->adjoint.array() += g(0, 0) / static_cast<double>(pa->value.size());
            break;
        }
    }

    std::vector<double> grad;
    if (store_) {
        grad.assign(store_->total_dim(), 0.0);
        for (const Node& n : nodes_) {
            if (n.op != Op::Param) continue;
            const ParamStore::Entry& e = store_->entry(n.param);
            Eigen::Map<Eigen::MatrixXd>(grad.data() + e.offset, e.rows, e.cols) += n.adjoint;
        }
    }
    return grad;
}

} // namespace llf
