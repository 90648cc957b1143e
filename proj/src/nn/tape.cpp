#include "pdeop/tape.hpp"

#include <cmath>

namespace pdeop::nn {

ParamBlock::ParamBlock(std::string n, Mat init)
    : name(std::move(n)), value(std::move(init)) {
    grad = Mat::Zero(value.rows(), value.cols());
}

const Mat& Var::value() const { return tape->value(id); }

Var Tape::constant(Mat value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Mat value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(ParamBlock& p) {
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) return {this, it->second};
    Var v = leaf(p.value);
    nodes_[v.id].param = &p;
    param_ids_[&p] = v.id;
    return v;
}

Var Tape::push(Mat value, std::vector<int> parents, Backward backward) {
    Node n;
    n.value = std::move(value);
    for (int p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    n.parents = std::move(parents);
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::grad(int id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var out) {
    if (out.tape != this) throw DimensionError("backward on a foreign tape");
    if (out.rows() != 1 || out.cols() != 1) throw DimensionError("backward needs a scalar output");
    for (auto& n : nodes_) {
        n.has_grad = false;
        n.grad.resize(0, 0);
    }
    grad(out.id)(0, 0) = 1.0;
    for (int i = out.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.requires_grad || !n.backward) continue;
        n.backward(*this, i);
    }
}

void Tape::accumulate_param_grads() {
    for (auto& n : nodes_) {
        if (n.param == nullptr || !n.has_grad) continue;
        if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) n.param->zero_grad();
        n.param->grad += n.grad;
    }
}

bool Tape::recall(const void* key, Var& out) {
    auto it = memo_.find(key);
    if (it == memo_.end()) return false;
    out = {this, it->second};
    return true;
}

void Tape::clear() {
    nodes_.clear();
    param_ids_.clear();
    memo_.clear();
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Silu: return "silu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "silu") return Activation::Silu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + name + "'");
}

namespace {

Mat logistic(const Mat& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

void same_shape(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
}

// Adds g into the parent's gradient when the parent needs one.
void send(Tape& t, int parent, const Mat& g) {
    if (t.needs_grad(parent)) t.grad(parent) += g;
}

}  // namespace

Mat apply_activation(const Mat& x, Activation a) {
    switch (a) {
        case Activation::Relu: return x.cwiseMax(0.0);
        case Activation::Silu: return x.cwiseProduct(logistic(x));
        case Activation::Tanh: return x.array().tanh().matrix();
        case Activation::Identity: return x;
    }
    return x;
}

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
    const int ia = a.id, ib = b.id;
    return a.tape->push(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
        if (t.needs_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
    });
}

Var matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_nt: column counts differ");
    const int ia = a.id, ib = b.id;
    return a.tape->push(a.value() * b.value().transpose(), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib);
        if (t.needs_grad(ib)) t.grad(ib).noalias() += g.transpose() * t.value(ia);
    });
}

Var add(Var a, Var b) {
    same_shape(a, b, "add");
    const int ia = a.id, ib = b.id;
    return a.tape->push(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        send(t, ia, g);
        send(t, ib, g);
    });
}

Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    const int ia = a.id, ib = b.id;
    return a.tape->push(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        send(t, ia, g);
        if (t.needs_grad(ib)) t.grad(ib) -= g;
    });
}

Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    const int ia = a.id, ib = b.id;
    return a.tape->push(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.needs_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
        if (t.needs_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
    });
}

Var scale(Var a, double s) {
    const int ia = a.id;
    return a.tape->push(s * a.value(), {ia}, [ia, s](Tape& t, int self) { t.grad(ia) += s * t.grad(self); });
}

Var add_scalar(Var a, double s) {
    const int ia = a.id;
    Mat v = a.value().array() + s;
    return a.tape->push(std::move(v), {ia}, [ia](Tape& t, int self) { t.grad(ia) += t.grad(self); });
}

Var add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionError("add_row: bias must be 1 x cols");
    const int ia = a.id, ir = row.id;
    Mat v = a.value().rowwise() + row.value().row(0);
    return a.tape->push(std::move(v), {ia, ir}, [ia, ir](Tape& t, int self) {
        const Mat& g = t.grad(self);
        send(t, ia, g);
        if (t.needs_grad(ir)) t.grad(ir) += g.colwise().sum();
    });
}

Var activate(Var a, Activation act) {
    const int ia = a.id;
    switch (act) {
        case Activation::Identity: return a;
        case Activation::Tanh: return tanh(a);
        case Activation::Relu:
            return a.tape->push(a.value().cwiseMax(0.0), {ia}, [ia](Tape& t, int self) {
                t.grad(ia) += (t.value(ia).array() > 0.0).select(t.grad(self), 0.0);
            });
        case Activation::Silu: {
            Mat s = logistic(a.value());
            Mat v = a.value().cwiseProduct(s);
            return a.tape->push(std::move(v), {ia}, [ia, s = std::move(s)](Tape& t, int self) {
                const auto x = t.value(ia).array();
                t.grad(ia).array() += t.grad(self).array() * (s.array() * (1.0 + x * (1.0 - s.array())));
            });
        }
    }
    return a;
}

Var sigmoid(Var a) {
    const int ia = a.id;
    return a.tape->push(logistic(a.value()), {ia}, [ia](Tape& t, int self) {
        const auto s = t.value(self).array();
        t.grad(ia).array() += t.grad(self).array() * s * (1.0 - s);
    });
}

Var tanh(Var a) {
    const int ia = a.id;
    Mat v = a.value().array().tanh().matrix();
    return a.tape->push(std::move(v), {ia}, [ia](Tape& t, int self) {
        const auto y = t.value(self).array();
        t.grad(ia).array() += t.grad(self).array() * (1.0 - y * y);
    });
}

Var abs(Var a) {
    const int ia = a.id;
    return a.tape->push(a.value().cwiseAbs(), {ia}, [ia](Tape& t, int self) {
        t.grad(ia).array() += t.grad(self).array() * t.value(ia).array().sign();
    });
}

Var hinge(Var a) {
    const int ia = a.id;
    return a.tape->push(a.value().cwiseMax(0.0), {ia}, [ia](Tape& t, int self) {
        t.grad(ia) += (t.value(ia).array() > 0.0).select(t.grad(self), 0.0);
    });
}

Var squash(Var a, double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError("squash needs lo <= hi");
    const int ia = a.id;
    const double w = hi - lo;
    Mat s = logistic(a.value());
    Mat v = (lo + w * s.array()).matrix();
    return a.tape->push(std::move(v), {ia}, [ia, w, s = std::move(s)](Tape& t, int self) {
        t.grad(ia).array() += t.grad(self).array() * (w * s.array() * (1.0 - s.array()));
    });
}

Var normalize_cols(Var a, const Mat& shift, const Mat& inv_scale) {
    if (shift.rows() != 1 || inv_scale.rows() != 1 || shift.cols() != a.cols() || inv_scale.cols() != a.cols())
        throw DimensionError("normalize_cols: shift/scale must be 1 x cols");
    const int ia = a.id;
    Mat v = (a.value().rowwise() - shift.row(0)).array().rowwise() * inv_scale.row(0).array();
    return a.tape->push(std::move(v), {ia}, [ia, inv_scale](Tape& t, int self) {
        t.grad(ia).array() += t.grad(self).array().rowwise() * inv_scale.row(0).array();
    });
}

Var concat_cols(Var a, Var b) {
    if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts differ");
    const int ia = a.id, ib = b.id;
    const Eigen::Index ca = a.cols();
    Mat v(a.rows(), ca + b.cols());
    v << a.value(), b.value();
    return a.tape->push(std::move(v), {ia, ib}, [ia, ib, ca](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.needs_grad(ia)) t.grad(ia) += g.leftCols(ca);
        if (t.needs_grad(ib)) t.grad(ib) += g.rightCols(g.cols() - ca);
    });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) throw DimensionError("slice_cols out of range");
    const int ia = a.id;
    return a.tape->push(a.value().middleCols(start, count), {ia}, [ia, start, count](Tape& t, int self) {
        t.grad(ia).middleCols(start, count) += t.grad(self);
    });
}

Var sum(Var a) {
    const int ia = a.id;
    return a.tape->push(Mat::Constant(1, 1, a.value().sum()), {ia}, [ia](Tape& t, int self) {
        t.grad(ia).array() += t.grad(self)(0, 0);
    });
}

Var mean(Var a) {
    const double inv = 1.0 / static_cast<double>(a.value().size());
    return scale(sum(a), inv);
}

Var sum_squares(Var a) {
    const int ia = a.id;
    return a.tape->push(Mat::Constant(1, 1, a.value().squaredNorm()), {ia}, [ia](Tape& t, int self) {
        t.grad(ia) += 2.0 * t.grad(self)(0, 0) * t.value(ia);
    });
}

Var row_sum_squares(Var a) {
    const int ia = a.id;
    Mat v = a.value().rowwise().squaredNorm();
    return a.tape->push(std::move(v), {ia}, [ia](Tape& t, int self) {
        t.grad(ia) += 2.0 * (t.value(ia).array().colwise() * t.grad(self).col(0).array()).matrix();
    });
}

}  // namespace pdeop::nn
