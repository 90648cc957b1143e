#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdeop/core.hpp"

namespace pdeop::nn {

/// Trainable matrix with its accumulated gradient.
struct ParamBlock {
    std::string name;
    Mat value;
    Mat grad;

    ParamBlock() = default;
    ParamBlock(std::string n, Mat init);
    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a tape node. Values are matrices with the batch in rows.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Mat& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
/// sweep is a valid topological order.
class Tape {
public:
    using Backward = std::function<void(Tape&, int self)>;

    Var constant(Mat value);
    /// Differentiable leaf not tied to a ParamBlock (inputs in gradient checks).
    Var leaf(Mat value);
    /// Leaf bound to a parameter block; repeated calls return the same node.
    Var param(ParamBlock& p);

    Var push(Mat value, std::vector<int> parents, Backward backward);

    const Mat& value(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of a node, allocated on first use.
    Mat& grad(int id);
    const Mat& grad(Var v) { return grad(v.id); }

    /// Seeds d out/d out = 1 for a 1x1 node and sweeps once in reverse.
    void backward(Var out);
    /// Adds leaf gradients into the bound ParamBlock::grad buffers.
    void accumulate_param_grads();

    /// Per-tape memo for values shared across calls (e.g. trunk features).
    bool recall(const void* key, Var& out);
    void remember(const void* key, Var v) { memo_[key] = v.id; }

    std::size_t size() const noexcept { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Mat value;
        Mat grad;
        std::vector<int> parents;
        Backward backward;
        bool requires_grad = false;
        bool has_grad = false;
        ParamBlock* param = nullptr;
    };
    std::vector<Node> nodes_;
    std::unordered_map<const ParamBlock*, int> param_ids_;
    std::unordered_map<const void*, int> memo_;
};

enum class Activation { Relu, Silu, Tanh, Identity };
std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);
/// Plain evaluation, used by the tape-free inference path.
Mat apply_activation(const Mat& x, Activation a);

// Operations. Shapes follow Eigen conventions; all checks throw DimensionError.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_row(Var a, Var row);  // broadcast a 1 x c row over a's rows
Var activate(Var a, Activation act);
Var sigmoid(Var a);
Var tanh(Var a);
Var abs(Var a);
Var hinge(Var a);  // max(0, a)
/// lo + (hi - lo) * sigmoid(a)
Var squash(Var a, double lo, double hi);
/// (a - shift) .* inv_scale per column, with constant 1 x c rows.
Var normalize_cols(Var a, const Mat& shift, const Mat& inv_scale);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var sum(Var a);
Var mean(Var a);
Var sum_squares(Var a);
/// Row sums as a rows x 1 column.
Var row_sum_squares(Var a);

}  // namespace pdeop::nn
