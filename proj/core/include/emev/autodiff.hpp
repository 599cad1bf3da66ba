#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "emev/tensor.hpp"

namespace emev {

// Trainable tensor with an accumulated gradient of identical shape.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape)) {}

    void zero_grad() { grad.fill(0.0f); }
};

enum class Activation { kLinear, kRelu, kLeakyRelu, kTanh };

// Handle into a Tape node.
struct Var {
    int id = -1;
};

// Single-writer reverse-mode tape. Forward ops append nodes; backward() walks
// the tape in reverse and accumulates gradients into bound Parameters.
// Reductions run in a fixed order with double accumulators so repeated runs
// are bit-identical.
class Tape {
   public:
    Var input(Tensor value);
    Var param(Parameter& p);

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;

    // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node,
    // then adds leaf gradients into their Parameters.
    void backward(Var loss);

    // ---- primitive ops ----
    Var add(Var a, Var b);
    Var scale(Var a, double c);
    Var add_const(Var a, const Tensor& c);
    Var matmul(Var a, Var b);     // [m,k] x [k,n]
    Var matmul_nt(Var a, Var b);  // [m,k] x [n,k]^T -> [m,n]
    Var add_rowvec(Var m, Var row);
    Var activation(Var a, Activation act, float leaky_slope = 0.01f);
    Var softmax_rows(Var a);
    Var reshape(Var a, std::vector<int64_t> shape);
    Var slice_cols(Var a, int64_t c0, int64_t c1);
    Var concat_cols(const std::vector<Var>& parts);
    // Same-padded cross-correlation. input [H,W,Cin], w [K,K,Cin,Cout], b [Cout].
    Var conv2d(Var in, Var w, Var b);
    // input [D,H,W,Cin], w [K,K,K,Cin,Cout], b [Cout].
    Var conv3d(Var in, Var w, Var b);
    Var global_avg_pool2d(Var in);  // [H,W,C] -> [C]
    Var mse_to_target(Var a, const Tensor& target);      // scalar
    Var cross_entropy_logits(Var logits, int label);     // scalar
    Var add_scaled(Var a, double wa, Var b, double wb);  // scalar combine
    Var mean_of(const std::vector<Var>& scalars);

    int64_t node_count() const { return static_cast<int64_t>(nodes_.size()); }

   private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<int> parents;
        std::function<void(Tape&, Node&)> backprop;  // may be empty for leaves
        Parameter* bound = nullptr;
    };

    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, int> param_nodes_;

    int push(Tensor value, std::vector<int> parents,
             std::function<void(Tape&, Node&)> backprop);
    Node& node(Var v);
    const Node& node(Var v) const;
    Tensor& grad_buf(int id);
};

}  // namespace emev
