#pragma once

#include <functional>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace mtlb {

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int idx = -1;
    bool valid() const { return tape != nullptr && idx >= 0; }
};

// Define-by-run reverse-mode tape. A tape is built fresh for every forward
// pass; nodes only ever reference earlier nodes, so creation order is a
// topological order and backward() is a single reverse sweep that visits each
// node once. Nodes created from inputs without gradient tracking carry no
// backward closure and cost nothing in the sweep.
class Tape {
   public:
    // backprop(tape, self) reads grad_buf(self) and accumulates into parents.
    using Backprop = std::function<void(Tape&, int)>;

    struct Node {
        Tensor value;
        Tensor grad;  // empty until first accumulation
        bool needs_grad = false;
        Backprop backprop;
    };

    Var leaf(Tensor value, bool needs_grad = false);
    Var make(Tensor value, bool needs_grad, Backprop backprop);

    const Tensor& val(const Var& v) const { return nodes_[static_cast<size_t>(v.idx)].value; }
    const Tensor& val(int idx) const { return nodes_[static_cast<size_t>(idx)].value; }
    bool needs_grad(const Var& v) const { return nodes_[static_cast<size_t>(v.idx)].needs_grad; }

    // Gradient buffer, allocated as zeros on first access.
    Tensor& grad_buf(int idx);
    bool has_grad(int idx) const { return !nodes_[static_cast<size_t>(idx)].grad.data.empty(); }
    // Gradient of a node after backward(); zeros if the node was never reached.
    Tensor grad_of(const Var& v) const;

    // root must be scalar. Seeds d(root)/d(root)=1 and sweeps in reverse
    // creation order. Deterministic: same graph, same result, bit for bit.
    void backward(const Var& root);

    // Clears gradients so backward() can be re-run on the same graph.
    void zero_grad();

    size_t size() const { return nodes_.size(); }

   private:
    std::vector<Node> nodes_;
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);                // same shape
Var add_rowvec(Var m, Var rowvec);    // broadcast [1xN] (or [N]) over rows of [MxN]
Var sub(Var a, Var b);
Var mul(Var a, Var b);                // elementwise, same shape
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var sigmoid(Var x);
Var tanh_op(Var x);
Var relu(Var x);
Var emax(Var a, Var b);               // elementwise max, same shape
Var dropout(Var x, double p, bool train, Rng& rng);
Var softmax_rows(Var x);
Var transpose(Var x);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var stack_rows(const std::vector<Var>& rows);  // each [1xN]
Var slice_rows(Var x, int row0, int nrows);
// Row-wise layer normalization: per row y = gamma * (x - mu) / sqrt(var + eps) + beta.
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
Var sum_all(Var x);                   // -> scalar
Var add_scalars(const std::vector<Var>& terms);

// ---- losses ----------------------------------------------------------------
// All losses return a scalar node equal to the mean over mask-valid entries
// and return an exact zero with no gradient when the mask has no support.
// NaN in pred or target raises NumericError.

enum class LossKind { BinaryCrossEntropyWithLogits, CategoricalCrossEntropy, MeanSquaredError };

Var bce_with_logits_loss(Var logits, const Tensor& target, const Tensor& mask);
// logits [NxC]; target_class[i] in [0,C); row_mask [N].
Var ce_with_logits_loss(Var logits, const std::vector<int>& target_class, const Tensor& row_mask);
Var mse_loss(Var pred, const Tensor& target, const Tensor& mask);

// Dispatcher matching the per-task loss contract. For categorical CE the
// target holds one-hot rows and the mask is per-row (first column used).
Var loss(LossKind kind, Var pred, const Tensor& target, const Tensor& mask);

}  // namespace mtlb
