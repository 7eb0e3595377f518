#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gdr/tensor.hpp"

namespace gdr::tape {

// Reverse-mode tape over dense tensors. Each op builds a Node holding the
// forward value plus a closure that routes the incoming gradient to the
// node's inputs. Graphs are single-owner DAGs of shared_ptrs; backward()
// walks them once in reverse topological order and accumulates into leaf
// gradients, so shared subexpressions add up rather than overwrite.
class Node;
using Var = std::shared_ptr<Node>;

class Node {
public:
    Tensor value;
    bool requires_grad = false;
    std::vector<Var> inputs;
    std::function<void(Node&)> backward_fn;

    // Reductions accumulate in double; the unrounded scalar is kept so
    // finite-difference oracles are not limited by the final float cast.
    double scalar_double = 0.0;
    bool has_scalar_double = false;
    double scalar() const {
        return has_scalar_double ? scalar_double : static_cast<double>(value.item());
    }

    bool has_grad() const { return has_grad_; }

    // Accumulated gradient; zeros of the value shape if backward never
    // reached this node.
    const Tensor& grad() const {
        if (!has_grad_) {
            zero_cache_ = Tensor(value.shape);
            return zero_cache_;
        }
        return grad_;
    }

    void accumulate(const Tensor& g);
    void zero_grad() {
        has_grad_ = false;
        grad_ = Tensor();
    }

private:
    Tensor grad_;
    mutable Tensor zero_cache_;
    bool has_grad_ = false;
};

Var leaf(Tensor v, bool requires_grad = false);
Var constant(Tensor v);

// Elementwise (strict shapes; no broadcasting beyond scalar-tensor).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, float s);
Var mul_scalar(const Var& a, float s);

// Activations.
Var relu(const Var& x);
Var leaky_relu(const Var& x, float slope);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var clamp(const Var& x, float lo, float hi);  // pass-through grad inside [lo,hi]

// Cross-correlation, NCHW. bias may be nullptr; otherwise shape (1,OC,1,1).
Var conv2d(const Var& x, const Var& w, const Var& b, int64_t stride, int64_t pad);

// Structure ops.
Var concat_batch(const Var& a, const Var& b);
Var concat_batch(std::span<const Var> parts);
Var add_channel_bias(const Var& x, const Var& b);  // b shape (N,C,1,1)
Var upsample2x(const Var& x);                      // nearest neighbour

// Reductions / losses (all return scalar (1,1,1,1) unless noted).
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var mean_per_item(const Var& x);  // (N,1,1,1)
Var mse(const Var& a, const Var& b);
// mean(log d) / mean(log(1-d)) with d clamped to [1e-6, 1-1e-6] first.
Var log_mean(const Var& d);
Var log_one_minus_mean(const Var& d);
// Anisotropic total variation: spatial sum of |forward differences|,
// averaged over batch and channels. Subgradient 0 at ties.
Var tv(const Var& x);

constexpr float kProbClamp = 1e-6f;

void backward(const Var& root);

// Standard Adam with bias correction. Moment buffers are allocated on first
// use and must keep matching the parameter list afterwards.
struct AdamState {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    int64_t step_count = 0;
    std::vector<Tensor> m, v;
};

void adam_step(AdamState& st, std::span<Tensor* const> params,
               std::span<const Tensor* const> grads);
void adam_step(AdamState& st, std::span<const Var> params);

void zero_grads(std::span<const Var> params);

}  // namespace gdr::tape
