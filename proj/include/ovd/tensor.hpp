#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ovd/geometry.hpp"

namespace ovd::nn {

// Dense row-major tensor of doubles.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

    static size_t numel_of(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }
    size_t numel() const { return data.size(); }
};

struct Var {
    int id = -1;
    bool ok() const { return id >= 0; }
};

// Reverse-mode tape. Values are created by ops during the forward pass;
// backward() walks the recorded closures in reverse. One tape per image per
// step keeps the training loop embarrassingly parallel.
class Tape {
public:
    Var leaf(const std::vector<int>& shape, const double* data);
    Var leaf(const Tensor& t) { return leaf(t.shape, t.data.data()); }

    // x[C,H,W] * w[K,C,kh,kw] + b[K] -> [K,Ho,Wo]
    Var conv2d(Var x, Var w, Var b, int stride, int pad);
    Var relu(Var x);
    // x[N,D] * w[M,D]^T + b[M] -> [N,M]
    Var linear(Var x, Var w, Var b);
    // x[N,D] * y[M,D]^T -> [N,M]
    Var matmul_nt(Var x, Var y);
    // feat[C,H,W], boxes in image coordinates -> [N, C*out*out]
    Var roi_align(Var feat, const std::vector<BBox>& rois, int out, double spatial_scale);
    // Row-wise x / ||x||. Throws if a row norm falls below 1e-12.
    Var l2_normalize_rows(Var x);
    Var concat_cols(Var a, Var b);
    // y.flat[i] = x.flat[index[i]]
    Var gather(Var x, std::vector<size_t> index, std::vector<int> out_shape);
    Var reshape(Var x, std::vector<int> shape);
    // [C,H,W] -> [1,C] spatial mean
    Var mean_pool_all(Var x);
    // x * exp(s), s a 1-element tensor
    Var scale_by_exp(Var x, Var s);
    Var mul_const(Var x, double c);
    Var add(Var a, Var b);
    // sum_k coeff[k] * scalar_k
    Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& coeffs);

    // sum_i weight[i] * cross_entropy(softmax(scores[i,:]), target[i])
    Var softmax_cross_entropy(Var scores, const std::vector<int>& targets, const std::vector<double>& weights);
    // sum_i weight[i] * bce_with_logits(logit[i], target[i]); x is flat
    Var bce_with_logits(Var logits, const std::vector<double>& targets, const std::vector<double>& weights);
    // sum_i weight[i] * sum_k smooth_l1(pred[i,k] - target[i,k])
    Var smooth_l1(Var pred, const std::vector<double>& targets, const std::vector<double>& weights);

    const std::vector<int>& shape(Var v) const { return slots_[v.id].shape; }
    const std::vector<double>& value(Var v) const { return slots_[v.id].data; }
    double scalar(Var v) const { return slots_[v.id].data.at(0); }
    const std::vector<double>& grad(Var v) const { return slots_[v.id].grad; }

    // Seeds each (var, weight) pair and propagates. Grads accumulate; call
    // once per tape.
    void backward(const std::vector<std::pair<Var, double>>& seeds);
    void backward(Var loss) { backward({{loss, 1.0}}); }

private:
    struct Slot {
        std::vector<int> shape;
        std::vector<double> data;
        std::vector<double> grad;
    };
    std::vector<Slot> slots_;
    std::vector<std::function<void()>> nodes_;

    Var alloc(std::vector<int> shape);
    double* mut(Var v) { return slots_[v.id].data.data(); }
    double* gmut(Var v) { return slots_[v.id].grad.data(); }
};

// Stable softmax of one row (inference-side helper).
std::vector<double> softmax_row(const std::vector<double>& scores);

// SGD with momentum and decoupled-from-nothing classic L2 weight decay:
// v = mu*v + g + wd*theta; theta -= lr*v.
struct SgdState {
    std::vector<double> velocity;

    void step(std::vector<double>& theta, const std::vector<double>& grad, double lr, double momentum, double weight_decay);
};

} // namespace ovd::nn
