#include <doctest.h>

#include <cmath>
#include <functional>

#include "ovd/rng.hpp"
#include "ovd/tensor.hpp"

using namespace ovd;
using namespace ovd::nn;

namespace {

// `build` wires a graph from the leaf vars and appends the scalar loss var.
// Analytic gradients from one backward pass are compared against central
// finite differences over every parameter entry.
void check_grad(std::vector<Tensor>& params,
                const std::function<double(Tape&, std::vector<Var>&)>& build,
                double tol = 1e-6) {
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (auto& p : params) vars.push_back(tape.leaf(p));
        std::vector<Var> vcopy = vars;
        build(tape, vcopy);
        tape.backward(vcopy.back());
        for (size_t i = 0; i < params.size(); ++i) analytic.push_back(tape.grad(vars[i]));
    }

    auto eval = [&](void) {
        Tape tape;
        std::vector<Var> vars;
        for (auto& p : params) vars.push_back(tape.leaf(p));
        std::vector<Var> vcopy = vars;
        build(tape, vcopy);
        return tape.scalar(vcopy.back());
    };

    for (size_t pi = 0; pi < params.size(); ++pi) {
        for (size_t k = 0; k < params[pi].data.size(); ++k) {
            double orig = params[pi].data[k];
            double h = 1e-6 * std::max(1.0, std::abs(orig));
            params[pi].data[k] = orig + h;
            double fp = eval();
            params[pi].data[k] = orig - h;
            double fm = eval();
            params[pi].data[k] = orig;
            double fd = (fp - fm) / (2 * h);
            double an = analytic[pi][k];
            double denom = std::max({1.0, std::abs(fd), std::abs(an)});
            CHECK(std::abs(fd - an) / denom <= tol);
        }
    }
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 0.5) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.gaussian() * scale;
    return t;
}

} // namespace

TEST_CASE("conv2d gradient matches finite differences") {
    Rng rng(1);
    std::vector<Tensor> params;
    params.push_back(random_tensor({2, 5, 6}, rng));    // x
    params.push_back(random_tensor({3, 2, 3, 3}, rng)); // w
    params.push_back(random_tensor({3}, rng));          // b
    check_grad(params, [](Tape& t, std::vector<Var>& v) {
        Var y = t.conv2d(v[0], v[1], v[2], 2, 1);
        Var r = t.relu(y);
        // quadratic pooling to a scalar keeps the loss smooth away from 0
        std::vector<size_t> idx(t.value(r).size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Var flat = t.reshape(r, {static_cast<int>(idx.size()), 1});
        std::vector<double> targets(idx.size(), 0.1);
        std::vector<double> w(idx.size(), 1.0);
        Var loss = t.smooth_l1(flat, targets, w);
        v.push_back(loss);
        return 0.0;
    });
}

TEST_CASE("linear and normalize gradients") {
    Rng rng(2);
    std::vector<Tensor> params;
    params.push_back(random_tensor({4, 6}, rng));  // x
    params.push_back(random_tensor({3, 6}, rng));  // w
    params.push_back(random_tensor({3}, rng));     // b
    params.push_back(random_tensor({2, 3}, rng));  // prototypes
    params.push_back(random_tensor({1}, rng, 0.2)); // log scale
    check_grad(params, [](Tape& t, std::vector<Var>& v) {
        Var h = t.linear(v[0], v[1], v[2]);      // [4,3]
        Var hn = t.l2_normalize_rows(h);
        Var pn = t.l2_normalize_rows(v[3]);
        Var cos = t.matmul_nt(hn, pn);           // [4,2]
        Var scaled = t.scale_by_exp(cos, v[4]);
        std::vector<int> targets{0, 1, 0, 1};
        std::vector<double> w{0.3, 0.7, 1.0, 0.5};
        Var loss = t.softmax_cross_entropy(scaled, targets, w);
        v.push_back(loss);
        return 0.0;
    });
}

TEST_CASE("roi_align gradient") {
    Rng rng(3);
    std::vector<Tensor> params;
    params.push_back(random_tensor({2, 6, 6}, rng)); // feature map
    std::vector<BBox> rois{BBox(2.0, 2.0, 14.0, 10.0), BBox(0.5, 0.5, 20.0, 20.0)};
    check_grad(params, [rois](Tape& t, std::vector<Var>& v) {
        Var r = t.roi_align(v[0], rois, 3, 0.25);
        std::vector<double> targets(t.value(r).size(), 0.05);
        std::vector<double> w(static_cast<size_t>(t.shape(r)[0]), 1.0);
        Var loss = t.smooth_l1(r, targets, w);
        v.push_back(loss);
        return 0.0;
    });
}

TEST_CASE("bce and weighted sum gradients") {
    Rng rng(4);
    std::vector<Tensor> params;
    params.push_back(random_tensor({5}, rng, 1.5));
    params.push_back(random_tensor({2, 4}, rng));
    check_grad(params, [](Tape& t, std::vector<Var>& v) {
        std::vector<double> targets{1, 0, 1, 0, 1};
        std::vector<double> w{0.2, 0.2, 0.2, 0.2, 0.2};
        Var a = t.bce_with_logits(v[0], targets, w);
        std::vector<double> t2{0.1, -0.2, 2.0, -3.0, 0.0, 0.5, 0.25, -0.5};
        std::vector<double> w2{0.5, 0.5};
        Var b = t.smooth_l1(v[1], t2, w2);
        Var loss = t.weighted_sum({a, b}, {1.0, 0.5});
        v.push_back(loss);
        return 0.0;
    });
}

TEST_CASE("gather and concat gradients") {
    Rng rng(5);
    std::vector<Tensor> params;
    params.push_back(random_tensor({3, 4}, rng));
    params.push_back(random_tensor({3, 2}, rng));
    check_grad(params, [](Tape& t, std::vector<Var>& v) {
        Var c = t.concat_cols(v[0], v[1]); // [3,6]
        std::vector<size_t> idx{0, 7, 13, 5, 5, 17};
        Var g = t.gather(c, idx, {3, 2});
        std::vector<int> targets{0, 1, 1};
        std::vector<double> w{1.0, 2.0, 0.5};
        Var loss = t.softmax_cross_entropy(g, targets, w);
        v.push_back(loss);
        return 0.0;
    });
}

TEST_CASE("softmax row is normalized and shift invariant") {
    std::vector<double> s{1.0, 2.0, 3.0, 4.0};
    auto p = softmax_row(s);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> shifted{101.0, 102.0, 103.0, 104.0};
    auto q = softmax_row(shifted);
    for (size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
}

TEST_CASE("sgd momentum step") {
    SgdState sgd;
    std::vector<double> theta{1.0};
    std::vector<double> grad{0.5};
    sgd.step(theta, grad, 0.1, 0.9, 0.0);
    CHECK(theta[0] == doctest::Approx(1.0 - 0.1 * 0.5));
    sgd.step(theta, grad, 0.1, 0.9, 0.0);
    // velocity = 0.9*0.5 + 0.5 = 0.95
    CHECK(theta[0] == doctest::Approx(0.95 - 0.1 * 0.95));
}
