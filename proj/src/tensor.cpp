#include "ovd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include <Eigen/Core>

namespace ovd::nn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

Var Tape::alloc(std::vector<int> shape) {
    Slot s;
    s.shape = std::move(shape);
    s.data.assign(Tensor::numel_of(s.shape), 0.0);
    s.grad.assign(s.data.size(), 0.0);
    slots_.push_back(std::move(s));
    return Var{static_cast<int>(slots_.size()) - 1};
}

Var Tape::leaf(const std::vector<int>& shape, const double* data) {
    Var v = alloc(shape);
    std::copy(data, data + slots_[v.id].data.size(), slots_[v.id].data.begin());
    nodes_.emplace_back([] {});
    return v;
}

static void im2col(const double* x, int C, int H, int W, int kh, int kw, int stride, int pad,
                   int Ho, int Wo, double* col) {
    // col is [C*kh*kw, Ho*Wo]
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                double* dst = col + ((static_cast<size_t>(c) * kh + i) * kw + j) * (static_cast<size_t>(Ho) * Wo);
                for (int oy = 0; oy < Ho; ++oy) {
                    int sy = oy * stride + i - pad;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int sx = ox * stride + j - pad;
                        dst[static_cast<size_t>(oy) * Wo + ox] =
                            (sy >= 0 && sy < H && sx >= 0 && sx < W) ? x[(static_cast<size_t>(c) * H + sy) * W + sx] : 0.0;
                    }
                }
            }
}

static void col2im_add(const double* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                       int Ho, int Wo, double* x) {
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                const double* src = col + ((static_cast<size_t>(c) * kh + i) * kw + j) * (static_cast<size_t>(Ho) * Wo);
                for (int oy = 0; oy < Ho; ++oy) {
                    int sy = oy * stride + i - pad;
                    if (sy < 0 || sy >= H) continue;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int sx = ox * stride + j - pad;
                        if (sx < 0 || sx >= W) continue;
                        x[(static_cast<size_t>(c) * H + sy) * W + sx] += src[static_cast<size_t>(oy) * Wo + ox];
                    }
                }
            }
}

Var Tape::conv2d(Var x, Var w, Var b, int stride, int pad) {
    const auto& xs = shape(x);
    const auto& ws = shape(w);
    if (xs.size() != 3 || ws.size() != 4 || xs[0] != ws[1]) throw std::runtime_error("conv2d: bad shapes");
    int C = xs[0], H = xs[1], W = xs[2];
    int K = ws[0], kh = ws[2], kw = ws[3];
    int Ho = (H + 2 * pad - kh) / stride + 1;
    int Wo = (W + 2 * pad - kw) / stride + 1;
    Var y = alloc({K, Ho, Wo});

    size_t ckk = static_cast<size_t>(C) * kh * kw;
    size_t hw = static_cast<size_t>(Ho) * Wo;
    std::vector<double> col(ckk * hw);
    im2col(mut(x), C, H, W, kh, kw, stride, pad, Ho, Wo, col.data());

    {
        CMapM Wm(mut(w), K, static_cast<Eigen::Index>(ckk));
        CMapM Cm(col.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
        MapM Ym(mut(y), K, static_cast<Eigen::Index>(hw));
        Ym.noalias() = Wm * Cm;
        for (int k = 0; k < K; ++k) Ym.row(k).array() += value(b)[k];
    }

    nodes_.emplace_back([this, x, w, b, y, col = std::move(col), C, H, W, K, kh, kw, stride, pad, Ho, Wo, ckk, hw] {
        CMapM dY(gmut(y), K, static_cast<Eigen::Index>(hw));
        // dW += dY * col^T
        MapM dW(gmut(w), K, static_cast<Eigen::Index>(ckk));
        CMapM Cm(col.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
        dW.noalias() += dY * Cm.transpose();
        // db += rowsum(dY)
        double* db = gmut(b);
        for (int k = 0; k < K; ++k) db[k] += dY.row(k).sum();
        // dX += col2im(W^T * dY)
        std::vector<double> dcol(ckk * hw);
        CMapM Wm(mut(w), K, static_cast<Eigen::Index>(ckk));
        MapM dCm(dcol.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
        dCm.noalias() = Wm.transpose() * dY;
        col2im_add(dcol.data(), C, H, W, kh, kw, stride, pad, Ho, Wo, gmut(x));
    });
    return y;
}

Var Tape::relu(Var x) {
    Var y = alloc(shape(x));
    const double* xd = mut(x);
    double* yd = mut(y);
    size_t n = slots_[x.id].data.size();
    for (size_t i = 0; i < n; ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
    nodes_.emplace_back([this, x, y, n] {
        const double* xd = mut(x);
        const double* gy = gmut(y);
        double* gx = gmut(x);
        for (size_t i = 0; i < n; ++i)
            if (xd[i] > 0.0) gx[i] += gy[i];
    });
    return y;
}

Var Tape::linear(Var x, Var w, Var b) {
    const auto& xs = shape(x);
    const auto& ws = shape(w);
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) throw std::runtime_error("linear: bad shapes");
    int N = xs[0], D = xs[1], M = ws[0];
    Var y = alloc({N, M});
    {
        CMapM Xm(mut(x), N, D);
        CMapM Wm(mut(w), M, D);
        MapM Ym(mut(y), N, M);
        Ym.noalias() = Xm * Wm.transpose();
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < M; ++j) Ym(i, j) += value(b)[j];
    }
    nodes_.emplace_back([this, x, w, b, y, N, D, M] {
        CMapM dY(gmut(y), N, M);
        CMapM Xm(mut(x), N, D);
        CMapM Wm(mut(w), M, D);
        MapM dX(gmut(x), N, D);
        MapM dW(gmut(w), M, D);
        dX.noalias() += dY * Wm;
        dW.noalias() += dY.transpose() * Xm;
        double* db = gmut(b);
        for (int j = 0; j < M; ++j) db[j] += dY.col(j).sum();
    });
    return y;
}

Var Tape::matmul_nt(Var x, Var y) {
    const auto& xs = shape(x);
    const auto& ys = shape(y);
    if (xs.size() != 2 || ys.size() != 2 || xs[1] != ys[1]) throw std::runtime_error("matmul_nt: bad shapes");
    int N = xs[0], D = xs[1], M = ys[0];
    Var z = alloc({N, M});
    {
        CMapM Xm(mut(x), N, D);
        CMapM Ym(mut(y), M, D);
        MapM Zm(mut(z), N, M);
        Zm.noalias() = Xm * Ym.transpose();
    }
    nodes_.emplace_back([this, x, y, z, N, D, M] {
        CMapM dZ(gmut(z), N, M);
        CMapM Xm(mut(x), N, D);
        CMapM Ym(mut(y), M, D);
        MapM dX(gmut(x), N, D);
        MapM dY(gmut(y), M, D);
        dX.noalias() += dZ * Ym;
        dY.noalias() += dZ.transpose() * Xm;
    });
    return z;
}

namespace {
struct BilinearTap {
    int idx[4];
    double w[4];
};

// Bilinear weights on the feature lattice where cell (i,j) sits at
// coordinate (i, j). Clamps outside samples to the border.
BilinearTap bilinear_tap(double fx, double fy, int W, int H) {
    BilinearTap t;
    int x0 = static_cast<int>(std::floor(fx));
    int y0 = static_cast<int>(std::floor(fy));
    double ax = fx - x0, ay = fy - y0;
    int x0c = std::clamp(x0, 0, W - 1), x1c = std::clamp(x0 + 1, 0, W - 1);
    int y0c = std::clamp(y0, 0, H - 1), y1c = std::clamp(y0 + 1, 0, H - 1);
    t.idx[0] = y0c * W + x0c;
    t.idx[1] = y0c * W + x1c;
    t.idx[2] = y1c * W + x0c;
    t.idx[3] = y1c * W + x1c;
    t.w[0] = (1 - ay) * (1 - ax);
    t.w[1] = (1 - ay) * ax;
    t.w[2] = ay * (1 - ax);
    t.w[3] = ay * ax;
    return t;
}
} // namespace

Var Tape::roi_align(Var feat, const std::vector<BBox>& rois, int out, double spatial_scale) {
    const auto& fs = shape(feat);
    if (fs.size() != 3) throw std::runtime_error("roi_align: feature must be [C,H,W]");
    int C = fs[0], H = fs[1], W = fs[2];
    int N = static_cast<int>(rois.size());
    Var y = alloc({N, C * out * out});

    // 2x2 samples per bin, averaged; taps reused in the backward pass.
    auto taps = std::make_shared<std::vector<BilinearTap>>();
    taps->reserve(static_cast<size_t>(N) * out * out * 4);
    const double* fd = mut(feat);
    double* yd = mut(y);
    for (int n = 0; n < N; ++n) {
        double fx1 = rois[n].x1 * spatial_scale - 0.5;
        double fy1 = rois[n].y1 * spatial_scale - 0.5;
        double bw = (rois[n].x2 - rois[n].x1) * spatial_scale / out;
        double bh = (rois[n].y2 - rois[n].y1) * spatial_scale / out;
        for (int by = 0; by < out; ++by)
            for (int bx = 0; bx < out; ++bx) {
                BilinearTap local[4];
                int t = 0;
                for (int sy = 0; sy < 2; ++sy)
                    for (int sx = 0; sx < 2; ++sx) {
                        double px = fx1 + (bx + (sx + 0.5) / 2.0) * bw;
                        double py = fy1 + (by + (sy + 0.5) / 2.0) * bh;
                        local[t++] = bilinear_tap(px, py, W, H);
                    }
                for (int k = 0; k < 4; ++k) taps->push_back(local[k]);
                for (int c = 0; c < C; ++c) {
                    const double* plane = fd + static_cast<size_t>(c) * H * W;
                    double acc = 0.0;
                    for (int k = 0; k < 4; ++k) {
                        const BilinearTap& tp = local[k];
                        acc += tp.w[0] * plane[tp.idx[0]] + tp.w[1] * plane[tp.idx[1]] +
                               tp.w[2] * plane[tp.idx[2]] + tp.w[3] * plane[tp.idx[3]];
                    }
                    yd[(static_cast<size_t>(n) * C + c) * out * out + static_cast<size_t>(by) * out + bx] = acc / 4.0;
                }
            }
    }
    nodes_.emplace_back([this, feat, y, taps, N, C, H, W, out] {
        const double* gy = gmut(y);
        double* gf = gmut(feat);
        for (int n = 0; n < N; ++n)
            for (int by = 0; by < out; ++by)
                for (int bx = 0; bx < out; ++bx) {
                    size_t tbase = ((static_cast<size_t>(n) * out + by) * out + bx) * 4;
                    for (int c = 0; c < C; ++c) {
                        double g = gy[(static_cast<size_t>(n) * C + c) * out * out + static_cast<size_t>(by) * out + bx] / 4.0;
                        double* plane = gf + static_cast<size_t>(c) * H * W;
                        for (int k = 0; k < 4; ++k) {
                            const BilinearTap& tp = (*taps)[tbase + k];
                            plane[tp.idx[0]] += g * tp.w[0];
                            plane[tp.idx[1]] += g * tp.w[1];
                            plane[tp.idx[2]] += g * tp.w[2];
                            plane[tp.idx[3]] += g * tp.w[3];
                        }
                    }
                }
    });
    return y;
}

Var Tape::l2_normalize_rows(Var x) {
    const auto& xs = shape(x);
    if (xs.size() != 2) throw std::runtime_error("l2_normalize_rows: need [N,D]");
    int N = xs[0], D = xs[1];
    Var y = alloc({N, D});
    auto norms = std::make_shared<std::vector<double>>(N);
    const double* xd = mut(x);
    double* yd = mut(y);
    for (int i = 0; i < N; ++i) {
        double s = 0.0;
        for (int j = 0; j < D; ++j) s += xd[static_cast<size_t>(i) * D + j] * xd[static_cast<size_t>(i) * D + j];
        double n = std::sqrt(s);
        if (n < 1e-12) throw std::runtime_error("l2_normalize_rows: zero-norm row");
        (*norms)[i] = n;
        for (int j = 0; j < D; ++j) yd[static_cast<size_t>(i) * D + j] = xd[static_cast<size_t>(i) * D + j] / n;
    }
    nodes_.emplace_back([this, x, y, norms, N, D] {
        const double* yd = mut(y);
        const double* gy = gmut(y);
        double* gx = gmut(x);
        for (int i = 0; i < N; ++i) {
            double dot = 0.0;
            for (int j = 0; j < D; ++j) dot += gy[static_cast<size_t>(i) * D + j] * yd[static_cast<size_t>(i) * D + j];
            for (int j = 0; j < D; ++j)
                gx[static_cast<size_t>(i) * D + j] +=
                    (gy[static_cast<size_t>(i) * D + j] - dot * yd[static_cast<size_t>(i) * D + j]) / (*norms)[i];
        }
    });
    return y;
}

Var Tape::concat_cols(Var a, Var b) {
    const auto& as = shape(a);
    const auto& bs = shape(b);
    if (as.size() != 2 || bs.size() != 2 || as[0] != bs[0]) throw std::runtime_error("concat_cols: bad shapes");
    int N = as[0], A = as[1], B = bs[1];
    Var y = alloc({N, A + B});
    const double* ad = mut(a);
    const double* bd = mut(b);
    double* yd = mut(y);
    for (int i = 0; i < N; ++i) {
        std::copy(ad + static_cast<size_t>(i) * A, ad + static_cast<size_t>(i + 1) * A, yd + static_cast<size_t>(i) * (A + B));
        std::copy(bd + static_cast<size_t>(i) * B, bd + static_cast<size_t>(i + 1) * B, yd + static_cast<size_t>(i) * (A + B) + A);
    }
    nodes_.emplace_back([this, a, b, y, N, A, B] {
        const double* gy = gmut(y);
        double* ga = gmut(a);
        double* gb = gmut(b);
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < A; ++j) ga[static_cast<size_t>(i) * A + j] += gy[static_cast<size_t>(i) * (A + B) + j];
            for (int j = 0; j < B; ++j) gb[static_cast<size_t>(i) * B + j] += gy[static_cast<size_t>(i) * (A + B) + A + j];
        }
    });
    return y;
}

Var Tape::gather(Var x, std::vector<size_t> index, std::vector<int> out_shape) {
    if (Tensor::numel_of(out_shape) != index.size()) throw std::runtime_error("gather: shape/index mismatch");
    Var y = alloc(std::move(out_shape));
    const double* xd = mut(x);
    double* yd = mut(y);
    for (size_t i = 0; i < index.size(); ++i) yd[i] = xd[index[i]];
    nodes_.emplace_back([this, x, y, index = std::move(index)] {
        const double* gy = gmut(y);
        double* gx = gmut(x);
        for (size_t i = 0; i < index.size(); ++i) gx[index[i]] += gy[i];
    });
    return y;
}

Var Tape::reshape(Var x, std::vector<int> new_shape) {
    if (Tensor::numel_of(new_shape) != slots_[x.id].data.size()) throw std::runtime_error("reshape: numel mismatch");
    Var y = alloc(std::move(new_shape));
    std::copy(slots_[x.id].data.begin(), slots_[x.id].data.end(), slots_[y.id].data.begin());
    nodes_.emplace_back([this, x, y] {
        const double* gy = gmut(y);
        double* gx = gmut(x);
        size_t n = slots_[x.id].data.size();
        for (size_t i = 0; i < n; ++i) gx[i] += gy[i];
    });
    return y;
}

Var Tape::mean_pool_all(Var x) {
    const auto& xs = shape(x);
    if (xs.size() != 3) throw std::runtime_error("mean_pool_all: need [C,H,W]");
    int C = xs[0];
    size_t hw = static_cast<size_t>(xs[1]) * xs[2];
    Var y = alloc({1, C});
    const double* xd = mut(x);
    double* yd = mut(y);
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) acc += xd[static_cast<size_t>(c) * hw + i];
        yd[c] = acc / static_cast<double>(hw);
    }
    nodes_.emplace_back([this, x, y, C, hw] {
        const double* gy = gmut(y);
        double* gx = gmut(x);
        for (int c = 0; c < C; ++c) {
            double g = gy[c] / static_cast<double>(hw);
            for (size_t i = 0; i < hw; ++i) gx[static_cast<size_t>(c) * hw + i] += g;
        }
    });
    return y;
}

Var Tape::scale_by_exp(Var x, Var s) {
    if (slots_[s.id].data.size() != 1) throw std::runtime_error("scale_by_exp: scale must be scalar");
    double sc = std::exp(value(s)[0]);
    Var y = alloc(shape(x));
    const double* xd = mut(x);
    double* yd = mut(y);
    size_t n = slots_[x.id].data.size();
    for (size_t i = 0; i < n; ++i) yd[i] = xd[i] * sc;
    nodes_.emplace_back([this, x, s, y, n] {
        const double* gy = gmut(y);
        const double* yd = mut(y);
        const double* xd = mut(x);
        double sc = std::exp(value(s)[0]);
        double* gx = gmut(x);
        double gs = 0.0;
        for (size_t i = 0; i < n; ++i) {
            gx[i] += gy[i] * sc;
            gs += gy[i] * yd[i]; // d/ds x*exp(s) = x*exp(s)
        }
        (void)xd;
        gmut(s)[0] += gs;
    });
    return y;
}

Var Tape::mul_const(Var x, double c) {
    Var y = alloc(shape(x));
    const double* xd = mut(x);
    double* yd = mut(y);
    size_t n = slots_[x.id].data.size();
    for (size_t i = 0; i < n; ++i) yd[i] = xd[i] * c;
    nodes_.emplace_back([this, x, y, c, n] {
        const double* gy = gmut(y);
        double* gx = gmut(x);
        for (size_t i = 0; i < n; ++i) gx[i] += gy[i] * c;
    });
    return y;
}

Var Tape::add(Var a, Var b) {
    if (shape(a) != shape(b)) throw std::runtime_error("add: shape mismatch");
    Var y = alloc(shape(a));
    const double* ad = mut(a);
    const double* bd = mut(b);
    double* yd = mut(y);
    size_t n = slots_[a.id].data.size();
    for (size_t i = 0; i < n; ++i) yd[i] = ad[i] + bd[i];
    nodes_.emplace_back([this, a, b, y, n] {
        const double* gy = gmut(y);
        double* ga = gmut(a);
        double* gb = gmut(b);
        for (size_t i = 0; i < n; ++i) {
            ga[i] += gy[i];
            gb[i] += gy[i];
        }
    });
    return y;
}

Var Tape::weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& coeffs) {
    if (scalars.size() != coeffs.size()) throw std::runtime_error("weighted_sum: size mismatch");
    Var y = alloc({1});
    double acc = 0.0;
    for (size_t i = 0; i < scalars.size(); ++i) acc += coeffs[i] * scalar(scalars[i]);
    mut(y)[0] = acc;
    nodes_.emplace_back([this, scalars, coeffs, y] {
        double g = gmut(y)[0];
        for (size_t i = 0; i < scalars.size(); ++i) gmut(scalars[i])[0] += g * coeffs[i];
    });
    return y;
}

Var Tape::softmax_cross_entropy(Var scores, const std::vector<int>& targets, const std::vector<double>& weights) {
    const auto& xs = shape(scores);
    if (xs.size() != 2) throw std::runtime_error("softmax_cross_entropy: need [N,M]");
    int N = xs[0], M = xs[1];
    if (static_cast<int>(targets.size()) != N || static_cast<int>(weights.size()) != N)
        throw std::runtime_error("softmax_cross_entropy: target/weight size");
    Var y = alloc({1});
    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * M);
    const double* sd = mut(scores);
    double loss = 0.0;
    for (int i = 0; i < N; ++i) {
        const double* row = sd + static_cast<size_t>(i) * M;
        double mx = *std::max_element(row, row + M);
        double z = 0.0;
        for (int j = 0; j < M; ++j) z += std::exp(row[j] - mx);
        double logz = std::log(z) + mx;
        for (int j = 0; j < M; ++j) (*probs)[static_cast<size_t>(i) * M + j] = std::exp(row[j] - logz);
        loss += weights[i] * (logz - row[targets[i]]);
    }
    mut(y)[0] = loss;
    nodes_.emplace_back([this, scores, y, probs, targets, weights, N, M] {
        double g = gmut(y)[0];
        double* gs = gmut(scores);
        for (int i = 0; i < N; ++i) {
            double wi = g * weights[i];
            for (int j = 0; j < M; ++j) gs[static_cast<size_t>(i) * M + j] += wi * (*probs)[static_cast<size_t>(i) * M + j];
            gs[static_cast<size_t>(i) * M + targets[i]] -= wi;
        }
    });
    return y;
}

Var Tape::bce_with_logits(Var logits, const std::vector<double>& targets, const std::vector<double>& weights) {
    size_t n = slots_[logits.id].data.size();
    if (targets.size() != n || weights.size() != n) throw std::runtime_error("bce_with_logits: size mismatch");
    Var y = alloc({1});
    const double* zd = mut(logits);
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double z = zd[i];
        loss += weights[i] * (std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z))));
    }
    mut(y)[0] = loss;
    nodes_.emplace_back([this, logits, y, targets, weights, n] {
        double g = gmut(y)[0];
        const double* zd = mut(logits);
        double* gz = gmut(logits);
        for (size_t i = 0; i < n; ++i) {
            double sig = 1.0 / (1.0 + std::exp(-zd[i]));
            gz[i] += g * weights[i] * (sig - targets[i]);
        }
    });
    return y;
}

Var Tape::smooth_l1(Var pred, const std::vector<double>& targets, const std::vector<double>& weights) {
    const auto& xs = shape(pred);
    if (xs.size() != 2) throw std::runtime_error("smooth_l1: need [N,K]");
    int N = xs[0], K = xs[1];
    if (targets.size() != static_cast<size_t>(N) * K || static_cast<int>(weights.size()) != N)
        throw std::runtime_error("smooth_l1: target/weight size");
    Var y = alloc({1});
    const double* pd = mut(pred);
    double loss = 0.0;
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < K; ++k) {
            double e = pd[static_cast<size_t>(i) * K + k] - targets[static_cast<size_t>(i) * K + k];
            loss += weights[i] * (std::abs(e) < 1.0 ? 0.5 * e * e : std::abs(e) - 0.5);
        }
    mut(y)[0] = loss;
    nodes_.emplace_back([this, pred, y, targets, weights, N, K] {
        double g = gmut(y)[0];
        const double* pd = mut(pred);
        double* gp = gmut(pred);
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < K; ++k) {
                double e = pd[static_cast<size_t>(i) * K + k] - targets[static_cast<size_t>(i) * K + k];
                double d = std::abs(e) < 1.0 ? e : (e > 0 ? 1.0 : -1.0);
                gp[static_cast<size_t>(i) * K + k] += g * weights[i] * d;
            }
    });
    return y;
}

void Tape::backward(const std::vector<std::pair<Var, double>>& seeds) {
    for (const auto& [v, w] : seeds) {
        if (slots_[v.id].data.size() != 1) throw std::runtime_error("backward: seeds must be scalars");
        slots_[v.id].grad[0] += w;
    }
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

std::vector<double> softmax_row(const std::vector<double>& scores) {
    std::vector<double> p(scores.size());
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

void SgdState::step(std::vector<double>& theta, const std::vector<double>& grad, double lr, double momentum,
                    double weight_decay) {
    if (velocity.size() != theta.size()) velocity.assign(theta.size(), 0.0);
    for (size_t i = 0; i < theta.size(); ++i) {
        double g = grad[i] + weight_decay * theta[i];
        velocity[i] = momentum * velocity[i] + g;
        theta[i] -= lr * velocity[i];
    }
}

} // namespace ovd::nn
