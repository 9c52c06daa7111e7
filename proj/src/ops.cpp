#include "uesa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>

namespace uesa {

using detail::make_result;

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    require(t.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                  shape_to_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                        shape_to_string(b.shape()));
}

// Row-major C (m x n) = op(A) * op(B) + beta * C, with beta 0 or 1.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double beta,
          double* c) {
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n), ki = static_cast<Eigen::Index>(k);
    Eigen::Map<const Mat> A(a, ta ? ki : mi, ta ? mi : ki);
    Eigen::Map<const Mat> B(b, tb ? ni : ki, tb ? ki : ni);
    Eigen::Map<Mat> C(c, mi, ni);
    if (beta == 0.0) C.setZero();
    if (ta && tb) C.noalias() += A.transpose() * B.transpose();
    else if (ta) C.noalias() += A.transpose() * B;
    else if (tb) C.noalias() += A * B.transpose();
    else C.noalias() += A * B;
}

std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

// For each output flat index, the input flat index it reads from.
std::vector<std::size_t> permute_gather_index(const Shape& in_shape, const std::vector<std::size_t>& order) {
    const std::size_t rank = in_shape.size();
    const auto in_strides = strides_of(in_shape);
    Shape out_shape(rank);
    std::vector<std::size_t> src_stride(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_shape[i] = in_shape[order[i]];
        src_stride[i] = in_strides[order[i]];
    }
    const std::size_t n = shape_numel(in_shape);
    std::vector<std::size_t> index(n);
    std::vector<std::size_t> counter(rank, 0);
    std::size_t src = 0;
    for (std::size_t out = 0; out < n; ++out) {
        index[out] = src;
        for (std::size_t ax = rank; ax-- > 0;) {
            if (++counter[ax] < out_shape[ax]) {
                src += src_stride[ax];
                break;
            }
            src -= src_stride[ax] * (out_shape[ax] - 1);
            counter[ax] = 0;
        }
    }
    return index;
}

}  // namespace

// ---------------------------------------------------------------------------
// Shape ops

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& order) {
    std::vector<std::size_t> inv(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) inv.at(order[i]) = i;
    return inv;
}

Tensor permute(const Tensor& t, const std::vector<std::size_t>& order) {
    const std::size_t rank = t.rank();
    require(order.size() == rank, "permute: order length " + std::to_string(order.size()) +
                                      " does not match rank " + std::to_string(rank));
    std::vector<bool> seen(rank, false);
    for (auto ax : order) {
        require(ax < rank && !seen[ax], "permute: order is not a permutation");
        seen[ax] = true;
    }
    Shape out_shape(rank);
    for (std::size_t i = 0; i < rank; ++i) out_shape[i] = t.dim(order[i]);

    auto index = permute_gather_index(t.shape(), order);
    const auto in = t.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[index[i]];

    return make_result("permute", std::move(out_shape), std::move(out), {t},
                       [index = std::move(index)](const Node&, std::span<const double> g, std::span<double* const> pg) {
                           for (std::size_t i = 0; i < g.size(); ++i) pg[0][index[i]] += g[i];
                       });
}

Tensor transpose(const Tensor& t) {
    require_rank(t, 2, "transpose");
    return permute(t, {1, 0});
}

Tensor reshape(const Tensor& t, Shape shape) {
    require(shape_numel(shape) == t.numel(),
            "reshape: cannot view " + shape_to_string(t.shape()) + " as " + shape_to_string(shape));
    std::vector<double> out(t.data().begin(), t.data().end());
    return make_result("reshape", std::move(shape), std::move(out), {t},
                       [](const Node&, std::span<const double> g, std::span<double* const> pg) {
                           for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] += g[i];
                       });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_channels: no inputs");
    std::size_t channels = 0;
    for (const auto& p : parts) {
        require_rank(p, 3, "concat_channels");
        require(p.dim(1) == parts[0].dim(1) && p.dim(2) == parts[0].dim(2),
                "concat_channels: spatial mismatch " + shape_to_string(p.shape()) + " vs " +
                    shape_to_string(parts[0].shape()));
        channels += p.dim(0);
    }
    std::vector<double> out;
    out.reserve(channels * parts[0].dim(1) * parts[0].dim(2));
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(out.size());
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return make_result("concat_channels", {channels, parts[0].dim(1), parts[0].dim(2)}, std::move(out), parts,
                       [offsets](const Node& self, std::span<const double> g, std::span<double* const> pg) {
                           for (std::size_t k = 0; k < pg.size(); ++k) {
                               if (!pg[k]) continue;
                               const std::size_t n = self.parents[k]->data.size();
                               for (std::size_t i = 0; i < n; ++i) pg[k][i] += g[offsets[k] + i];
                           }
                       });
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return make_result("add", a.shape(), std::move(out), {a, b},
                       [](const Node&, std::span<const double> g, std::span<double* const> pg) {
                           for (auto* p : pg) {
                               if (!p) continue;
                               for (std::size_t i = 0; i < g.size(); ++i) p[i] += g[i];
                           }
                       });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return make_result("mul", a.shape(), std::move(out), {a, b},
                       [](const Node& self, std::span<const double> g, std::span<double* const> pg) {
                           const auto& x = self.parents[0]->data;
                           const auto& y = self.parents[1]->data;
                           if (pg[0])
                               for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] += g[i] * y[i];
                           if (pg[1])
                               for (std::size_t i = 0; i < g.size(); ++i) pg[1][i] += g[i] * x[i];
                       });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= factor;
    return make_result("scale", a.shape(), std::move(out), {a},
                       [factor](const Node&, std::span<const double> g, std::span<double* const> pg) {
                           for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] += g[i] * factor;
                       });
}

Tensor relu(const Tensor& t) {
    std::vector<double> out(t.data().begin(), t.data().end());
    for (auto& v : out) v = v > 0.0 ? v : 0.0;
    return make_result("relu", t.shape(), std::move(out), {t},
                       [](const Node& self, std::span<const double> g, std::span<double* const> pg) {
                           const auto& y = self.data;
                           for (std::size_t i = 0; i < g.size(); ++i)
                               if (y[i] > 0.0) pg[0][i] += g[i];
                       });
}

Tensor sigmoid(const Tensor& t) {
    std::vector<double> out(t.numel());
    const auto x = t.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Split by sign so exp never overflows.
        if (x[i] >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-x[i]));
        } else {
            const double e = std::exp(x[i]);
            out[i] = e / (1.0 + e);
        }
    }
    return make_result("sigmoid", t.shape(), std::move(out), {t},
                       [](const Node& self, std::span<const double> g, std::span<double* const> pg) {
                           const auto& y = self.data;
                           for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] += g[i] * y[i] * (1.0 - y[i]);
                       });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& t) {
    const double s = std::accumulate(t.data().begin(), t.data().end(), 0.0);
    return make_result("sum", {1}, {s}, {t},
                       [](const Node& self, std::span<const double> g, std::span<double* const> pg) {
                           const std::size_t n = self.parents[0]->data.size();
                           for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[0];
                       });
}

Tensor mean(const Tensor& t) { return scale(sum(t), 1.0 / static_cast<double>(t.numel())); }

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t n = a.dim(0), d = a.dim(1), m = b.dim(1);
    require(b.dim(0) == d, "matmul: inner dimensions disagree " + shape_to_string(a.shape()) + " x " +
                               shape_to_string(b.shape()));
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(n * m);
    gemm(false, false, n, m, d, x.data(), y.data(), 0.0, out.data());
    return make_result("matmul", {n, m}, std::move(out), {a, b},
                       [n, d, m](const Node& self, std::span<const double> g, std::span<double* const> pg) {
                           const auto& x = self.parents[0]->data;
                           const auto& y = self.parents[1]->data;
                           if (pg[0]) gemm(false, true, n, d, m, g.data(), y.data(), 1.0, pg[0]);
                           if (pg[1]) gemm(true, false, d, m, n, x.data(), g.data(), 1.0, pg[1]);
                       });
}

Tensor softmax_rows(const Tensor& t) {
    require_rank(t, 2, "softmax_rows");
    const std::size_t n = t.dim(0), m = t.dim(1);
    const auto x = t.data();
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data() + i * m;
        double* o = out.data() + i * m;
        const double mx = *std::max_element(row, row + m);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            o[j] = std::exp(row[j] - mx);
            z += o[j];
        }
        for (std::size_t j = 0; j < m; ++j) o[j] /= z;
    }
    return make_result("softmax_rows", t.shape(), std::move(out), {t},
                       [n, m](const Node& self, std::span<const double> g, std::span<double* const> pg) {
                           const auto& y = self.data;
                           for (std::size_t i = 0; i < n; ++i) {
                               double dot = 0.0;
                               for (std::size_t j = 0; j < m; ++j) dot += g[i * m + j] * y[i * m + j];
                               for (std::size_t j = 0; j < m; ++j)
                                   pg[0][i * m + j] += y[i * m + j] * (g[i * m + j] - dot);
                           }
                       });
}

// ---------------------------------------------------------------------------
// Spatial ops

namespace {

struct ConvGeometry {
    std::size_t c_in, h, w, k, stride, pad_before, h_out, w_out;
    std::size_t rows() const { return c_in * k * k; }
    std::size_t positions() const { return h_out * w_out; }
};

void im2col(const ConvGeometry& g, const double* in, double* cols) {
    const std::size_t p_count = g.positions();
    for (std::size_t c = 0; c < g.c_in; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                double* dst = cols + ((c * g.k + ky) * g.k + kx) * p_count;
                for (std::size_t oy = 0; oy < g.h_out; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad_before);
                    double* drow = dst + oy * g.w_out;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                        std::fill(drow, drow + g.w_out, 0.0);
                        continue;
                    }
                    const double* srow = in + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.w_out; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad_before);
                        drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0 : srow[ix];
                    }
                }
            }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* in_grad) {
    const std::size_t p_count = g.positions();
    for (std::size_t c = 0; c < g.c_in; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const double* src = cols + ((c * g.k + ky) * g.k + kx) * p_count;
                for (std::size_t oy = 0; oy < g.h_out; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad_before);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    double* drow = in_grad + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    const double* srow = src + oy * g.w_out;
                    for (std::size_t ox = 0; ox < g.w_out; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad_before);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) drow[ix] += srow[ox];
                    }
                }
            }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride, Padding padding) {
    require_rank(input, 3, "conv2d");
    require_rank(kernels, 4, "conv2d");
    require_rank(bias, 1, "conv2d");
    const std::size_t c_out = kernels.dim(0);
    const std::size_t k = kernels.dim(2);
    require(kernels.dim(3) == k, "conv2d: kernels must be square");
    require(k >= 1 && k <= 3, "conv2d: kernel size must be 1, 2 or 3");
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(kernels.dim(1) == input.dim(0), "conv2d: kernel expects " + std::to_string(kernels.dim(1)) +
                                                " input channels, got " + std::to_string(input.dim(0)));
    require(bias.dim(0) == c_out, "conv2d: bias length must equal output channels");

    ConvGeometry geo{input.dim(0), input.dim(1), input.dim(2), k, stride, padding.before, 0, 0};
    const std::size_t hp = geo.h + padding.before + padding.after;
    const std::size_t wp = geo.w + padding.before + padding.after;
    require(hp >= k && wp >= k, "conv2d: kernel larger than padded input");
    require((hp - k) % stride == 0 && (wp - k) % stride == 0,
            "conv2d: output size is not integral for input " + shape_to_string(input.shape()));
    geo.h_out = (hp - k) / stride + 1;
    geo.w_out = (wp - k) / stride + 1;

    const std::size_t rows = geo.rows();
    const std::size_t positions = geo.positions();
    std::vector<double> cols(rows * positions);
    im2col(geo, input.data().data(), cols.data());

    const auto wt = kernels.data();
    const auto b = bias.data();
    std::vector<double> out(c_out * positions);
    for (std::size_t o = 0; o < c_out; ++o) std::fill_n(out.data() + o * positions, positions, b[o]);
    gemm(false, false, c_out, positions, rows, wt.data(), cols.data(), 1.0, out.data());

    return make_result(
        "conv2d", {c_out, geo.h_out, geo.w_out}, std::move(out), {input, kernels, bias},
        [geo, c_out](const Node& self, std::span<const double> g, std::span<double* const> pg) {
            const std::size_t rows = geo.rows();
            const std::size_t positions = geo.positions();
            if (pg[2]) {
                for (std::size_t o = 0; o < c_out; ++o) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < positions; ++p) acc += g[o * positions + p];
                    pg[2][o] += acc;
                }
            }
            if (pg[1]) {
                std::vector<double> cols(rows * positions);
                im2col(geo, self.parents[0]->data.data(), cols.data());
                gemm(false, true, c_out, rows, positions, g.data(), cols.data(), 1.0, pg[1]);
            }
            if (pg[0]) {
                const auto& wt = self.parents[1]->data;
                std::vector<double> dcols(rows * positions);
                gemm(true, false, rows, positions, c_out, wt.data(), g.data(), 0.0, dcols.data());
                col2im_add(geo, dcols.data(), pg[0]);
            }
        });
}

Tensor maxpool2d(const Tensor& t) {
    require_rank(t, 3, "maxpool2d");
    const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
    require(h % 2 == 0 && w % 2 == 0, "maxpool2d: spatial dims must be even, got " + shape_to_string(t.shape()));
    const std::size_t ho = h / 2, wo = w / 2;
    const auto x = t.data();
    std::vector<double> out(c * ho * wo);
    std::vector<std::size_t> argmax(out.size());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                const std::size_t base = (ch * h + 2 * oy) * w + 2 * ox;
                const std::size_t window[4] = {base, base + 1, base + w, base + w + 1};
                std::size_t best = window[0];
                for (std::size_t q = 1; q < 4; ++q)
                    if (x[window[q]] > x[best]) best = window[q];
                const std::size_t o = (ch * ho + oy) * wo + ox;
                out[o] = x[best];
                argmax[o] = best;
            }
    return make_result("maxpool2d", {c, ho, wo}, std::move(out), {t},
                       [argmax = std::move(argmax)](const Node&, std::span<const double> g,
                                                    std::span<double* const> pg) {
                           for (std::size_t i = 0; i < g.size(); ++i) pg[0][argmax[i]] += g[i];
                       });
}

Tensor upsample_nearest(const Tensor& t) {
    require_rank(t, 3, "upsample_nearest");
    const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
    const std::size_t ho = 2 * h, wo = 2 * w;
    const auto x = t.data();
    std::vector<double> out(c * ho * wo);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < ho; ++y)
            for (std::size_t xx = 0; xx < wo; ++xx) out[(ch * ho + y) * wo + xx] = x[(ch * h + y / 2) * w + xx / 2];
    return make_result("upsample_nearest", {c, ho, wo}, std::move(out), {t},
                       [c, h, w](const Node&, std::span<const double> g, std::span<double* const> pg) {
                           const std::size_t ho = 2 * h, wo = 2 * w;
                           for (std::size_t ch = 0; ch < c; ++ch)
                               for (std::size_t y = 0; y < ho; ++y)
                                   for (std::size_t xx = 0; xx < wo; ++xx)
                                       pg[0][(ch * h + y / 2) * w + xx / 2] += g[(ch * ho + y) * wo + xx];
                       });
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

void check_norm_args(const Tensor& x, const Tensor& gamma, const Tensor& beta, const char* op) {
    require_rank(x, 3, op);
    require(gamma.rank() == 1 && gamma.dim(0) == x.dim(0) && beta.shape() == gamma.shape(),
            std::string(op) + ": gamma/beta must be [C] matching the input channels");
}

}  // namespace

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, ChannelStats* stats) {
    check_norm_args(x, gamma, beta, "batch_norm_train");
    const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
    const auto in = x.data();
    const auto gm = gamma.data();
    const auto bt = beta.data();
    std::vector<double> xhat(in.size()), out(in.size()), mu(c), var(c), inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = in.data() + ch * n;
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += src[i];
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += (src[i] - m) * (src[i] - m);
        v /= static_cast<double>(n);
        mu[ch] = m;
        var[ch] = v;
        inv_std[ch] = 1.0 / std::sqrt(v + eps);
        for (std::size_t i = 0; i < n; ++i) {
            xhat[ch * n + i] = (src[i] - m) * inv_std[ch];
            out[ch * n + i] = gm[ch] * xhat[ch * n + i] + bt[ch];
        }
    }
    if (stats) *stats = ChannelStats{mu, var};
    return make_result(
        "batch_norm_train", x.shape(), std::move(out), {x, gamma, beta},
        [c, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& self, std::span<const double> g,
                                                                    std::span<double* const> pg) {
            const auto& gm = self.parents[1]->data;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double* go = g.data() + ch * n;
                const double* xh = xhat.data() + ch * n;
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    sum_g += go[i];
                    sum_gx += go[i] * xh[i];
                }
                if (pg[2]) pg[2][ch] += sum_g;
                if (pg[1]) pg[1][ch] += sum_gx;
                if (pg[0]) {
                    const double k = gm[ch] * inv_std[ch] / static_cast<double>(n);
                    const double nn = static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i)
                        pg[0][ch * n + i] += k * (nn * go[i] - sum_g - xh[i] * sum_gx);
                }
            }
        });
}

Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, const ChannelStats& running,
                       double eps) {
    check_norm_args(x, gamma, beta, "batch_norm_eval");
    const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
    require(running.mean.size() == c && running.var.size() == c, "batch_norm_eval: running statistics size mismatch");
    const auto in = x.data();
    const auto gm = gamma.data();
    const auto bt = beta.data();
    std::vector<double> inv_std(c), out(in.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
        inv_std[ch] = 1.0 / std::sqrt(running.var[ch] + eps);
        for (std::size_t i = 0; i < n; ++i)
            out[ch * n + i] = gm[ch] * (in[ch * n + i] - running.mean[ch]) * inv_std[ch] + bt[ch];
    }
    return make_result("batch_norm_eval", x.shape(), std::move(out), {x, gamma, beta},
                       [c, n, inv_std, mu = running.mean](const Node& self, std::span<const double> g,
                                                          std::span<double* const> pg) {
                           const auto& in = self.parents[0]->data;
                           const auto& gm = self.parents[1]->data;
                           for (std::size_t ch = 0; ch < c; ++ch)
                               for (std::size_t i = 0; i < n; ++i) {
                                   const std::size_t e = ch * n + i;
                                   const double xh = (in[e] - mu[ch]) * inv_std[ch];
                                   if (pg[0]) pg[0][e] += g[e] * gm[ch] * inv_std[ch];
                                   if (pg[1]) pg[1][ch] += g[e] * xh;
                                   if (pg[2]) pg[2][ch] += g[e];
                               }
                       });
}

// ---------------------------------------------------------------------------
// Losses

Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
    require_same_shape(logits, target, "bce_with_logits");
    const auto z = logits.data();
    const auto t = target.data();
    const double n = static_cast<double>(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        total += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
    return make_result("bce_with_logits", {1}, {total / n}, {logits},
                       [n, t = std::vector<double>(t.begin(), t.end())](
                           const Node& self, std::span<const double> g, std::span<double* const> pg) {
                           const auto& z = self.parents[0]->data;
                           for (std::size_t i = 0; i < z.size(); ++i) {
                               const double s = z[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-z[i]))
                                                            : std::exp(z[i]) / (1.0 + std::exp(z[i]));
                               pg[0][i] += g[0] * (s - t[i]) / n;
                           }
                       });
}

Tensor soft_dice_loss(const Tensor& probs, const Tensor& target) {
    require_same_shape(probs, target, "soft_dice_loss");
    const auto p = probs.data();
    const auto t = target.data();
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += p[i] * t[i];
        sp += p[i];
        st += t[i];
    }
    const double num = 2.0 * inter + 1.0;
    const double den = sp + st + 1.0;
    return make_result("soft_dice_loss", {1}, {1.0 - num / den}, {probs},
                       [num, den, t = std::vector<double>(t.begin(), t.end())](
                           const Node&, std::span<const double> g, std::span<double* const> pg) {
                           for (std::size_t i = 0; i < t.size(); ++i)
                               pg[0][i] += -g[0] * (2.0 * t[i] * den - num) / (den * den);
                       });
}

}  // namespace uesa
