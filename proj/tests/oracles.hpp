#pragma once

// Naive reference implementations used as test oracles. They work on plain
// vectors with explicit index arithmetic and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "uesa/random.hpp"
#include "uesa/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline Vec values(const uesa::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline uesa::Tensor random_tensor(const uesa::Shape& shape, uesa::Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(uesa::shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return uesa::Tensor(shape, std::move(v));
}

inline double max_abs_diff(const uesa::Tensor& a, const Vec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const uesa::Tensor& a, const uesa::Tensor& b) { return max_abs_diff(a, values(b)); }

inline bool bit_equal(const uesa::Tensor& a, const uesa::Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

inline Vec matmul(const Vec& a, const Vec& b, std::size_t n, std::size_t d, std::size_t m) {
    Vec out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += a[i * d + k] * b[k * m + j];
            out[i * m + j] = acc;
        }
    return out;
}

// Cross-correlation with explicit before/after zero padding.
inline Vec conv2d(const Vec& in, std::size_t c_in, std::size_t h, std::size_t w, const Vec& kern, const Vec& bias,
                  std::size_t c_out, std::size_t k, std::size_t stride, std::size_t pad_before, std::size_t pad_after,
                  std::size_t& h_out, std::size_t& w_out) {
    h_out = (h + pad_before + pad_after - k) / stride + 1;
    w_out = (w + pad_before + pad_after - k) / stride + 1;
    Vec out(c_out * h_out * w_out, 0.0);
    for (std::size_t o = 0; o < c_out; ++o)
        for (std::size_t y = 0; y < h_out; ++y)
            for (std::size_t x = 0; x < w_out; ++x) {
                double acc = bias[o];
                for (std::size_t c = 0; c < c_in; ++c)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad_before);
                            const long ix = static_cast<long>(x * stride + kx) - static_cast<long>(pad_before);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                            acc += kern[((o * c_in + c) * k + ky) * k + kx] *
                                   in[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
                        }
                out[(o * h_out + y) * w_out + x] = acc;
            }
    return out;
}

inline Vec maxpool(const Vec& in, std::size_t c, std::size_t h, std::size_t w) {
    Vec out(c * (h / 2) * (w / 2));
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h / 2; ++y)
            for (std::size_t x = 0; x < w / 2; ++x) {
                double m = -INFINITY;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, in[(ch * h + 2 * y + dy) * w + 2 * x + dx]);
                out[(ch * (h / 2) + y) * (w / 2) + x] = m;
            }
    return out;
}

inline Vec upsample(const Vec& in, std::size_t c, std::size_t h, std::size_t w) {
    Vec out(c * 4 * h * w);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < 2 * h; ++y)
            for (std::size_t x = 0; x < 2 * w; ++x) out[(ch * 2 * h + y) * 2 * w + x] = in[(ch * h + y / 2) * w + x / 2];
    return out;
}

// Column-softmax attention over N rows of length D.
inline Vec attention(const Vec& view, std::size_t n, std::size_t d) {
    Vec s(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += view[i * d + k] * view[j * d + k];
            s[i * n + j] = acc;
        }
    Vec out(n * d, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double mx = -INFINITY;
        for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, s[i * n + j]);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) z += std::exp(s[i * n + j] - mx);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::exp(s[i * n + j] - mx) / z;
            for (std::size_t k = 0; k < d; ++k) out[j * d + k] += a * view[i * d + k];
        }
    }
    return out;
}

// Directional attention by explicit gather/scatter of [C,H,W] indices.
// axis 0 = horizontal (rows lead), 1 = vertical (columns lead), 2 = depth (channels lead).
inline Vec attend_axis(const Vec& f, std::size_t c, std::size_t h, std::size_t w, int axis) {
    const std::size_t n = axis == 0 ? h : axis == 1 ? w : c;
    const std::size_t d = c * h * w / n;
    Vec view(c * h * w);
    auto view_index = [&](std::size_t ch, std::size_t y, std::size_t x) {
        if (axis == 0) return y * (c * w) + ch * w + x;  // [H, C, W]
        if (axis == 1) return x * (c * h) + ch * h + y;  // [W, C, H]
        return ch * (h * w) + y * w + x;                 // [C, H, W]
    };
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) view[view_index(ch, y, x)] = f[(ch * h + y) * w + x];
    const Vec att = attention(view, n, d);
    Vec out(c * h * w);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out[(ch * h + y) * w + x] = att[view_index(ch, y, x)];
    return out;
}

// Per-channel min-max normalized threshold gate; equality passes, constant channel gates to one.
inline Vec gate(const Vec& f, std::size_t c, double th) {
    const std::size_t plane = f.size() / c;
    Vec g(f.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t i = 0; i < plane; ++i) {
            lo = std::min(lo, f[ch * plane + i]);
            hi = std::max(hi, f[ch * plane + i]);
        }
        for (std::size_t i = 0; i < plane; ++i) {
            if (hi == lo) {
                g[ch * plane + i] = 1.0;
            } else {
                g[ch * plane + i] = (f[ch * plane + i] - lo) / (hi - lo) >= th ? 1.0 : 0.0;
            }
        }
    }
    return g;
}

inline Vec relu(Vec v) {
    for (auto& x : v) x = std::max(x, 0.0);
    return v;
}

}  // namespace oracle
