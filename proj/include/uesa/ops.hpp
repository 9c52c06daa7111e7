#pragma once

#include <cstddef>
#include <vector>

#include "uesa/tensor.hpp"

namespace uesa {

// Shape ops

/// Output axis i takes input axis order[i]. Throws std::invalid_argument unless
/// `order` is a permutation of 0..rank-1.
Tensor permute(const Tensor& t, const std::vector<std::size_t>& order);
std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& order);
Tensor transpose(const Tensor& t);  // rank 2
Tensor reshape(const Tensor& t, Shape shape);
/// Concatenates rank-3 [C_i,H,W] tensors along the channel axis.
Tensor concat_channels(const std::vector<Tensor>& parts);

// Elementwise

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& t);
Tensor sigmoid(const Tensor& t);

// Reductions

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);

// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b);
/// Row-wise softmax of a rank-2 tensor, max-subtracted.
Tensor softmax_rows(const Tensor& t);

// Spatial ops on [C,H,W]

/// Zero padding added before and after each spatial axis. A 2x2 kernel needs
/// {0, 1} to preserve size.
struct Padding {
    std::size_t before = 0;
    std::size_t after = 0;

    constexpr Padding() = default;
    constexpr Padding(std::size_t symmetric) : before(symmetric), after(symmetric) {}  // NOLINT
    constexpr Padding(std::size_t b, std::size_t a) : before(b), after(a) {}

    static constexpr Padding same(std::size_t kernel) { return {(kernel - 1) / 2, kernel / 2}; }
};

/// Cross-correlation. kernels [C_out,C_in,k,k], bias [C_out].
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride = 1,
              Padding padding = {});
/// 2x2 window, stride 2. Gradient goes to the first maximum in row-major window order.
Tensor maxpool2d(const Tensor& t);
Tensor upsample_nearest(const Tensor& t);

// Normalization and regularization on [C,H,W]

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> var;  // biased (population) variance
};

/// Per-channel normalization using the tensor's own spatial statistics;
/// differentiable through the statistics. Reports the statistics in `stats`.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                        ChannelStats* stats = nullptr);
/// Per-channel affine normalization with fixed statistics.
Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, const ChannelStats& running,
                       double eps);

// Losses, mean over elements. `target` holds values in [0,1] and receives no gradient.

Tensor bce_with_logits(const Tensor& logits, const Tensor& target);
/// 1 - (2 sum(p t) + 1) / (sum(p) + sum(t) + 1)
Tensor soft_dice_loss(const Tensor& probs, const Tensor& target);

}  // namespace uesa
