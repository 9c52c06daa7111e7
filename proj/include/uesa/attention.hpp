#pragma once

#include <string_view>

#include "uesa/tensor.hpp"

namespace uesa {

struct AttentionResult {
    Tensor output;  // [N,D], row j = sum_i alpha[i,j] * view_i
    Tensor alpha;   // [N,N], column j is a softmax over i of dot(view_i, view_j)
};

/// Parameter-free self-attention over the N rows of `view` [N,D].
AttentionResult self_attend(const Tensor& view);

/// Literal double-loop reference for `self_attend`. Uses unstabilized exponentials,
/// so row dot products must stay well below ~700.
AttentionResult brute_force_attention(const Tensor& view);

enum class Direction { horizontal, vertical, depth };

/// Parses "horizontal" / "vertical" / "depth"; anything else is std::invalid_argument.
Direction parse_direction(std::string_view tag);
std::string_view to_string(Direction d);

/// Attends over rows (horizontal, N=H), columns (vertical, N=W) or channels (depth, N=C)
/// of a [C,H,W] feature. Remaining axes flatten row-major into D. Returns [C,H,W].
Tensor attend_direction(const Tensor& feature, Direction direction);

}  // namespace uesa
