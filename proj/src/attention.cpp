#include "uesa/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "uesa/ops.hpp"

namespace uesa {

AttentionResult self_attend(const Tensor& view) {
    if (view.rank() != 2) throw std::invalid_argument("self_attend: view must be [N,D], got " + shape_to_string(view.shape()));
    Tensor scores = matmul(view, transpose(view));
    // Row j of `weights` is the softmax over i of scores[i,j].
    Tensor weights = softmax_rows(transpose(scores));
    Tensor output = matmul(weights, view);
    return {output, transpose(weights)};
}

AttentionResult brute_force_attention(const Tensor& view) {
    if (view.rank() != 2) throw std::invalid_argument("brute_force_attention: view must be [N,D]");
    const std::size_t n = view.dim(0), d = view.dim(1);
    const auto v = view.data();
    std::vector<double> alpha(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        double denom = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += v[i * d + k] * v[j * d + k];
            denom += std::exp(dot);
        }
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += v[i * d + k] * v[j * d + k];
            alpha[i * n + j] = std::exp(dot) / denom;
        }
    }
    std::vector<double> out(n * d, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < d; ++k) out[j * d + k] += alpha[i * n + j] * v[i * d + k];
    return {Tensor({n, d}, std::move(out)), Tensor({n, n}, std::move(alpha))};
}

Direction parse_direction(std::string_view tag) {
    if (tag == "horizontal") return Direction::horizontal;
    if (tag == "vertical") return Direction::vertical;
    if (tag == "depth") return Direction::depth;
    throw std::invalid_argument("unknown attention direction '" + std::string(tag) + "'");
}

std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::horizontal: return "horizontal";
        case Direction::vertical: return "vertical";
        case Direction::depth: return "depth";
    }
    throw std::invalid_argument("unknown attention direction");
}

Tensor attend_direction(const Tensor& feature, Direction direction) {
    if (feature.rank() != 3) {
        throw std::invalid_argument("attend_direction: feature must be [C,H,W], got " + shape_to_string(feature.shape()));
    }
    std::vector<std::size_t> order;
    switch (direction) {
        case Direction::horizontal: order = {1, 0, 2}; break;
        case Direction::vertical: order = {2, 0, 1}; break;
        case Direction::depth: order = {0, 1, 2}; break;
        default: throw std::invalid_argument("attend_direction: unknown direction");
    }
    const bool identity = direction == Direction::depth;
    Tensor leading = identity ? feature : permute(feature, order);
    const Shape permuted_shape = leading.shape();
    const std::size_t n = permuted_shape[0];
    Tensor attended = self_attend(reshape(leading, {n, leading.numel() / n})).output;
    Tensor restored = reshape(attended, permuted_shape);
    return identity ? restored : permute(restored, inverse_permutation(order));
}

}  // namespace uesa
