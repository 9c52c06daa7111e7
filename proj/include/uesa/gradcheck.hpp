#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "uesa/tensor.hpp"

namespace uesa {

using ScalarFunction = std::function<Tensor(const Tensor&)>;

struct GradCheckResult {
    /// max over elements of |analytic - numeric| / (|analytic| + |numeric| + 1e-12)
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    /// Empty on success; otherwise names the op that produced a non-finite value.
    std::string failed_op;

    bool passed(double tolerance) const { return failed_op.empty() && max_rel_error < tolerance; }
};

/// Compares the reverse-mode gradient of `f` at `x` against central differences.
/// `f` must be deterministic and return a single-element tensor.
GradCheckResult grad_check(const ScalarFunction& f, const Tensor& x, double eps = 1e-6);

}  // namespace uesa
