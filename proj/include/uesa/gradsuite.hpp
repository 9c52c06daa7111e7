#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uesa/gradcheck.hpp"

namespace uesa {

class Model;

struct GradSuiteEntry {
    std::string name;
    GradCheckResult result;
    double tolerance = 0.0;

    bool passed() const { return result.passed(tolerance); }
};

inline constexpr double kOpGradTolerance = 1e-6;
inline constexpr double kModelGradTolerance = 1e-4;

/// Central-difference checks of every differentiable op on small random inputs.
/// Each op output is contracted with a fixed random probe before the check.
std::vector<GradSuiteEntry> op_gradient_suite(std::uint64_t seed);

/// Checks every parameter tensor of a depth-1, base-2, 8x8 model in eval mode.
/// Parameters are first moved off their initialization so no ReLU input sits on
/// its kink, and the binary gates are recorded once and replayed for every probe.
std::vector<GradSuiteEntry> model_gradient_suite(std::uint64_t seed);

/// Adds U(-0.2, 0.2) to every parameter; batch-norm scales are redrawn from U(0.5, 1.5).
void perturb_parameters(Model& model, std::uint64_t seed);

}  // namespace uesa
