#pragma once

#include "uesa/tensor.hpp"

namespace uesa {

/// Hard threshold gate settings. Values equal to `th` pass (gate 1).
struct ShrinkageConfig {
    double th = 0.3;
    /// Min-max normalize each channel to [0,1] before comparing against `th`.
    /// A constant channel gates to all ones.
    bool normalize_before_gate = true;
};

/// Elementwise (fH + fV + fD) / 3, summed in that order.
Tensor average_directions(const Tensor& fH, const Tensor& fV, const Tensor& fD);

/// Binary mask: 0 where the (normalized) evidence is below th, else 1. The mask
/// carries no history, so gradients stop here.
Tensor shrink_gate(const Tensor& f_avg, const ShrinkageConfig& cfg);

/// f_em * gate, differentiable in f_em only.
Tensor fuse_prior(const Tensor& f_em, const Tensor& gate);

struct ShrinkOutput {
    Tensor f_ta;  // gated prior, exported to the skip connection
    Tensor f_mp;  // max-pooled f_ta, fed to the next encoder level
};

ShrinkOutput shrink_integrate(const Tensor& f_em, const Tensor& fH, const Tensor& fV, const Tensor& fD,
                              const ShrinkageConfig& cfg);

}  // namespace uesa
