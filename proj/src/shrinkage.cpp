#include "uesa/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "uesa/ops.hpp"

namespace uesa {

Tensor average_directions(const Tensor& fH, const Tensor& fV, const Tensor& fD) {
    if (fH.shape() != fV.shape() || fH.shape() != fD.shape()) {
        throw std::invalid_argument("average_directions: shape mismatch " + shape_to_string(fH.shape()) + ", " +
                                    shape_to_string(fV.shape()) + ", " + shape_to_string(fD.shape()));
    }
    return scale(add(add(fH, fV), fD), 1.0 / 3.0);
}

Tensor shrink_gate(const Tensor& f_avg, const ShrinkageConfig& cfg) {
    if (!std::isfinite(cfg.th)) throw std::invalid_argument("shrink_gate: threshold must be finite");
    const auto v = f_avg.data();
    std::vector<double> gate(v.size());
    if (!cfg.normalize_before_gate) {
        for (std::size_t i = 0; i < v.size(); ++i) gate[i] = v[i] < cfg.th ? 0.0 : 1.0;
        return Tensor(f_avg.shape(), std::move(gate));
    }
    // Rank-3 inputs normalize per channel; anything else as a single channel.
    const std::size_t channels = f_avg.rank() == 3 ? f_avg.dim(0) : 1;
    const std::size_t per = v.size() / channels;
    for (std::size_t c = 0; c < channels; ++c) {
        const auto first = v.begin() + static_cast<std::ptrdiff_t>(c * per);
        const auto [lo_it, hi_it] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(per));
        const double lo = *lo_it, hi = *hi_it;
        double* dst = gate.data() + c * per;
        if (hi == lo) {
            std::fill(dst, dst + per, 1.0);
            continue;
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < per; ++i) dst[i] = (v[c * per + i] - lo) / range < cfg.th ? 0.0 : 1.0;
    }
    return Tensor(f_avg.shape(), std::move(gate));
}

Tensor fuse_prior(const Tensor& f_em, const Tensor& gate) {
    if (f_em.shape() != gate.shape()) {
        throw std::invalid_argument("fuse_prior: shape mismatch " + shape_to_string(f_em.shape()) + " vs " +
                                    shape_to_string(gate.shape()));
    }
    return mul(f_em, gate.detach());
}

ShrinkOutput shrink_integrate(const Tensor& f_em, const Tensor& fH, const Tensor& fV, const Tensor& fD,
                              const ShrinkageConfig& cfg) {
    Tensor gate;
    {
        NoGradGuard no_grad;
        gate = shrink_gate(average_directions(fH, fV, fD), cfg);
    }
    Tensor f_ta = fuse_prior(f_em, gate);
    return {f_ta, maxpool2d(f_ta)};
}

}  // namespace uesa
