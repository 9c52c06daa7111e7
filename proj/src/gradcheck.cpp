#include "uesa/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace uesa {

GradCheckResult grad_check(const ScalarFunction& f, const Tensor& x, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-4)) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-4]");
    GradCheckResult result;
    try {
        Tensor leaf = x.requiring_grad();
        Tensor y = f(leaf);
        if (y.numel() != 1) throw std::invalid_argument("grad_check: function must return a scalar");
        y.backward();
        std::vector<double> analytic(leaf.numel(), 0.0);
        if (!leaf.grad().empty()) analytic.assign(leaf.grad().begin(), leaf.grad().end());

        NoGradGuard no_grad;
        std::vector<double> probe(x.data().begin(), x.data().end());
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const double saved = probe[i];
            probe[i] = saved + eps;
            const double up = f(Tensor(x.shape(), probe)).item();
            probe[i] = saved - eps;
            const double down = f(Tensor(x.shape(), probe)).item();
            probe[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
            if (!std::isfinite(numeric)) {
                result.failed_op = "central-difference";
                return result;
            }
            if (err > result.max_rel_error || i == 0) {
                result.max_rel_error = err;
                result.worst_index = i;
                result.worst_analytic = analytic[i];
                result.worst_numeric = numeric;
            }
        }
    } catch (const NonFiniteError& e) {
        result.failed_op = e.op();
    }
    return result;
}

}  // namespace uesa
