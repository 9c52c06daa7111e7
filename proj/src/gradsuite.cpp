#include "uesa/gradsuite.hpp"

#include <functional>

#include "uesa/attention.hpp"
#include "uesa/network.hpp"
#include "uesa/ops.hpp"
#include "uesa/random.hpp"
#include "uesa/shrinkage.hpp"

namespace uesa {
namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(shape, std::move(v));
}

class SuiteBuilder {
public:
    explicit SuiteBuilder(std::uint64_t seed) : rng_(seed) {}

    Tensor draw(const Shape& shape, double lo = -1.0, double hi = 1.0) { return random_tensor(shape, rng_, lo, hi); }

    /// Checks d/dx sum(probe * op(x)) with a probe drawn to match the op's output shape.
    void check(const std::string& name, const Tensor& x, const std::function<Tensor(const Tensor&)>& op) {
        Tensor probe;
        {
            NoGradGuard guard;
            probe = draw(op(x).shape());
        }
        entries_.push_back({name, grad_check([&](const Tensor& t) { return sum(mul(op(t), probe)); }, x),
                            kOpGradTolerance});
    }

    /// For ops that already return a scalar.
    void check_scalar(const std::string& name, const Tensor& x, const std::function<Tensor(const Tensor&)>& op) {
        entries_.push_back({name, grad_check(op, x), kOpGradTolerance});
    }

    std::vector<GradSuiteEntry> take() { return std::move(entries_); }

private:
    Rng rng_;
    std::vector<GradSuiteEntry> entries_;
};

}  // namespace

std::vector<GradSuiteEntry> op_gradient_suite(std::uint64_t seed) {
    SuiteBuilder s(seed);
    const Tensor a = s.draw({3, 4}), b = s.draw({4, 5}), c = s.draw({3, 4});
    s.check("permute", s.draw({2, 3, 4}), [](const Tensor& t) { return permute(t, {2, 0, 1}); });
    s.check("transpose", a, [](const Tensor& t) { return transpose(t); });
    s.check("reshape", a, [](const Tensor& t) { return reshape(t, {2, 6}); });
    s.check("concat_channels", s.draw({2, 3, 3}), [&](const Tensor& t) { return concat_channels({t, scale(t, 2.0)}); });
    s.check("add", a, [&](const Tensor& t) { return add(t, c); });
    s.check("mul", a, [&](const Tensor& t) { return mul(t, c); });
    s.check("scale", a, [](const Tensor& t) { return scale(t, -1.7); });
    s.check("relu", a, [](const Tensor& t) { return relu(t); });
    s.check("sigmoid", a, [](const Tensor& t) { return sigmoid(t); });
    s.check("sum", a, [](const Tensor& t) { return sum(t); });
    s.check("mean", a, [](const Tensor& t) { return mean(t); });
    s.check("matmul.lhs", a, [&](const Tensor& t) { return matmul(t, b); });
    s.check("matmul.rhs", b, [&](const Tensor& t) { return matmul(a, t); });
    s.check("softmax_rows", a, [](const Tensor& t) { return softmax_rows(t); });

    const Tensor img = s.draw({2, 6, 6}), kern = s.draw({3, 2, 3, 3}), bias = s.draw({3});
    s.check("conv2d.input", img, [&](const Tensor& t) { return conv2d(t, kern, bias, 1, 1); });
    s.check("conv2d.kernel", kern, [&](const Tensor& t) { return conv2d(img, t, bias, 1, 1); });
    s.check("conv2d.bias", bias, [&](const Tensor& t) { return conv2d(img, kern, t, 1, 1); });
    s.check("conv2d.stride2", s.draw({2, 7, 7}), [&](const Tensor& t) { return conv2d(t, kern, bias, 2, 0); });
    const Tensor k2 = s.draw({3, 2, 2, 2});
    s.check("conv2d.2x2same", img, [&](const Tensor& t) { return conv2d(t, k2, bias, 1, Padding::same(2)); });
    s.check("maxpool2d", img, [](const Tensor& t) { return maxpool2d(t); });
    s.check("upsample_nearest", img, [](const Tensor& t) { return upsample_nearest(t); });

    const Tensor gamma = s.draw({2}, 0.5, 1.5), beta = s.draw({2});
    s.check("batch_norm_train.x", img, [&](const Tensor& t) { return batch_norm_train(t, gamma, beta, kBatchNormEps); });
    s.check("batch_norm_train.gamma", gamma,
            [&](const Tensor& t) { return batch_norm_train(img, t, beta, kBatchNormEps); });
    s.check("batch_norm_train.beta", beta,
            [&](const Tensor& t) { return batch_norm_train(img, gamma, t, kBatchNormEps); });
    const ChannelStats running{{0.1, -0.2}, {0.8, 1.3}};
    s.check("batch_norm_eval.x", img,
            [&](const Tensor& t) { return batch_norm_eval(t, gamma, beta, running, kBatchNormEps); });

    const Tensor target = s.draw({1, 4, 4}, 0.0, 1.0);
    s.check_scalar("bce_with_logits", s.draw({1, 4, 4}, -3.0, 3.0),
                   [&](const Tensor& t) { return bce_with_logits(t, target); });
    s.check_scalar("soft_dice_loss", s.draw({1, 4, 4}, 0.05, 0.95),
                   [&](const Tensor& t) { return soft_dice_loss(t, target); });

    s.check("self_attend", s.draw({5, 3}), [](const Tensor& t) { return self_attend(t).output; });
    const Tensor feat = s.draw({2, 3, 4});
    for (auto d : {Direction::horizontal, Direction::vertical, Direction::depth})
        s.check("attend_direction." + std::string(to_string(d)), feat,
                [d](const Tensor& t) { return attend_direction(t, d); });
    const Tensor gate = shrink_gate(s.draw({2, 3, 4}), {0.4, true});
    s.check("fuse_prior", feat, [&](const Tensor& t) { return fuse_prior(t, gate); });
    return s.take();
}

void perturb_parameters(Model& model, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& p : model.parameters()) {
        const bool positive = p.name.find("gamma") != std::string::npos;
        for (auto& v : p.tensor->mutable_data()) v = positive ? rng.uniform(0.5, 1.5) : v + rng.uniform(-0.2, 0.2);
    }
}

std::vector<GradSuiteEntry> model_gradient_suite(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.depth = 1;
    cfg.base_filters = 2;
    cfg.input_size = 8;
    cfg.seed = seed;
    Model model(cfg);
    perturb_parameters(model, mix_seed(seed, 1));
    Rng rng(mix_seed(seed, 2));
    const Tensor image = random_tensor({1, 8, 8}, rng, 0.0, 1.0);

    GateTape tape;
    tape.state = GateTape::State::record;
    ForwardContext recording;
    recording.tape = &tape;
    model_forward(model, image, recording);
    tape.state = GateTape::State::replay;

    std::vector<GradSuiteEntry> entries;
    for (auto& p : model.parameters()) {
        const Tensor original = *p.tensor;
        auto result = grad_check(
            [&](const Tensor& t) {
                *p.tensor = t;
                tape.cursor = 0;
                ForwardContext ctx;
                ctx.tape = &tape;
                return sum(model_forward(model, image, ctx));
            },
            original);
        *p.tensor = original;
        entries.push_back({"model." + p.name, result, kModelGradTolerance});
    }
    return entries;
}

}  // namespace uesa
