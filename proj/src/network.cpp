#include "uesa/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "uesa/attention.hpp"
#include "uesa/random.hpp"

namespace uesa {

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (base_filters < 1) throw std::invalid_argument("base_filters must be >= 1");
    if (input_size < 2) throw std::invalid_argument("input_size must be >= 2");
    if (input_size % (1 << depth) != 0) {
        throw std::invalid_argument("input_size " + std::to_string(input_size) + " is not divisible by 2^depth = " +
                                    std::to_string(1 << depth));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout_rate must be in [0,1)");
    if (!std::isfinite(th)) throw std::invalid_argument("th must be finite");
}

std::size_t ModelConfig::filters(int level) const {
    return static_cast<std::size_t>(base_filters) << std::min(level, 3);
}

// ---------------------------------------------------------------------------
// Construction

namespace {

ConvLayer make_conv(Rng& rng, std::size_t c_out, std::size_t c_in, std::size_t k) {
    const std::size_t fan_in = c_in * k * k;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> w(c_out * fan_in);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    return {Tensor({c_out, c_in, k, k}, std::move(w), true), Tensor({c_out}, std::vector<double>(c_out, 0.0), true)};
}

EncoderBlockState make_double_conv(Rng& rng, std::size_t c_in, std::size_t c_out) {
    EncoderBlockState s;
    s.conv1 = make_conv(rng, c_out, c_in, 3);
    s.conv2 = make_conv(rng, c_out, c_out, 3);
    return s;
}

}  // namespace

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    std::size_t c_in = 1;
    for (int l = 0; l < cfg_.depth; ++l) {
        encoders.push_back(make_double_conv(rng, c_in, cfg_.filters(l)));
        c_in = cfg_.filters(l);
    }
    bottleneck = make_double_conv(rng, c_in, cfg_.filters(cfg_.depth));
    decoders.resize(static_cast<std::size_t>(cfg_.depth));
    for (int l = cfg_.depth - 1; l >= 0; --l) {
        const std::size_t c = cfg_.filters(l);
        auto& d = decoders[static_cast<std::size_t>(l)];
        d.up = make_conv(rng, c, cfg_.filters(l + 1), 2);
        d.proj = make_conv(rng, c, c, 1).weight;
        d.bn_gamma = Tensor({c}, std::vector<double>(c, 1.0), true);
        d.bn_beta = Tensor({c}, std::vector<double>(c, 0.0), true);
        d.bn_running = ChannelStats{std::vector<double>(c, 0.0), std::vector<double>(c, 1.0)};
        d.fuse = make_conv(rng, c, 3 * c, 3);
    }
    head = make_conv(rng, 1, cfg_.filters(0), 1);
}

Model::Model(const Model& other)
    : encoders(other.encoders),
      bottleneck(other.bottleneck),
      decoders(other.decoders),
      head(other.head),
      cfg_(other.cfg_) {
    for (auto& p : parameters()) *p.tensor = p.tensor->requiring_grad();
}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        Model copy(other);
        *this = std::move(copy);
    }
    return *this;
}

std::vector<NamedParameter> Model::parameters() {
    std::vector<NamedParameter> out;
    auto conv = [&out](const std::string& prefix, ConvLayer& layer) {
        out.push_back({prefix + ".weight", &layer.weight});
        out.push_back({prefix + ".bias", &layer.bias});
    };
    for (std::size_t l = 0; l < encoders.size(); ++l) {
        conv("enc" + std::to_string(l) + ".conv1", encoders[l].conv1);
        conv("enc" + std::to_string(l) + ".conv2", encoders[l].conv2);
    }
    conv("bottleneck.conv1", bottleneck.conv1);
    conv("bottleneck.conv2", bottleneck.conv2);
    for (std::size_t l = decoders.size(); l-- > 0;) {
        const std::string p = "dec" + std::to_string(l);
        auto& d = decoders[l];
        conv(p + ".up", d.up);
        out.push_back({p + ".proj.weight", &d.proj});
        out.push_back({p + ".bn.gamma", &d.bn_gamma});
        out.push_back({p + ".bn.beta", &d.bn_beta});
        conv(p + ".fuse", d.fuse);
    }
    conv("head", head);
    return out;
}

std::vector<const Tensor*> Model::parameters() const {
    std::vector<const Tensor*> out;
    for (auto& p : const_cast<Model*>(this)->parameters()) out.push_back(p.tensor);
    return out;
}

std::vector<NamedBatchNorm> Model::batch_norms() {
    std::vector<NamedBatchNorm> out;
    for (std::size_t l = decoders.size(); l-- > 0;)
        out.push_back({"dec" + std::to_string(l) + ".bn", &decoders[l].bn_running});
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : parameters()) n += t->numel();
    return n;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

Tensor conv_same(const Tensor& x, const ConvLayer& layer) {
    return conv2d(x, layer.weight, layer.bias, 1, Padding::same(layer.weight.dim(2)));
}

Tensor double_conv(const Tensor& x, const EncoderBlockState& s) {
    return relu(conv_same(relu(conv_same(x, s.conv1)), s.conv2));
}

Tensor obtain_gate(ForwardContext& ctx, const std::function<Tensor()>& compute) {
    if (ctx.tape && ctx.tape->state == GateTape::State::replay) {
        if (ctx.tape->cursor >= ctx.tape->gates.size()) throw std::logic_error("gate tape exhausted on replay");
        return ctx.tape->gates[ctx.tape->cursor++];
    }
    Tensor gate;
    {
        NoGradGuard no_grad;
        gate = compute();
    }
    if (ctx.tape && ctx.tape->state == GateTape::State::record) ctx.tape->gates.push_back(gate);
    return gate;
}

Tensor dropout(const Tensor& x, double rate, ForwardContext& ctx) {
    const std::size_t call = ctx.dropout_calls++;
    if (ctx.mode != Mode::train || rate == 0.0) return x;
    Rng rng(mix_seed(ctx.dropout_seed, call));
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(x.numel());
    for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
    return mul(x, Tensor(x.shape(), std::move(mask)));
}

Tensor normalize(const Tensor& x, const DecoderBlockState& s, ForwardContext& ctx) {
    if (ctx.mode == Mode::train) {
        ChannelStats observed;
        Tensor y = batch_norm_train(x, s.bn_gamma, s.bn_beta, kBatchNormEps, &observed);
        ctx.bn_observed.push_back(std::move(observed));
        return y;
    }
    return batch_norm_eval(x, s.bn_gamma, s.bn_beta, s.bn_running, kBatchNormEps);
}

Tensor mean_of_two(const Tensor& a, const Tensor& b) { return scale(add(a, b), 0.5); }

void check_input(const Model& model, const Tensor& image) {
    const auto s = static_cast<std::size_t>(model.config().input_size);
    if (image.shape() != Shape{1, s, s}) {
        throw std::invalid_argument("model input must be [1," + std::to_string(s) + "," + std::to_string(s) +
                                    "], got " + shape_to_string(image.shape()));
    }
}

}  // namespace

EncoderOutput encoder_block_forward(const Tensor& x, const EncoderBlockState& state, const ModelConfig& cfg,
                                    ForwardContext& ctx) {
    if (x.rank() != 3 || x.dim(0) != state.conv1.weight.dim(1)) {
        throw std::invalid_argument("encoder block expects " + std::to_string(state.conv1.weight.dim(1)) +
                                    " input channels, got " + shape_to_string(x.shape()));
    }
    if (x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
        throw std::invalid_argument("encoder block needs even spatial dims, got " + shape_to_string(x.shape()));
    }
    Tensor f_em = double_conv(x, state);
    if (!cfg.enable_encoder_attention) return {f_em, maxpool2d(f_em)};

    Tensor gate = obtain_gate(ctx, [&] {
        if (cfg.gate_always_on) return Tensor::ones(f_em.shape());
        Tensor f = f_em.detach();
        Tensor avg = average_directions(attend_direction(f, Direction::horizontal),
                                        attend_direction(f, Direction::vertical),
                                        attend_direction(f, Direction::depth));
        return shrink_gate(avg, cfg.shrinkage());
    });
    Tensor f_ta = fuse_prior(f_em, gate);
    return {f_ta, maxpool2d(f_ta)};
}

Tensor decoder_pairwise_fuse(const Tensor& f_dm, const ModelConfig& cfg, ForwardContext& ctx) {
    std::vector<Tensor> gates;
    if (ctx.tape && ctx.tape->state == GateTape::State::replay) {
        for (int k = 0; k < 3; ++k) gates.push_back(obtain_gate(ctx, {}));
    } else {
        std::vector<Tensor> computed;
        {
            NoGradGuard no_grad;
            if (cfg.gate_always_on) {
                computed.assign(3, Tensor::ones(f_dm.shape()));
            } else {
                Tensor f = f_dm.detach();
                Tensor a_h = attend_direction(f, Direction::horizontal);
                Tensor a_v = attend_direction(f, Direction::vertical);
                Tensor a_d = attend_direction(f, Direction::depth);
                const auto sc = cfg.shrinkage();
                computed.push_back(shrink_gate(mean_of_two(a_h, a_v), sc));
                computed.push_back(shrink_gate(mean_of_two(a_v, a_d), sc));
                computed.push_back(shrink_gate(mean_of_two(a_h, a_d), sc));
            }
        }
        for (auto& g : computed) gates.push_back(obtain_gate(ctx, [&g] { return g; }));
    }
    Tensor da1 = fuse_prior(f_dm, gates[0]);
    Tensor da2 = fuse_prior(f_dm, gates[1]);
    Tensor da3 = fuse_prior(f_dm, gates[2]);
    return add(add(da1, da2), da3);
}

Tensor decoder_block_forward(const Tensor& x, const Tensor& skip_f_ta, const DecoderBlockState& state,
                             const ModelConfig& cfg, ForwardContext& ctx) {
    if (x.rank() != 3 || skip_f_ta.rank() != 3 || skip_f_ta.dim(1) != 2 * x.dim(1) ||
        skip_f_ta.dim(2) != 2 * x.dim(2)) {
        throw std::invalid_argument("decoder block: skip " + shape_to_string(skip_f_ta.shape()) +
                                    " must be twice the spatial size of input " + shape_to_string(x.shape()));
    }
    if (x.dim(0) != state.up.weight.dim(1) || skip_f_ta.dim(0) != state.up.weight.dim(0)) {
        throw std::invalid_argument("decoder block: channel mismatch for input " + shape_to_string(x.shape()) +
                                    " and skip " + shape_to_string(skip_f_ta.shape()));
    }
    Tensor f_dm = relu(conv_same(upsample_nearest(x), state.up));
    Tensor f_glob = cfg.enable_decoder_attention ? decoder_pairwise_fuse(f_dm, cfg, ctx) : f_dm;
    Tensor projected = conv2d(f_glob, state.proj, Tensor::zeros({state.proj.dim(0)}));
    Tensor f_g = dropout(normalize(projected, state, ctx), cfg.dropout_rate, ctx);
    return relu(conv_same(concat_channels({f_dm, skip_f_ta, f_g}), state.fuse));
}

Tensor model_forward_logits(const Model& model, const Tensor& image, ForwardContext& ctx) {
    check_input(model, image);
    const auto& cfg = model.config();
    std::vector<Tensor> skips;
    Tensor x = image;
    for (const auto& enc : model.encoders) {
        auto out = encoder_block_forward(x, enc, cfg, ctx);
        skips.push_back(out.f_ta);
        x = out.f_mp;
    }
    x = double_conv(x, model.bottleneck);
    for (std::size_t l = model.decoders.size(); l-- > 0;)
        x = decoder_block_forward(x, skips[l], model.decoders[l], cfg, ctx);
    return conv_same(x, model.head);
}

Tensor model_forward(const Model& model, const Tensor& image, ForwardContext& ctx) {
    return sigmoid(model_forward_logits(model, image, ctx));
}

Tensor plain_unet_forward_logits(const Model& model, const Tensor& image, ForwardContext& ctx) {
    check_input(model, image);
    const auto& cfg = model.config();
    std::vector<Tensor> skips;
    Tensor x = image;
    for (const auto& enc : model.encoders) {
        Tensor f = relu(conv2d(x, enc.conv1.weight, enc.conv1.bias, 1, 1));
        f = relu(conv2d(f, enc.conv2.weight, enc.conv2.bias, 1, 1));
        skips.push_back(f);
        x = maxpool2d(f);
    }
    x = relu(conv2d(x, model.bottleneck.conv1.weight, model.bottleneck.conv1.bias, 1, 1));
    x = relu(conv2d(x, model.bottleneck.conv2.weight, model.bottleneck.conv2.bias, 1, 1));
    for (std::size_t l = model.decoders.size(); l-- > 0;) {
        const auto& d = model.decoders[l];
        Tensor f_dm = relu(conv2d(upsample_nearest(x), d.up.weight, d.up.bias, 1, Padding{0, 1}));
        Tensor projected = conv2d(f_dm, d.proj, Tensor::zeros({d.proj.dim(0)}), 1, 0);
        Tensor f_g = dropout(normalize(projected, d, ctx), cfg.dropout_rate, ctx);
        x = relu(conv2d(concat_channels({f_dm, skips[l], f_g}), d.fuse.weight, d.fuse.bias, 1, 1));
    }
    return conv2d(x, model.head.weight, model.head.bias, 1, 0);
}

void update_running_stats(Model& model, const std::vector<const ForwardContext*>& batch) {
    if (batch.empty()) return;
    auto norms = model.batch_norms();
    for (const auto* ctx : batch) {
        if (ctx->bn_observed.size() != norms.size()) {
            throw std::invalid_argument("update_running_stats: context holds " + std::to_string(ctx->bn_observed.size()) +
                                        " observations, model has " + std::to_string(norms.size()) + " batch norms");
        }
    }
    for (std::size_t b = 0; b < norms.size(); ++b) {
        ChannelStats& running = *norms[b].stats;
        const std::size_t c = running.mean.size();
        const std::size_t level = model.decoders.size() - 1 - b;
        const double per_sample = static_cast<double>(model.config().input_size >> level) *
                                  static_cast<double>(model.config().input_size >> level);
        const double total = per_sample * static_cast<double>(batch.size());
        for (std::size_t ch = 0; ch < c; ++ch) {
            // Pooled statistics over every pixel of every sample in the batch.
            double m = 0.0;
            for (const auto* ctx : batch) m += ctx->bn_observed[b].mean[ch];
            m /= static_cast<double>(batch.size());
            double v = 0.0;
            for (const auto* ctx : batch) {
                const double dm = ctx->bn_observed[b].mean[ch] - m;
                v += ctx->bn_observed[b].var[ch] + dm * dm;
            }
            v /= static_cast<double>(batch.size());
            const double unbiased = total > 1.0 ? v * total / (total - 1.0) : v;
            running.mean[ch] = kBatchNormMomentum * running.mean[ch] + (1.0 - kBatchNormMomentum) * m;
            running.var[ch] = kBatchNormMomentum * running.var[ch] + (1.0 - kBatchNormMomentum) * unbiased;
        }
    }
}

}  // namespace uesa
