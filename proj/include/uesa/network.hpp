#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uesa/ops.hpp"
#include "uesa/shrinkage.hpp"
#include "uesa/tensor.hpp"

namespace uesa {

/// Architecture hyperparameters. Encoder level l uses base_filters * 2^min(l,3) filters;
/// the bottleneck sits at level `depth`.
struct ModelConfig {
    int depth = 3;
    int base_filters = 8;
    double th = 0.3;
    int input_size = 64;
    double dropout_rate = 0.5;
    bool enable_encoder_attention = true;  // false = No-TAtt
    bool enable_decoder_attention = true;  // false = No-DAtt
    bool normalize_before_gate = true;
    /// Replaces every threshold gate by an all-ones mask while keeping the gated
    /// data path. Used to check the th = 0 degenerate case.
    bool gate_always_on = false;
    std::uint64_t seed = 42;

    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
    std::size_t filters(int level) const;
    ShrinkageConfig shrinkage() const { return {th, normalize_before_gate}; }
};

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEps = 1e-5;

enum class Mode { train, eval };

/// Records the binary gates of one forward pass and replays them in later passes,
/// so finite-difference probes see a fixed gating pattern.
struct GateTape {
    enum class State { off, record, replay };
    State state = State::off;
    std::vector<Tensor> gates;
    std::size_t cursor = 0;
};

/// Per-call state of one forward pass.
struct ForwardContext {
    Mode mode = Mode::eval;
    std::uint64_t dropout_seed = 0;
    GateTape* tape = nullptr;
    /// Train mode: per-channel statistics observed by each decoder batch norm, in
    /// execution order (deepest decoder first).
    std::vector<ChannelStats> bn_observed;
    std::size_t dropout_calls = 0;
};

struct ConvLayer {
    Tensor weight;  // [C_out,C_in,k,k]
    Tensor bias;    // [C_out]
};

struct EncoderBlockState {
    ConvLayer conv1;
    ConvLayer conv2;
};

struct DecoderBlockState {
    ConvLayer up;    // 2x2 after nearest upsampling
    Tensor proj;     // [C,C,1,1] on the global path; bias-free because normalization follows
    Tensor bn_gamma;
    Tensor bn_beta;
    ChannelStats bn_running;
    ConvLayer fuse;  // 3x3 over [f_dm, skip, f_G]
};

struct NamedParameter {
    std::string name;
    Tensor* tensor;
};

struct NamedBatchNorm {
    std::string name;
    ChannelStats* stats;
};

class Model {
public:
    explicit Model(const ModelConfig& cfg);
    /// Copies are deep: parameters of a copy never alias the original.
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const ModelConfig& config() const { return cfg_; }
    /// Mutable so ablation and sweep drivers can share one initialization.
    ModelConfig& mutable_config() { return cfg_; }

    std::vector<EncoderBlockState> encoders;  // level 0 (full resolution) first
    EncoderBlockState bottleneck;
    std::vector<DecoderBlockState> decoders;  // decoders[l] consumes encoder l's skip
    ConvLayer head;

    /// Every learnable tensor in declaration order: encoders, bottleneck,
    /// decoders from deepest to shallowest, head.
    std::vector<NamedParameter> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<NamedBatchNorm> batch_norms();
    std::size_t parameter_count() const;

private:
    ModelConfig cfg_;
};

struct EncoderOutput {
    Tensor f_ta;
    Tensor f_mp;
};

EncoderOutput encoder_block_forward(const Tensor& x, const EncoderBlockState& state, const ModelConfig& cfg,
                                    ForwardContext& ctx);

/// Pairwise directional fusion: gates from mean(H,V), mean(V,D), mean(H,D) each
/// multiply f_dm, and the three products are summed.
Tensor decoder_pairwise_fuse(const Tensor& f_dm, const ModelConfig& cfg, ForwardContext& ctx);

Tensor decoder_block_forward(const Tensor& x, const Tensor& skip_f_ta, const DecoderBlockState& state,
                             const ModelConfig& cfg, ForwardContext& ctx);

/// Pre-sigmoid output [1,S,S].
Tensor model_forward_logits(const Model& model, const Tensor& image, ForwardContext& ctx);
/// Probability map [1,S,S].
Tensor model_forward(const Model& model, const Tensor& image, ForwardContext& ctx);

/// The same network with every attention and gate path removed, written
/// independently of the block functions above.
Tensor plain_unet_forward_logits(const Model& model, const Tensor& image, ForwardContext& ctx);

/// Folds the statistics observed by a batch of train-mode passes (one context per
/// sample, in sample order) into the running statistics.
void update_running_stats(Model& model, const std::vector<const ForwardContext*>& batch);

// Checkpoint persistence. Layout: "UESA1"; u32 tensor count; per tensor u32 name
// length, name bytes, u32 rank, u64 dims; then each tensor's values as little-endian
// f64; then u32 batch-norm count and, per batch norm, u32 channels followed by
// running means and running variances as f64.

std::vector<std::uint8_t> serialize_checkpoint(Model& model);
/// Throws std::invalid_argument if the checkpoint does not match the model's layout.
void deserialize_checkpoint(Model& model, const std::vector<std::uint8_t>& bytes);
void save_checkpoint(Model& model, const std::string& path);
void load_checkpoint(Model& model, const std::string& path);

}  // namespace uesa
