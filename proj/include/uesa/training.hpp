#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uesa/data.hpp"
#include "uesa/metrics.hpp"
#include "uesa/network.hpp"

namespace uesa {

enum class LossKind { bce, dice };

struct TrainConfig {
    ModelConfig model;
    double lr = 1e-3;
    int batch_size = 6;
    int epochs = 30;
    LossKind loss = LossKind::bce;
    double val_fraction = 0.2;
    std::uint64_t seed = 42;
    /// Synthetic samples drawn when no data directory is supplied.
    int num_samples = 200;
    Aggregation aggregation = Aggregation::per_image;

    void validate() const;
};

/// Flat JSON object with TrainConfig field names (model fields inline). Unknown
/// keys and wrong value types are std::invalid_argument.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& cfg);

/// Adam with beta1 0.9, beta2 0.999, eps 1e-8 and a constant learning rate.
class Adam {
public:
    explicit Adam(double lr);
    void step(Model& model, const std::vector<std::vector<double>>& grads);
    std::uint64_t steps() const { return t_; }

private:
    double lr_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Mini-batch optimizer loop over one model.
class Trainer {
public:
    Trainer(Model model, const TrainConfig& cfg);

    /// One optimizer step on `batch`; returns the mean per-sample loss.
    double step(const std::vector<const Sample*>& batch);
    /// One pass over `data` in a seeded shuffled order; returns the mean step loss.
    double epoch(const std::vector<Sample>& data, int epoch_index);

    Model& model() { return model_; }
    const Model& model() const { return model_; }
    std::uint64_t steps() const { return steps_; }

private:
    Model model_;
    TrainConfig cfg_;
    Adam adam_;
    std::uint64_t steps_ = 0;
};

/// Loss of a single eval- or train-mode pass.
Tensor sample_loss(const Model& model, const Sample& sample, LossKind loss, ForwardContext& ctx);

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_iou = 0.0;
};

struct TrainResult {
    Model best;  // highest validation IoU seen at an epoch end
    double best_val_iou = -1.0;
    std::vector<EpochLog> epochs;
};

struct DataSplit {
    std::vector<Sample> train;
    std::vector<Sample> val;
};

/// The last round(n * val_fraction) samples form the validation set. With a single
/// sample both sets hold it.
DataSplit split_dataset(const std::vector<Sample>& data, double val_fraction);

/// Trains a model initialized from cfg.model.seed (or a copy of `init`). `log`
/// receives one CSV line per epoch: epoch,mean_loss,val_iou.
TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  std::ostream* log = nullptr, const Model* init = nullptr);

/// Eval-mode forward, binarize at 0.5, one metric row per sample.
MetricReport evaluate(const Model& model, const std::vector<Sample>& data,
                      Aggregation aggregation = Aggregation::per_image);

struct ComparisonRow {
    std::string label;
    MetricReport report;
};

/// Header `<key>,dsc,iou,sen,spec,acc`, one `m±s` row per label.
std::string comparison_csv(const std::string& key, const std::vector<ComparisonRow>& rows);

/// Trains one model per threshold from the same initialization and reports
/// held-out metrics.
std::vector<ComparisonRow> sweep_threshold(const TrainConfig& base, const std::vector<double>& th_values,
                                           const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                                           std::ostream* log = nullptr);

inline const std::vector<std::string> kAblationVariants = {"full", "no_tatt", "no_datt"};

/// Trains the listed variants ("full", "no_tatt", "no_datt", "plain") from the same initialization.
std::vector<ComparisonRow> ablate(const TrainConfig& base, const std::vector<std::string>& variants,
                                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                                  std::ostream* log = nullptr);

ModelConfig apply_variant(ModelConfig cfg, const std::string& variant);

/// "rise-then-fall", "increasing", "decreasing", "flat" or "mixed".
std::string describe_trend(const std::vector<double>& values);

}  // namespace uesa
