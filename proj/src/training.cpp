#include "uesa/training.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "uesa/random.hpp"

namespace uesa {

// ---------------------------------------------------------------------------
// Optimizer

Adam::Adam(double lr) : lr_(lr) {}

void Adam::step(Model& model, const std::vector<std::vector<double>>& grads) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    auto params = model.parameters();
    if (grads.size() != params.size()) throw std::invalid_argument("Adam::step: gradient count mismatch");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.tensor->numel(), 0.0);
            v_.emplace_back(p.tensor->numel(), 0.0);
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto data = params[k].tensor->mutable_data();
        const auto& g = grads[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            data[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Training

Tensor sample_loss(const Model& model, const Sample& sample, LossKind loss, ForwardContext& ctx) {
    Tensor logits = model_forward_logits(model, sample.image, ctx);
    return loss == LossKind::bce ? bce_with_logits(logits, sample.mask) : soft_dice_loss(sigmoid(logits), sample.mask);
}

Trainer::Trainer(Model model, const TrainConfig& cfg) : model_(std::move(model)), cfg_(cfg), adam_(cfg.lr) {}

double Trainer::step(const std::vector<const Sample*>& batch) {
    if (batch.empty()) throw std::invalid_argument("Trainer::step: empty batch");
    auto params = model_.parameters();
    std::vector<std::vector<double>> grads;
    for (const auto& p : params) grads.emplace_back(p.tensor->numel(), 0.0);

    const double weight = 1.0 / static_cast<double>(batch.size());
    std::vector<ForwardContext> contexts(batch.size());
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto& ctx = contexts[b];
        ctx.mode = Mode::train;
        ctx.dropout_seed = mix_seed(mix_seed(cfg_.seed, steps_), b);
        Tensor loss;
        try {
            loss = sample_loss(model_, *batch[b], cfg_.loss, ctx);
        } catch (const NonFiniteError& e) {
            throw std::runtime_error("non-finite tensor from op '" + e.op() + "' at step " + std::to_string(steps_) +
                                     " on sample '" + batch[b]->id + "'");
        }
        total += loss.item();
        auto leaf_grads = compute_gradients(scale(loss, weight));
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto it = leaf_grads.find(params[k].tensor->node());
            if (it == leaf_grads.end()) continue;
            for (std::size_t i = 0; i < it->second.size(); ++i) grads[k][i] += it->second[i];
        }
    }
    for (std::size_t k = 0; k < params.size(); ++k)
        for (double g : grads[k])
            if (!std::isfinite(g)) {
                throw std::runtime_error("non-finite gradient for '" + params[k].name + "' at step " +
                                         std::to_string(steps_));
            }
    adam_.step(model_, grads);
    std::vector<const ForwardContext*> observed;
    for (const auto& c : contexts) observed.push_back(&c);
    update_running_stats(model_, observed);
    ++steps_;
    return total * weight;
}

double Trainer::epoch(const std::vector<Sample>& data, int epoch_index) {
    if (data.empty()) throw std::invalid_argument("Trainer::epoch: no data");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(cfg_.seed, 0x5EED0000ULL + static_cast<std::uint64_t>(epoch_index)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
        std::vector<const Sample*> batch;
        for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(&data[order[i]]);
        loss_sum += step(batch);
        ++batches;
    }
    return loss_sum / static_cast<double>(batches);
}

DataSplit split_dataset(const std::vector<Sample>& data, double val_fraction) {
    if (data.empty()) throw std::invalid_argument("split_dataset: no data");
    if (data.size() == 1) return {data, data};
    auto n_val = static_cast<std::size_t>(std::lround(static_cast<double>(data.size()) * val_fraction));
    n_val = std::min(n_val, data.size() - 1);
    DataSplit s;
    s.train.assign(data.begin(), data.end() - static_cast<std::ptrdiff_t>(n_val));
    s.val.assign(data.end() - static_cast<std::ptrdiff_t>(n_val), data.end());
    if (s.val.empty()) s.val = s.train;
    return s;
}

TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  std::ostream* log, const Model* init) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    const auto& val = val_set.empty() ? train_set : val_set;
    Trainer trainer(init ? Model(*init) : Model(cfg.model), cfg);
    trainer.model().mutable_config() = cfg.model;

    TrainResult result{trainer.model(), -1.0, {}};
    if (log) *log << "epoch,mean_loss,val_iou\n";
    for (int e = 0; e < cfg.epochs; ++e) {
        const double loss = trainer.epoch(train_set, e);
        const double val_iou = evaluate(trainer.model(), val).of("iou").mean;
        result.epochs.push_back({e + 1, loss, val_iou});
        if (log) {
            char line[96];
            std::snprintf(line, sizeof line, "%d,%.6f,%.4f\n", e + 1, loss, val_iou);
            *log << line << std::flush;
        }
        if (val_iou > result.best_val_iou) {
            result.best_val_iou = val_iou;
            result.best = trainer.model();
        }
    }
    return result;
}

MetricReport evaluate(const Model& model, const std::vector<Sample>& data, Aggregation aggregation) {
    if (data.empty()) throw std::invalid_argument("evaluate: no data");
    NoGradGuard no_grad;
    std::vector<MetricRow> rows;
    std::vector<ConfusionCounts> counts;
    for (const auto& s : data) {
        ForwardContext ctx;
        ctx.mode = Mode::eval;
        Tensor prob = model_forward(model, s.image, ctx);
        counts.push_back(confusion(binarize(prob), s.mask));
        rows.push_back(metric_row(s.id, counts.back()));
    }
    return aggregation == Aggregation::per_image ? aggregate(std::move(rows))
                                                 : aggregate_pooled(std::move(rows), counts);
}

// ---------------------------------------------------------------------------
// Experiment drivers

std::string comparison_csv(const std::string& key, const std::vector<ComparisonRow>& rows) {
    std::ostringstream os;
    os << key;
    for (const char* name : kMetricNames) os << ',' << name;
    os << '\n';
    for (const auto& r : rows) {
        os << r.label;
        for (const auto& s : r.report.summary) os << ',' << format_summary(s);
        os << '\n';
    }
    return os.str();
}

std::vector<ComparisonRow> sweep_threshold(const TrainConfig& base, const std::vector<double>& th_values,
                                           const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                                           std::ostream* log) {
    if (th_values.size() < 2) throw std::invalid_argument("sweep_threshold: need at least two thresholds");
    const Model init(base.model);
    std::vector<ComparisonRow> rows;
    for (double th : th_values) {
        TrainConfig cfg = base;
        cfg.model.th = th;
        char label[32];
        std::snprintf(label, sizeof label, "%.2f", th);
        if (log) *log << "# th=" << label << '\n';
        auto result = train(cfg, train_set, val_set, log, &init);
        rows.push_back({label, evaluate(result.best, val_set.empty() ? train_set : val_set, base.aggregation)});
    }
    return rows;
}

ModelConfig apply_variant(ModelConfig cfg, const std::string& variant) {
    if (variant == "full") {
        cfg.enable_encoder_attention = cfg.enable_decoder_attention = true;
    } else if (variant == "no_tatt") {
        cfg.enable_encoder_attention = false;
        cfg.enable_decoder_attention = true;
    } else if (variant == "no_datt") {
        cfg.enable_encoder_attention = true;
        cfg.enable_decoder_attention = false;
    } else if (variant == "plain") {
        cfg.enable_encoder_attention = cfg.enable_decoder_attention = false;
    } else {
        throw std::invalid_argument("unknown ablation variant '" + variant + "'");
    }
    return cfg;
}

std::vector<ComparisonRow> ablate(const TrainConfig& base, const std::vector<std::string>& variants,
                                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                                  std::ostream* log) {
    const Model init(base.model);
    std::vector<ComparisonRow> rows;
    for (const auto& v : variants) {
        TrainConfig cfg = base;
        cfg.model = apply_variant(base.model, v);
        if (log) *log << "# variant=" << v << '\n';
        auto result = train(cfg, train_set, val_set, log, &init);
        rows.push_back({v, evaluate(result.best, val_set.empty() ? train_set : val_set, base.aggregation)});
    }
    return rows;
}

std::string describe_trend(const std::vector<double>& values) {
    if (values.size() < 2) return "flat";
    bool up = false, down = false, turned = false;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[i - 1]) {
            if (down) return "mixed";
            up = true;
        } else if (values[i] < values[i - 1]) {
            if (up) turned = true;
            down = true;
        }
    }
    if (turned) return "rise-then-fall";
    if (up) return "increasing";
    if (down) return "decreasing";
    return "flat";
}

}  // namespace uesa
