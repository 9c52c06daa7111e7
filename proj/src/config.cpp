#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "uesa/training.hpp"

namespace uesa {

using nlohmann::json;

void TrainConfig::validate() const {
    model.validate();
    if (!(lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must be in [0,1)");
    if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
}

namespace {

template <typename T>
T field(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config key '" + key + "' has the wrong type");
    }
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");

    TrainConfig cfg;
    auto& m = cfg.model;
    for (const auto& [key, value] : j.items()) {
        if (key == "depth") m.depth = field<int>(j, key);
        else if (key == "base_filters") m.base_filters = field<int>(j, key);
        else if (key == "th") m.th = field<double>(j, key);
        else if (key == "input_size") m.input_size = field<int>(j, key);
        else if (key == "dropout_rate") m.dropout_rate = field<double>(j, key);
        else if (key == "enable_encoder_attention") m.enable_encoder_attention = field<bool>(j, key);
        else if (key == "enable_decoder_attention") m.enable_decoder_attention = field<bool>(j, key);
        else if (key == "normalize_before_gate") m.normalize_before_gate = field<bool>(j, key);
        else if (key == "seed") cfg.seed = m.seed = field<std::uint64_t>(j, key);
        else if (key == "lr") cfg.lr = field<double>(j, key);
        else if (key == "batch_size") cfg.batch_size = field<int>(j, key);
        else if (key == "epochs") cfg.epochs = field<int>(j, key);
        else if (key == "val_fraction") cfg.val_fraction = field<double>(j, key);
        else if (key == "num_samples") cfg.num_samples = field<int>(j, key);
        else if (key == "loss") {
            const auto s = field<std::string>(j, key);
            if (s == "bce") cfg.loss = LossKind::bce;
            else if (s == "dice") cfg.loss = LossKind::dice;
            else throw std::invalid_argument("config key 'loss' must be \"bce\" or \"dice\"");
        } else if (key == "aggregation") {
            const auto s = field<std::string>(j, key);
            if (s == "per_image") cfg.aggregation = Aggregation::per_image;
            else if (s == "pooled_pixels") cfg.aggregation = Aggregation::pooled_pixels;
            else throw std::invalid_argument("config key 'aggregation' must be \"per_image\" or \"pooled_pixels\"");
        } else {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_train_config(ss.str());
}

std::string train_config_to_json(const TrainConfig& cfg) {
    const auto& m = cfg.model;
    json j = {
        {"depth", m.depth},
        {"base_filters", m.base_filters},
        {"th", m.th},
        {"input_size", m.input_size},
        {"dropout_rate", m.dropout_rate},
        {"enable_encoder_attention", m.enable_encoder_attention},
        {"enable_decoder_attention", m.enable_decoder_attention},
        {"normalize_before_gate", m.normalize_before_gate},
        {"seed", cfg.seed},
        {"lr", cfg.lr},
        {"batch_size", cfg.batch_size},
        {"epochs", cfg.epochs},
        {"loss", cfg.loss == LossKind::bce ? "bce" : "dice"},
        {"val_fraction", cfg.val_fraction},
        {"num_samples", cfg.num_samples},
        {"aggregation", cfg.aggregation == Aggregation::per_image ? "per_image" : "pooled_pixels"},
    };
    return j.dump(2) + "\n";
}

}  // namespace uesa
