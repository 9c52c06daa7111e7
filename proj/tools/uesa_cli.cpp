// Command-line driver: synth, train, eval, gradcheck, sweep-th, ablate.
//
// Failures print exactly one line to stderr, `error: <kind>: <message>`, and exit
// nonzero (2 for usage errors, 1 otherwise).

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uesa/gradsuite.hpp"
#include "uesa/training.hpp"

namespace fs = std::filesystem;
using namespace uesa;

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string data_dir;
    std::string checkpoint;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

TrainConfig resolve_config(const CommonOptions& o) {
    TrainConfig cfg = o.config_path.empty() ? TrainConfig{} : load_train_config(o.config_path);
    if (o.seed) cfg.seed = cfg.model.seed = *o.seed;
    cfg.validate();
    return cfg;
}

fs::path require_out(const CommonOptions& o, const char* command) {
    if (o.out_dir.empty()) throw UsageError(std::string(command) + " requires --out DIR");
    fs::create_directories(o.out_dir);
    return o.out_dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<Sample> load_or_synthesize(const CommonOptions& o, const TrainConfig& cfg) {
    if (!o.data_dir.empty()) {
        auto data = load_dataset(o.data_dir);
        if (data.empty()) throw std::runtime_error("no samples in '" + o.data_dir + "'");
        for (const auto& s : data)
            if (s.image.dim(1) != static_cast<std::size_t>(cfg.model.input_size) ||
                s.image.dim(2) != static_cast<std::size_t>(cfg.model.input_size))
                throw std::invalid_argument("sample " + s.id + " has shape " + shape_to_string(s.image.shape()) +
                                            " but input_size is " + std::to_string(cfg.model.input_size));
        return data;
    }
    return synth_dataset(static_cast<std::size_t>(cfg.num_samples), static_cast<std::size_t>(cfg.model.input_size),
                         cfg.seed);
}

int run_synth(const CommonOptions& o) {
    const TrainConfig cfg = resolve_config(o);
    const fs::path out = require_out(o, "synth");
    save_dataset(synth_dataset(static_cast<std::size_t>(cfg.num_samples),
                               static_cast<std::size_t>(cfg.model.input_size), cfg.seed),
                 out.string());
    std::cout << "wrote " << cfg.num_samples << " samples to " << out.string() << '\n';
    return 0;
}

int run_train(const CommonOptions& o) {
    const TrainConfig cfg = resolve_config(o);
    const fs::path out = require_out(o, "train");
    const auto split = split_dataset(load_or_synthesize(o, cfg), cfg.val_fraction);
    std::ostringstream log;
    auto result = train(cfg, split.train, split.val, &log);
    std::cout << log.str();
    write_text(out / "train_log.csv", log.str());
    write_text(out / "config.json", train_config_to_json(cfg) + "\n");
    save_checkpoint(result.best, (out / "model.uesa").string());
    std::cout << "best_val_iou," << result.best_val_iou << '\n';
    return 0;
}

int run_eval(const CommonOptions& o) {
    if (o.checkpoint.empty()) throw UsageError("eval requires --checkpoint PATH");
    const TrainConfig cfg = resolve_config(o);
    Model model(cfg.model);
    load_checkpoint(model, o.checkpoint);
    auto data = load_or_synthesize(o, cfg);
    // Without --data, score the held-out tail of the synthetic set that train would use.
    if (o.data_dir.empty()) data = split_dataset(data, cfg.val_fraction).val;
    const std::string csv = report_csv(evaluate(model, data, cfg.aggregation));
    std::cout << csv;
    if (!o.out_dir.empty()) write_text(require_out(o, "eval") / "metrics.csv", csv);
    return 0;
}

int run_gradcheck(const CommonOptions& o) {
    const std::uint64_t seed = o.seed.value_or(42);
    auto entries = op_gradient_suite(seed);
    for (auto& e : model_gradient_suite(seed)) entries.push_back(std::move(e));
    std::ostringstream csv;
    csv << "check,max_rel_error,tolerance,status\n";
    std::size_t failures = 0;
    std::string first_failure;
    for (const auto& e : entries) {
        const std::string status = e.passed() ? "PASS" : (e.result.failed_op.empty() ? "FAIL" : "NONFINITE:" + e.result.failed_op);
        csv << e.name << ',' << e.result.max_rel_error << ',' << e.tolerance << ',' << status << '\n';
        if (!e.passed() && failures++ == 0) first_failure = e.name;
    }
    std::cout << csv.str();
    if (!o.out_dir.empty()) write_text(require_out(o, "gradcheck") / "gradcheck.csv", csv.str());
    if (failures > 0)
        throw std::runtime_error(std::to_string(failures) + " gradient checks failed, first: " + first_failure);
    return 0;
}

std::vector<double> iou_column(const std::vector<ComparisonRow>& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.report.of("iou").mean);
    return v;
}

int run_sweep(const CommonOptions& o, const std::vector<double>& th_values) {
    const TrainConfig cfg = resolve_config(o);
    const fs::path out = require_out(o, "sweep-th");
    const auto split = split_dataset(load_or_synthesize(o, cfg), cfg.val_fraction);
    std::ostringstream log;
    const auto rows = sweep_threshold(cfg, th_values, split.train, split.val, &log);
    const std::string csv = comparison_csv("th", rows);
    write_text(out / "th_sweep.csv", csv);
    write_text(out / "th_sweep_log.csv", log.str());
    std::cout << csv << "iou_trend," << describe_trend(iou_column(rows)) << '\n';
    return 0;
}

int run_ablate(const CommonOptions& o, const std::vector<std::string>& variants, double band) {
    const TrainConfig cfg = resolve_config(o);
    const fs::path out = require_out(o, "ablate");
    const auto split = split_dataset(load_or_synthesize(o, cfg), cfg.val_fraction);
    std::ostringstream log;
    const auto rows = ablate(cfg, variants, split.train, split.val, &log);
    const std::string csv = comparison_csv("variant", rows);
    write_text(out / "ablation.csv", csv);
    write_text(out / "ablation_log.csv", log.str());
    std::cout << csv;
    // Each adjacent pair is reported as holding when the left IoU is at least the right minus the band.
    const auto iou = iou_column(rows);
    bool holds = true;
    for (std::size_t i = 1; i < iou.size(); ++i) holds = holds && iou[i - 1] + band >= iou[i];
    std::cout << "iou_ordering,";
    for (std::size_t i = 0; i < rows.size(); ++i) std::cout << (i ? ">=" : "") << rows[i].label;
    std::cout << ',' << (holds ? "holds" : "violated") << ",band=" << band << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UESA-Net segmentation toolkit"};
    app.require_subcommand(1);
    CommonOptions opts;
    std::vector<double> th_values = {0.1, 0.2, 0.3, 0.4};
    std::vector<std::string> variants = kAblationVariants;
    double band = 0.01;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "Flat JSON training config");
        cmd->add_option("--seed", opts.seed, "Overrides the config seed");
        cmd->add_option("--out", opts.out_dir, "Output directory");
    };
    auto add_data = [&](CLI::App* cmd) {
        cmd->add_option("--data", opts.data_dir, "Dataset directory with images/ and masks/ (default: synthetic)");
    };

    auto* synth = app.add_subcommand("synth", "Write a synthetic PGM dataset");
    add_common(synth);
    auto* train_cmd = app.add_subcommand("train", "Train and save the best checkpoint");
    add_common(train_cmd);
    add_data(train_cmd);
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and print the metric CSV");
    add_common(eval_cmd);
    add_data(eval_cmd);
    eval_cmd->add_option("--checkpoint", opts.checkpoint, "UESA1 checkpoint file");
    auto* grad_cmd = app.add_subcommand("gradcheck", "Run the central-difference gradient suite");
    add_common(grad_cmd);
    auto* sweep_cmd = app.add_subcommand("sweep-th", "Train one model per shrinkage threshold");
    add_common(sweep_cmd);
    add_data(sweep_cmd);
    sweep_cmd->add_option("--th", th_values, "Threshold values")->delimiter(',');
    auto* ablate_cmd = app.add_subcommand("ablate", "Train the attention ablation variants");
    add_common(ablate_cmd);
    add_data(ablate_cmd);
    ablate_cmd->add_option("--variants", variants, "Variants among full,no_tatt,no_datt,plain")->delimiter(',');
    ablate_cmd->add_option("--band", band, "Tolerance band for the reported IoU ordering");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        if (synth->parsed()) return run_synth(opts);
        if (train_cmd->parsed()) return run_train(opts);
        if (eval_cmd->parsed()) return run_eval(opts);
        if (grad_cmd->parsed()) return run_gradcheck(opts);
        if (sweep_cmd->parsed()) return run_sweep(opts, th_values);
        if (ablate_cmd->parsed()) return run_ablate(opts, variants, band);
    } catch (const UsageError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid_argument: " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
