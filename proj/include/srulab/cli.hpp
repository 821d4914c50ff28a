#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "srulab/checkpoint.hpp"
#include "srulab/config.hpp"
#include "srulab/dataset.hpp"
#include "srulab/ema.hpp"
#include "srulab/hypersearch.hpp"
#include "srulab/idx.hpp"
#include "srulab/synthetic.hpp"
#include "srulab/training.hpp"

namespace srulab {

namespace cli {

struct OptionSpec {
    std::string key;  ///< snake_case; the flag is the same name with dashes
    std::string default_value;
    std::string help;
    bool flag = false;
};

struct Command {
    std::string name;
    std::string description;
    std::vector<OptionSpec> options;
    std::function<void(const KeyValues&, std::ostream&)> run;
};

inline std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}
inline std::string snake(std::string key) {
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

inline void append(std::vector<OptionSpec>& to, const KeyValues& defaults, const std::map<std::string, std::string>& help,
                   const std::vector<std::string>& flags = {}) {
    for (const auto& [k, v] : defaults.entries()) {
        auto h = help.find(k);
        const bool is_flag = std::find(flags.begin(), flags.end(), k) != flags.end();
        to.push_back({k, v, h == help.end() ? "" : h->second, is_flag});
    }
}

inline std::vector<OptionSpec> common_options() {
    return {{"seed", "0", "master seed; all randomness derives from named substreams of it"},
            {"out_dir", ".", "directory for outputs and manifest.cfg"}};
}

inline std::vector<OptionSpec> dataset_options() {
    return {{"data", "", "directory holding train/validation/test .seqd files"},
            {"idx_images", "", "IDX image file (.gz allowed) for pixel-sequence classification"},
            {"idx_labels", "", "IDX label file matching --idx-images"},
            {"pool", "2", "mean-pool factor applied to images before flattening"},
            {"stride", "1", "keep every stride-th pixel of the flattened sequence"},
            {"column_major", "false", "flatten images column by column", true},
            {"n_train", "4000", "training images drawn from the IDX set"},
            {"n_val", "500", "validation images"},
            {"n_test", "500", "test images"}};
}

inline std::vector<OptionSpec> architecture_options() {
    std::vector<OptionSpec> out;
    KeyValues kv;
    add_architecture(kv, Architecture{});
    append(out, kv,
           {{"cell", "sru, gru or lstm"},
            {"num_units", "cell output width (hidden size for gru/lstm)"},
            {"num_stats", "statistics per scale (sru)"},
            {"summary_dims", "recurrent summary width (sru); 0 disables it"},
            {"alphas", "comma-separated moving-average scales in [0, 1) (sru)"},
            {"activation", "relu or tanh (sru)"}});
    return out;
}

inline std::vector<OptionSpec> training_options() {
    std::vector<OptionSpec> out;
    KeyValues kv = to_key_values(TrainConfig{});
    KeyValues no_seed;
    for (const auto& [k, v] : kv.entries())
        if (k != "seed") no_seed.set(k, v);
    append(out, no_seed,
           {{"initial_learning_rate", "SGD step size at iteration 0, in [e^-10, 1]"},
            {"lr_decay", "learning-rate multiplier applied every 1000 iterations"},
            {"dropout_keep_rate", "fraction of cell outputs kept during training"},
            {"batch_size", "sequences per minibatch"},
            {"max_iterations", "minibatch updates"},
            {"clip_norm", "global gradient-norm clip"},
            {"eval_every", "validation interval in iterations"},
            {"truncation", "BPTT window in steps; 0 unrolls fully"},
            {"record_wall_time", "fill the seconds column (makes metrics time-dependent)"}},
           {"record_wall_time"});
    return out;
}

inline SequenceDataset load_task_dataset(const KeyValues& kv) {
    const auto& dir = kv.get("data");
    const auto& images = kv.get("idx_images");
    if (!dir.empty() && !images.empty()) throw ConfigError("give either --data or --idx-images, not both");
    if (!dir.empty()) return load_dataset(dir);
    if (images.empty()) throw ConfigError("no dataset: set --data or --idx-images with --idx-labels");
    if (kv.get("idx_labels").empty()) throw ConfigError("--idx-images requires --idx-labels");
    const auto set = load_idx_images(images, kv.get("idx_labels"));
    PixelOrder order{kv.get_u64("pool"), kv.get_u64("stride"), kv.get_bool("column_major")};
    SplitSizes sizes{kv.get_u64("n_train"), kv.get_u64("n_val"), kv.get_u64("n_test")};
    return make_pixel_dataset(set, sizes, kv.get_u64("seed"), order);
}

inline const char* metric_name(TargetKind k) {
    switch (k) {
        case TargetKind::next_step: return "mse";
        case TargetKind::class_label: return "error_rate";
        case TargetKind::binary_next_step: return "nll";
    }
    return "?";
}

inline std::string out_path(const KeyValues& kv, const std::string& file) {
    return (std::filesystem::path(kv.get("out_dir")) / file).string();
}

inline void write_manifest(const std::string& command, const KeyValues& kv, const std::vector<std::string>& notes) {
    std::ostringstream os;
    os << "# srulab " << command << " run\n# replay: srulab " << command << " --config manifest.cfg\n";
    for (const auto& n : notes) os << "# " << n << '\n';
    os << "command=" << command << '\n' << kv.to_string();
    write_text_file(out_path(kv, "manifest.cfg"), os.str());
}

inline Command generate_synthetic_command() {
    Command c{"generate-synthetic", "Generate the ground-truth SRU sequence dataset", common_options(), {}};
    c.options.push_back({"model_seed", "5904", "seed of the fixed ground-truth process parameters"});
    c.options.push_back({"n_train", "3200", "training sequences"});
    c.options.push_back({"n_val", "400", "validation sequences"});
    c.options.push_back({"n_test", "400", "test sequences"});
    c.options.push_back({"length", "176", "points per sequence"});
    c.options.push_back({"export_csv", "false", "also write dataset.csv in long format", true});
    c.run = [](const KeyValues& kv, std::ostream& out) {
        GroundTruthSru model(kv.get_u64("model_seed"));
        SyntheticCounts counts{kv.get_u64("n_train"), kv.get_u64("n_val"), kv.get_u64("n_test"), kv.get_u64("length")};
        auto ds = generate_dataset(model, counts, kv.get_u64("seed"));
        save_dataset(ds, kv.get("out_dir"));
        if (kv.get_bool("export_csv")) export_dataset_csv(ds, out_path(kv, "dataset.csv"));
        write_manifest("generate-synthetic", kv,
                       {"x_1 of sequence i in split s comes from seed/data/s/i", "provenance: " + ds.provenance});
        out << "wrote " << counts.train << '/' << counts.validation << '/' << counts.test << " sequences of length "
            << counts.length << " to " << kv.get("out_dir") << '\n';
    };
    return c;
}

inline Command train_command() {
    Command c{"train", "Train one model and keep the best-validation checkpoint", common_options(), {}};
    for (auto group : {dataset_options(), architecture_options(), training_options()})
        c.options.insert(c.options.end(), group.begin(), group.end());
    c.run = [](const KeyValues& kv, std::ostream& out) {
        const auto ds = load_task_dataset(kv);
        const auto arch = architecture_from(kv);
        const auto config = train_config_from(kv);
        TrainOutputs outputs{out_path(kv, "metrics.csv"), out_path(kv, "model.sruf")};
        const auto result = train(arch, config, ds, outputs);
        write_manifest("train", kv,
                       {"random streams: seed/init (weights), seed/shuffle (minibatches), seed/dropout, seed/data "
                        "(pixel split)",
                        "provenance: " + ds.provenance});
        out << "best validation " << metric_name(ds.kind) << ' ' << format_double(result.best_val_metric)
            << " at iteration " << result.best_iteration << "\nwrote " << outputs.metrics_csv << " and "
            << outputs.checkpoint << '\n';
    };
    return c;
}

inline Command evaluate_command() {
    Command c{"evaluate", "Evaluate a checkpoint on one dataset split", common_options(), {}};
    c.options.push_back({"checkpoint", "", "model file written by train or search"});
    c.options.push_back({"split", "test", "train, validation or test"});
    auto d = dataset_options();
    c.options.insert(c.options.end(), d.begin(), d.end());
    c.run = [](const KeyValues& kv, std::ostream& out) {
        if (kv.get("checkpoint").empty()) throw ConfigError("--checkpoint is required");
        const auto ds = load_task_dataset(kv);
        const Split split = parse_split(kv.get("split"));
        const double metric = evaluate(kv.get("checkpoint"), ds, split);
        std::ostringstream csv;
        csv << "split,metric,value\n" << split_name(split) << ',' << metric_name(ds.kind) << ',' << format_double(metric) << '\n';
        write_text_file(out_path(kv, "evaluation.csv"), csv.str());
        write_manifest("evaluate", kv, {"provenance: " + ds.provenance});
        out << split_name(split) << ' ' << metric_name(ds.kind) << ' ' << format_double(metric) << '\n';
    };
    return c;
}

inline Command search_command() {
    Command c{"search", "Random hyperparameter search with validation-based selection", common_options(), {}};
    for (auto group : {dataset_options(), architecture_options(), training_options()})
        c.options.insert(c.options.end(), group.begin(), group.end());
    c.options.push_back({"n_trials", "10", "number of sampled configurations"});
    c.options.push_back({"workers", "1", "trials run concurrently"});
    append(c.options, to_key_values(SearchSpace{}),
           {{"lr_min", "lower bound of the log-uniform learning-rate range"},
            {"lr_max", "upper bound of the learning-rate range"},
            {"decay_min", "lower bound of lr_decay"},
            {"decay_max", "upper bound of lr_decay"},
            {"keep_min", "dropout keep rate is drawn from (keep_min, keep_max]"},
            {"keep_max", "upper bound of the keep rate"},
            {"units_min", "smallest num_units"},
            {"units_max", "largest num_units"},
            {"stats_min", "smallest num_stats (sru)"},
            {"stats_max", "largest num_stats (sru)"},
            {"summary_min", "smallest summary_dims (sru)"},
            {"summary_max", "largest summary_dims (sru)"}});
    c.run = [](const KeyValues& kv, std::ostream& out) {
        const auto ds = load_task_dataset(kv);
        SweepSettings settings;
        settings.n_trials = kv.get_u64("n_trials");
        settings.workers = kv.get_u64("workers");
        settings.seed = kv.get_u64("seed");
        settings.base_arch = architecture_from(kv);
        settings.base_config = train_config_from(kv);
        const auto space = search_space_from(kv);
        const auto trials_dir = out_path(kv, "trials");
        std::filesystem::create_directories(trials_dir);
        const auto result = sweep_training(space, settings, ds, trials_dir);
        write_text_file(out_path(kv, "sweep.csv"), sweep_csv(result));
        best_config(result).save(out_path(kv, "best.cfg"));
        save_checkpoint(*result.best_model, out_path(kv, "best.sruf"));
        write_manifest("search", kv,
                       {"trial i samples each field from seed/search/i/<field>; its training seed is "
                        "seed/search/i/train_seed",
                        "provenance: " + ds.provenance});
        const auto& best = result.trials[result.best];
        out << "best trial " << best.spec.id << ": validation " << format_double(best.validation) << ", test "
            << format_double(*best.test) << "\nwrote " << out_path(kv, "sweep.csv") << '\n';
    };
    return c;
}

inline Command analyze_viewpoints_command() {
    Command c{"analyze-viewpoints", "Export moving-average weight kernels as CSV", common_options(), {}};
    c.options.push_back({"horizon", "1000", "number of lags"});
    c.options.push_back({"presets", "true", "include the four distant/recent-past combinations"});
    c.options.push_back({"alphas", "", "comma-separated single-scale profiles to add"});
    c.run = [](const KeyValues& kv, std::ostream& out) {
        const std::size_t horizon = kv.get_u64("horizon");
        std::vector<ViewpointSpec> specs;
        if (kv.get_bool("presets")) specs = viewpoint_presets(horizon);
        if (!kv.get("alphas").empty())
            for (double a : parse_alphas(kv.get("alphas")))
                specs.push_back({"alpha=" + format_double(a), {{1.0, a}}, horizon});
        const auto path = out_path(kv, "viewpoints.csv");
        export_profiles(specs, path);
        write_manifest("analyze-viewpoints", kv, {});
        for (const auto& s : specs) {
            const auto k = viewpoint_kernel(s);
            const auto peak = std::max_element(k.begin(), k.end()) - k.begin();
            out << s.label << ": peak at lag " << peak << '\n';
        }
        out << "wrote " << path << '\n';
    };
    return c;
}

inline Command inspect_checkpoint_command() {
    Command c{"inspect-checkpoint", "Print a checkpoint's architecture and parameter shapes", common_options(), {}};
    c.options.push_back({"checkpoint", "", "model file"});
    c.run = [](const KeyValues& kv, std::ostream& out) {
        if (kv.get("checkpoint").empty()) throw ConfigError("--checkpoint is required");
        const Model m = load_checkpoint(kv.get("checkpoint"));
        std::ostringstream os;
        KeyValues arch;
        add_architecture(arch, m.arch);
        arch.set("input_dim", std::uint64_t{m.arch.input_dim});
        arch.set("head", std::string(to_string(m.arch.head)));
        arch.set("target_dim", std::uint64_t{m.arch.target_dim});
        os << arch.to_string();
        for (std::size_t i = 0; i < m.params.size(); ++i)
            os << "param " << m.params.name(i) << ' ' << shape_string(m.params[i].shape()) << " norm "
               << format_double(std::sqrt(sq_norm(m.params[i]))) << '\n';
        os << "scalars " << m.params.scalar_count() << '\n';
        write_text_file(out_path(kv, "checkpoint.txt"), os.str());
        write_manifest("inspect-checkpoint", kv, {});
        out << os.str();
    };
    return c;
}

inline std::vector<Command> commands() {
    return {generate_synthetic_command(), train_command(),          evaluate_command(),
            search_command(),             analyze_viewpoints_command(), inspect_checkpoint_command()};
}

inline std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace cli

/// Runs one command. `args` excludes the program name. Returns 0 on success,
/// 1 on a runtime failure and 2 on a usage error; failures print a single
/// line "error: <category>: <message>" to `err`.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Statistical recurrent unit laboratory", "srulab"};
    app.require_subcommand(1);
    const auto commands = cli::commands();
    std::vector<std::map<std::string, std::string>> values(commands.size());
    std::vector<std::map<std::string, bool>> flags(commands.size());
    std::vector<std::string> config_paths(commands.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        auto* sub = app.add_subcommand(commands[i].name, commands[i].description);
        sub->add_option("--config", config_paths[i], "key=value file; its entries fill flags not given explicitly");
        for (const auto& o : commands[i].options) {
            const auto name = "--" + cli::dashed(o.key);
            if (o.flag)
                sub->add_flag(name, flags[i][o.key], o.help + " (default " + o.default_value + ")");
            else
                sub->add_option(name, values[i][o.key], o.help)->default_str(o.default_value);
        }
        subs.push_back(sub);
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: usage_error: " << cli::one_line(e.what()) << '\n';
        return 2;
    }

    std::size_t which = 0;
    while (which < subs.size() && !subs[which]->parsed()) ++which;
    const auto& command = commands[which];
    CLI::App* sub = subs[which];
    try {
        KeyValues resolved;
        for (const auto& o : command.options) resolved.set(o.key, o.default_value);
        auto given = [&](const std::string& key) { return sub->count("--" + cli::dashed(key)) > 0; };
        if (!config_paths[which].empty()) {
            const auto file = KeyValues::load(config_paths[which]);
            for (const auto& [raw_key, v] : file.entries()) {
                const auto key = cli::snake(raw_key);
                if (key == "command") {
                    if (v != command.name)
                        throw ConfigError(config_paths[which] + " was written by '" + v + "', not '" + command.name + "'");
                    continue;
                }
                if (!resolved.has(key)) throw ConfigError(config_paths[which] + ": unknown key '" + raw_key + "'");
                if (!given(key)) resolved.set(key, v);
            }
        }
        for (const auto& o : command.options) {
            if (!given(o.key)) continue;
            if (o.flag)
                resolved.set(o.key, flags[which][o.key]);
            else
                resolved.set(o.key, values[which][o.key]);
        }
        std::filesystem::create_directories(resolved.get("out_dir"));
        command.run(resolved, out);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.category() << ": " << cli::one_line(e.what()) << '\n';
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: io_error: " << cli::one_line(e.what()) << '\n';
    } catch (const std::exception& e) {
        err << "error: internal_error: " << cli::one_line(e.what()) << '\n';
    }
    return 1;
}

}  // namespace srulab
