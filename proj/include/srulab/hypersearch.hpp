#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "srulab/training.hpp"

namespace srulab {

/// Random-search ranges. The defaults are the full ranges; narrower bounds
/// can be set for small budgets.
struct SearchSpace {
    double lr_min = std::exp(-10.0), lr_max = 1.0;  ///< log-uniform
    double decay_min = 0.8, decay_max = 0.999;      ///< uniform
    double keep_min = 0.0, keep_max = 1.0;          ///< uniform on (keep_min, keep_max]
    std::size_t units_min = 1, units_max = 256;
    std::size_t stats_min = 1, stats_max = 256;     ///< SRU only
    std::size_t summary_min = 1, summary_max = 64;  ///< SRU only

    void validate() const {
        if (!(lr_min > 0.0 && lr_min <= lr_max)) throw ConfigError("search space: need 0 < lr_min <= lr_max");
        if (!(decay_min > 0.0 && decay_min <= decay_max)) throw ConfigError("search space: need 0 < decay_min <= decay_max");
        if (!(keep_min >= 0.0 && keep_min < keep_max && keep_max <= 1.0))
            throw ConfigError("search space: need 0 <= keep_min < keep_max <= 1");
        if (units_min == 0 || units_min > units_max || stats_min == 0 || stats_min > stats_max ||
            summary_min > summary_max)
            throw ConfigError("search space: integer ranges must be nonempty (and units, stats positive)");
    }
};

inline KeyValues to_key_values(const SearchSpace& s) {
    KeyValues kv;
    kv.set("lr_min", s.lr_min);
    kv.set("lr_max", s.lr_max);
    kv.set("decay_min", s.decay_min);
    kv.set("decay_max", s.decay_max);
    kv.set("keep_min", s.keep_min);
    kv.set("keep_max", s.keep_max);
    kv.set("units_min", std::uint64_t{s.units_min});
    kv.set("units_max", std::uint64_t{s.units_max});
    kv.set("stats_min", std::uint64_t{s.stats_min});
    kv.set("stats_max", std::uint64_t{s.stats_max});
    kv.set("summary_min", std::uint64_t{s.summary_min});
    kv.set("summary_max", std::uint64_t{s.summary_max});
    return kv;
}

inline SearchSpace search_space_from(const KeyValues& kv, SearchSpace s = {}) {
    auto dbl = [&](const char* k, double& v) { if (kv.has(k)) v = kv.get_double(k); };
    auto u64 = [&](const char* k, std::size_t& v) { if (kv.has(k)) v = kv.get_u64(k); };
    dbl("lr_min", s.lr_min);
    dbl("lr_max", s.lr_max);
    dbl("decay_min", s.decay_min);
    dbl("decay_max", s.decay_max);
    dbl("keep_min", s.keep_min);
    dbl("keep_max", s.keep_max);
    u64("units_min", s.units_min);
    u64("units_max", s.units_max);
    u64("stats_min", s.stats_min);
    u64("stats_max", s.stats_max);
    u64("summary_min", s.summary_min);
    u64("summary_max", s.summary_max);
    s.validate();
    return s;
}

/// One sampled configuration. `seed` drives the trial's own training run.
struct TrialSpec {
    std::size_t id = 0;
    std::uint64_t seed = 0;
    Architecture arch;
    TrainConfig config;
};

/// Draws every searched field from its own substream of `rng`, so sweeps over
/// different cells with the same seed share the common draws.
inline TrialSpec sample_trial(const SearchSpace& space, const Architecture& base_arch, const TrainConfig& base_config,
                              const Rng& rng) {
    space.validate();
    TrialSpec t;
    t.arch = base_arch;
    t.config = base_config;
    Rng lr = rng.stream("initial_learning_rate");
    t.config.initial_learning_rate =
        std::clamp(std::exp(lr.uniform(std::log(space.lr_min), std::log(space.lr_max))), space.lr_min, space.lr_max);
    t.config.lr_decay = rng.stream("lr_decay").uniform(space.decay_min, space.decay_max);
    // 1 - u with u in [0, 1) lands in (keep_min, keep_max].
    t.config.dropout_keep_rate = space.keep_max - rng.stream("dropout_keep_rate").uniform() * (space.keep_max - space.keep_min);
    auto draw = [&](const char* name, std::size_t lo, std::size_t hi) {
        return static_cast<std::size_t>(
            rng.stream(name).uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    };
    t.arch.num_units = draw("num_units", space.units_min, space.units_max);
    if (t.arch.cell == CellKind::sru) {
        t.arch.num_stats = draw("num_stats", space.stats_min, space.stats_max);
        t.arch.summary_dims = draw("summary_dims", space.summary_min, space.summary_max);
    }
    t.seed = rng.stream("train_seed").next_u64();
    t.config.seed = t.seed;
    return t;
}

struct TrialOutcome {
    double validation = 0.0;
    std::optional<Model> model;
};

enum class TrialStatus { ok, failed };

struct TrialResult {
    TrialSpec spec;
    TrialStatus status = TrialStatus::ok;
    double validation = std::numeric_limits<double>::infinity();
    std::optional<double> test;  ///< only on the best-validation trial
    std::string message;
};

struct SweepSettings {
    std::size_t n_trials = 10;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    Architecture base_arch;
    TrainConfig base_config;
};

struct SweepResult {
    std::vector<TrialResult> trials;  ///< in trial-id order
    std::size_t best = 0;
    std::optional<Model> best_model;
};

using TrialRunner = std::function<TrialOutcome(const TrialSpec&)>;
using TestEvaluator = std::function<double(const TrialSpec&, const TrialOutcome&)>;

/// Samples and runs `n_trials` trials on a bounded worker pool, picks the
/// lowest validation objective, and evaluates only that trial on test.
/// A trial whose runner throws or returns a non-finite objective is marked
/// failed with objective +inf.
inline SweepResult run_sweep(const SearchSpace& space, const SweepSettings& settings, const TrialRunner& runner,
                             const TestEvaluator& test_eval) {
    if (settings.n_trials == 0) throw ContractError("run_sweep: n_trials must be at least 1");
    space.validate();
    const Rng search = Rng(settings.seed).stream("search");
    std::vector<TrialSpec> specs;
    for (std::size_t i = 0; i < settings.n_trials; ++i) {
        specs.push_back(sample_trial(space, settings.base_arch, settings.base_config, search.stream(i)));
        specs.back().id = i;
    }

    SweepResult out;
    out.trials.resize(specs.size());
    std::vector<std::optional<TrialOutcome>> outcomes(specs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < specs.size();) {
            TrialResult& r = out.trials[i];
            r.spec = specs[i];
            try {
                TrialOutcome o = runner(specs[i]);
                if (!std::isfinite(o.validation)) throw TrainingError("non-finite validation objective");
                r.validation = o.validation;
                outcomes[i] = std::move(o);
            } catch (const std::exception& e) {
                r.status = TrialStatus::failed;
                r.validation = std::numeric_limits<double>::infinity();
                r.message = e.what();
            }
        }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(settings.workers, specs.size()));
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < out.trials.size(); ++i)
        if (out.trials[i].status == TrialStatus::ok && (!best || out.trials[i].validation < out.trials[*best].validation))
            best = i;
    if (!best) throw SweepError("all " + std::to_string(specs.size()) + " trials failed; first failure: " + out.trials[0].message);
    out.best = *best;
    out.trials[*best].test = test_eval(specs[*best], *outcomes[*best]);
    out.best_model = std::move(outcomes[*best]->model);
    return out;
}

/// Manifest CSV, one row per trial.
inline std::string sweep_csv(const SweepResult& r) {
    std::ostringstream os;
    os << "trial,status,seed,cell,initial_learning_rate,lr_decay,dropout_keep_rate,num_units,num_stats,summary_dims,"
          "val_objective,test_objective\n";
    for (const auto& t : r.trials) {
        const bool sru = t.spec.arch.cell == CellKind::sru;
        os << t.spec.id << ',' << (t.status == TrialStatus::ok ? "ok" : "failed") << ',' << t.spec.seed << ','
           << to_string(t.spec.arch.cell) << ',' << format_double(t.spec.config.initial_learning_rate) << ','
           << format_double(t.spec.config.lr_decay) << ',' << format_double(t.spec.config.dropout_keep_rate) << ','
           << t.spec.arch.num_units << ',' << (sru ? std::to_string(t.spec.arch.num_stats) : "") << ','
           << (sru ? std::to_string(t.spec.arch.summary_dims) : "") << ',' << format_double(t.validation) << ','
           << (t.test ? format_double(*t.test) : "") << '\n';
    }
    return os.str();
}

/// The best trial as a replayable key=value training config.
inline KeyValues best_config(const SweepResult& r) {
    const auto& t = r.trials.at(r.best);
    KeyValues kv = to_key_values(t.spec.config);
    add_architecture(kv, t.spec.arch);
    return kv;
}

/// Sweep over real training runs on `ds`: each trial trains with its sampled
/// config; the objective is the best validation metric; test is measured on
/// the best trial's checkpoint. `trial_metrics_dir`, when set, receives one
/// metrics CSV per trial.
inline SweepResult sweep_training(const SearchSpace& space, const SweepSettings& settings, const SequenceDataset& ds,
                                  const std::string& trial_metrics_dir = {}) {
    TrialRunner runner = [&](const TrialSpec& spec) {
        TrainOutputs outputs;
        if (!trial_metrics_dir.empty())
            outputs.metrics_csv = trial_metrics_dir + "/trial_" + std::to_string(spec.id) + "_metrics.csv";
        auto res = train(spec.arch, spec.config, ds, outputs);
        return TrialOutcome{res.best_val_metric, std::move(res.best_model)};
    };
    TestEvaluator test_eval = [&](const TrialSpec&, const TrialOutcome& o) { return evaluate(*o.model, ds, Split::test); };
    return run_sweep(space, settings, runner, test_eval);
}

}  // namespace srulab
