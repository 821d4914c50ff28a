#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "srulab/cells.hpp"
#include "srulab/checkpoint.hpp"
#include "srulab/config.hpp"
#include "srulab/dataset.hpp"
#include "srulab/losses.hpp"

namespace srulab {

/// Optimizer, schedule and regularization settings for one training run.
struct TrainConfig {
    double initial_learning_rate = 0.1;
    double lr_decay = 0.99;          ///< multiplier applied every 1000 iterations
    double dropout_keep_rate = 1.0;  ///< fraction of cell outputs kept
    std::size_t batch_size = 32;
    std::size_t max_iterations = 1000;  ///< one iteration = one minibatch update
    double clip_norm = 1.0;
    std::size_t eval_every = 100;
    std::uint64_t seed = 0;
    std::size_t truncation = 0;    ///< BPTT window in steps; 0 = full unroll
    bool record_wall_time = false; ///< fill the `seconds` column of the metrics

    static constexpr std::size_t kDecayInterval = 1000;
    static inline const double kMinLearningRate = std::exp(-10.0);

    void validate() const {
        if (!(initial_learning_rate >= kMinLearningRate && initial_learning_rate <= 1.0))
            throw ConfigError("initial_learning_rate must lie in [e^-10, 1], got " + format_double(initial_learning_rate));
        if (!(lr_decay > 0.0) || !std::isfinite(lr_decay)) throw ConfigError("lr_decay must be positive");
        if (!(dropout_keep_rate > 0.0 && dropout_keep_rate <= 1.0))
            throw ConfigError("dropout_keep_rate must be in (0, 1]");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
        if (eval_every == 0) throw ConfigError("eval_every must be positive");
    }
};

struct MetricsRecord {
    std::size_t iteration = 0;
    double learning_rate = 0.0;
    double train_loss = 0.0;
    double val_metric = 0.0;
    double wall_time = 0.0;
};

inline KeyValues to_key_values(const TrainConfig& c) {
    KeyValues kv;
    kv.set("initial_learning_rate", c.initial_learning_rate);
    kv.set("lr_decay", c.lr_decay);
    kv.set("dropout_keep_rate", c.dropout_keep_rate);
    kv.set("batch_size", std::uint64_t{c.batch_size});
    kv.set("max_iterations", std::uint64_t{c.max_iterations});
    kv.set("clip_norm", c.clip_norm);
    kv.set("eval_every", std::uint64_t{c.eval_every});
    kv.set("seed", c.seed);
    kv.set("truncation", std::uint64_t{c.truncation});
    kv.set("record_wall_time", c.record_wall_time);
    return kv;
}

/// Reads the TrainConfig keys present in `kv`; absent keys keep their defaults.
inline TrainConfig train_config_from(const KeyValues& kv, TrainConfig c = {}) {
    if (kv.has("initial_learning_rate")) c.initial_learning_rate = kv.get_double("initial_learning_rate");
    if (kv.has("lr_decay")) c.lr_decay = kv.get_double("lr_decay");
    if (kv.has("dropout_keep_rate")) c.dropout_keep_rate = kv.get_double("dropout_keep_rate");
    if (kv.has("batch_size")) c.batch_size = kv.get_u64("batch_size");
    if (kv.has("max_iterations")) c.max_iterations = kv.get_u64("max_iterations");
    if (kv.has("clip_norm")) c.clip_norm = kv.get_double("clip_norm");
    if (kv.has("eval_every")) c.eval_every = kv.get_u64("eval_every");
    if (kv.has("seed")) c.seed = kv.get_u64("seed");
    if (kv.has("truncation")) c.truncation = kv.get_u64("truncation");
    if (kv.has("record_wall_time")) c.record_wall_time = kv.get_bool("record_wall_time");
    c.validate();
    return c;
}

inline std::string format_alphas(const std::vector<double>& alphas) {
    std::string s;
    for (std::size_t i = 0; i < alphas.size(); ++i) s += (i ? "," : "") + format_double(alphas[i]);
    return s;
}

inline std::vector<double> parse_alphas(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : split_csv_line(s)) {
        try {
            out.push_back(parse_double(part));
        } catch (const FormatError&) {
            throw ConfigError("invalid scale list '" + s + "'");
        }
    }
    return out;
}

inline void add_architecture(KeyValues& kv, const Architecture& a) {
    kv.set("cell", std::string(to_string(a.cell)));
    kv.set("num_units", std::uint64_t{a.num_units});
    kv.set("num_stats", std::uint64_t{a.num_stats});
    kv.set("summary_dims", std::uint64_t{a.summary_dims});
    kv.set("alphas", format_alphas(a.alphas));
    kv.set("activation", std::string(to_string(a.activation)));
}

inline Architecture architecture_from(const KeyValues& kv, Architecture a = {}) {
    if (kv.has("cell")) a.cell = parse_cell_kind(kv.get("cell"));
    if (kv.has("num_units")) a.num_units = kv.get_u64("num_units");
    if (kv.has("num_stats")) a.num_stats = kv.get_u64("num_stats");
    if (kv.has("summary_dims")) a.summary_dims = kv.get_u64("summary_dims");
    if (kv.has("alphas")) a.alphas = canonical_alphas(parse_alphas(kv.get("alphas")));
    if (kv.has("activation")) a.activation = parse_activation(kv.get("activation"));
    return a;
}

/// Fills the task-dependent fields (input width, head, target width) from a dataset.
inline Architecture fit_to_dataset(Architecture a, const SequenceDataset& ds) {
    a.input_dim = ds.dim;
    switch (ds.kind) {
        case TargetKind::next_step:
            a.head = HeadKind::next_step_regression;
            a.target_dim = ds.dim;
            break;
        case TargetKind::class_label:
            a.head = HeadKind::end_classification;
            a.target_dim = ds.num_classes;
            break;
        case TargetKind::binary_next_step:
            a.head = HeadKind::binary_next_step;
            a.target_dim = ds.dim;
            break;
    }
    return a;
}

inline void require_compatible(const Architecture& a, const SequenceDataset& ds) {
    const Architecture expected = fit_to_dataset(a, ds);
    if (expected.input_dim != a.input_dim || expected.head != a.head || expected.target_dim != a.target_dim)
        throw ContractError("architecture mismatch: model expects input_dim=" + std::to_string(a.input_dim) +
                            " head=" + std::string(to_string(a.head)) + " target_dim=" + std::to_string(a.target_dim) +
                            " but dataset has dim=" + std::to_string(ds.dim) + " kind=" + target_kind_name(ds.kind));
}

// ---------------------------------------------------------------------------
// Optimizer pieces

/// Rescales all gradients jointly when their global L2 norm exceeds
/// `clip_norm`. Returns the norm before clipping.
inline double clip_global_norm(std::vector<Tensor>& grads, double clip_norm) {
    if (!(clip_norm > 0.0)) throw ContractError("clip_norm must be positive");
    double sq = 0.0;
    for (const auto& g : grads) sq += sq_norm(g);
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) {
        const double f = clip_norm / norm;
        for (auto& g : grads)
            for (auto& v : g.values()) v *= f;
    }
    return norm;
}

inline double lr_at(const TrainConfig& c, std::size_t iteration) {
    return c.initial_learning_rate *
           std::pow(c.lr_decay, static_cast<double>(iteration / TrainConfig::kDecayInterval));
}

inline void sgd_step(ParameterSet& params, const std::vector<Tensor>& grads, double lr) {
    if (grads.size() != params.size()) throw DimensionError("sgd_step: gradient count differs from parameter count");
    for (std::size_t k = 0; k < params.size(); ++k) {
        params[k].require_same_shape(grads[k], "sgd_step");
        auto& p = params[k].values();
        const auto& g = grads[k].values();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
}

// ---------------------------------------------------------------------------
// Batching

/// Equal-length sequences stacked step by step.
struct BatchGroup {
    std::vector<Tensor> inputs;   ///< per step, rows × d
    std::vector<Tensor> targets;  ///< per step, rows × d (next-step tasks)
    std::vector<int> labels;      ///< classification
    std::size_t rows = 0;
};

/// Groups the selected sequences by length so each group unrolls as one batch.
inline std::vector<BatchGroup> make_batch(const std::vector<Sequence>& seqs, std::span<const std::size_t> indices,
                                          TargetKind kind) {
    std::map<std::size_t, std::vector<std::size_t>> by_length;
    for (auto i : indices) by_length[seqs.at(i).length()].push_back(i);
    std::vector<BatchGroup> groups;
    for (const auto& [T, members] : by_length) {
        BatchGroup g;
        g.rows = members.size();
        const std::size_t d = seqs[members.front()].xs.dim(1);
        const bool next_step = kind != TargetKind::class_label;
        const std::size_t steps = next_step ? T - 1 : T;
        auto stack = [&](std::size_t t) {
            Tensor m({g.rows, d});
            for (std::size_t r = 0; r < g.rows; ++r)
                for (std::size_t k = 0; k < d; ++k) m(r, k) = seqs[members[r]].xs(t, k);
            return m;
        };
        for (std::size_t t = 0; t < steps; ++t) {
            g.inputs.push_back(stack(t));
            if (next_step) g.targets.push_back(stack(t + 1));
        }
        if (!next_step)
            for (auto i : members) g.labels.push_back(seqs[i].label);
        groups.push_back(std::move(g));
    }
    return groups;
}

inline Var task_loss(HeadKind head, const std::vector<Var>& preds, const BatchGroup& g, std::size_t begin,
                     std::size_t count) {
    switch (head) {
        case HeadKind::next_step_regression:
            return mse_loss(preds, {g.targets.begin() + static_cast<std::ptrdiff_t>(begin),
                                    g.targets.begin() + static_cast<std::ptrdiff_t>(begin + count)});
        case HeadKind::binary_next_step:
            return bernoulli_nll(preds, {g.targets.begin() + static_cast<std::ptrdiff_t>(begin),
                                         g.targets.begin() + static_cast<std::ptrdiff_t>(begin + count)});
        case HeadKind::end_classification:
            return softmax_cross_entropy(preds.back(), g.labels);
    }
    throw ContractError("unknown head");
}

struct LossAndGradients {
    double loss = 0.0;
    std::vector<Tensor> grads;
};

/// Mean per-sequence loss of a minibatch and its parameter gradients. With
/// `truncation` > 0 the unroll is cut into windows; state crosses windows as a
/// constant, so gradients flow only within a window.
inline LossAndGradients loss_and_gradients(const Model& model, const RecurrentCell& cell,
                                           const std::vector<BatchGroup>& groups, const DropoutPlan& dropout,
                                           std::size_t truncation = 0) {
    LossAndGradients out;
    for (const auto& t : model.params.values()) out.grads.emplace_back(t.shape());
    std::size_t total_rows = 0;
    for (const auto& g : groups) total_rows += g.rows;
    for (const auto& g : groups) {
        const double group_weight = static_cast<double>(g.rows) / static_cast<double>(total_rows);
        const std::size_t steps = g.inputs.size();
        const std::size_t window = truncation == 0 ? steps : truncation;
        std::vector<Tensor> carried;
        for (std::size_t begin = 0; begin < steps; begin += window) {
            const std::size_t count = std::min(window, steps - begin);
            const bool ends = begin + count == steps;
            Tape tape;
            BoundParams p(tape, model.params);
            CellState init;
            for (const auto& s : carried) init.push_back(tape.constant(s));
            auto res = unroll_from(tape, cell, p, model.arch.head,
                                   std::span<const Tensor>(g.inputs).subspan(begin, count), std::move(init), dropout,
                                   ends);
            carried.clear();
            for (const auto& s : res.final_state) carried.push_back(s.value());
            if (res.predictions.empty()) continue;
            Var loss = task_loss(model.arch.head, res.predictions, g, begin, count);
            const double chunk_weight = model.arch.head == HeadKind::end_classification
                                            ? 1.0
                                            : static_cast<double>(count) / static_cast<double>(steps);
            loss = scale(loss, group_weight * chunk_weight);
            out.loss += loss.value().item();
            tape.backward(loss);
            for (std::size_t k = 0; k < p.vars().size(); ++k) out.grads[k] += tape.grad(p.vars()[k]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Mean per-sequence loss (next-step tasks) or error rate (classification)
/// over `seqs`, without dropout.
inline double evaluate(const Model& model, const std::vector<Sequence>& seqs, TargetKind kind,
                       std::size_t eval_batch = 256) {
    if (seqs.empty()) throw ContractError("evaluate: empty split");
    auto cell = make_cell(model.arch);
    double total = 0.0;
    std::vector<std::size_t> idx(seqs.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t begin = 0; begin < idx.size(); begin += eval_batch) {
        const auto chunk = std::span<const std::size_t>(idx).subspan(begin, std::min(eval_batch, idx.size() - begin));
        for (const auto& g : make_batch(seqs, chunk, kind)) {
            Tape tape;
            BoundParams p(tape, model.params);
            auto preds = unroll(tape, *cell, p, model.arch.head, g.inputs);
            if (model.arch.head == HeadKind::end_classification) {
                const Tensor& logits = preds.back().value();
                for (std::size_t r = 0; r < g.rows; ++r) {
                    std::size_t best = 0;
                    for (std::size_t c = 1; c < logits.cols(); ++c)
                        if (logits(r, c) > logits(r, best)) best = c;
                    if (static_cast<int>(best) != g.labels[r]) total += 1.0;
                }
            } else {
                total += task_loss(model.arch.head, preds, g, 0, preds.size()).value().item() *
                         static_cast<double>(g.rows);
            }
        }
    }
    return total / static_cast<double>(seqs.size());
}

inline double evaluate(const Model& model, const SequenceDataset& ds, Split split) {
    require_compatible(model.arch, ds);
    return evaluate(model, ds.split(split), ds.kind);
}

inline double evaluate(const std::string& checkpoint_path, const SequenceDataset& ds, Split split) {
    return evaluate(load_checkpoint(checkpoint_path), ds, split);
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainOutputs {
    std::string metrics_csv;  ///< empty: not written
    std::string checkpoint;   ///< empty: not written
};

struct TrainResult {
    std::vector<MetricsRecord> metrics;
    Model best_model;
    double best_val_metric = 0.0;
    std::size_t best_iteration = 0;
};

inline std::string metrics_csv(const std::vector<MetricsRecord>& records) {
    std::ostringstream os;
    os << "iteration,lr,train_loss,val_metric,seconds\n";
    for (const auto& r : records)
        os << r.iteration << ',' << format_double(r.learning_rate) << ',' << format_double(r.train_loss) << ','
           << format_double(r.val_metric) << ',' << format_double(r.wall_time) << '\n';
    return os.str();
}

/// Minibatch SGD with global-norm clipping and step-decayed learning rate.
/// Validation is measured at iteration 0, every `eval_every` updates and after
/// the last update; the parameters with the lowest validation metric are kept.
/// Random streams derived from `config.seed`: "init", "shuffle", "dropout".
inline TrainResult train(const Architecture& arch_in, const TrainConfig& config, const SequenceDataset& ds,
                         const TrainOutputs& outputs = {}) {
    config.validate();
    if (ds.train.empty() || ds.validation.empty()) throw ContractError("train: training and validation splits required");
    const Architecture arch = fit_to_dataset(arch_in, ds);
    const Rng master(config.seed);
    Model model = make_model(arch, master);
    auto cell = make_cell(arch);
    Rng shuffle = master.stream("shuffle");
    Rng dropout_rng = master.stream("dropout");
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        if (!config.record_wall_time) return 0.0;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    std::vector<std::size_t> order(ds.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    auto next_batch = [&] {
        std::vector<std::size_t> batch;
        while (batch.size() < std::min(config.batch_size, order.size())) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        return batch;
    };

    TrainResult result;
    auto record = [&](std::size_t it, double train_loss) {
        const double val = evaluate(model, ds.validation, ds.kind);
        result.metrics.push_back({it, lr_at(config, it), train_loss, val, elapsed()});
        if (result.metrics.size() == 1 || val < result.best_val_metric) {
            result.best_val_metric = val;
            result.best_iteration = it;
            result.best_model = model;
        }
    };

    try {
        auto batch = next_batch();
        auto groups = make_batch(ds.train, batch, ds.kind);
        record(0, loss_and_gradients(model, *cell, groups, {}, config.truncation).loss);
        double running = 0.0;
        std::size_t since = 0;
        for (std::size_t it = 0; it < config.max_iterations; ++it) {
            if (it > 0) groups = make_batch(ds.train, next_batch(), ds.kind);
            auto lg = loss_and_gradients(model, *cell, groups, {config.dropout_keep_rate, &dropout_rng},
                                         config.truncation);
            if (!std::isfinite(lg.loss)) throw NonFiniteError("loss");
            clip_global_norm(lg.grads, config.clip_norm);
            sgd_step(model.params, lg.grads, lr_at(config, it));
            running += lg.loss;
            ++since;
            if ((it + 1) % config.eval_every == 0 || it + 1 == config.max_iterations) {
                record(it + 1, running / static_cast<double>(since));
                running = 0.0;
                since = 0;
            }
        }
    } catch (const NonFiniteError& e) {
        throw TrainingError("non-finite value during training after " + std::to_string(result.metrics.empty() ? 0 : result.metrics.back().iteration) +
                            " recorded iterations: " + e.what());
    }

    if (!outputs.metrics_csv.empty()) write_text_file(outputs.metrics_csv, metrics_csv(result.metrics));
    if (!outputs.checkpoint.empty()) save_checkpoint(result.best_model, outputs.checkpoint);
    return result;
}

}  // namespace srulab
