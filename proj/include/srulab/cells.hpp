#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "srulab/autodiff.hpp"
#include "srulab/rng.hpp"

namespace srulab {

enum class CellKind { sru, gru, lstm };
enum class Activation { relu, tanh };
enum class HeadKind { next_step_regression, end_classification, binary_next_step };

inline std::string_view to_string(CellKind k) {
    switch (k) {
        case CellKind::sru: return "sru";
        case CellKind::gru: return "gru";
        case CellKind::lstm: return "lstm";
    }
    return "?";
}
inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
inline std::string_view to_string(HeadKind h) {
    switch (h) {
        case HeadKind::next_step_regression: return "next_step_regression";
        case HeadKind::end_classification: return "end_classification";
        case HeadKind::binary_next_step: return "binary_next_step";
    }
    return "?";
}

inline CellKind parse_cell_kind(std::string_view s) {
    if (s == "sru") return CellKind::sru;
    if (s == "gru") return CellKind::gru;
    if (s == "lstm") return CellKind::lstm;
    throw ConfigError("unknown cell kind '" + std::string(s) + "'");
}
inline Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}
inline HeadKind parse_head_kind(std::string_view s) {
    if (s == "next_step_regression") return HeadKind::next_step_regression;
    if (s == "end_classification") return HeadKind::end_classification;
    if (s == "binary_next_step") return HeadKind::binary_next_step;
    throw ConfigError("unknown head kind '" + std::string(s) + "'");
}

inline std::vector<double> default_alphas() { return {0.0, 0.25, 0.5, 0.9, 0.99}; }

/// Sorts scales ascending and rejects duplicates or values outside [0, 1).
inline std::vector<double> canonical_alphas(std::vector<double> alphas) {
    if (alphas.empty()) throw ContractError("at least one scale is required");
    for (double a : alphas)
        if (!(a >= 0.0 && a < 1.0)) throw DomainError("scale " + std::to_string(a) + " outside [0, 1)");
    std::sort(alphas.begin(), alphas.end());
    if (std::adjacent_find(alphas.begin(), alphas.end()) != alphas.end())
        throw ContractError("scales must be distinct");
    return alphas;
}

/// Everything needed to rebuild a network: recurrent cell, its sizes and the task head.
struct Architecture {
    CellKind cell = CellKind::sru;
    std::size_t input_dim = 1;
    std::size_t num_units = 32;    ///< SRU output width, or GRU/LSTM hidden size
    std::size_t num_stats = 32;    ///< SRU only
    std::size_t summary_dims = 16; ///< SRU only; 0 drops the recurrent summary path
    std::vector<double> alphas = default_alphas();
    Activation activation = Activation::relu;  ///< SRU only
    HeadKind head = HeadKind::next_step_regression;
    std::size_t target_dim = 1;

    void validate() const {
        if (input_dim == 0 || num_units == 0 || target_dim == 0)
            throw ContractError("input_dim, num_units and target_dim must be positive");
        if (cell == CellKind::sru) {
            if (num_stats == 0) throw ContractError("num_stats must be positive");
            if (canonical_alphas(alphas) != alphas) throw ContractError("scales must be stored ascending");
        }
    }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct ParamSpec {
    std::string name;
    Shape shape;
};

/// Ordered, named parameter tensors.
class ParameterSet {
public:
    void add(std::string name, Tensor value) {
        if (find(name)) throw ContractError("duplicate parameter " + name);
        names_.push_back(std::move(name));
        values_.push_back(std::move(value));
    }
    std::size_t size() const { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    Tensor& operator[](std::size_t i) { return values_.at(i); }
    const Tensor& operator[](std::size_t i) const { return values_.at(i); }
    const std::vector<std::string>& names() const { return names_; }
    std::vector<Tensor>& values() { return values_; }
    const std::vector<Tensor>& values() const { return values_; }

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return i;
        return std::nullopt;
    }
    const Tensor& at(std::string_view name) const {
        auto i = find(name);
        if (!i) throw ContractError("missing parameter " + std::string(name));
        return values_[*i];
    }
    Tensor& at(std::string_view name) {
        auto i = find(name);
        if (!i) throw ContractError("missing parameter " + std::string(name));
        return values_[*i];
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += v.size();
        return n;
    }

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

/// Parameters registered as leaves of one tape.
class BoundParams {
public:
    BoundParams(Tape& tape, const ParameterSet& params) : params_(&params) {
        vars_.reserve(params.size());
        for (const auto& v : params.values()) vars_.push_back(tape.leaf(v));
    }
    BoundParams(const ParameterSet& params, std::vector<Var> vars) : params_(&params), vars_(std::move(vars)) {}

    Var operator[](std::string_view name) const {
        auto i = params_->find(name);
        if (!i) throw ContractError("missing parameter " + std::string(name));
        return vars_[*i];
    }
    bool has(std::string_view name) const { return params_->find(name).has_value(); }
    const std::vector<Var>& vars() const { return vars_; }

private:
    const ParameterSet* params_;
    std::vector<Var> vars_;
};

using CellState = std::vector<Var>;

struct StepOutput {
    CellState state;
    std::optional<Var> output;
};

/// Uniform harness over the recurrent cells: a step is a pure function of
/// (params, state, x_t).
class RecurrentCell {
public:
    virtual ~RecurrentCell() = default;
    virtual std::vector<ParamSpec> parameter_specs() const = 0;
    virtual CellState state_zero(Tape& tape, std::size_t batch) const = 0;
    /// `x` is batch×input_dim. The output is skipped when `want_output` is false.
    virtual StepOutput step(const BoundParams& p, const CellState& state, Var x, bool want_output = true) const = 0;
    virtual std::size_t output_dim() const = 0;
};

inline Var apply_activation(Activation f, Var v) { return f == Activation::relu ? relu(v) : tanh(v); }

inline Var affine(Var x, Var w, Var b) { return add(matmul_bt(x, w), b); }

/// Multi-scale moving averages of learned recurrent statistics:
///   r_t   = f(W_r mu_{t-1} + b_r)
///   phi_t = f(W_phi r_t + W_x x_t + b_phi)
///   mu^a_t = a mu^a_{t-1} + (1 - a) phi_t   for every scale a
///   o_t   = f(W_o mu_t + b_o)
/// mu is the concatenation of the per-scale averages in ascending scale order.
/// With summary_dims == 0 the W_phi r_t term is dropped.
class SruCell final : public RecurrentCell {
public:
    explicit SruCell(const Architecture& a)
        : d_(a.input_dim), s_(a.num_stats), r_(a.summary_dims), n_(a.num_units), alphas_(canonical_alphas(a.alphas)),
          f_(a.activation) {}

    std::vector<ParamSpec> parameter_specs() const override {
        const std::size_t ms = alphas_.size() * s_;
        std::vector<ParamSpec> specs;
        if (r_ > 0) {
            specs.push_back({"sru/W_r", {r_, ms}});
            specs.push_back({"sru/b_r", {r_}});
            specs.push_back({"sru/W_phi", {s_, r_}});
        }
        specs.push_back({"sru/W_x", {s_, d_}});
        specs.push_back({"sru/b_phi", {s_}});
        specs.push_back({"sru/W_o", {n_, ms}});
        specs.push_back({"sru/b_o", {n_}});
        return specs;
    }

    CellState state_zero(Tape& tape, std::size_t batch) const override {
        CellState mus;
        for (std::size_t i = 0; i < alphas_.size(); ++i) mus.push_back(tape.constant(Tensor({batch, s_})));
        return mus;
    }

    StepOutput step(const BoundParams& p, const CellState& mus, Var x, bool want_output = true) const override {
        if (mus.size() != alphas_.size()) throw ContractError("SRU state has wrong number of scales");
        Var pre = matmul_bt(x, p["sru/W_x"]);
        if (r_ > 0) {
            Var r = apply_activation(f_, affine(concat_or_single(mus), p["sru/W_r"], p["sru/b_r"]));
            pre = add(pre, matmul_bt(r, p["sru/W_phi"]));
        }
        Var phi = apply_activation(f_, add(pre, p["sru/b_phi"]));
        CellState next;
        next.reserve(mus.size());
        for (std::size_t i = 0; i < alphas_.size(); ++i)
            next.push_back(add(scale(mus[i], alphas_[i]), scale(phi, 1.0 - alphas_[i])));
        StepOutput out{std::move(next), std::nullopt};
        if (want_output) out.output = apply_activation(f_, affine(concat_or_single(out.state), p["sru/W_o"], p["sru/b_o"]));
        return out;
    }

    std::size_t output_dim() const override { return n_; }
    const std::vector<double>& alphas() const { return alphas_; }

private:
    static Var concat_or_single(const CellState& mus) { return mus.size() == 1 ? mus.front() : concat(mus); }

    std::size_t d_, s_, r_, n_;
    std::vector<double> alphas_;
    Activation f_;
};

/// GRU with reset gate applied before the candidate projection:
///   [r, u] = sigmoid(W_g [x, h] + b_g)
///   c      = tanh(W_c [x, r∘h] + b_c)
///   h'     = u∘h + (1 - u)∘c
class GruCell final : public RecurrentCell {
public:
    explicit GruCell(const Architecture& a) : d_(a.input_dim), n_(a.num_units) {}

    std::vector<ParamSpec> parameter_specs() const override {
        return {{"gru/W_gates", {2 * n_, d_ + n_}},
                {"gru/b_gates", {2 * n_}},
                {"gru/W_cand", {n_, d_ + n_}},
                {"gru/b_cand", {n_}}};
    }

    CellState state_zero(Tape& tape, std::size_t batch) const override { return {tape.constant(Tensor({batch, n_}))}; }

    StepOutput step(const BoundParams& p, const CellState& state, Var x, bool = true) const override {
        Var h = state.at(0);
        Var gates = sigmoid(affine(concat({x, h}), p["gru/W_gates"], p["gru/b_gates"]));
        Var reset = slice_cols(gates, 0, n_);
        Var update = slice_cols(gates, n_, n_);
        Var cand = tanh(affine(concat({x, mul(reset, h)}), p["gru/W_cand"], p["gru/b_cand"]));
        // u∘h + (1-u)∘c == c + u∘(h - c)
        Var next = add(cand, mul(update, sub(h, cand)));
        return {{next}, next};
    }

    std::size_t output_dim() const override { return n_; }

private:
    std::size_t d_, n_;
};

/// LSTM without peepholes; gate blocks ordered (input, candidate, forget, output):
///   c' = c∘sigmoid(f) + sigmoid(i)∘tanh(j),  h' = tanh(c')∘sigmoid(o)
/// The forget block of the bias starts at 1.
class LstmCell final : public RecurrentCell {
public:
    explicit LstmCell(const Architecture& a) : d_(a.input_dim), n_(a.num_units) {}

    std::vector<ParamSpec> parameter_specs() const override {
        return {{"lstm/W", {4 * n_, d_ + n_}}, {"lstm/b", {4 * n_}}};
    }

    CellState state_zero(Tape& tape, std::size_t batch) const override {
        return {tape.constant(Tensor({batch, n_})), tape.constant(Tensor({batch, n_}))};
    }

    StepOutput step(const BoundParams& p, const CellState& state, Var x, bool = true) const override {
        Var h = state.at(0);
        Var c = state.at(1);
        Var z = affine(concat({x, h}), p["lstm/W"], p["lstm/b"]);
        Var in_gate = sigmoid(slice_cols(z, 0, n_));
        Var cand = tanh(slice_cols(z, n_, n_));
        Var forget = sigmoid(slice_cols(z, 2 * n_, n_));
        Var out_gate = sigmoid(slice_cols(z, 3 * n_, n_));
        Var c_next = add(mul(c, forget), mul(in_gate, cand));
        Var h_next = mul(tanh(c_next), out_gate);
        return {{h_next, c_next}, h_next};
    }

    std::size_t output_dim() const override { return n_; }
    static constexpr double kForgetBias = 1.0;

private:
    std::size_t d_, n_;
};

inline std::unique_ptr<RecurrentCell> make_cell(const Architecture& arch) {
    switch (arch.cell) {
        case CellKind::sru: return std::make_unique<SruCell>(arch);
        case CellKind::gru: return std::make_unique<GruCell>(arch);
        case CellKind::lstm: return std::make_unique<LstmCell>(arch);
    }
    throw ContractError("unknown cell kind");
}

inline std::vector<ParamSpec> head_specs(const Architecture& arch, std::size_t cell_output_dim) {
    return {{"head/W_p", {arch.target_dim, cell_output_dim}}, {"head/b_p", {arch.target_dim}}};
}

inline std::vector<ParamSpec> model_specs(const Architecture& arch) {
    auto cell = make_cell(arch);
    auto specs = cell->parameter_specs();
    auto head = head_specs(arch, cell->output_dim());
    specs.insert(specs.end(), head.begin(), head.end());
    return specs;
}

/// Matrices: uniform in ±sqrt(6 / (fan_in + fan_out)); biases zero, except the
/// LSTM forget block which starts at 1. Each parameter draws from its own named
/// substream of `rng`.
inline ParameterSet init_parameters(const Architecture& arch, const Rng& rng) {
    arch.validate();
    ParameterSet params;
    const Rng init = rng.stream("init");
    for (const auto& spec : model_specs(arch)) {
        Tensor t(spec.shape);
        if (spec.shape.size() == 2) {
            const double limit = std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
            Rng r = init.stream(spec.name);
            for (auto& v : t.values()) v = r.uniform(-limit, limit);
        } else if (spec.name == "lstm/b") {
            const std::size_t n = spec.shape[0] / 4;
            for (std::size_t i = 2 * n; i < 3 * n; ++i) t[i] = LstmCell::kForgetBias;
        }
        params.add(spec.name, std::move(t));
    }
    return params;
}

/// Architecture plus its parameters.
struct Model {
    Architecture arch;
    ParameterSet params;
};

inline Model make_model(const Architecture& arch, const Rng& rng) { return {arch, init_parameters(arch, rng)}; }

/// Inverted dropout on cell outputs. `rng == nullptr` means evaluation mode.
struct DropoutPlan {
    double keep = 1.0;
    Rng* rng = nullptr;
};

struct UnrollResult {
    std::vector<Var> predictions;
    CellState final_state;
};

/// Unrolls `cell` over `xs` (each batch×input_dim) starting from `initial`
/// (the zero state when empty). Each cell output passes dropout then the head
/// projection. End-classification heads produce a single prediction after the
/// last step, and only when `ends_sequence` is set (truncated unrolls feed
/// earlier chunks with it cleared); other heads produce one per step.
inline UnrollResult unroll_from(Tape& tape, const RecurrentCell& cell, const BoundParams& p, HeadKind head,
                                std::span<const Tensor> xs, CellState initial, const DropoutPlan& dropout = {},
                                bool ends_sequence = true) {
    if (xs.empty()) throw ContractError("unroll: empty sequence");
    if (!(dropout.keep > 0.0 && dropout.keep <= 1.0)) throw ContractError("unroll: dropout keep must be in (0, 1]");
    const std::size_t batch = xs.front().rows();
    CellState state = initial.empty() ? cell.state_zero(tape, batch) : std::move(initial);
    const Var w_p = p["head/W_p"];
    const Var b_p = p["head/b_p"];
    UnrollResult result;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const bool last = t + 1 == xs.size();
        const bool want = head != HeadKind::end_classification || (last && ends_sequence);
        if (xs[t].rank() != 2 || xs[t].rows() != batch) throw DimensionError("unroll: inconsistent batch shape");
        auto out = cell.step(p, state, tape.constant(xs[t]), want);
        state = std::move(out.state);
        if (!want) continue;
        Var o = *out.output;
        if (dropout.rng != nullptr && dropout.keep < 1.0) {
            Tensor mask(o.shape());
            for (auto& m : mask.values()) m = dropout.rng->bernoulli(dropout.keep) ? 1.0 / dropout.keep : 0.0;
            o = mul(o, tape.constant(std::move(mask)));
        }
        result.predictions.push_back(affine(o, w_p, b_p));
    }
    result.final_state = std::move(state);
    return result;
}

/// Unroll from the zero state; returns the head outputs.
inline std::vector<Var> unroll(Tape& tape, const RecurrentCell& cell, const BoundParams& p, HeadKind head,
                               std::span<const Tensor> xs, const DropoutPlan& dropout = {}) {
    return unroll_from(tape, cell, p, head, xs, {}, dropout).predictions;
}

/// Tensor-level single SRU step for a single example, without keeping a tape.
struct SruStepResult {
    std::vector<Tensor> mus;
    Tensor output;
};

inline SruStepResult sru_step(const Architecture& arch, const ParameterSet& params, const std::vector<Tensor>& mus,
                              const Tensor& x) {
    SruCell cell(arch);
    Tape tape;
    BoundParams p(tape, params);
    CellState state;
    for (const auto& m : mus) state.push_back(tape.constant(m.rank() == 1 ? m.reshaped({1, m.size()}) : m));
    Var xv = tape.constant(x.rank() == 1 ? x.reshaped({1, x.size()}) : x);
    auto out = cell.step(p, state, xv, true);
    SruStepResult r;
    for (const auto& m : out.state) r.mus.push_back(m.value());
    r.output = out.output->value();
    return r;
}

/// Sorts (alphas, mus) jointly into ascending-scale order.
inline void canonicalize_scales(std::vector<double>& alphas, std::vector<Tensor>& mus) {
    if (alphas.size() != mus.size()) throw ContractError("scales and averages differ in count");
    std::vector<std::size_t> order(alphas.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return alphas[a] < alphas[b]; });
    std::vector<double> a2;
    std::vector<Tensor> m2;
    for (auto i : order) {
        a2.push_back(alphas[i]);
        m2.push_back(std::move(mus[i]));
    }
    alphas = canonical_alphas(std::move(a2));
    mus = std::move(m2);
}

}  // namespace srulab
