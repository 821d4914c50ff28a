#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "srulab/autodiff.hpp"

namespace srulab {

/// Builds a scalar loss on `tape` from leaves holding the inputs.
using ScalarGraph = std::function<Var(Tape& tape, const std::vector<Var>& inputs)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;
};

namespace detail {

struct KinkPattern {
    std::vector<bool> active;
};

inline KinkPattern relu_pattern(const Tape& tape) {
    KinkPattern p;
    for (NodeId id = 0; id < tape.size(); ++id) {
        if (tape.op(id) != "relu") continue;
        for (double v : tape.value(tape.inputs(id)[0]).data()) {
            p.active.push_back(v > 0.0);
        }
    }
    return p;
}

struct Evaluation {
    double value;
    KinkPattern kinks;
};

inline Evaluation evaluate_graph(const ScalarGraph& f, const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(xs.size());
    for (const auto& x : xs) leaves.push_back(tape.leaf(x));
    Var loss = f(tape, leaves);
    return {loss.value().item(), relu_pattern(tape)};
}

}  // namespace detail

/// Compares reverse-mode gradients of `f` with central differences over every
/// coordinate of every input. The per-coordinate error is
/// |analytic - numeric| / (|analytic| + eps). Coordinates whose stencil
/// x ± eps·e_i changes the on/off pattern of any ReLU straddle a kink and are
/// skipped as nondifferentiable.
inline GradCheckReport finite_diff_report(const ScalarGraph& f, std::vector<Tensor> xs, double eps) {
    if (!(eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& x : xs) leaves.push_back(tape.leaf(x));
    Var loss = f(tape, leaves);
    tape.backward(loss);
    const auto base = detail::relu_pattern(tape);

    GradCheckReport report;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const Tensor analytic = tape.grad(leaves[k]);
        for (std::size_t i = 0; i < xs[k].size(); ++i) {
            const double orig = xs[k][i];
            xs[k][i] = orig + eps;
            const auto plus = detail::evaluate_graph(f, xs);
            xs[k][i] = orig - eps;
            const auto minus = detail::evaluate_graph(f, xs);
            xs[k][i] = orig;
            if (plus.kinks.active != base.active || minus.kinks.active != base.active) {
                ++report.excluded;
                continue;
            }
            const double numeric = (plus.value - minus.value) / (2.0 * eps);
            const double err = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + eps);
            report.max_relative_error = std::max(report.max_relative_error, err);
            ++report.checked;
        }
    }
    return report;
}

/// Higher-accuracy variant. Each coordinate uses Richardson-extrapolated
/// central differences, (4·D(h/2) - D(h)) / 3, with the largest step h in
/// {1e-3, 1e-4, ...} down to `kink_radius` whose four stencil points keep every
/// ReLU on the same side. A coordinate is skipped only when even the
/// `kink_radius` stencil crosses a kink. Large steps keep the roundoff of the
/// reference far below the size of small gradients. Relative errors use
/// max(|analytic|, |numeric|, resolution·max(1, |loss|)) as denominator:
/// gradients below that floor are smaller than double-precision differences
/// can resolve.
inline GradCheckReport richardson_report(const ScalarGraph& f, std::vector<Tensor> xs, double kink_radius = 1e-6,
                                         double resolution = 1e-8) {
    if (!(kink_radius > 0.0)) throw ContractError("richardson_report: kink_radius must be positive");
    std::vector<double> steps;
    for (double h = 1e-3; h > kink_radius * 1.5; h /= 10.0) steps.push_back(h);
    steps.push_back(kink_radius);
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& x : xs) leaves.push_back(tape.leaf(x));
    Var loss = f(tape, leaves);
    tape.backward(loss);
    const auto base = detail::relu_pattern(tape);
    const double floor = resolution * std::max(1.0, std::abs(loss.value().item()));
    GradCheckReport report;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const Tensor analytic = tape.grad(leaves[k]);
        for (std::size_t i = 0; i < xs[k].size(); ++i) {
            const double orig = xs[k][i];
            auto at = [&](double offset, bool& same) {
                xs[k][i] = orig + offset;
                const auto e = detail::evaluate_graph(f, xs);
                xs[k][i] = orig;
                same = same && e.kinks.active == base.active;
                return e.value;
            };
            bool found = false;
            double numeric = 0.0;
            for (double h : steps) {
                bool same = true;
                const double d1 = (at(h, same) - at(-h, same)) / (2.0 * h);
                const double d2 = (at(h / 2, same) - at(-h / 2, same)) / h;
                if (!same) continue;
                numeric = (4.0 * d2 - d1) / 3.0;
                found = true;
                break;
            }
            if (!found) {
                ++report.excluded;
                continue;
            }
            const double err = std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            report.max_relative_error = std::max(report.max_relative_error, err);
            ++report.checked;
        }
    }
    return report;
}

/// Single-input form; returns the maximum relative error.
inline double finite_diff_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps) {
    ScalarGraph g = [&f](Tape& tape, const std::vector<Var>& in) { return f(tape, in[0]); };
    return finite_diff_report(g, {x}, eps).max_relative_error;
}

}  // namespace srulab
