#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "srulab/autodiff.hpp"

namespace srulab {

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline std::vector<NodeId> ids_of(const std::vector<Var>& vs) {
    std::vector<NodeId> ids;
    ids.reserve(vs.size());
    for (const auto& v : vs) ids.push_back(v.id);
    return ids;
}

}  // namespace detail

/// Squared error summed over target dimensions, averaged over steps and batch
/// rows: (1 / (T·B)) Σ_t Σ_b |target - prediction|².
inline Var mse_loss(const std::vector<Var>& predictions, const std::vector<Tensor>& targets) {
    if (predictions.empty() || predictions.size() != targets.size())
        throw DimensionError("mse_loss: " + std::to_string(predictions.size()) + " predictions vs " +
                             std::to_string(targets.size()) + " targets");
    Tape* tape = predictions.front().tape;
    const double denom = static_cast<double>(predictions.size() * predictions.front().value().rows());
    double s = 0.0;
    for (std::size_t t = 0; t < predictions.size(); ++t) {
        const Tensor& p = predictions[t].value();
        p.require_same_shape(targets[t], "mse_loss");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double e = p[i] - targets[t][i];
            s += e * e;
        }
    }
    return tape->push("mse_loss", Tensor::scalar(s / denom), detail::ids_of(predictions),
                      [preds = predictions, targets, denom](const Tensor& g, Tape& tp, NodeId) {
                          for (std::size_t t = 0; t < preds.size(); ++t) {
                              Tensor d = preds[t].value();
                              for (std::size_t i = 0; i < d.size(); ++i) d[i] = 2.0 * (d[i] - targets[t][i]) * g[0] / denom;
                              tp.accumulate(preds[t].id, std::move(d));
                          }
                      });
}

/// Mean over rows of -log softmax(logits)[label], via log-sum-exp.
inline Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
    const Tensor& z = logits.value();
    const std::size_t rows = z.rows(), cols = z.cols();
    if (labels.size() != rows) throw DimensionError("softmax_cross_entropy: label count differs from batch size");
    Tensor probs(z.shape());
    double loss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= cols)
            throw ContractError("softmax_cross_entropy: class index " + std::to_string(labels[r]) + " outside [0, " +
                                std::to_string(cols) + ")");
        double m = z(r, 0);
        for (std::size_t c = 1; c < cols; ++c) m = std::max(m, z(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) sum += (probs(r, c) = std::exp(z(r, c) - m));
        for (std::size_t c = 0; c < cols; ++c) probs(r, c) /= sum;
        loss += (m + std::log(sum)) - z(r, static_cast<std::size_t>(labels[r]));
    }
    std::vector<int> lab(labels.begin(), labels.end());
    return logits.tape->push("softmax_cross_entropy", Tensor::scalar(loss / static_cast<double>(rows)), {logits.id},
                             [logits, probs = std::move(probs), lab, rows, cols](const Tensor& g, Tape& tp, NodeId) {
                                 Tensor d = probs;
                                 for (std::size_t r = 0; r < rows; ++r) d(r, static_cast<std::size_t>(lab[r])) -= 1.0;
                                 for (auto& v : d.values()) v *= g[0] / static_cast<double>(rows);
                                 tp.accumulate(logits.id, std::move(d));
                             });
}

inline Var softmax_cross_entropy(Var logits, int label) { return softmax_cross_entropy(logits, std::span<const int>(&label, 1)); }

/// Elementwise sigmoid likelihood: Σ_dims [softplus(l) - y·l], averaged over
/// steps and batch rows.
inline Var bernoulli_nll(const std::vector<Var>& logits, const std::vector<Tensor>& targets) {
    if (logits.empty() || logits.size() != targets.size())
        throw DimensionError("bernoulli_nll: step count mismatch");
    Tape* tape = logits.front().tape;
    const double denom = static_cast<double>(logits.size() * logits.front().value().rows());
    double s = 0.0;
    for (std::size_t t = 0; t < logits.size(); ++t) {
        const Tensor& l = logits[t].value();
        l.require_same_shape(targets[t], "bernoulli_nll");
        for (std::size_t i = 0; i < l.size(); ++i) s += detail::softplus(l[i]) - targets[t][i] * l[i];
    }
    return tape->push("bernoulli_nll", Tensor::scalar(s / denom), detail::ids_of(logits),
                      [ls = logits, targets, denom](const Tensor& g, Tape& tp, NodeId) {
                          for (std::size_t t = 0; t < ls.size(); ++t) {
                              Tensor d = ls[t].value();
                              for (std::size_t i = 0; i < d.size(); ++i)
                                  d[i] = (sigmoid(d[i]) - targets[t][i]) * g[0] / denom;
                              tp.accumulate(ls[t].id, std::move(d));
                          }
                      });
}

inline Var bernoulli_nll(Var logits, const Tensor& targets) {
    return bernoulli_nll(std::vector<Var>{logits}, std::vector<Tensor>{targets});
}

}  // namespace srulab
