#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srulab/dataset.hpp"
#include "srulab/errors.hpp"
#include "srulab/rng.hpp"

namespace srulab {

/// Fixed statistical recurrent process producing 1-d sequences with long-range,
/// multi-scale structure. Statistics are the positive part (x)_+ = max(x, 0),
/// the negative magnitude (x)_- = max(-x, 0), and an internal counter z.
/// Each statistic is averaged at five scales. The averaged vector mu (15 entries)
/// is ordered by scale first, then statistic: mu[3·i + k] for scale i and
/// statistic k in (+, -, z).
class GroundTruthSru {
public:
    static constexpr std::size_t kScales = 5;
    static constexpr std::size_t kProjections = 13;
    static constexpr std::array<double, kScales> kAlphas = {0.0, 0.5, 0.9, 0.99, 0.999};
    static constexpr double kLowThreshold = 0.01;
    static constexpr double kHighThreshold = 0.05;
    static constexpr double kProjectionStd = 1.0 / 100.0;
    static constexpr double kInitialStd = 100.0;

    struct State {
        std::array<double, kScales> mu_plus{};
        std::array<double, kScales> mu_minus{};
        std::array<double, kScales> mu_z{};
        double z_prev = 0.0;
    };

    explicit GroundTruthSru(std::uint64_t seed) : seed_(seed) {
        Rng rng = Rng(seed).stream("ground_truth");
        for (auto& row : v_)
            for (auto& x : row) x = rng.normal(0.0, kProjectionStd);
        for (auto& x : w_) x = rng.normal(0.0, 1.0);
    }

    std::uint64_t seed() const { return seed_; }
    const std::array<std::array<double, 3 * kScales>, kProjections>& v() const { return v_; }
    const std::array<double, kProjections>& w() const { return w_; }

    /// One step: consumes x_t, returns the updated state and x_{t+1}.
    std::pair<State, double> step(const State& s, double x) const {
        const double xp = std::max(x, 0.0);
        const double xm = std::max(-x, 0.0);
        auto pos = [](double v) { return std::max(v, 0.0); };
        // Thresholded differences of the two longest scales, from the previous step.
        const double dp = s.mu_plus[3] - s.mu_plus[4];
        const double dm = s.mu_minus[3] - s.mu_minus[4];
        const double z = pos(s.z_prev) + pos(dp - kLowThreshold) - pos(-dm - kLowThreshold) -
                         pos(-dp - kHighThreshold) + pos(dm - kHighThreshold);
        State n;
        for (std::size_t i = 0; i < kScales; ++i) {
            const double a = kAlphas[i];
            n.mu_plus[i] = a * s.mu_plus[i] + (1.0 - a) * xp;
            n.mu_minus[i] = a * s.mu_minus[i] + (1.0 - a) * xm;
            n.mu_z[i] = a * s.mu_z[i] + (1.0 - a) * z;
        }
        n.z_prev = z;
        double drift = 0.0;
        for (std::size_t j = 0; j < kProjections; ++j) {
            double proj = 0.0;
            for (std::size_t i = 0; i < kScales; ++i)
                proj += v_[j][3 * i] * n.mu_plus[i] + v_[j][3 * i + 1] * n.mu_minus[i] + v_[j][3 * i + 2] * n.mu_z[i];
            drift += w_[j] * proj;
        }
        const double next = xp - xm + drift;
        if (!std::isfinite(next) || !std::isfinite(z)) throw GenerationError("ground-truth process diverged");
        return {n, next};
    }

    /// x_1 followed by length-1 generated points.
    std::vector<double> sequence(double x1, std::size_t length) const {
        std::vector<double> xs{x1};
        State s;
        while (xs.size() < length) {
            auto [next_state, x] = step(s, xs.back());
            s = next_state;
            xs.push_back(x);
        }
        return xs;
    }

private:
    std::uint64_t seed_;
    std::array<std::array<double, 3 * kScales>, kProjections> v_{};
    std::array<double, kProjections> w_{};
};

struct SyntheticCounts {
    std::size_t train = 3200;
    std::size_t validation = 400;
    std::size_t test = 400;
    std::size_t length = 176;
};

/// Draws x_1 ~ N(0, 100²) for every sequence from its own substream
/// (data / split / index) and runs the ground-truth process.
inline SequenceDataset generate_dataset(const GroundTruthSru& model, const SyntheticCounts& counts, std::uint64_t seed) {
    if (counts.train == 0 || counts.validation == 0 || counts.test == 0 || counts.length < 2)
        throw ContractError("synthetic dataset: counts must be positive and length at least 2");
    SequenceDataset ds;
    ds.kind = TargetKind::next_step;
    ds.dim = 1;
    const Rng data = Rng(seed).stream("data");
    auto fill = [&](Split split, std::size_t n) {
        const Rng split_rng = data.stream(split_name(split));
        auto& out = ds.split(split);
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Rng r = split_rng.stream(i);
            auto xs = model.sequence(r.normal(0.0, GroundTruthSru::kInitialStd), counts.length);
            out.push_back({Tensor({counts.length, 1}, std::move(xs)), -1});
        }
    };
    fill(Split::train, counts.train);
    fill(Split::validation, counts.validation);
    fill(Split::test, counts.test);
    ds.provenance = "synthetic:ground_truth_seed=" + std::to_string(model.seed()) + ",data_seed=" + std::to_string(seed) +
                    ",length=" + std::to_string(counts.length);
    return ds;
}

/// Mean of squared errors |target_t - prediction_t|² over the steps.
inline double sequence_mse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size())
        throw DimensionError("sequence_mse: " + std::to_string(predictions.size()) + " predictions vs " +
                             std::to_string(targets.size()) + " targets");
    if (predictions.empty()) throw ContractError("sequence_mse: empty sequence");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = targets[i] - predictions[i];
        s += e * e;
    }
    return s / static_cast<double>(predictions.size());
}

}  // namespace srulab
