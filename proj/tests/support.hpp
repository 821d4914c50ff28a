#pragma once

#include <filesystem>
#include <string>

#include "srulab/rng.hpp"
#include "srulab/tensor.hpp"

namespace srulab::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

/// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("srulab_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace srulab::testing

#include "srulab/cells.hpp"
#include "srulab/gradcheck.hpp"
#include "srulab/losses.hpp"

namespace srulab::testing {

/// Every parameter, biases included, uniform in [-scale, scale].
inline ParameterSet random_parameters(const Architecture& arch, Rng& rng, double scale = 0.5) {
    ParameterSet p;
    for (const auto& spec : model_specs(arch)) p.add(spec.name, random_tensor(spec.shape, rng, -scale, scale));
    return p;
}

/// Gradient check of a full unroll with respect to every parameter. The loss
/// is MSE against random targets for per-step heads and cross-entropy for the
/// classification head.
inline GradCheckReport unroll_gradient_report(const Architecture& arch, std::size_t steps, std::size_t batch, Rng& rng,
                                              double eps = 1e-5) {
    const ParameterSet params = random_parameters(arch, rng);
    std::vector<Tensor> xs, targets;
    for (std::size_t t = 0; t < steps; ++t) {
        xs.push_back(random_tensor({batch, arch.input_dim}, rng));
        targets.push_back(random_tensor({batch, arch.target_dim}, rng));
    }
    std::vector<int> labels;
    for (std::size_t b = 0; b < batch; ++b)
        labels.push_back(static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(arch.target_dim) - 1)));
    auto cell = std::shared_ptr<RecurrentCell>(make_cell(arch));
    ScalarGraph f = [=](Tape& tape, const std::vector<Var>& leaves) {
        BoundParams p(params, leaves);
        auto preds = unroll(tape, *cell, p, arch.head, xs);
        if (arch.head == HeadKind::end_classification) return softmax_cross_entropy(preds.back(), labels);
        if (arch.head == HeadKind::binary_next_step) {
            std::vector<Tensor> bits = targets;
            for (auto& b : bits)
                for (auto& v : b.values()) v = v > 0 ? 1.0 : 0.0;
            return bernoulli_nll(preds, bits);
        }
        return mse_loss(preds, targets);
    };
    return finite_diff_report(f, params.values(), eps);
}

}  // namespace srulab::testing
