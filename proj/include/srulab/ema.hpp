#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "srulab/csv.hpp"
#include "srulab/errors.hpp"

namespace srulab {

/// A weighted sum of moving averages, viewed as one kernel over past lags.
struct ViewpointSpec {
    struct Term {
        double coefficient;
        double alpha;
    };
    std::string label;
    std::vector<Term> terms;
    std::size_t horizon = 100;

    void validate() const {
        if (horizon < 1) throw DomainError("viewpoint horizon must be at least 1");
        for (const auto& t : terms)
            if (!(t.alpha >= 0.0 && t.alpha < 1.0))
                throw DomainError("viewpoint scale " + std::to_string(t.alpha) + " outside [0, 1)");
    }
};

/// Weight (1 - alpha)·alpha^i that an exponential moving average puts on the
/// value observed i steps ago, for i = 0 … horizon-1.
inline std::vector<double> ema_weight_profile(double alpha, std::size_t horizon) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("scale " + std::to_string(alpha) + " outside [0, 1)");
    if (horizon < 1) throw DomainError("horizon must be at least 1");
    std::vector<double> w(horizon);
    for (std::size_t i = 0; i < horizon; ++i) w[i] = (1.0 - alpha) * std::pow(alpha, static_cast<double>(i));
    return w;
}

inline std::vector<double> viewpoint_kernel(const ViewpointSpec& spec) {
    spec.validate();
    std::vector<double> k(spec.horizon, 0.0);
    for (const auto& term : spec.terms) {
        const auto w = ema_weight_profile(term.alpha, spec.horizon);
        for (std::size_t i = 0; i < spec.horizon; ++i) k[i] += term.coefficient * w[i];
    }
    return k;
}

/// The four combinations of scales 0.5…0.999 used to illustrate windowed views.
inline std::vector<ViewpointSpec> viewpoint_presets(std::size_t horizon = 1000) {
    return {
        {"distant_past", {{1.0 / 0.001, 0.999}, {-1.0 / 0.01, 0.99}}, horizon},
        {"mid_past", {{1.0 / 0.01, 0.99}, {-1.0 / 0.1, 0.9}}, horizon},
        {"recent_past", {{1.0 / 0.1, 0.9}, {-1.0 / 0.5, 0.5}}, horizon},
        {"distant_and_recent", {{1.0 / 0.001, 0.999}, {-1.0 / 0.01, 0.99}, {0.5 / 0.09, 0.9}}, horizon},
    };
}

/// Writes one column per spec and one row per lag; the first column is "lag".
/// Specs with shorter horizons leave trailing cells empty.
inline void export_profiles(const std::vector<ViewpointSpec>& specs, const std::string& path) {
    std::vector<std::vector<double>> kernels;
    std::size_t rows = 0;
    std::ostringstream os;
    os << "lag";
    for (const auto& s : specs) {
        kernels.push_back(viewpoint_kernel(s));
        rows = std::max(rows, s.horizon);
        os << ',' << s.label;
    }
    os << '\n';
    for (std::size_t i = 0; i < rows; ++i) {
        os << i;
        for (const auto& k : kernels) {
            os << ',';
            if (i < k.size()) os << format_double(k[i]);
        }
        os << '\n';
    }
    write_text_file(path, os.str());
}

}  // namespace srulab
