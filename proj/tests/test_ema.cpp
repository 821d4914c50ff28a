#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "srulab/csv.hpp"
#include "srulab/ema.hpp"
#include "srulab/rng.hpp"
#include "support.hpp"

using namespace srulab;

namespace {

/// Runs every term's moving average over `phi` from zero and combines the final averages.
double simulate_combination(const ViewpointSpec& spec, const std::vector<double>& phi) {
    double out = 0.0;
    for (const auto& term : spec.terms) {
        double mu = 0.0;
        for (double p : phi) mu = term.alpha * mu + (1.0 - term.alpha) * p;
        out += term.coefficient * mu;
    }
    return out;
}

/// Kernel applied to the history, lag 0 being the newest value.
double apply_kernel(const std::vector<double>& kernel, const std::vector<double>& phi) {
    double out = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) out += kernel[i] * phi[phi.size() - 1 - i];
    return out;
}

}  // namespace

TEST(WeightProfile, NoMemory) {
    EXPECT_EQ(ema_weight_profile(0.0, 4), (std::vector<double>{1, 0, 0, 0}));
}

TEST(WeightProfile, HalfPowers) {
    EXPECT_EQ(ema_weight_profile(0.5, 3), (std::vector<double>{0.5, 0.25, 0.125}));
}

TEST(WeightProfile, NinetyPercentScale) {
    auto w = ema_weight_profile(0.9, 2);
    EXPECT_NEAR(w[0], 0.1, 1e-16);
    EXPECT_NEAR(w[1], 0.09, 1e-16);
}

TEST(WeightProfile, DomainErrors) {
    EXPECT_THROW(ema_weight_profile(1.0, 3), DomainError);
    EXPECT_THROW(ema_weight_profile(-0.01, 3), DomainError);
    EXPECT_THROW(ema_weight_profile(0.5, 0), DomainError);
    EXPECT_THROW(viewpoint_kernel({"bad", {{1.0, 1.2}}, 5}), DomainError);
}

TEST(WeightProfile, FiniteHorizonSumMatchesClosedForm) {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double alpha = rng.uniform(0.0, 0.999);
        const auto H = static_cast<std::size_t>(rng.uniform_int(1, 1000));
        double s = 0.0;
        for (double v : ema_weight_profile(alpha, H)) s += v;
        EXPECT_NEAR(s, 1.0 - std::pow(alpha, static_cast<double>(H)), 1e-12);
    }
}

TEST(Viewpoint, DistantPastKernelClosedForm) {
    const auto spec = viewpoint_presets(1000)[0];
    const auto k = viewpoint_kernel(spec);
    EXPECT_EQ(k[0], 0.0);
    for (std::size_t i = 0; i < k.size(); ++i)
        EXPECT_NEAR(k[i], std::pow(0.999, double(i)) - std::pow(0.99, double(i)), 1e-14) << "lag " << i;
    EXPECT_GT(std::max_element(k.begin(), k.end()) - k.begin(), 100);
}

TEST(Viewpoint, SingleTermIsTheWeightProfile) {
    EXPECT_EQ(viewpoint_kernel({"one", {{1.0, 0.7}}, 50}), ema_weight_profile(0.7, 50));
}

TEST(Viewpoint, KernelIsLinearInTerms) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        ViewpointSpec a{"a", {}, 64}, b{"b", {}, 64};
        for (int j = 0; j < 3; ++j) a.terms.push_back({rng.uniform(-5, 5), rng.uniform(0, 0.99)});
        for (int j = 0; j < 2; ++j) b.terms.push_back({rng.uniform(-5, 5), rng.uniform(0, 0.99)});
        ViewpointSpec ab{"ab", a.terms, 64};
        ab.terms.insert(ab.terms.end(), b.terms.begin(), b.terms.end());
        const auto ka = viewpoint_kernel(a), kb = viewpoint_kernel(b), kab = viewpoint_kernel(ab);
        for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(kab[i], ka[i] + kb[i], 1e-12);
    }
}

TEST(Viewpoint, ConstantHistoryMatchesSimulatedAverages) {
    for (const auto& preset : viewpoint_presets(300)) {
        const std::vector<double> phi(300, 2.5);
        EXPECT_NEAR(apply_kernel(viewpoint_kernel(preset), phi), simulate_combination(preset, phi), 1e-10);
    }
}

TEST(Viewpoint, SimulatedAveragesMatchKernelOnRandomHistories) {
    Rng rng(3);
    for (std::size_t H : {1, 7, 100, 555, 1000}) {
        for (const auto& preset : viewpoint_presets(H)) {
            std::vector<double> phi(H);
            for (auto& p : phi) p = rng.uniform(-1, 3);
            EXPECT_NEAR(apply_kernel(viewpoint_kernel(preset), phi), simulate_combination(preset, phi), 1e-10)
                << preset.label << " H=" << H;
        }
    }
}

TEST(Viewpoint, PresetsAreTheFourCombinations) {
    const auto p = viewpoint_presets();
    ASSERT_EQ(p.size(), 4u);
    EXPECT_EQ(p[3].terms.size(), 3u);
    EXPECT_DOUBLE_EQ(p[3].terms[2].coefficient, 0.5 / 0.09);
    EXPECT_EQ(p[3].terms[2].alpha, 0.9);
}

TEST(ExportProfiles, OneRowPerLag) {
    const auto dir = srulab::testing::scratch_dir("ema_rows");
    const auto path = dir + "/k.csv";
    export_profiles({{"x", {{1.0, 0.5}}, 4}, {"y", {{2.0, 0.9}}, 4}}, path);
    const auto table = read_csv(path);
    EXPECT_EQ(table.header, (std::vector<std::string>{"lag", "x", "y"}));
    EXPECT_EQ(table.rows.size(), 4u);
}

TEST(ExportProfiles, EmptySpecListWritesHeaderOnly) {
    const auto dir = srulab::testing::scratch_dir("ema_empty");
    export_profiles({}, dir + "/k.csv");
    std::ifstream in(dir + "/k.csv");
    std::string all((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(all, "lag\n");
}

TEST(ExportProfiles, RoundTripsExactly) {
    const auto dir = srulab::testing::scratch_dir("ema_roundtrip");
    const auto specs = viewpoint_presets(1000);
    export_profiles(specs, dir + "/k.csv");
    const auto table = read_csv(dir + "/k.csv");
    ASSERT_EQ(table.rows.size(), 1000u);
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const auto k = viewpoint_kernel(specs[s]);
        for (std::size_t i = 0; i < k.size(); ++i) ASSERT_EQ(parse_double(table.rows[i][s + 1]), k[i]);
    }
}

TEST(ExportProfiles, UnwritablePathIsIoError) {
    EXPECT_THROW(export_profiles(viewpoint_presets(3), "/nonexistent-dir/k.csv"), IoError);
}
