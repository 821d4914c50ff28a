#include <gtest/gtest.h>

#include <cmath>

#include "srulab/synthetic.hpp"
#include "srulab/training.hpp"

using namespace srulab;

namespace {

std::vector<double> column(const Tensor& t) { return t.values(); }

void expect_prefix(const std::vector<double>& xs, const std::vector<double>& golden) {
    ASSERT_GE(xs.size(), golden.size());
    for (std::size_t i = 0; i < golden.size(); ++i)
        EXPECT_NEAR(xs[i], golden[i], 1e-12 * std::abs(golden[i])) << "t=" << i + 1;
}

}  // namespace

// Values from tests/oracles/ground_truth_golden.py, an independent
// straight-line reimplementation of the generator and its random draws.
TEST(GroundTruth, GoldenPrefixModelSeedZero) {
    const auto ds = generate_dataset(GroundTruthSru(0), {4, 1, 1, 176}, 0);
    expect_prefix(column(ds.train[0].xs), {26.796603409611837, 27.677945148308247, 28.671482574502807,
                                           29.67149752657003, 30.61119361534027, 31.441614070741505});
}

TEST(GroundTruth, GoldenPrefixDefaultModel) {
    const auto ds = generate_dataset(GroundTruthSru(5904), {4, 1, 1, 176}, 0);
    expect_prefix(column(ds.train[0].xs), {26.796603409611837, 26.80418586798905, 26.685535795103583,
                                           26.50858078313089, 26.307587916209428, 26.09967042522725});
}

TEST(GroundTruth, ZeroIsAFixedPoint) {
    const GroundTruthSru g(5904);
    auto [s, x] = g.step({}, 0.0);
    EXPECT_EQ(x, 0.0);
    for (std::size_t i = 0; i < GroundTruthSru::kScales; ++i) {
        EXPECT_EQ(s.mu_plus[i], 0.0);
        EXPECT_EQ(s.mu_minus[i], 0.0);
        EXPECT_EQ(s.mu_z[i], 0.0);
    }
    EXPECT_EQ(s.z_prev, 0.0);
    for (double v : g.sequence(0.0, 50)) EXPECT_EQ(v, 0.0);
}

TEST(GroundTruth, EmissionIsInputPlusProjectedDrift) {
    const GroundTruthSru g(7);
    Rng rng(11);
    GroundTruthSru::State s;
    double x = 3.0;
    for (int t = 0; t < 60; ++t) {
        auto [n, next] = g.step(s, x);
        std::vector<double> mu(15);
        for (std::size_t i = 0; i < 5; ++i) {
            mu[3 * i] = n.mu_plus[i];
            mu[3 * i + 1] = n.mu_minus[i];
            mu[3 * i + 2] = n.mu_z[i];
        }
        double drift = 0.0;
        for (std::size_t j = 0; j < GroundTruthSru::kProjections; ++j) {
            double p = 0.0;
            for (std::size_t k = 0; k < 15; ++k) p += g.v()[j][k] * mu[k];
            drift += g.w()[j] * p;
        }
        // (x)_+ - (x)_- recovers x exactly.
        EXPECT_NEAR(next, x + drift, 1e-12 * (1.0 + std::abs(next)));
        s = n;
        x = rng.normal(0.0, 10.0);
    }
}

TEST(GroundTruth, StatisticsAreAveragedAtEveryScale) {
    const GroundTruthSru g(3);
    GroundTruthSru::State s;
    s.mu_plus = {1, 2, 3, 4, 5};
    s.mu_minus = {5, 4, 3, 2, 1};
    auto [n, next] = g.step(s, -2.0);
    for (std::size_t i = 0; i < 5; ++i) {
        const double a = GroundTruthSru::kAlphas[i];
        EXPECT_DOUBLE_EQ(n.mu_plus[i], a * s.mu_plus[i]);
        EXPECT_DOUBLE_EQ(n.mu_minus[i], a * s.mu_minus[i] + (1 - a) * 2.0);
    }
    (void)next;
}

TEST(GroundTruth, CounterDoesNotFeedBackIntoInputStatistics) {
    const GroundTruthSru g(3);
    GroundTruthSru::State a, b;
    b.mu_z = {9, -9, 4, 1, 2};
    b.z_prev = 17.0;
    auto [na, xa] = g.step(a, 1.5);
    auto [nb, xb] = g.step(b, 1.5);
    EXPECT_EQ(na.mu_plus, nb.mu_plus);
    EXPECT_EQ(na.mu_minus, nb.mu_minus);
}

TEST(GroundTruth, ParametersDependOnlyOnSeed) {
    EXPECT_EQ(GroundTruthSru(42).v(), GroundTruthSru(42).v());
    EXPECT_EQ(GroundTruthSru(42).w(), GroundTruthSru(42).w());
    EXPECT_NE(GroundTruthSru(42).w(), GroundTruthSru(43).w());
}

TEST(SyntheticDataset, DefaultCountsAndLength) {
    const auto ds = generate_dataset(GroundTruthSru(5904), {}, 1);
    EXPECT_EQ(ds.train.size(), 3200u);
    EXPECT_EQ(ds.validation.size(), 400u);
    EXPECT_EQ(ds.test.size(), 400u);
    for (const auto* split : {&ds.train, &ds.validation, &ds.test})
        for (const auto& s : *split) {
            ASSERT_EQ(s.length(), 176u);
            ASSERT_TRUE(s.xs.all_finite());
        }
    EXPECT_EQ(ds.kind, TargetKind::next_step);
    EXPECT_NO_THROW(ds.validate());
}

TEST(SyntheticDataset, LengthTwoGivesOnePredictionPair) {
    const auto ds = generate_dataset(GroundTruthSru(5904), {2, 1, 1, 2}, 0);
    const std::vector<std::size_t> idx{0};
    const auto groups = make_batch(ds.train, idx, ds.kind);
    ASSERT_EQ(groups.size(), 1u);
    EXPECT_EQ(groups[0].inputs.size(), 1u);
    EXPECT_EQ(groups[0].targets.size(), 1u);
    EXPECT_EQ(groups[0].targets[0].item(), ds.train[0].xs[1]);
}

TEST(SyntheticDataset, SameSeedSameData) {
    const auto a = generate_dataset(GroundTruthSru(5904), {20, 5, 5, 50}, 9);
    const auto b = generate_dataset(GroundTruthSru(5904), {20, 5, 5, 50}, 9);
    const auto c = generate_dataset(GroundTruthSru(5904), {20, 5, 5, 50}, 10);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(a.train[i].xs, b.train[i].xs);
    EXPECT_FALSE(a.train[0].xs == c.train[0].xs);
}

TEST(SyntheticDataset, SplitsDrawIndependentStarts) {
    const auto ds = generate_dataset(GroundTruthSru(5904), {50, 50, 50, 2}, 0);
    double m = 0.0, m2 = 0.0;
    for (const auto* split : {&ds.train, &ds.validation, &ds.test})
        for (const auto& s : *split) {
            m += s.xs[0];
            m2 += s.xs[0] * s.xs[0];
        }
    m /= 150;
    const double sd = std::sqrt(m2 / 150 - m * m);
    EXPECT_NEAR(sd, 100.0, 20.0);
    EXPECT_NE(ds.train[0].xs[0], ds.validation[0].xs[0]);
}

TEST(SyntheticDataset, RejectsDegenerateCounts) {
    EXPECT_THROW(generate_dataset(GroundTruthSru(0), {0, 1, 1, 10}, 0), ContractError);
    EXPECT_THROW(generate_dataset(GroundTruthSru(0), {1, 1, 1, 1}, 0), ContractError);
}

// Trajectory shapes of the default process: sequences starting below zero
// are pulled to zero within about 30 steps; those starting above zero stay
// positive while shrinking.
TEST(SyntheticDataset, DefaultModelSignPatterns) {
    const auto ds = generate_dataset(GroundTruthSru(5904), {100, 1, 1, 176}, 0);
    for (const auto& s : ds.train) {
        const double x1 = s.xs[0];
        if (x1 < 0) {
            for (std::size_t t = 30; t < 176; ++t) ASSERT_LE(std::abs(s.xs[t]), 0.1 * std::abs(x1)) << "x1=" << x1;
        } else {
            for (std::size_t t = 0; t < 30; ++t) ASSERT_GT(s.xs[t], 0.0) << "x1=" << x1;
            EXPECT_LT(s.xs[29], x1);
        }
    }
}

TEST(SyntheticDataset, TrajectoriesStayFiniteAcrossTenThousandStarts) {
    const GroundTruthSru g(5904);
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        Rng r = Rng(seed).stream("start");
        GroundTruthSru::State s;
        double x = r.normal(0.0, GroundTruthSru::kInitialStd);
        for (int t = 1; t < 176; ++t) {
            auto [n, next] = g.step(s, x);
            s = n;
            x = next;
        }
        for (std::size_t i = 0; i < 5; ++i)
            ASSERT_TRUE(std::isfinite(s.mu_plus[i]) && std::isfinite(s.mu_minus[i]) && std::isfinite(s.mu_z[i]))
                << "seed " << seed;
    }
}

TEST(SequenceMse, Examples) {
    const std::vector<double> y{1, 2, 3, 4};
    EXPECT_EQ(sequence_mse(y, y), 0.0);
    std::vector<double> shifted = y;
    for (auto& v : shifted) v += 0.5;
    EXPECT_DOUBLE_EQ(sequence_mse(shifted, y), 0.25);
    EXPECT_THROW(sequence_mse(std::vector<double>{1}, y), DimensionError);
    EXPECT_THROW(sequence_mse(std::vector<double>{}, std::vector<double>{}), ContractError);
}

TEST(SequenceMse, MatchesLoopOracle) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t T = static_cast<std::size_t>(rng.uniform_int(1, 200));
        std::vector<double> p(T), y(T);
        for (std::size_t i = 0; i < T; ++i) {
            p[i] = rng.normal(0, 10);
            y[i] = rng.normal(0, 10);
        }
        long double acc = 0;
        for (std::size_t i = 0; i < T; ++i) acc += (long double)(p[i] - y[i]) * (p[i] - y[i]);
        EXPECT_NEAR(sequence_mse(p, y), double(acc / T), 1e-10 * double(acc / T));
    }
}
