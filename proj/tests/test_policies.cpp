#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "stoch_align/policies.hpp"

using namespace stoch_align;

namespace {

ModelConfig cfg_of(int n, double s0 = 1, double sm = 1, double sd = 1) {
    ModelConfig c;
    c.n = n;
    c.sigma0 = s0;
    c.sigma_m = sm;
    c.sigma_d = sd;
    return c;
}

MeasurementVector random_y(std::mt19937_64& g, int n) {
    std::normal_distribution<double> z(0.0, 2.0);
    MeasurementVector y{std::vector<double>(n)};
    for (auto& v : y.values) v = z(g);
    return y;
}

}  // namespace

TEST(Weighted, Values) {
    const MeasurementVector y{{2, -2}};
    EXPECT_EQ(weighted_moves(y, 0.0).values, (std::vector<double>{0, 0}));
    EXPECT_EQ(weighted_moves(y, 1.0).values, y.values);
    EXPECT_EQ(weighted_moves(y, 0.5).values, (std::vector<double>{1, -1}));
    EXPECT_THROW(weighted_moves(y, 1.5), std::invalid_argument);
    EXPECT_THROW(weighted_moves(y, -0.1), std::invalid_argument);
}

TEST(WeightedProperty, Linear) {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto y1 = random_y(g, 6);
        const auto y2 = random_y(g, 6);
        const double a = 0.5, b = -2.0;
        MeasurementVector comb{std::vector<double>(6)};
        for (int i = 0; i < 6; ++i) comb.values[i] = a * y1.values[i] + b * y2.values[i];
        // Dyadic rho: every scaling is exact, so the identity holds bit for bit.
        for (double rho : {0.0, 0.25, 0.5, 1.0}) {
            const auto lhs = weighted_moves(comb, rho).values;
            const auto m1 = weighted_moves(y1, rho).values;
            const auto m2 = weighted_moves(y2, rho).values;
            for (int i = 0; i < 6; ++i) EXPECT_EQ(lhs[i], a * m1[i] + b * m2[i]);
        }
        // Any other rho: equal up to the rounding of one product and one sum.
        for (double rho : {0.3, 0.37, 0.9}) {
            const auto lhs = weighted_moves(comb, rho).values;
            const auto m1 = weighted_moves(y1, rho).values;
            const auto m2 = weighted_moves(y2, rho).values;
            for (int i = 0; i < 6; ++i) {
                const double scale = std::abs(a * m1[i]) + std::abs(b * m2[i]);
                EXPECT_NEAR(lhs[i], a * m1[i] + b * m2[i], 4e-16 * scale);
            }
        }
    }
}

TEST(WStar, RoundZeroZeroPrior) {
    const AlphaSchedule s(cfg_of(3, 0.0), 5);
    EXPECT_EQ(wstar_moves(MeasurementVector{{1, 2, -3}}, 0, s).values, (std::vector<double>{0, 0, 0}));
}

TEST(WStar, HandRoundZero) {
    const AlphaSchedule s(cfg_of(2), 3);
    const auto m = wstar_moves(MeasurementVector{{1, -1}}, 0, s).values;
    EXPECT_DOUBLE_EQ(m[0], 0.4);
    EXPECT_DOUBLE_EQ(m[1], -0.4);
}

TEST(WStar, LateRoundUsesConstant) {
    const auto c = cfg_of(4);
    const AlphaSchedule s(c, 10);
    const auto m = wstar_moves(MeasurementVector{{1, 0, 0, -1}}, 300, s).values;
    const double r = c.ratio();
    const double rho = (std::sqrt(4.0 + r * r) - r) / 2.0;
    EXPECT_NEAR(m[0], rho, 1e-12);
}

TEST(MatC, EqualMeasurementsCancel) {
    const AlphaSchedule s(cfg_of(4), 5);
    for (double v : matc_moves(MeasurementVector{{3, 3, 3, 3}}, 2, s).values) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(MatC, TwoAgents) {
    const AlphaSchedule s(cfg_of(2), 5);
    for (int t = 0; t <= 5; ++t) {
        const auto m = matc_moves(MeasurementVector{{1, -1}}, t, s).values;
        EXPECT_NEAR(m[0], s.rho(t), 1e-15);
        EXPECT_NEAR(m[1], -s.rho(t), 1e-15);
    }
}

TEST(MatCProperty, MatchesPerAgentFormula) {
    std::mt19937_64 g(9);
    for (int n = 2; n <= 9; ++n) {
        const AlphaSchedule s(cfg_of(n), 10);
        for (int t = 0; t <= 10; ++t) {
            const auto y = random_y(g, n);
            const auto m = matc_moves(y, t, s).values;
            const double total = std::accumulate(y.values.begin(), y.values.end(), 0.0);
            for (int i = 0; i < n; ++i) {
                const double others = (total - y.values[i]) / (n - 1);
                const double ref = (static_cast<double>(n - 1) / n) * s.rho(t) * (y.values[i] - others);
                EXPECT_NEAR(m[i], ref, 1e-12);
            }
        }
    }
}

TEST(MatCProperty, WStarMinusShift) {
    std::mt19937_64 g(13);
    for (int n = 2; n <= 9; ++n) {
        const AlphaSchedule s(cfg_of(n), 10);
        for (int t = 0; t <= 10; ++t) {
            const auto y = random_y(g, n);
            const auto w = wstar_moves(y, t, s).values;
            const auto m = matc_moves(y, t, s).values;
            const double lambda = wstar_matc_shift(y.values, s.rho(t));
            for (int i = 0; i < n; ++i) EXPECT_NEAR(w[i] - m[i], lambda, 1e-12);
        }
    }
}

TEST(Shifted, Values) {
    const MoveVector base{{1.0, -2.0}};
    EXPECT_EQ(shifted_moves(base, 0.0).values, base.values);
    EXPECT_EQ(shifted_moves(base, 0.5).values, (std::vector<double>{1.5, -1.5}));
}

TEST(PolicyDispatch, MatchesDirectRules) {
    std::mt19937_64 g(21);
    const auto c = cfg_of(5);
    const AlphaSchedule s(c, 10);
    const auto y = random_y(g, 5);
    EXPECT_EQ(policy_moves(ConstantWeighted{0.3}, y, 2, s).values, weighted_moves(y, 0.3).values);
    EXPECT_EQ(policy_moves(WStar{}, y, 4, s).values, wstar_moves(y, 4, s).values);
    EXPECT_EQ(policy_moves(MeetAtCenter{}, y, 4, s).values, matc_moves(y, 4, s).values);
    const ScheduledWeighted sched{{0.1, 0.2}};
    EXPECT_EQ(policy_moves(sched, y, 0, s).values, weighted_moves(y, 0.1).values);
    EXPECT_EQ(policy_moves(sched, y, 9, s).values, weighted_moves(y, 0.2).values);

    const Shifted shifted{WStar{}, ShiftRule{ShiftRule::Kind::Constant, 0.25}};
    const auto sm = policy_moves(shifted, y, 3, s).values;
    const auto wm = wstar_moves(y, 3, s).values;
    for (int i = 0; i < 5; ++i) EXPECT_EQ(sm[i], wm[i] + 0.25);

    // A MatC base shifted by the mean response reproduces W*.
    const Shifted back{MeetAtCenter{}, ShiftRule{ShiftRule::Kind::MeanResponse, 1.0}};
    const auto bm = policy_moves(back, y, 3, s).values;
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(bm[i], wm[i], 1e-12);
}

TEST(PolicyValidation, RejectsOutOfRange) {
    EXPECT_THROW(validate_policy(ConstantWeighted{1.2}), std::invalid_argument);
    EXPECT_THROW(validate_policy(ScheduledWeighted{}), std::invalid_argument);
    EXPECT_THROW(validate_policy(Shifted{ConstantWeighted{-1.0}, {}}), std::invalid_argument);
    EXPECT_NO_THROW(validate_policy(WStar{}));
    EXPECT_EQ(policy_name(MeetAtCenter{}), "matc");
    EXPECT_EQ(policy_name(WStar{}), "wstar");
}
