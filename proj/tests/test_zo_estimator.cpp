#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "l1zo/zo_estimator.hpp"

using namespace l1zo;

namespace {

Problem shifted_norm(Vec theta, double sigma = 0.0) {
    ProblemSpec s;
    s.family = Family::ShiftedNorm;
    s.d = theta.size();
    s.theta = std::move(theta);
    s.sigma = sigma;
    return Problem(s);
}

Problem linear(Vec a, double sigma = 0.0) {
    ProblemSpec s;
    s.family = Family::LinearNoise;
    s.d = a.size();
    s.a = std::move(a);
    s.sigma = sigma;
    return Problem(s);
}

// |x|_1 written as the max of <s, x> over all sign vectors s.
Problem l1_norm_problem(std::size_t d) {
    ProblemSpec s;
    s.family = Family::MaxAffineNoise;
    s.d = d;
    for (std::size_t mask = 0; mask < (1U << d); ++mask) {
        Vec v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = (mask >> i) & 1U ? 1.0 : -1.0;
        s.slopes.push_back(v);
    }
    s.intercepts.assign(s.slopes.size(), 0.0);
    return Problem(s);
}

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

}  // namespace

TEST(Queries, Example) {
    const L1Direction z(Vec{0.5, -0.5});
    const auto [plus, minus] = two_point_queries(Vec{1, 2}, 0.5, z);
    EXPECT_EQ(plus, (Vec{1.25, 1.75}));
    EXPECT_EQ(minus, (Vec{0.75, 2.25}));
    EXPECT_THROW(two_point_queries(Vec{1, 2}, 0.0, z), std::invalid_argument);
    EXPECT_THROW(two_point_queries(Vec{1, 2}, -1.0, z), std::invalid_argument);
}

TEST(GradEstimate, Example) {
    const L1Direction z(Vec{0.5, -0.5});
    EXPECT_EQ(grad_estimate(2, 0.5, 3.0, 1.0, z).vector, (Vec{4, -4}));
    const L1Direction z0(Vec{0.0, -1.0, 0.0});
    EXPECT_EQ(grad_estimate(3, 1.0, 2.0, 0.0, z0).vector, (Vec{3, -3, 3}));
    EXPECT_THROW(grad_estimate(3, 0.5, 3.0, 1.0, z), std::invalid_argument);
}

TEST(Codec, MessageSize) {
    EXPECT_EQ(message_bytes(1), 9u);
    EXPECT_EQ(message_bytes(8), 9u);
    EXPECT_EQ(message_bytes(9), 10u);
    EXPECT_EQ(message_bytes(100), 21u);
    Rng rng({1, 0, 0});
    const auto msg = encode_message(1.0, 0.5, sample_l1_sphere(100, rng));
    EXPECT_EQ(serialize(msg).size(), 21u);
}

TEST(Codec, ByteLayout) {
    const auto msg = encode_message(1.5, 0.5, L1Direction(Vec{0.5, -0.25, 0.25}));
    const auto bytes = serialize(msg);
    const std::vector<std::uint8_t> expected = {0, 0, 0, 0, 0, 0, 0xF0, 0x3F, 0x05};
    EXPECT_EQ(bytes, expected);
    EXPECT_TRUE(msg.sign_bit(0));
    EXPECT_FALSE(msg.sign_bit(1));
    EXPECT_TRUE(msg.sign_bit(2));
}

TEST(Codec, RoundTripIsBitExact) {
    Rng rng({2, 0, 0});
    const double specials[] = {0.0, -0.0, 1e-310, -std::numeric_limits<double>::max(),
                               std::numeric_limits<double>::infinity()};
    for (int i = 0; i < 10000; ++i) {
        const std::size_t d = 1 + rng() % 200;
        const L1Direction z = sample_l1_sphere(d, rng);
        const double y = i < 5 ? specials[i] : rng.uniform(-50, 50);
        const double yp = i < 5 ? 0.0 : rng.uniform(-50, 50);
        const double h = rng.uniform(1e-4, 2.0);
        const auto msg = encode_message(y, yp, z);
        const auto bytes = serialize(msg);
        ASSERT_EQ(bytes.size(), message_bytes(d));
        const auto back = deserialize(bytes, d);
        ASSERT_EQ(back, msg);
        ASSERT_EQ(bits(back.delta), bits(y - yp));
        const Vec direct = grad_estimate(d, h, y, yp, z).vector;
        const Vec decoded = decode_message(back, d, h).vector;
        for (std::size_t k = 0; k < d; ++k) ASSERT_EQ(bits(direct[k]), bits(decoded[k]));
    }
}

TEST(Codec, Errors) {
    const auto msg = encode_message(1.0, 0.0, L1Direction(Vec{1.0}));
    EXPECT_THROW(deserialize(serialize(msg), 9), std::invalid_argument);
    EXPECT_THROW(decode_message(msg, 2, 1.0), std::invalid_argument);
    EXPECT_THROW(decode_message(msg, 1, 0.0), std::invalid_argument);
    const std::vector<std::uint8_t> short_bytes(5, 0);
    EXPECT_THROW(deserialize(short_bytes, 1), std::invalid_argument);
}

TEST(Smoothed, LinearValueAndGradient) {
    const Problem p = linear({1, -2, 0.5}, 0.3);
    const Vec x{0.2, 0.4, -1};
    const SmoothedOracle o(p, 0.5, 1000000);
    const auto v = smoothed_value_mc(o, x, {3, 0, 0});
    EXPECT_NEAR(v.estimate, -1.1, 4 * v.std_error);
    const auto g = smoothed_grad_mc(o, x, {4, 0, 0});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g.estimate[i], p.a()[i], 4 * g.std_error[i]);
    EXPECT_EQ(*p.exact_smoothed_gradient(x), p.a());
}

TEST(Smoothed, L1NormAtOrigin) {
    // With U uniform on the l1 ball, E|U|_1 = d / (d + 1).
    for (std::size_t d : {1u, 2u, 3u, 5u}) {
        const Problem p = l1_norm_problem(d);
        const double h = 0.7;
        const auto v = smoothed_value_mc(SmoothedOracle(p, h, 400000), Vec(d, 0.0), {5, d, 0});
        EXPECT_NEAR(v.estimate, h * double(d) / double(d + 1), 4 * v.std_error) << "d=" << d;
    }
}

TEST(Smoothed, ReflectionSymmetry) {
    const Vec theta{0.3, -0.1, 0.2};
    const Problem p = shifted_norm(theta);
    const Vec x{0.9, 0.4, -0.2};
    Vec mirror(3);
    for (int i = 0; i < 3; ++i) mirror[i] = 2 * theta[i] - x[i];
    const SmoothedOracle o(p, 0.4, 500000, false);
    const auto a = smoothed_value_mc(o, x, {6, 0, 0});
    const auto b = smoothed_value_mc(o, mirror, {7, 0, 0});
    EXPECT_NEAR(a.estimate, b.estimate, 4 * std::hypot(a.std_error, b.std_error));
}

TEST(Smoothed, GradientMatchesFiniteDifference) {
    const Problem p = shifted_norm({0, 0, 0});
    const Vec x{0.2, -0.1, 0.4};
    const double h = 0.3, eps = 1e-4;
    const std::size_t N = 1000000;
    // Oracle: central differences of the smoothed value with common samples.
    Rng rng({8, 0, 0});
    std::vector<double> s(3, 0.0), ss(3, 0.0);
    for (std::size_t k = 0; k < N; ++k) {
        const Vec u = sample_l1_ball(3, rng);
        for (int i = 0; i < 3; ++i) {
            Vec a(3), b(3);
            for (int j = 0; j < 3; ++j) a[j] = b[j] = x[j] + h * u[j];
            a[i] += eps;
            b[i] -= eps;
            const double q = (p.eval_clean(a) - p.eval_clean(b)) / (2 * eps);
            s[i] += q;
            ss[i] += q * q;
        }
    }
    const auto g = smoothed_grad_mc(SmoothedOracle(p, h, N), x, {9, 0, 0});
    for (int i = 0; i < 3; ++i) {
        const double mean = s[i] / N;
        const double se = std::sqrt((ss[i] / N - mean * mean) / N);
        EXPECT_NEAR(g.estimate[i], mean, 4 * std::hypot(se, g.std_error[i]) + 1e-6) << i;
    }
}

TEST(Smoothed, ThreadCountDoesNotChangeResults) {
    const Problem p = shifted_norm({0.1, 0.2, 0.3, 0.4}, 0.2);
    const Vec x{0, 0, 0, 0};
    const auto a = smoothed_grad_mc(SmoothedOracle(p, 0.2, 100000, true, 1), x, {10, 0, 0});
    const auto b = smoothed_grad_mc(SmoothedOracle(p, 0.2, 100000, true, 4), x, {10, 0, 0});
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(bits(a.estimate[i]), bits(b.estimate[i]));
        EXPECT_EQ(bits(a.std_error[i]), bits(b.std_error[i]));
    }
}

TEST(Smoothed, OracleValidation) {
    const Problem p = shifted_norm({0, 0});
    EXPECT_THROW(SmoothedOracle(p, 0.0, 10), std::invalid_argument);
    EXPECT_THROW(SmoothedOracle(p, 0.1, 0), std::invalid_argument);
    EXPECT_THROW(smoothed_value_mc(SmoothedOracle(p, 0.1, 10), Vec{0, 0, 0}, {0, 0, 0}), std::invalid_argument);
}

TEST(GradEstimate, NormNeverExceedsHardBound) {
    ProblemSpec ma;
    ma.family = Family::MaxAffineNoise;
    ma.d = 7;
    ma.pieces = 5;
    ma.sigma = 0.3;
    ma.seed = 4;
    const std::vector<Problem> problems = {linear({1, -1, 2, 0, 0.5, 3, -2}, 0.5),
                                           shifted_norm({0.1, 0, 0, 0, 0, 0, 0.3}, 0.4), Problem(ma)};
    Rng rng({11, 0, 0});
    for (const auto& p : problems) {
        const double bound = p.lipschitz() * std::pow(7.0, 1.5);
        for (int i = 0; i < 10000; ++i) {
            Vec x(7);
            for (auto& v : x) v = rng.uniform(-2, 2);
            const double h = rng.uniform(1e-3, 1.0);
            const Vec g = sample_grad_estimate(p, x, h, rng).vector;
            ASSERT_LE(norm2(g), bound * (1 + 1e-12));
        }
    }
}
