#include <gtest/gtest.h>

#include <cmath>
#include <ratio>

#include "elacu/integrators.hpp"
#include "oracles.hpp"

using namespace elacu;

namespace {

using oracle::implicit_error;
using oracle::leapfrog_error;
using oracle::v1;

SecondOrderSystem scalar(double m, double c, double k, std::function<double(double)> f) {
    return oracle::scalar_system(m, c, k, std::move(f));
}

}  // namespace

TEST(Newmark, ScalarOscillatorStep) {
    // Hand recursion: a1 = -P / (1 + beta dt^2), P = u0 + dt v0 + dt^2 (1/2 - beta) a0.
    const double dt = 0.1, b = 0.25, g = 0.5;
    double a0 = -1, P = 1 + dt * dt * (0.5 - b) * a0, a1 = -P / (1 + b * dt * dt);
    double u1 = P + b * dt * dt * a1, vv1 = dt * (1 - g) * a0 + g * dt * a1;
    auto sys = scalar(1, 0, 1, [](double) { return 0.0; });
    SecondOrderState s{v1(1), v1(0), v1(-1), 0};
    auto n = newmark_step(sys, s, dt);
    EXPECT_NEAR(n.d[0], u1, 1e-15);
    EXPECT_NEAR(n.v[0], vv1, 1e-15);
    EXPECT_NEAR(n.d[0], 0.9950125, 1e-7);
    EXPECT_NEAR(n.v[0], -0.0997506, 1e-7);
}

TEST(Newmark, ZeroStaysZero) {
    auto sys = scalar(1, 0.3, 2, [](double) { return 0.0; });
    SecondOrderState s{v1(0), v1(0), v1(0), 0};
    for (int i = 0; i < 10; ++i) s = newmark_step(sys, s, 0.1);
    EXPECT_EQ(s.d[0], 0.0);
    EXPECT_EQ(s.v[0], 0.0);
}

TEST(Newmark, LinearLoadNeedsOnePicardSweep) {
    auto sys = scalar(1, 0, 1, [](double t) { return std::sin(t); });
    SecondOrderState s{v1(1), v1(0), v1(-1), 0};
    int it = 0;
    newmark_step(sys, s, 0.1, 0.25, 0.5, {}, &it);
    EXPECT_EQ(it, 1);
}

TEST(Newmark, PicardOnStateDependentLoad) {
    SecondOrderSystem sys = scalar(1, 0, 1, [](double) { return 0.0; });
    sys.nonlinear = true;
    sys.f = [](double, const Eigen::VectorXd& d, const Eigen::VectorXd& v, const Eigen::VectorXd& a) {
        return Eigen::VectorXd(0.2 * v.cwiseProduct(a) + 0.1 * d.cwiseProduct(d));
    };
    SecondOrderState s{v1(0.5), v1(0.2), {}, 0};
    s.a = initial_acceleration(sys, s.d, s.v, 0);
    int it = 0;
    auto n = newmark_step(sys, s, 0.05, 0.25, 0.5, {}, &it);
    EXPECT_GT(it, 1);
    // the converged iterate satisfies the discrete equation
    double res = n.a[0] + n.d[0] - (0.2 * n.v[0] * n.a[0] + 0.1 * n.d[0] * n.d[0]);
    EXPECT_NEAR(res, 0.0, 1e-9);
    PicardSettings tight{1e-10, 1};
    EXPECT_THROW(newmark_step(sys, s, 0.05, 0.25, 0.5, tight), StepFailure);
}

TEST(Newmark, ConservesEnergyOnUndampedOscillator) {
    auto sys = scalar(1, 0, 4, [](double) { return 0.0; });
    SecondOrderState s{v1(1), v1(0.5), v1(-4), 0};
    auto energy = [](const SecondOrderState& st) { return 0.5 * st.v[0] * st.v[0] + 2 * st.d[0] * st.d[0]; };
    double e0 = energy(s);
    for (int i = 0; i < 10000; ++i) s = newmark_step(sys, s, 0.05);
    EXPECT_LT(std::abs(energy(s) - e0) / e0, 1e-12);
}

TEST(GenAlpha, ParameterIdentitiesHoldExactly) {
    auto p = NewmarkParams::genalpha();
    EXPECT_EQ(p.beta, 4.0 / 9.0);
    EXPECT_EQ(p.gamma, 5.0 / 6.0);
    EXPECT_DOUBLE_EQ(p.gamma_identity(), p.gamma);
    EXPECT_DOUBLE_EQ(p.beta_identity(), p.beta);
    // exact rational arithmetic with alpha_m = 0, alpha_f = 1/3
    using af = std::ratio<1, 3>;
    using gamma = std::ratio_add<std::ratio<1, 2>, af>;
    using onep = std::ratio_add<std::ratio<1>, af>;
    using beta = std::ratio_divide<std::ratio_multiply<onep, onep>, std::ratio<4>>;
    static_assert(std::ratio_equal_v<gamma, std::ratio<5, 6>>);
    static_assert(std::ratio_equal_v<beta, std::ratio<4, 9>>);
}

TEST(GenAlpha, DegeneratesToNewmark) {
    auto sys = scalar(1, 0.3, 2, [](double t) { return std::cos(t); });
    SecondOrderState s{v1(1), v1(-0.4), v1(0), 0};
    s.a = initial_acceleration(sys, s.d, s.v, 0);
    auto a = genalpha_step(sys, s, 0.1, {0.25, 0.5, 0, 0});
    auto b = newmark_step(sys, s, 0.1);
    EXPECT_NEAR(a.d[0], b.d[0], 1e-14);
    EXPECT_NEAR(a.v[0], b.v[0], 1e-14);
    EXPECT_NEAR(a.a[0], b.a[0], 1e-14);
}

TEST(Order, NewmarkAndGenAlphaAreSecondOrder) {
    for (auto np : {NewmarkParams::newmark(), NewmarkParams::genalpha()}) {
        double e1 = implicit_error(np, 100), e2 = implicit_error(np, 200);
        double rate = std::log2(e1 / e2);
        EXPECT_GE(rate, 1.8);
        EXPECT_LE(rate, 2.2);
    }
}

TEST(Leapfrog, StartupAndZero) {
    DiagonalSystem sys{v1(1), v1(0), [](const Eigen::VectorXd& u) { return u; }, [](double) { return v1(0); }};
    SecondOrderState s{v1(1), v1(0), v1(-1), 0};
    EXPECT_NEAR(leapfrog_step(sys, s, 0.1).d[0], 0.995, 1e-15);
    SecondOrderState z{v1(0), v1(0), v1(0), 0};
    for (int i = 0; i < 20; ++i) z = leapfrog_step(sys, z, 0.1);
    EXPECT_EQ(z.d[0], 0.0);
}

TEST(Leapfrog, ExactForConstantLoad) {
    DiagonalSystem sys{v1(2), v1(0), [](const Eigen::VectorXd& u) { return Eigen::VectorXd(0 * u); },
                       [](double) { return v1(3.0); }};
    SecondOrderState s{v1(0), v1(0), v1(1.5), 0};
    const double dt = 0.037;
    for (int n = 1; n <= 50; ++n) {
        s = leapfrog_step(sys, s, dt);
        EXPECT_NEAR(s.d[0], 1.5 * (n * dt) * (n * dt) / 2, 1e-13);
    }
}

TEST(Leapfrog, MatchesTwoStepForm) {
    // u_{n+1} = 2 u_n - u_{n-1} + dt^2 (f - k u_n) when the damping vanishes
    const double dt = 0.05, k = 3.0;
    DiagonalSystem sys{v1(1), v1(0), [k](const Eigen::VectorXd& u) { return Eigen::VectorXd(k * u); },
                       [](double t) { return v1(std::sin(t)); }};
    SecondOrderState s{v1(0.4), v1(0.1), v1(-k * 0.4), 0};
    double um1 = s.d[0];
    s = leapfrog_step(sys, s, dt);
    double u = s.d[0];
    for (int n = 1; n < 100; ++n) {
        double next = 2 * u - um1 + dt * dt * (std::sin(n * dt) - k * u);
        s = leapfrog_step(sys, s, dt);
        EXPECT_NEAR(s.d[0], next, 1e-13);
        um1 = u;
        u = s.d[0];
    }
}

TEST(Order, LeapfrogIsSecondOrder) {
    double rate = std::log2(leapfrog_error(100) / leapfrog_error(200));
    EXPECT_GE(rate, 1.8);
    EXPECT_LE(rate, 2.2);
}
