#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "elacu/norms.hpp"

using namespace elacu;

namespace {

// Unit cubes: e at z in (0,1), f at (1,2), t at (2,3); x, y in (-1/2, 1/2).
ProblemSpec unit_spec(int p, TissueOption opt = TissueOption::acoustic, int level = 0) {
    ProblemSpec s;
    s.level = level;
    s.p = p;
    s.option = opt;
    s.cube = 1.0;
    s.mat = material_set(1);
    return s;
}

Eigen::VectorXd nodal(const FieldSpace& sp, const std::function<void(const Vec3&, double*)>& f) {
    auto v = interpolate(sp, [&](const Vec3& x, BlockTag, double, double* o) { f(x, o); }, 0);
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST(EnergyNorms, ZeroStateIsZero) {
    Problem pb(unit_spec(2));
    EnergyNorms n(pb);
    Eigen::VectorXd za = Eigen::VectorXd::Zero(pb.aspace().size), ze = Eigen::VectorXd::Zero(pb.espace().size);
    auto a = n.acoustic(za, za, za, 0.3);
    auto e = n.elastic(ze, ze, 0.3);
    EXPECT_EQ(a.dpsi2 + a.ddpsi2 + a.grad_tilde2 + a.jump2, 0.0);
    EXPECT_EQ(e.total(), 0.0);
}

TEST(EnergyNorms, ConstantVelocityOnUnitVolume) {
    Problem pb(unit_spec(2));
    EnergyNorms n(pb);
    const double c0[3] = {0.3, -1.2, 2.0};
    Eigen::VectorXd u = Eigen::VectorXd::Zero(pb.espace().size);
    Eigen::VectorXd du = nodal(pb.espace(), [&](const Vec3&, double* o) {
        for (int k = 0; k < 3; ++k) o[k] = c0[k];
    });
    auto e = n.elastic(u, du, 0);
    EXPECT_NEAR(e.du2, 0.09 + 1.44 + 4.0, 1e-12);
    EXPECT_EQ(e.u2, 0.0);
    EXPECT_EQ(e.eps2, 0.0);
}

TEST(EnergyNorms, PolynomialFieldsIntegrateExactly) {
    for (int p : {2, 3}) {
        Problem pb(unit_spec(p));
        EnergyNorms n(pb);
        // psi = z^2 on f and t: |grad psi|^2 = 4 z^2 over z in (1,3) gives 4 (27 - 1) / 3.
        Eigen::VectorXd psi = nodal(pb.aspace(), [](const Vec3& x, double* o) { o[0] = x[2] * x[2]; });
        Eigen::VectorXd z = Eigen::VectorXd::Zero(pb.aspace().size);
        auto a = n.acoustic(psi, z, z, 0);
        EXPECT_NEAR(a.grad_tilde2, 4.0 * 26.0 / 3.0, 1e-11) << "p=" << p;
        EXPECT_NEAR(a.jump2, 0.0, 1e-12);
        // psi_t = x + 1 on both blocks: integral of (x+1)^2 = 1/12 + 1 per unit cube.
        Eigen::VectorXd v = nodal(pb.aspace(), [](const Vec3& x, double* o) { o[0] = x[0] + 1; });
        a = n.acoustic(z, z, v, 0);
        EXPECT_NEAR(a.ddpsi2, 2 * (1.0 / 12 + 1), 1e-12);
        // u = (x, 0, 0) on e: |u|^2 integrates to 1/12 and |eps|^2 to 1.
        Eigen::VectorXd u = nodal(pb.espace(), [](const Vec3& x, double* o) {
            o[0] = x[0];
            o[1] = o[2] = 0;
        });
        auto e = n.elastic(u, Eigen::VectorXd::Zero(u.size()), 0);
        EXPECT_NEAR(e.u2, 1.0 / 12, 1e-12);
        EXPECT_NEAR(e.eps2, 1.0, 1e-12);
    }
}

TEST(EnergyNorms, ContinuousFieldHasNoJump) {
    for (bool nc : {true, false}) {
        auto s = unit_spec(2, TissueOption::acoustic, 1);
        s.nonconforming = nc;
        Problem pb(s);
        EnergyNorms n(pb);
        // Continuous psi, and psi_t vanishing on the interface plane z = 2.
        Eigen::VectorXd psi = nodal(pb.aspace(), [](const Vec3& x, double* o) { o[0] = x[0] * x[1] + x[2]; });
        Eigen::VectorXd dpsi = nodal(pb.aspace(), [](const Vec3& x, double* o) { o[0] = (x[2] - 2) * x[0]; });
        EXPECT_LT(n.acoustic(psi, dpsi, dpsi, 0).jump2, 1e-12);
        // A discontinuous field is seen by the jump term.
        auto sv = interpolate(pb.aspace(), [](const Vec3&, BlockTag tag, double, double* o) { o[0] = tag == BlockTag::t; }, 0);
        Eigen::VectorXd step = Eigen::Map<Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
        EXPECT_GT(n.acoustic(step, Eigen::VectorXd::Zero(step.size()), step, 0).jump2, 1e-3);
    }
}

TEST(EnergyNorms, HomogeneousOfDegreeTwo) {
    ProblemSpec s;
    s.level = 0;
    s.p = 2;
    s.option = TissueOption::acoustic;
    s.mat = material_set(1);
    Problem pb(s);
    auto mc = make_case(s.option, 1);
    EnergyNorms n(pb);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1, 1);
    auto rnd = [&](Eigen::Index k) {
        Eigen::VectorXd v(k);
        for (auto& x : v) x = U(rng);
        return v;
    };
    Eigen::VectorXd psi = rnd(pb.aspace().size), dpsi = rnd(pb.aspace().size), ddpsi = rnd(pb.aspace().size);
    Eigen::VectorXd u = rnd(pb.espace().size), du = rnd(pb.espace().size);
    const double sc = -2.5;
    auto a1 = n.acoustic(psi, dpsi, ddpsi, 0), a2 = n.acoustic(sc * psi, sc * dpsi, sc * ddpsi, 0);
    auto e1 = n.elastic(u, du, 0), e2 = n.elastic(sc * u, sc * du, 0);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); };
    EXPECT_LT(rel(a2.dpsi2, sc * sc * a1.dpsi2), 1e-12);
    EXPECT_LT(rel(a2.ddpsi2, sc * sc * a1.ddpsi2), 1e-12);
    EXPECT_LT(rel(a2.grad_tilde2, sc * sc * a1.grad_tilde2), 1e-12);
    EXPECT_LT(rel(a2.jump2, sc * sc * a1.jump2), 1e-12);
    EXPECT_LT(rel(e2.du2, sc * sc * e1.du2), 1e-12);
    EXPECT_LT(rel(e2.u2, sc * sc * e1.u2), 1e-12);
    EXPECT_LT(rel(e2.eps2, sc * sc * e1.eps2), 1e-12);
    EXPECT_GE(a1.jump2, 0.0);
}

TEST(EnergyNorms, InterpolantBeatsZeroTrajectory) {
    ProblemSpec s;
    s.level = 1;
    s.p = 2;
    s.mat = material_set(1);
    for (auto opt : {TissueOption::acoustic, TissueOption::elastic}) {
        s.option = opt;
        Problem pb(s);
        auto mc = make_case(opt, 1);
        ManufacturedData md(pb, mc);
        EnergyNorms n(pb, &mc);
        const double t = 0.7;
        Eigen::VectorXd u, v, a, psi, dpsi, ddpsi;
        md.elastic_boundary(pb, t, u, v, a);
        md.acoustic_boundary(pb, t, psi, dpsi, ddpsi);
        LinfEAccumulator interp, zero;
        interp.add(t, n.elastic(u, v, t), n.acoustic(psi, dpsi, ddpsi, t));
        Eigen::VectorXd ze = Eigen::VectorXd::Zero(u.size()), za = Eigen::VectorXd::Zero(psi.size());
        zero.add(t, n.elastic(ze, ze, t), n.acoustic(za, za, za, t));
        EXPECT_GT(zero.value(), 0.0);
        EXPECT_LT(interp.value(), 0.2 * zero.value());
    }
}

TEST(EnergyNorms, ZeroTrajectoryHasRelativeErrorOne) {
    ProblemSpec s;
    s.level = 0;
    s.p = 1;
    s.mat = material_set(1);
    Problem pb(s);
    auto mc = make_case(s.option, 1);
    EnergyNorms n(pb, &mc);
    LinfEAccumulator err;
    Eigen::VectorXd ze = Eigen::VectorXd::Zero(pb.espace().size), za = Eigen::VectorXd::Zero(pb.aspace().size);
    LinfEAccumulator ex;
    for (double t : {0.0, 0.5, 1.0}) {
        err.add(t, n.elastic(ze, ze, t), n.acoustic(za, za, za, t));
        ex.add(t, n.elastic(ze, ze, t), n.acoustic(za, za, za, t));
    }
    EXPECT_DOUBLE_EQ(err.value() / ex.value(), 1.0);
}

TEST(LinfE, TrapezoidIntegralAndSupremum) {
    LinfEAccumulator acc;
    ElasticNorms e;
    AcousticNorms a;
    // psi_tt^2 = t on [0, 1] sampled at 0, 0.5, 1: trapezoid is exact for linear data.
    for (double t : {0.0, 0.5, 1.0}) {
        a.ddpsi2 = t;
        a.dpsi2 = 1 - t;
        e.du2 = t < 0.6 ? 2.0 : 1.0;
        acc.add(t, e, a);
    }
    EXPECT_DOUBLE_EQ(acc.integral(), 0.5);
    EXPECT_EQ(acc.samples(), 3);
    // sup of (1 - t) + t^2 / 2 over the samples is 1 at t = 0; sup elastic is 2.
    EXPECT_DOUBLE_EQ(acc.value(true), std::sqrt(3.0));
    EXPECT_DOUBLE_EQ(acc.value(false), std::sqrt(3.0));
}

TEST(Rates, Examples) {
    EXPECT_NEAR(convergence_rates({1e-1, 2.5e-2}, {0.2, 0.1})[0], 2.0, 1e-12);
    EXPECT_NEAR(convergence_rates({8e-3, 1e-3}, {0.2, 0.1})[0], 3.0, 1e-12);
    EXPECT_NEAR(convergence_rates({0.3, 0.3, 0.3}, {0.4, 0.2, 0.1})[1], 0.0, 1e-14);
    EXPECT_EQ(convergence_rates({1, 0.5, 0.25}, {1, 0.5, 0.25}).size(), 2u);
}

TEST(Rates, RejectsBadInput) {
    EXPECT_THROW(convergence_rates({1.0}, {1.0}), std::invalid_argument);
    EXPECT_THROW(convergence_rates({1.0, 0.5}, {1.0}), std::invalid_argument);
    EXPECT_THROW(convergence_rates({1.0, 0.0}, {1.0, 0.5}), std::invalid_argument);
    EXPECT_THROW(convergence_rates({1.0, -1.0}, {1.0, 0.5}), std::invalid_argument);
    EXPECT_THROW(convergence_rates({1.0, 0.5}, {0.5, 0.5}), std::invalid_argument);
}

TEST(Pressure, AcousticIsDensityTimesPotentialRate) {
    auto s = unit_spec(2);
    s.mat.f.rho = 998.23;
    Problem pb(s);
    Eigen::VectorXd dpsi = Eigen::VectorXd::Constant(pb.aspace().size, 2.0);
    auto pf = postprocess_pressure(pb.aspace(), pb.espace(), s.mat, dpsi, Eigen::VectorXd::Zero(pb.espace().size));
    const auto* f = pb.aspace().find_block(pb.mesh().block_index(BlockTag::f));
    for (int d = f->offset; d < f->offset + f->num_dofs(); ++d) EXPECT_NEAR(pf.acoustic[d], 1996.46, 1e-9);
}

TEST(Pressure, RotationIsPressureFree) {
    Problem pb(unit_spec(2, TissueOption::elastic));
    Eigen::VectorXd u = nodal(pb.espace(), [](const Vec3& x, double* o) {
        o[0] = -x[1];
        o[1] = x[0];
        o[2] = 0;
    });
    auto pf = postprocess_pressure(pb.aspace(), pb.espace(), pb.spec().mat, Eigen::VectorXd::Zero(pb.aspace().size), u);
    EXPECT_LT(pf.elastic.lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Pressure, UniformDilation) {
    for (int p : {1, 3}) {
        Problem pb(unit_spec(p, TissueOption::elastic));
        const double alpha = 1e-3;
        Eigen::VectorXd u = nodal(pb.espace(), [&](const Vec3& x, double* o) {
            for (int k = 0; k < 3; ++k) o[k] = alpha * x[k];
        });
        auto pf = postprocess_pressure(pb.aspace(), pb.espace(), pb.spec().mat, Eigen::VectorXd::Zero(pb.aspace().size), u);
        for (const auto& bs : pb.espace().blocks) {
            const auto& ep = elastic_of(pb.spec().mat, bs.tag());
            double expect = -(ep.lambda + 2 * ep.mu / 3) * 3 * alpha;
            for (int nn = 0; nn < bs.num_nodes(); ++nn)
                EXPECT_NEAR(pf.elastic[bs.offset / 3 + nn], expect, 1e-10 * std::abs(expect));
        }
    }
}

TEST(Interpolation, RatesMatchPolynomialDegree) {
    for (int p : {1, 2, 3}) {
        std::vector<double> l2, h1, hs;
        for (int L = 0; L < 3; ++L) {
            auto mesh = build_three_cubes(L, true);
            auto sp = build_field_space(mesh, p, 1, {mesh.block_index(BlockTag::f), mesh.block_index(BlockTag::t)});
            auto e = interpolation_error(sp);
            l2.push_back(e.l2);
            h1.push_back(e.h1);
            hs.push_back(mesh.h_max());
        }
        double r2 = convergence_rates(l2, hs).back(), r1 = convergence_rates(h1, hs).back();
        EXPECT_NEAR(r2, p + 1, 0.2) << "p=" << p;
        EXPECT_NEAR(r1, p, 0.2) << "p=" << p;
    }
}

TEST(DiscreteEnergy, LinearUndampedRunDoesNotGrow) {
    auto s = unit_spec(2);
    s.cube = std::numbers::pi;
    s.mat = material_set(1);
    s.mat.f.k1 = s.mat.f.k2 = s.mat.t_ac.k1 = s.mat.t_ac.k2 = 0;
    Problem pb(s);
    InitialValueData init([](const Problem& p, CoupledState& st) {
        auto sh = [](const Vec3& x) { return std::cos(x[0]) * std::cos(x[1]); };
        auto a = interpolate(p.aspace(), [&](const Vec3& x, BlockTag, double, double* o) { o[0] = sh(x) * std::sin(x[2]); }, 0);
        auto e = interpolate(p.espace(), [&](const Vec3& x, BlockTag, double, double* o) {
            o[0] = o[1] = 0;
            o[2] = sh(x) * std::sin(x[2]);
        }, 0);
        st.psi = Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
        st.du = Eigen::Map<Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
    });
    TimeConfig tc;
    tc.T = 1.0;
    double e0 = -1, emax = 0;
    run_coupled(pb, tc, init, [&](int k, const CoupledState& st) {
        double e = discrete_energy(pb, st);
        if (k == 0) e0 = e;
        emax = std::max(emax, e);
    });
    ASSERT_GT(e0, 0.0);
    EXPECT_LE(emax, 1.01 * e0);
}
