#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "elacu/materials.hpp"
#include "elacu/mesh.hpp"

namespace elacu {

struct Amplitudes {
    double Ee = 0, De = 0;
    double Ef = 0, Df = 0;
    double Et = 0, Dt = 0;
};

struct TableAmplitudes {
    double Et, Dt, Ef, Df;
};

inline TableAmplitudes table_amplitudes(int set_id) {
    if (set_id == 1) return {2.8571, 4.0, 3.3571, 1.0};
    if (set_id == 2) return {-0.25, 1.0, -4.75, 2.0};
    throw MaterialError("unknown material set " + std::to_string(set_id));
}

struct DegenerateParameters : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void elastic_from_fluid(Amplitudes& a, const AcousticParams& f) {
    double beta = f.b / (f.c * f.c);
    a.De = a.Ef - a.Df * beta;
    a.Ee = -a.Df - a.Ef * beta;
}

// Option 2 uses the closed-form choice D = c^2 on both acoustic blocks.
// Option 1 keeps the tabulated fluid pair and derives the elastic pair only.
inline Amplitudes amplitude_solver(TissueOption option, const MaterialParams& m, const TableAmplitudes& table) {
    Amplitudes a;
    if (option == TissueOption::acoustic) {
        const double cf2 = m.f.c * m.f.c, ct2 = m.t_ac.c * m.t_ac.c;
        const double bf = m.f.b, bt = m.t_ac.b;
        const double den = cf2 * bt - ct2 * bf;
        if (std::abs(den) < 1e-14 * (cf2 * std::abs(bt) + ct2 * std::abs(bf) + 1e-300))
            throw DegenerateParameters("amplitude solver: c_f^2 b_t equals c_t^2 b_f");
        a.Dt = ct2;
        a.Df = cf2;
        a.Et = (cf2 * cf2 * ct2 - cf2 * ct2 * ct2 + bf * bf * ct2 - bf * bt * ct2) / den;
        a.Ef = a.Et - bt + bf;
    } else {
        a.Et = table.Et;
        a.Dt = table.Dt;
        a.Ef = table.Ef;
        a.Df = table.Df;
    }
    elastic_from_fluid(a, m.f);
    return a;
}

struct InterfaceResiduals {
    double flux_value, flux_rate;
};

inline InterfaceResiduals option2_flux_residuals(const Amplitudes& a, const MaterialParams& m) {
    double bf = m.f.b / (m.f.c * m.f.c), bt = m.t_ac.b / (m.t_ac.c * m.t_ac.c);
    return {std::abs((a.Ef - bf * a.Df) - (a.Et - bt * a.Dt)), std::abs((a.Df + bf * a.Ef) - (a.Dt + bt * a.Et))};
}

struct TimeAmp {
    double a, da, dda;
};

inline TimeAmp time_amp(double E, double D, double t) {
    double s = std::sin(t), c = std::cos(t);
    double a = E * s + D * c;
    return {a, E * c - D * s, -a};
}

struct ManufacturedCase {
    TissueOption option = TissueOption::acoustic;
    int set_id = 1;
    MaterialParams mat;
    Amplitudes amp;

    bool tissue_elastic() const { return option == TissueOption::elastic; }
    const AcousticParams& acoustic(BlockTag t) const { return t == BlockTag::t ? mat.t_ac : mat.f; }
    const ElasticParams& elastic(BlockTag t) const { return t == BlockTag::t ? mat.t_el : mat.e; }
    TimeAmp acoustic_amp(BlockTag t, double time) const {
        return t == BlockTag::t ? time_amp(amp.Et, amp.Dt, time) : time_amp(amp.Ef, amp.Df, time);
    }
    TimeAmp elastic_amp(double time) const { return time_amp(amp.Ee, amp.De, time); }
};

inline ManufacturedCase make_case(TissueOption option, int set_id, const MaterialParams& mat) {
    ManufacturedCase c;
    c.option = option;
    c.set_id = set_id;
    c.mat = mat;
    c.amp = amplitude_solver(option, mat, table_amplitudes(set_id));
    return c;
}

inline ManufacturedCase make_case(TissueOption option, int set_id) {
    return make_case(option, set_id, material_set(set_id));
}

struct ScalarShape {
    double s;
    Vec3 grad;
    double grad2;
};

inline ScalarShape psi_shape(const Vec3& x) {
    double sx = std::sin(x[0]), cx = std::cos(x[0]);
    double sy = std::sin(x[1]), cy = std::cos(x[1]);
    double sz = std::sin(x[2]), cz = std::cos(x[2]);
    ScalarShape r;
    r.s = cx * cy * sz;
    r.grad = {-sx * cy * sz, -cx * sy * sz, cx * cy * cz};
    r.grad2 = r.grad[0] * r.grad[0] + r.grad[1] * r.grad[1] + r.grad[2] * r.grad[2];
    return r;
}

struct VectorShape {
    Vec3 u;
    Mat3 grad;  // grad[i][j] = d u_i / d x_j
};

inline VectorShape u_shape(const Vec3& x) {
    double sx = std::sin(x[0]), cx = std::cos(x[0]);
    double sy = std::sin(x[1]), cy = std::cos(x[1]);
    double sz = std::sin(x[2]), cz = std::cos(x[2]);
    VectorShape r;
    r.u = {sx * cy * sz, cx * sy * sz, cx * cy * cz};
    r.grad[0] = {cx * cy * sz, -sx * sy * sz, sx * cy * cz};
    r.grad[1] = {-sx * sy * sz, cx * cy * sz, cx * sy * cz};
    r.grad[2] = {-sx * cy * cz, -cx * sy * cz, -cx * cy * sz};
    return r;
}

struct AcousticExact {
    double psi, dpsi, ddpsi;
    Vec3 grad, dgrad;
};

struct ElasticExact {
    Vec3 u, du, ddu;
    Mat3 grad, dgrad;
};

inline AcousticExact exact_acoustic(const ManufacturedCase& c, const Vec3& x, double t, BlockTag tag) {
    auto s = psi_shape(x);
    auto a = c.acoustic_amp(tag, t);
    AcousticExact r;
    r.psi = s.s * a.a;
    r.dpsi = s.s * a.da;
    r.ddpsi = s.s * a.dda;
    for (int k = 0; k < 3; ++k) {
        r.grad[k] = s.grad[k] * a.a;
        r.dgrad[k] = s.grad[k] * a.da;
    }
    return r;
}

inline ElasticExact exact_elastic(const ManufacturedCase& c, const Vec3& x, double t) {
    auto s = u_shape(x);
    auto a = c.elastic_amp(t);
    ElasticExact r;
    for (int i = 0; i < 3; ++i) {
        r.u[i] = s.u[i] * a.a;
        r.du[i] = s.u[i] * a.da;
        r.ddu[i] = s.u[i] * a.dda;
        for (int j = 0; j < 3; ++j) {
            r.grad[i][j] = s.grad[i][j] * a.a;
            r.dgrad[i][j] = s.grad[i][j] * a.da;
        }
    }
    return r;
}

inline Vec3 forcing_elastic(const ManufacturedCase& c, const Vec3& x, double t, BlockTag tag) {
    const ElasticParams& p = c.elastic(tag);
    auto a = c.elastic_amp(t);
    auto s = u_shape(x);
    double common = 2 * p.rho * p.zeta * a.da + p.rho * (p.zeta * p.zeta - 1) * a.a;
    double diag[3] = {p.lambda + 4 * p.mu, p.lambda + 4 * p.mu, 2 * p.mu - p.lambda};
    return {(common + diag[0] * a.a) * s.u[0], (common + diag[1] * a.a) * s.u[1], (common + diag[2] * a.a) * s.u[2]};
}

inline double forcing_acoustic(const ManufacturedCase& c, const Vec3& x, double t, BlockTag tag) {
    const AcousticParams& p = c.acoustic(tag);
    auto a = c.acoustic_amp(tag, t);
    auto s = psi_shape(x);
    double c2 = p.c * p.c;
    return ((3 * c2 - 1) * a.a + 3 * p.b * a.da) * s.s / c2 +
           2 * (p.k1 * s.s * s.s - p.k2 * s.grad2) * a.a * a.da / c2;
}

}  // namespace elacu
