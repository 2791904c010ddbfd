#pragma once

// Quad-precision reference fields and finite-difference PDE residuals. The
// shapes are typed in again here rather than taken from the library.

#include <quadmath.h>

#include <array>
#include <functional>

namespace oracle {

using q = __float128;
using Point = std::array<q, 4>;  // x, y, z, t

inline q amp(q E, q D, q t) { return E * sinq(t) + D * cosq(t); }

inline q psi(const Point& p, q E, q D) { return cosq(p[0]) * cosq(p[1]) * sinq(p[2]) * amp(E, D, p[3]); }

inline q u_comp(int i, const Point& p, q E, q D) {
    q a = amp(E, D, p[3]);
    switch (i) {
        case 0: return sinq(p[0]) * cosq(p[1]) * sinq(p[2]) * a;
        case 1: return cosq(p[0]) * sinq(p[1]) * sinq(p[2]) * a;
        default: return cosq(p[0]) * cosq(p[1]) * cosq(p[2]) * a;
    }
}

using Fn = std::function<q(const Point&)>;

inline const q kStep = 1e-4Q;

// Fourth-order central first derivative in coordinate v.
inline q d1(const Fn& f, const Point& p, int v, q h = kStep) {
    auto at = [&](q s) {
        Point r = p;
        r[v] += s;
        return f(r);
    };
    return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

inline q d2(const Fn& f, const Point& p, int v, q h = kStep) {
    auto at = [&](q s) {
        Point r = p;
        r[v] += s;
        return f(r);
    };
    return (-at(2 * h) + 16 * at(h) - 30 * at(0) + 16 * at(-h) - at(-2 * h)) / (12 * h * h);
}

inline Fn deriv(const Fn& f, int v) {
    return [f, v](const Point& p) { return d1(f, p, v); };
}

struct AcousticCoefficients {
    q c, b, k1, k2;
};

// c^-2 psi_tt - lap psi - (b/c^2) lap psi_t - (2/c^2)(k1 psi_t psi_tt + k2 grad psi . grad psi_t)
inline q acoustic_lhs(const Fn& psi_fn, const AcousticCoefficients& m, const Point& p) {
    const q c2 = m.c * m.c;
    Fn pt = deriv(psi_fn, 3);
    q ptt = d2(psi_fn, p, 3);
    q lap = 0, lap_t = 0, gg = 0;
    for (int k = 0; k < 3; ++k) {
        lap += d2(psi_fn, p, k);
        lap_t += d2(pt, p, k);
        gg += d1(psi_fn, p, k) * d1(pt, p, k);
    }
    q nonlinear = 2 / c2 * (m.k1 * pt(p) * ptt + m.k2 * gg);
    return ptt / c2 - lap - m.b / c2 * lap_t - nonlinear;
}

struct ElasticCoefficients {
    q rho, lambda, mu, zeta;
};

// rho u_tt + 2 rho zeta u_t + rho zeta^2 u - div sigma(u), component i.
inline std::array<q, 3> elastic_lhs(const std::array<Fn, 3>& u, const ElasticCoefficients& m, const Point& p) {
    q H[3][3][3];  // H[i][j][k] = d_j d_k u_i
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = j; k < 3; ++k) {
                q v = (j == k) ? d2(u[i], p, j) : d1(deriv(u[i], k), p, j);
                H[i][j][k] = H[i][k][j] = v;
            }
    std::array<q, 3> out;
    for (int i = 0; i < 3; ++i) {
        q div_sigma = 0;
        for (int k = 0; k < 3; ++k) div_sigma += m.lambda * H[k][i][k];
        for (int j = 0; j < 3; ++j) div_sigma += m.mu * (H[i][j][j] + H[j][i][j]);
        q ut = d1(u[i], p, 3), utt = d2(u[i], p, 3);
        out[i] = m.rho * utt + 2 * m.rho * m.zeta * ut + m.rho * m.zeta * m.zeta * u[i](p) - div_sigma;
    }
    return out;
}

}  // namespace oracle
