#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace elacu {

template <class Real = double>
struct GllRule {
    int p = 0;
    std::vector<Real> nodes;
    std::vector<Real> weights;
};

// Legendre P_n(x) together with P_{n-1}(x), by the three-term recurrence.
template <class Real>
inline void legendre_pair(int n, Real x, Real& pn, Real& pnm1) {
    Real p0 = 1, p1 = x;
    if (n == 0) {
        pn = 1;
        pnm1 = 0;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        Real p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    pn = p1;
    pnm1 = p0;
}

template <class Real = double>
GllRule<Real> gll_rule(int p) {
    if (p < 1 || p > 12)
        throw std::invalid_argument("gll_rule: degree " + std::to_string(p) + " outside [1,12]");
    GllRule<Real> r;
    r.p = p;
    r.nodes.resize(p + 1);
    r.weights.resize(p + 1);
    const Real pi = std::numbers::pi_v<Real>;
    // Newton on q(x) = x P_p - P_{p-1}, which is proportional to (1-x^2) P_p'(x);
    // q'(x) = (p+1) P_p(x).
    for (int j = 0; j <= p; ++j) {
        Real x = -std::cos(pi * j / p);
        for (int it = 0; it < 100; ++it) {
            Real pn, pm;
            legendre_pair(p, x, pn, pm);
            Real dx = (x * pn - pm) / ((p + 1) * pn);
            x -= dx;
            if (std::abs(dx) < Real(1e-15)) break;
        }
        r.nodes[j] = x;
    }
    for (int j = 0; j <= p / 2; ++j) {
        Real s = (r.nodes[p - j] - r.nodes[j]) / 2;
        r.nodes[j] = -s;
        r.nodes[p - j] = s;
    }
    if (p % 2 == 0) r.nodes[p / 2] = 0;
    r.nodes[0] = -1;
    r.nodes[p] = 1;
    for (int j = 0; j <= p; ++j) {
        Real pn, pm;
        legendre_pair(p, r.nodes[j], pn, pm);
        r.weights[j] = Real(2) / (p * (p + 1) * pn * pn);
    }
    return r;
}

// Gauss-Legendre rule with n points on [-1,1]; used for interface integrals.
inline GllRule<double> gauss_rule(int n) {
    if (n < 1 || n > 40) throw std::invalid_argument("gauss_rule: point count out of range");
    GllRule<double> r;
    r.p = n;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = -std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pn = 0, pm = 0;
        for (int it = 0; it < 100; ++it) {
            legendre_pair(n, x, pn, pm);
            double dp = n * (x * pn - pm) / (x * x - 1);
            double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        legendre_pair(n, x, pn, pm);
        double dp = n * (x * pn - pm) / (x * x - 1);
        r.nodes[i] = x;
        r.weights[i] = 2.0 / ((1 - x * x) * dp * dp);
    }
    return r;
}

struct LagrangeValue {
    double value;
    double derivative;
};

template <class Real>
LagrangeValue lagrange_eval(const GllRule<Real>& rule, int i, double x) {
    const auto& xs = rule.nodes;
    const int n = static_cast<int>(xs.size());
    double v = 1.0;
    for (int m = 0; m < n; ++m)
        if (m != i) v *= (x - double(xs[m])) / double(xs[i] - xs[m]);
    double d = 0.0;
    for (int k = 0; k < n; ++k) {
        if (k == i) continue;
        double term = 1.0 / double(xs[i] - xs[k]);
        for (int m = 0; m < n; ++m)
            if (m != i && m != k) term *= (x - double(xs[m])) / double(xs[i] - xs[m]);
        d += term;
    }
    return {v, d};
}

// Row q holds the derivatives of all basis functions at node q.
inline std::vector<double> differentiation_matrix(const GllRule<double>& rule) {
    const int n = rule.p + 1;
    std::vector<double> D(n * n);
    for (int q = 0; q < n; ++q)
        for (int j = 0; j < n; ++j) D[q * n + j] = lagrange_eval(rule, j, rule.nodes[q]).derivative;
    return D;
}

// Values and derivatives of all 1-D basis functions at a point.
inline void lagrange_all(const GllRule<double>& rule, double x, double* val, double* der) {
    const int n = rule.p + 1;
    for (int j = 0; j < n; ++j) {
        auto lv = lagrange_eval(rule, j, x);
        val[j] = lv.value;
        if (der) der[j] = lv.derivative;
    }
}

// Tensor basis on [-1,1]^3, index j = a + (p+1)(b + (p+1)c).
struct TensorBasis {
    int p;
    GllRule<double> rule;

    explicit TensorBasis(int degree) : p(degree), rule(gll_rule<double>(degree)) {}

    int size() const { return (p + 1) * (p + 1) * (p + 1); }

    void eval(const std::array<double, 3>& xi, std::vector<double>& values,
              std::vector<std::array<double, 3>>& grads) const {
        const int n = p + 1;
        std::vector<double> v[3], d[3];
        for (int k = 0; k < 3; ++k) {
            v[k].resize(n);
            d[k].resize(n);
            lagrange_all(rule, xi[k], v[k].data(), d[k].data());
        }
        values.resize(size());
        grads.resize(size());
        for (int c = 0; c < n; ++c)
            for (int b = 0; b < n; ++b)
                for (int a = 0; a < n; ++a) {
                    int j = a + n * (b + n * c);
                    values[j] = v[0][a] * v[1][b] * v[2][c];
                    grads[j] = {d[0][a] * v[1][b] * v[2][c], v[0][a] * d[1][b] * v[2][c],
                                v[0][a] * v[1][b] * d[2][c]};
                }
    }
};

struct TensorEval {
    std::vector<double> values;
    std::vector<std::array<double, 3>> gradients;
};

inline TensorEval tensor_shape_eval(int p, const std::array<double, 3>& xi) {
    TensorBasis tb(p);
    TensorEval out;
    tb.eval(xi, out.values, out.gradients);
    return out;
}

}  // namespace elacu
