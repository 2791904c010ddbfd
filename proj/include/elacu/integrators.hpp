#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace elacu {

struct StepFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Generalized-alpha family for M a + C v + K d = f; Newmark is alpha_m = alpha_f = 0.
struct NewmarkParams {
    double beta = 0.25;
    double gamma = 0.5;
    double alpha_m = 0.0;
    double alpha_f = 0.0;

    static NewmarkParams newmark(double beta = 0.25, double gamma = 0.5) { return {beta, gamma, 0.0, 0.0}; }
    static NewmarkParams genalpha() { return {4.0 / 9.0, 5.0 / 6.0, 0.0, 1.0 / 3.0}; }

    double gamma_identity() const { return 0.5 - alpha_m + alpha_f; }
    double beta_identity() const { return (1 + alpha_f - alpha_m) * (1 + alpha_f - alpha_m) / 4; }
};

struct SecondOrderState {
    Eigen::VectorXd d, v, a;
    double t = 0;
};

using NonlinearLoad = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& d, const Eigen::VectorXd& v,
                                                    const Eigen::VectorXd& a)>;

struct SecondOrderSystem {
    Eigen::MatrixXd M, C, K;
    NonlinearLoad f;
    bool nonlinear = false;
};

struct PicardSettings {
    double tol = 1e-10;
    int max_iter = 50;
};

inline Eigen::VectorXd initial_acceleration(const SecondOrderSystem& sys, const Eigen::VectorXd& d0,
                                            const Eigen::VectorXd& v0, double t0, const PicardSettings& ps = {}) {
    Eigen::LDLT<Eigen::MatrixXd> M(sys.M);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d0.size());
    for (int it = 0; it < ps.max_iter; ++it) {
        Eigen::VectorXd an = M.solve(sys.f(t0, d0, v0, a) - sys.C * v0 - sys.K * d0);
        double diff = (an - a).norm(), ref = std::max(an.norm(), 1e-300);
        a = an;
        if (!sys.nonlinear || diff <= ps.tol * ref) return a;
    }
    throw StepFailure("initial acceleration: fixed-point iteration did not converge");
}

// One generalized-alpha step with Picard iteration on a state-dependent load.
inline SecondOrderState genalpha_step(const SecondOrderSystem& sys, const SecondOrderState& s, double dt,
                                      const NewmarkParams& np, const PicardSettings& ps = {}, int* iterations = nullptr) {
    const double b = np.beta, g = np.gamma, am = np.alpha_m, af = np.alpha_f;
    const double t1 = s.t + dt;
    Eigen::VectorXd P = s.d + dt * s.v + dt * dt * (0.5 - b) * s.a;
    Eigen::VectorXd Q = s.v + dt * (1 - g) * s.a;
    Eigen::MatrixXd S = (1 - am) * sys.M + (1 - af) * (g * dt * sys.C + b * dt * dt * sys.K);
    Eigen::LDLT<Eigen::MatrixXd> lu(S);
    Eigen::VectorXd f_old = sys.f(s.t, s.d, s.v, s.a);
    Eigen::VectorXd fixed = af * (f_old - sys.C * s.v - sys.K * s.d) - am * sys.M * s.a -
                            (1 - af) * (sys.C * Q + sys.K * P);
    SecondOrderState n;
    n.t = t1;
    n.a = s.a;
    for (int it = 1; it <= ps.max_iter; ++it) {
        Eigen::VectorXd d1 = P + b * dt * dt * n.a, v1 = Q + g * dt * n.a;
        Eigen::VectorXd rhs = fixed + (1 - af) * sys.f(t1, d1, v1, n.a);
        Eigen::VectorXd anew = lu.solve(rhs);
        double diff = (anew - n.a).norm(), ref = std::max(anew.norm(), 1e-300);
        n.a = anew;
        if (!sys.nonlinear || diff <= ps.tol * ref) {
            if (iterations) *iterations = it;
            n.d = P + b * dt * dt * n.a;
            n.v = Q + g * dt * n.a;
            return n;
        }
    }
    throw StepFailure("Picard iteration did not converge within " + std::to_string(ps.max_iter) + " sweeps");
}

inline SecondOrderState newmark_step(const SecondOrderSystem& sys, const SecondOrderState& s, double dt,
                                     double beta = 0.25, double gamma = 0.5, const PicardSettings& ps = {},
                                     int* iterations = nullptr) {
    return genalpha_step(sys, s, dt, NewmarkParams::newmark(beta, gamma), ps, iterations);
}

// Explicit leapfrog in velocity form for a diagonal mass; damping enters
// through the trapezoidal velocity, which keeps the update explicit.
struct DiagonalSystem {
    Eigen::VectorXd M, C;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> stiffness;
    std::function<Eigen::VectorXd(double)> load;
};

inline SecondOrderState leapfrog_step(const DiagonalSystem& sys, const SecondOrderState& s, double dt) {
    SecondOrderState n;
    n.t = s.t + dt;
    n.d = s.d + dt * s.v + 0.5 * dt * dt * s.a;
    Eigen::VectorXd vh = s.v + 0.5 * dt * s.a;
    Eigen::VectorXd rhs = sys.load(n.t) - sys.stiffness(n.d) - sys.C.cwiseProduct(vh);
    n.a = rhs.cwiseQuotient(sys.M + 0.5 * dt * sys.C);
    n.v = vh + 0.5 * dt * n.a;
    return n;
}

}  // namespace elacu
