#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "elacu/norms.hpp"
#include "oracles.hpp"

using namespace elacu;
using std::numbers::pi;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
    std::printf("%s criterion %2d: %s | %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
    char b[128];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

ProblemSpec make_spec(int level, int p, TissueOption opt, int set) {
    ProblemSpec s;
    s.level = level;
    s.p = p;
    s.option = opt;
    s.beta = 10;
    s.mat = material_set(set);
    return s;
}

struct Study {
    std::vector<double> errs, hs;
    std::string table;
    double rate = 0;
};

// Relative L-infinity-in-time energy errors on levels 0..levels-1, T = 2 pi,
// dt = 2 pi / 2000, fixed across levels.
Study convergence(TissueOption opt, int set, int p, int levels) {
    Study st;
    TimeConfig tc;
    for (int L = 0; L < levels; ++L) {
        auto t0 = std::chrono::steady_clock::now();
        auto spec = make_spec(L, p, opt, set);
        Problem pb(spec);
        auto mc = make_case(opt, set);
        auto m = measure_error(pb, tc, mc);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        st.errs.push_back(m.rel);
        st.hs.push_back(pb.mesh().h_max());
        char b[160];
        std::snprintf(b, sizeof b, "L%d rel=%.4e (%.0fs) ", L, m.rel, secs);
        st.table += b;
    }
    st.rate = convergence_rates(st.errs, st.hs).back();
    st.table += fmt("rate=%.3f", st.rate);
    return st;
}

void rate_criterion(int id, const std::string& what, TissueOption opt, int set, int p, int levels, double lo, double hi) {
    try {
        Study s = convergence(opt, set, p, levels);
        report(id, s.rate >= lo && s.rate <= hi, what, s.table);
    } catch (const std::exception& e) {
        report(id, false, what, std::string("exception: ") + e.what());
    }
}

void energy_stability() {
    const std::string what = "linear discrete energy <= 1.01 x initial, level 0, p=2, beta=10, T=2pi";
    try {
        double worst = 0;
        for (auto opt : {TissueOption::acoustic, TissueOption::elastic}) {
            auto spec = make_spec(0, 2, opt, 1);
            for (auto* a : {&spec.mat.f, &spec.mat.t_ac}) a->k1 = a->k2 = 0;
            Problem pb(spec);
            InitialValueData init([](const Problem& p, CoupledState& s) {
                auto ps = interpolate(p.aspace(), [](const Vec3& x, BlockTag, double, double* o) { o[0] = psi_shape(x).s; }, 0);
                auto us = interpolate(p.espace(), [](const Vec3& x, BlockTag, double, double* o) {
                    auto u = u_shape(x);
                    for (int k = 0; k < 3; ++k) o[k] = u.u[k];
                }, 0);
                Eigen::Map<Eigen::VectorXd> pv(ps.data(), static_cast<Eigen::Index>(ps.size()));
                Eigen::Map<Eigen::VectorXd> uv(us.data(), static_cast<Eigen::Index>(us.size()));
                s.psi = pv;
                s.dpsi = 0.5 * pv;
                s.u = uv;
                s.du = -0.3 * uv;
            });
            TimeConfig tc;
            double e0 = 0, emax = 0;
            run_coupled(pb, tc, init, [&](int k, const CoupledState& s) {
                double e = discrete_energy(pb, s);
                if (k == 0) e0 = e;
                emax = std::max(emax, e);
            });
            if (!(e0 > 0)) throw std::runtime_error("initial energy is zero");
            worst = std::max(worst, emax / e0);
        }
        report(6, worst <= 1.01, what, fmt("max E(t)/E(0) over both options = %.6f", worst));
    } catch (const std::exception& e) {
        report(6, false, what, std::string("exception: ") + e.what());
    }
}

double min_eig(const Eigen::MatrixXd& A, double* max_eig = nullptr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    if (max_eig) *max_eig = es.eigenvalues()[A.rows() - 1];
    return es.eigenvalues()[0];
}

void penalty_coercivity() {
    const std::string what = "K_a + D_dg: min eig >= -1e-10 max eig at beta=10, monotone in beta";
    bool ok = true;
    std::string detail;
    for (int p = 1; p <= 3; ++p) {
        Problem pb(make_spec(0, p, TissueOption::acoustic, 1));
        Eigen::MatrixXd K = Eigen::MatrixXd(pb.acoustic().K);
        const auto& dg = *pb.dg_parts();
        std::vector<int> freed;
        for (int i = 0; i < pb.aspace().size; ++i)
            if (!pb.adir().mask[i]) freed.push_back(i);
        double prev_full = -1e300, prev_free = -1e300;
        for (double beta : {1.0, 10.0, 100.0}) {
            Eigen::MatrixXd A = K + Eigen::MatrixXd(dg.combined(beta));
            double hi = 0, lo = min_eig(A, &hi);
            Eigen::MatrixXd Af(freed.size(), freed.size());
            for (size_t i = 0; i < freed.size(); ++i)
                for (size_t j = 0; j < freed.size(); ++j) Af(i, j) = A(freed[i], freed[j]);
            double lo_free = min_eig(Af);
            if (beta == 10.0) {
                ok = ok && lo >= -1e-10 * hi;
                detail += fmt("p=%.0f: ", p) + fmt("min/max=%.2e ", lo / hi);
            }
            ok = ok && lo >= prev_full - 1e-12 * hi && lo_free >= prev_free - 1e-12 * hi;
            prev_full = lo;
            prev_free = lo_free;
            detail += fmt("free[b=%g]=", beta) + fmt("%.4e ", lo_free);
        }
    }
    report(7, ok, what, detail);
}

void amplitudes() {
    const std::string what = "amplitudes vs table within 5e-5, Option 1 constraint residuals < 5e-4";
    double worst = 0;
    const double want[2][4] = {{2.8571, 4, 3.3571, 1}, {-0.25, 1, -4.75, 2}};
    for (int s : {1, 2}) {
        auto a = make_case(TissueOption::acoustic, s).amp;
        const double got[4] = {a.Et, a.Dt, a.Ef, a.Df};
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(got[i] - want[s - 1][i]));
    }
    double res = 0;
    for (int s : {1, 2}) {
        auto c = make_case(TissueOption::elastic, s);
        const auto& f = c.mat.f;
        double bf = f.b / (f.c * f.c);
        res = std::max(res, std::abs(c.amp.De - (c.amp.Ef - c.amp.Df * bf)));
        res = std::max(res, std::abs(c.amp.Ee - (-c.amp.Df - c.amp.Ef * bf)));
        // material side of the Option 1 family: lambda - 2 mu + rho_f = 0 in both elastic blocks
        const auto& m = c.mat;
        res = std::max(res, std::abs(m.e.lambda - 2 * m.e.mu + m.f.rho));
        res = std::max(res, std::abs(m.t_el.lambda - 2 * m.t_el.mu + m.f.rho));
    }
    report(8, worst <= 5e-5 && res < 5e-4, what, fmt("max table deviation %.2e", worst) + fmt(", max residual %.2e", res));
}

void interpolation_rates() {
    const std::string what = "interpolation L2 rate p+1 +-0.2, H1 rate p +-0.2, p=1..3, levels 0..2";
    bool ok = true;
    std::string detail;
    for (int p = 1; p <= 3; ++p) {
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
        ok = ok && std::abs(r2 - (p + 1)) <= 0.2 && std::abs(r1 - p) <= 0.2;
        char b[96];
        std::snprintf(b, sizeof b, "p=%d L2 %.3f H1 %.3f; ", p, r2, r1);
        detail += b;
    }
    report(9, ok, what, detail);
}

// a/b with a, b integers
struct Frac {
    long n, d;
};
Frac norm(Frac f) {
    long g = std::gcd(f.n, f.d);
    return {f.n / g, f.d / g};
}
Frac add(Frac a, Frac b) { return norm({a.n * b.d + b.n * a.d, a.d * b.d}); }
Frac mul(Frac a, Frac b) { return norm({a.n * b.n, a.d * b.d}); }
bool same(Frac a, Frac b) { return a.n * b.d == b.n * a.d; }

void integrator_orders() {
    const std::string what = "Newmark and generalized-alpha global order in [1.8, 2.2]; parameter identities exact";
    double rn = std::log2(oracle::implicit_error(NewmarkParams::newmark(), 100) / oracle::implicit_error(NewmarkParams::newmark(), 200));
    double rg = std::log2(oracle::implicit_error(NewmarkParams::genalpha(), 100) / oracle::implicit_error(NewmarkParams::genalpha(), 200));
    // gamma = 1/2 - alpha_m + alpha_f, beta = (1 + alpha_f - alpha_m)^2 / 4 with alpha_m = 0, alpha_f = 1/3
    Frac am{0, 1}, af{1, 3};
    Frac gamma = add(add(Frac{1, 2}, Frac{-am.n, am.d}), af);
    Frac s = add(add(Frac{1, 1}, af), Frac{-am.n, am.d});
    Frac beta = mul(mul(s, s), Frac{1, 4});
    bool ids = same(gamma, {5, 6}) && same(beta, {4, 9});
    auto ga = NewmarkParams::genalpha();
    bool lib = ga.beta == 4.0 / 9.0 && ga.gamma == 5.0 / 6.0 && ga.alpha_m == 0.0 && ga.alpha_f == 1.0 / 3.0;
    bool ok = rn >= 1.8 && rn <= 2.2 && rg >= 1.8 && rg <= 2.2 && ids && lib;
    report(10, ok, what, fmt("newmark %.3f", rn) + fmt(", genalpha %.3f", rg) + (ids && lib ? ", identities hold" : ", identity mismatch"));
}

void gll_rules() {
    const std::string what = "GLL nodes/weights vs Newton-moment oracle to 1e-12, exact to degree 2p-1, p=1..8";
    double dev = 0, exact = 0;
    for (int p = 1; p <= 8; ++p) {
        auto r = gll_rule<double>(p);
        auto o = oracle::gll_rule(p);
        if (static_cast<int>(o.x.size()) != p + 1) dev = 1;
        for (int j = 0; j <= p && j < static_cast<int>(o.x.size()); ++j) {
            dev = std::max(dev, std::abs(r.nodes[j] - (double)o.x[j]));
            dev = std::max(dev, std::abs(r.weights[j] - (double)o.w[j]));
        }
        for (int k = 0; k <= 2 * p - 1; ++k) {
            double q = 0;
            for (int j = 0; j <= p; ++j) q += r.weights[j] * std::pow(r.nodes[j], k);
            exact = std::max(exact, std::abs(q - (k % 2 == 0 ? 2.0 / (k + 1) : 0.0)));
        }
    }
    report(11, dev <= 1e-12 && exact <= 1e-12, what, fmt("max oracle deviation %.2e", dev) + fmt(", max moment error %.2e", exact));
}

void pde_residuals() {
    const std::string what = "manufactured fields satisfy strong equations, 100 samples per block, within 1e-10";
    double worst = 0, field = 0;
    unsigned seed = 100;
    for (int s : {1, 2})
        for (auto opt : {TissueOption::acoustic, TissueOption::elastic}) {
            auto c = make_case(opt, s);
            for (auto tag : {BlockTag::e, BlockTag::f, BlockTag::t}) {
                bool el = tag == BlockTag::e || (tag == BlockTag::t && opt == TissueOption::elastic);
                auto r = oracle::block_residual(c, tag, el, 100, seed++);
                worst = std::max(worst, r.pde);
                field = std::max(field, r.field);
            }
        }
    report(12, worst <= 1e-10 && field <= 1e-12, what, fmt("max residual %.2e", worst) + fmt(", field mismatch %.2e", field));
}

void jumps_and_coupling() {
    const std::string what = "continuous interpolants have zero jump energy (1e-12); v^T C psi = psi^T C^T v";
    double jump = 0, skew = 0;
    for (bool nc : {true, false})
        for (int p = 1; p <= 3; ++p) {
            auto spec = make_spec(1, p, TissueOption::acoustic, 1);
            spec.nonconforming = nc;
            Problem pb(spec);
            // On the 3:2 interface a discrete field is continuous only if its trace
            // lies in both sides' spaces, i.e. Q_p in (x, y); any z dependence is fine.
            auto qp = [p](const Vec3& x, BlockTag, double, double* o) {
                double s = 0;
                for (int i = 0; i <= p; ++i)
                    for (int j = 0; j <= p; ++j) s += std::pow(x[0], i) * std::pow(x[1], j) / (1 + i + 2 * j);
                o[0] = s * std::cos(x[2]);
            };
            auto smooth = [](const Vec3& x, BlockTag, double, double* o) { o[0] = std::sin(x[0]) * std::exp(x[1]) + x[2]; };
            std::vector<std::vector<double>> fields{interpolate(pb.aspace(), qp, 0)};
            if (!nc) fields.push_back(interpolate(pb.aspace(), smooth, 0));
            EnergyNorms n(pb);
            for (auto& v : fields) {
                Eigen::Map<Eigen::VectorXd> psi(v.data(), static_cast<Eigen::Index>(v.size()));
                jump = std::max(jump, std::abs(psi.dot(pb.dg_parts()->penalty * psi)));
                Eigen::VectorXd z = Eigen::VectorXd::Zero(psi.size());
                jump = std::max(jump, n.acoustic(psi, z, z, 0).jump2);
            }
            std::mt19937 gen(p + 10 * nc);
            std::uniform_real_distribution<double> U(-1, 1);
            Eigen::VectorXd ve(pb.espace().size), pa(pb.aspace().size);
            for (auto& x : ve) x = U(gen);
            for (auto& x : pa) x = U(gen);
            double a = ve.dot(pb.coupling() * pa), b = pa.dot(pb.coupling_t() * ve);
            skew = std::max(skew, std::abs(a - b) / std::max(1.0, std::abs(a)));
        }
    report(13, jump <= 1e-12 && skew <= 1e-14, what, fmt("max jump energy %.2e", jump) + fmt(", max relative skew defect %.2e", skew));
}

}  // namespace

// With no arguments every criterion runs; otherwise only the listed numbers.
int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto want = [&](int k) { return only.empty() || only.count(k) > 0; };
    auto t0 = std::chrono::steady_clock::now();
    if (want(1)) rate_criterion(1, "Option 2, set 1, p=2, levels 0-2: rate in [1.75, 2.6]", TissueOption::acoustic, 1, 2, 3, 1.75, 2.6);
    if (want(2)) rate_criterion(2, "Option 1, set 1, p=2, levels 0-2: rate in [1.75, 2.6]", TissueOption::elastic, 1, 2, 3, 1.75, 2.6);
    if (want(3)) rate_criterion(3, "Option 2, set 2, p=2, levels 0-2: rate in [1.75, 2.6]", TissueOption::acoustic, 2, 2, 3, 1.75, 2.6);
    if (want(4)) rate_criterion(4, "Option 2, set 1, p=1, levels 0-2: rate in [0.75, 1.6]", TissueOption::acoustic, 1, 1, 3, 0.75, 1.6);
    if (want(5)) rate_criterion(5, "Option 2, set 1, p=3, levels 0-1: rate >= 2.6", TissueOption::acoustic, 1, 3, 2, 2.6, 1e9);
    if (want(6)) energy_stability();
    if (want(7)) penalty_coercivity();
    if (want(8)) amplitudes();
    if (want(9)) interpolation_rates();
    if (want(10)) integrator_orders();
    if (want(11)) gll_rules();
    if (want(12)) pde_residuals();
    if (want(13)) jumps_and_coupling();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%d criteria failed (%.0f s)\n", failures, secs);
    return failures == 0 ? 0 : 1;
}
