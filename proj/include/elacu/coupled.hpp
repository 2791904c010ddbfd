#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "elacu/assembly.hpp"
#include "elacu/integrators.hpp"
#include "elacu/manufactured.hpp"

namespace elacu {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InstabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Scheme { partitioned, monolithic };

// How the elastic half-step sees the acoustic traction in the partitioned scheme:
// corrected  predicts with g_n and redoes the elastic update with g_{n+1}
// lagged     uses g_n only (first order in the velocity)
// extrapolated predicts with 2 g_n - g_{n-1}, then corrects
enum class Traction { corrected, lagged, extrapolated };

struct TimeConfig {
    double T = 2 * std::numbers::pi;
    double dt = 2 * std::numbers::pi / 2000;
    Scheme scheme = Scheme::partitioned;
    Traction traction = Traction::corrected;
    NewmarkParams acoustic = NewmarkParams::newmark();
    PicardSettings picard{1e-10, 50};
    double lin_tol = 1e-12;
    int lin_max = 0;  // 0: ten times the number of unknowns
    double mono_tol = 1e-10;
    int mono_max = 30;
    double blowup_factor = 1e6;
    bool matrix_free = true;

    int num_steps() const { return static_cast<int>(std::ceil(T / dt - 1e-9)); }
};

struct ProblemSpec {
    int level = 0;
    bool nonconforming = true;
    int p = 2;
    double beta = 10;
    TissueOption option = TissueOption::acoustic;
    MaterialParams mat = material_set(1);
    double cube = std::numbers::pi;
    double z0 = 0;
    std::vector<SideMask> absorbing;  // per block; sides not held by Dirichlet data
};

// Everything assembled once per mesh level. Spaces keep pointers into the
// mesh, so the object stays where it was built.
class Problem {
public:
    explicit Problem(const ProblemSpec& spec)
        : spec_(spec), mesh_(build_three_cubes(spec.level, spec.nonconforming, spec.cube, spec.z0)) {
        const int be = mesh_.block_index(BlockTag::e), bf = mesh_.block_index(BlockTag::f),
                  bt = mesh_.block_index(BlockTag::t);
        const bool tissue_elastic = spec.option == TissueOption::elastic;
        std::vector<int> eblocks{be}, ablocks{bf};
        (tissue_elastic ? eblocks : ablocks).push_back(bt);
        espace_ = build_field_space(mesh_, spec.p, 3, eblocks);
        aspace_ = build_field_space(mesh_, spec.p, 1, ablocks);

        auto excluded = interface_sides(mesh_);
        std::vector<SideMask> absorbing(mesh_.blocks.size(), SideMask{});
        for (size_t b = 0; b < spec.absorbing.size() && b < absorbing.size(); ++b) absorbing[b] = spec.absorbing[b];
        for (size_t b = 0; b < excluded.size(); ++b)
            for (int s = 0; s < 6; ++s) excluded[b][s] = excluded[b][s] || absorbing[b][s];
        edir_ = dirichlet_dofs(espace_, excluded);
        adir_ = dirichlet_dofs(aspace_, excluded);

        eops_ = assemble_elastic(espace_, spec.mat);
        avol_ = assemble_acoustic_volume(aspace_, spec.mat);
        Babs_ = assemble_absorbing(aspace_, absorbing, spec.mat);
        D_.resize(aspace_.size, aspace_.size);
        std::vector<const Interface*> ea;
        for (const auto& itf : mesh_.interfaces) {
            bool slave_acoustic = aspace_.find_block(itf.slave_block) != nullptr;
            if (slave_acoustic) {
                dg_ = assemble_dg_interface(aspace_, mesh_, itf, spec.p);
                D_ = dg_->combined(spec.beta);
                aa_ = &itf;
            } else {
                ea.push_back(&itf);
            }
        }
        ea_ = ea;
        C_ = assemble_coupling(espace_, aspace_, mesh_, ea, spec.p);
        Ct_ = C_.transpose();
        A_ = avol_.K + D_;
        lap_ = std::make_unique<StructuredLaplacian>(aspace_);
        nonlinear_ = std::make_unique<NonlinearOperator>(aspace_, spec.mat);
        rho_f_ = spec.mat.f.rho;
    }

    Problem(const Problem&) = delete;
    Problem& operator=(const Problem&) = delete;

    const ProblemSpec& spec() const { return spec_; }
    const CoupledMesh& mesh() const { return mesh_; }
    const FieldSpace& espace() const { return espace_; }
    const FieldSpace& aspace() const { return aspace_; }
    const DirichletSet& edir() const { return edir_; }
    const DirichletSet& adir() const { return adir_; }
    const ElasticOperators& elastic() const { return eops_; }
    const AcousticVolume& acoustic() const { return avol_; }
    const SpMat& dg() const { return D_; }
    const std::optional<DgParts>& dg_parts() const { return dg_; }
    const Interface* aa_interface() const { return aa_; }
    const std::vector<const Interface*>& ea_interfaces() const { return ea_; }
    const SpMat& coupling() const { return C_; }
    const SpMat& coupling_t() const { return Ct_; }
    const SpMat& acoustic_stiffness() const { return A_; }
    const Eigen::VectorXd& absorbing() const { return Babs_; }
    const NonlinearOperator& nonlinear() const { return *nonlinear_; }
    double rho_f() const { return rho_f_; }
    bool nonlinear_active() const { return nonlinear_->active(); }
    int n_dofs() const { return espace_.size + aspace_.size; }

    // y += (K_a + D_dg) x
    void apply_acoustic_stiffness(const Eigen::VectorXd& x, Eigen::VectorXd& y, bool matrix_free) const {
        if (matrix_free) {
            lap_->apply_add(x.data(), y.data());
            if (D_.nonZeros() > 0) y += D_ * x;
        } else {
            y += A_ * x;
        }
    }
    Eigen::VectorXd acoustic_stiffness_diagonal() const {
        Eigen::VectorXd d = lap_->diagonal();
        if (D_.nonZeros() > 0) d += Eigen::VectorXd(D_.diagonal());
        return d;
    }

private:
    ProblemSpec spec_;
    CoupledMesh mesh_;
    FieldSpace espace_, aspace_;
    DirichletSet edir_, adir_;
    ElasticOperators eops_;
    AcousticVolume avol_;
    std::optional<DgParts> dg_;
    const Interface* aa_ = nullptr;
    std::vector<const Interface*> ea_;
    SpMat D_, C_, Ct_, A_;
    Eigen::VectorXd Babs_;
    std::unique_ptr<StructuredLaplacian> lap_;
    std::unique_ptr<NonlinearOperator> nonlinear_;
    double rho_f_ = 1;
};

struct CoupledState {
    double t = 0;
    Eigen::VectorXd u, du, ddu;
    Eigen::VectorXd psi, dpsi, ddpsi;
};

// Sources, boundary traces and initial data. Boundary hooks only need to
// write the Dirichlet entries; they start out zero.
class ProblemData {
public:
    virtual ~ProblemData() = default;
    virtual void initial(const Problem& pb, CoupledState& s) const = 0;
    virtual bool has_loads() const { return true; }
    virtual void elastic_load(const Problem&, double, Eigen::VectorXd& F) const { F.setZero(); }
    virtual void acoustic_load(const Problem&, double, Eigen::VectorXd& F) const { F.setZero(); }
    virtual void elastic_boundary(const Problem&, double, Eigen::VectorXd&, Eigen::VectorXd&,
                                  Eigen::VectorXd&) const {}
    virtual void acoustic_boundary(const Problem&, double, Eigen::VectorXd&, Eigen::VectorXd&,
                                   Eigen::VectorXd&) const {}
};

// Homogeneous data with prescribed initial fields.
class InitialValueData : public ProblemData {
public:
    using Init = std::function<void(const Problem&, CoupledState&)>;
    explicit InitialValueData(Init init) : init_(std::move(init)) {}
    void initial(const Problem& pb, CoupledState& s) const override { init_(pb, s); }
    bool has_loads() const override { return false; }

private:
    Init init_;
};

// Manufactured fields: nodal shapes are cached once, time factors per call.
class ManufacturedData : public ProblemData {
public:
    ManufacturedData(const Problem& pb, ManufacturedCase c) : c_(std::move(c)) {
        const auto& es = pb.espace();
        const auto& as = pb.aspace();
        Ue_.resize(es.size);
        coef_idx_e_.resize(es.size);
        for (const auto& bs : es.blocks)
            for (int node = 0; node < bs.num_nodes(); ++node) {
                auto sh = u_shape(bs.node_coord(node));
                for (int k = 0; k < 3; ++k) {
                    Ue_[bs.dof(node, k)] = sh.u[k];
                    coef_idx_e_[bs.dof(node, k)] = (bs.tag() == BlockTag::t ? 3 : 0) + k;
                }
            }
        S_.resize(as.size);
        S2_.resize(as.size);
        G2_.resize(as.size);
        tissue_a_.assign(as.size, 0);
        for (const auto& bs : as.blocks)
            for (int node = 0; node < bs.num_nodes(); ++node) {
                auto sh = psi_shape(bs.node_coord(node));
                int d = bs.dof(node);
                S_[d] = sh.s;
                S2_[d] = sh.s * sh.s;
                G2_[d] = sh.grad2;
                tissue_a_[d] = bs.tag() == BlockTag::t;
            }
        We_ = pb.elastic().W;
        Wa_ = pb.acoustic().W;
    }

    const ManufacturedCase& mcase() const { return c_; }

    void initial(const Problem& pb, CoupledState& s) const override {
        elastic_boundary(pb, s.t, s.u, s.du, s.ddu);
        acoustic_boundary(pb, s.t, s.psi, s.dpsi, s.ddpsi);
    }

    void elastic_load(const Problem&, double t, Eigen::VectorXd& F) const override {
        double coef[6];
        block_coefs(t, c_.elastic(BlockTag::e), coef);
        block_coefs(t, c_.elastic(BlockTag::t), coef + 3);
        F.resize(Ue_.size());
        for (Eigen::Index i = 0; i < F.size(); ++i) F[i] = We_[i] * coef[coef_idx_e_[i]] * Ue_[i];
    }

    void acoustic_load(const Problem&, double t, Eigen::VectorXd& F) const override {
        double lin[2], k1[2], k2[2];
        for (int b = 0; b < 2; ++b) {
            BlockTag tag = b ? BlockTag::t : BlockTag::f;
            const auto& p = c_.acoustic(tag);
            auto a = c_.acoustic_amp(tag, t);
            double c2 = p.c * p.c;
            lin[b] = ((3 * c2 - 1) * a.a + 3 * p.b * a.da) / c2;
            k1[b] = 2 * p.k1 * a.a * a.da / c2;
            k2[b] = -2 * p.k2 * a.a * a.da / c2;
        }
        F.resize(S_.size());
        for (Eigen::Index i = 0; i < F.size(); ++i) {
            int b = tissue_a_[i];
            F[i] = Wa_[i] * (lin[b] * S_[i] + k1[b] * S2_[i] + k2[b] * G2_[i]);
        }
    }

    void elastic_boundary(const Problem&, double t, Eigen::VectorXd& u, Eigen::VectorXd& v,
                          Eigen::VectorXd& a) const override {
        auto ta = c_.elastic_amp(t);
        u = Ue_ * ta.a;
        v = Ue_ * ta.da;
        a = Ue_ * ta.dda;
    }

    void acoustic_boundary(const Problem&, double t, Eigen::VectorXd& psi, Eigen::VectorXd& dpsi,
                           Eigen::VectorXd& ddpsi) const override {
        auto af = c_.acoustic_amp(BlockTag::f, t), at = c_.acoustic_amp(BlockTag::t, t);
        psi.resize(S_.size());
        dpsi.resize(S_.size());
        ddpsi.resize(S_.size());
        for (Eigen::Index i = 0; i < psi.size(); ++i) {
            const TimeAmp& a = tissue_a_[i] ? at : af;
            psi[i] = S_[i] * a.a;
            dpsi[i] = S_[i] * a.da;
            ddpsi[i] = S_[i] * a.dda;
        }
    }

private:
    void block_coefs(double t, const ElasticParams& p, double* out) const {
        auto a = c_.elastic_amp(t);
        double common = 2 * p.rho * p.zeta * a.da + p.rho * (p.zeta * p.zeta - 1) * a.a;
        out[0] = common + (p.lambda + 4 * p.mu) * a.a;
        out[1] = common + (p.lambda + 4 * p.mu) * a.a;
        out[2] = common + (2 * p.mu - p.lambda) * a.a;
    }

    ManufacturedCase c_;
    Eigen::VectorXd Ue_, We_, S_, S2_, G2_, Wa_;
    std::vector<int> coef_idx_e_;
    std::vector<int> tissue_a_;
};

// Jacobi-preconditioned conjugate gradients on the free unknowns; x is the
// warm start and the result.
template <class Op>
int pcg(const Op& apply, const Eigen::VectorXd& inv_diag, const Eigen::VectorXd& b, Eigen::VectorXd& x,
        double tol, int max_iter) {
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero();
        return 0;
    }
    Eigen::VectorXd r(b.size()), z, p, q(b.size());
    q.setZero();
    apply(x, q);
    r = b - q;
    z = inv_diag.cwiseProduct(r);
    p = z;
    double rz = r.dot(z);
    for (int it = 0; it < max_iter; ++it) {
        if (r.norm() <= tol * bnorm) return it;
        q.setZero();
        apply(p, q);
        double pq = p.dot(q);
        if (!(pq > 0)) throw SolverError("conjugate gradients: operator not positive definite");
        double alpha = rz / pq;
        x += alpha * p;
        r -= alpha * q;
        z = inv_diag.cwiseProduct(r);
        double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    if (r.norm() <= tol * bnorm) return max_iter;
    std::ostringstream os;
    os << "conjugate gradients stagnated: relative residual " << r.norm() / bnorm << " after " << max_iter
       << " iterations";
    throw SolverError(os.str());
}

struct RunStats {
    int steps = 0;
    long picard_sweeps = 0;
    long cg_iterations = 0;
    long coupling_sweeps = 0;
    int max_picard = 0;
};

// Time stamps plus thinned snapshots and running integrals of the lumped
// kinetic-type norms.
struct Trajectory {
    int stride = 0;  // 0: no snapshots
    std::vector<double> times;
    std::vector<CoupledState> snapshots;
    std::vector<double> acc_ddpsi;  // int_0^t |psi_tt|^2 (lumped)
    std::vector<double> acc_du;     // int_0^t |u_t|^2 (lumped)
};

using StepObserver = std::function<void(int step, const CoupledState&)>;

class CoupledIntegrator {
public:
    CoupledIntegrator(const Problem& pb, const TimeConfig& tc, const ProblemData& data)
        : pb_(pb), tc_(tc), data_(data) {
        if (!(tc.dt > 0) || !(tc.T > 0) || tc.dt > tc.T * (1 + 1e-12))
            throw std::invalid_argument("time step must satisfy 0 < dt <= T");
        const auto& av = pb.acoustic();
        const int na = pb.aspace().size;
        const double dt = tc.dt, b = tc.acoustic.beta, g = tc.acoustic.gamma;
        am_ = tc.acoustic.alpha_m;
        af_ = tc.acoustic.alpha_f;
        Wc_ = Eigen::VectorXd::Constant(na, dt * dt * b) + dt * g * av.beta;
        Eigen::VectorXd Adiag = pb.acoustic_stiffness_diagonal();
        sdiag_.resize(na);
        for (int i = 0; i < na; ++i)
            sdiag_[i] = (1 - am_) * av.M[i] / Wc_[i] + (1 - af_) * (dt * g * pb.absorbing()[i] / Wc_[i] + Adiag[i]);
        inv_sdiag_ = sdiag_.cwiseInverse();
        for (int d : pb.adir().dofs) inv_sdiag_[d] = 0;
        lin_max_ = tc.lin_max > 0 ? tc.lin_max : 10 * std::max(1, na);
        const auto& eo = pb.elastic();
        elastic_lhs_ = eo.M + 0.5 * dt * eo.C;
        coupled_ = pb.coupling().nonZeros() > 0;
    }

    const RunStats& stats() const { return stats_; }

    CoupledState initial_state() {
        CoupledState s;
        const int ne = pb_.espace().size, na = pb_.aspace().size;
        s.t = 0;
        s.u = s.du = s.ddu = Eigen::VectorXd::Zero(ne);
        s.psi = s.dpsi = s.ddpsi = Eigen::VectorXd::Zero(na);
        data_.initial(pb_, s);
        if (s.u.size() != ne || s.du.size() != ne || s.psi.size() != na || s.dpsi.size() != na)
            throw std::invalid_argument("initial data has the wrong size");
        s.ddu = Eigen::VectorXd::Zero(ne);
        s.ddpsi = Eigen::VectorXd::Zero(na);
        apply_boundary(s.t, s);
        Eigen::VectorXd Fa, Fe;
        load_acoustic(s.t, Fa);
        load_elastic(s.t, Fe);

        // psi_tt(0) from the acoustic equation. The nonlinearity is affine in
        // psi_tt with a diagonal coefficient, so this is a direct solve.
        const auto& av = pb_.acoustic();
        Eigen::VectorXd tilde = s.psi + av.beta.cwiseProduct(s.dpsi);
        Eigen::VectorXd base = Fa - pb_.absorbing().cwiseProduct(s.dpsi);
        if (coupled_) base += pb_.coupling_t() * s.du;
        Eigen::VectorXd At = Eigen::VectorXd::Zero(tilde.size());
        pb_.apply_acoustic_stiffness(tilde, At, tc_.matrix_free);
        base -= At;
        Eigen::VectorXd lhs = av.M;
        if (pb_.nonlinear_active()) {
            Eigen::VectorXd coef;
            pb_.nonlinear().k1_coefficient(s.dpsi, coef);
            pb_.nonlinear().add_gradient_part(s.psi, s.dpsi, base);
            lhs -= coef;
        }
        for (int i : pb_.adir().free) {
            if (!(lhs[i] > 0)) throw StepFailure("initial acoustic acceleration: degenerate nonlinear mass");
            s.ddpsi[i] = base[i] / lhs[i];
        }
        g_prev_ = g_ = interface_load(s);
        const auto& eo = pb_.elastic();
        Ku_ = eo.K * s.u;
        Eigen::VectorXd rhs = Fe - Ku_ - eo.Z.cwiseProduct(s.u) - eo.C.cwiseProduct(s.du) - g_;
        for (int i : pb_.edir().free) s.ddu[i] = rhs[i] / eo.M[i];
        if (af_ != 0.0) R_old_ = acoustic_residual_terms(s, Fa, s.du);
        e0_ = monitor(s);
        source_ref_ = source_scale(Fe, Fa, s);
        return s;
    }

    void step(CoupledState& s) {
        const double dt = tc_.dt, t1 = s.t + dt;
        const auto& eo = pb_.elastic();
        CoupledState n;
        n.t = t1;
        n.u = s.u + dt * s.du + 0.5 * dt * dt * s.ddu;
        Eigen::VectorXd uD, vD, aD;
        boundary_elastic(t1, uD, vD, aD);
        for (int d : pb_.edir().dofs) n.u[d] = uD[d];
        Eigen::VectorXd Fe;
        load_elastic(t1, Fe);
        Ku_ = eo.K * n.u;
        Eigen::VectorXd vh = s.du + 0.5 * dt * s.ddu;
        Eigen::VectorXd base = Fe - Ku_ - eo.Z.cwiseProduct(n.u) - eo.C.cwiseProduct(vh);
        auto elastic_update = [&](const Eigen::VectorXd& g) {
            n.ddu = (base - g).cwiseQuotient(elastic_lhs_);
            n.du = vh + 0.5 * dt * n.ddu;
            for (int d : pb_.edir().dofs) {
                n.ddu[d] = aD[d];
                n.du[d] = vD[d];
            }
        };

        Eigen::VectorXd Fa;
        load_acoustic(t1, Fa);
        Eigen::VectorXd guess = 2 * s.ddpsi - (have_prev_ ? prev_ddpsi_ : s.ddpsi);
        if (!coupled_) {
            elastic_update(Eigen::VectorXd::Zero(n.u.size()));
            acoustic_step(s, n, Fa, guess);
        } else if (tc_.scheme == Scheme::partitioned) {
            Eigen::VectorXd gstar = tc_.traction == Traction::extrapolated ? Eigen::VectorXd(2 * g_ - g_prev_) : g_;
            elastic_update(gstar);
            acoustic_step(s, n, Fa, guess);
            Eigen::VectorXd g1 = interface_load(n);
            if (tc_.traction != Traction::lagged) elastic_update(g1);
            g_prev_ = g_;
            g_ = g1;
        } else {
            Eigen::VectorXd g = 2 * g_ - g_prev_;
            Eigen::VectorXd cv_old;
            bool done = false;
            for (int sweep = 0; sweep < tc_.mono_max; ++sweep) {
                ++stats_.coupling_sweeps;
                elastic_update(g);
                Eigen::VectorXd cv = pb_.coupling_t() * n.du;
                acoustic_step(s, n, Fa, sweep == 0 ? guess : n.ddpsi);
                guess = n.ddpsi;
                Eigen::VectorXd g1 = interface_load(n);
                double dg = (g1 - g).norm() / std::max(g1.norm(), 1e-300);
                double dv = sweep == 0 ? 0.0 : (cv - cv_old).norm() / std::max(cv.norm(), 1e-300);
                bool tiny = (g1 - g).norm() == 0.0;
                g = g1;
                cv_old = cv;
                if (tiny || (sweep > 0 && dg + dv <= tc_.mono_tol)) {
                    elastic_update(g);
                    done = true;
                    break;
                }
            }
            if (!done) throw StepFailure("monolithic coupling iteration did not converge");
            g_prev_ = g_;
            g_ = g;
        }
        prev_ddpsi_ = s.ddpsi;
        have_prev_ = true;
        if (af_ != 0.0) R_old_ = acoustic_residual_terms(n, Fa, n.du);
        check_state(n, Fe, Fa);
        s = std::move(n);
        ++stats_.steps;
    }

    // Quantity watched by the blow-up guard: elastic energy plus lumped
    // acoustic velocity and amplitude norms.
    double monitor(const CoupledState& s) const {
        const auto& eo = pb_.elastic();
        const auto& av = pb_.acoustic();
        return s.du.dot(eo.M.cwiseProduct(s.du)) + s.u.dot(Ku_) + s.u.dot(eo.Z.cwiseProduct(s.u)) +
               s.dpsi.dot(av.M.cwiseProduct(s.dpsi)) + s.psi.dot(av.W.cwiseProduct(s.psi));
    }

private:
    void apply_boundary(double t, CoupledState& s) const {
        Eigen::VectorXd u, v, a;
        boundary_elastic(t, u, v, a);
        for (int d : pb_.edir().dofs) {
            s.u[d] = u[d];
            s.du[d] = v[d];
            s.ddu[d] = a[d];
        }
        boundary_acoustic(t, u, v, a);
        for (int d : pb_.adir().dofs) {
            s.psi[d] = u[d];
            s.dpsi[d] = v[d];
            s.ddpsi[d] = a[d];
        }
    }
    void boundary_elastic(double t, Eigen::VectorXd& u, Eigen::VectorXd& v, Eigen::VectorXd& a) const {
        const int ne = pb_.espace().size;
        u = v = a = Eigen::VectorXd::Zero(ne);
        data_.elastic_boundary(pb_, t, u, v, a);
    }
    void boundary_acoustic(double t, Eigen::VectorXd& u, Eigen::VectorXd& v, Eigen::VectorXd& a) const {
        const int na = pb_.aspace().size;
        u = v = a = Eigen::VectorXd::Zero(na);
        data_.acoustic_boundary(pb_, t, u, v, a);
    }
    void load_elastic(double t, Eigen::VectorXd& F) const {
        F = Eigen::VectorXd::Zero(pb_.espace().size);
        if (data_.has_loads()) data_.elastic_load(pb_, t, F);
    }
    void load_acoustic(double t, Eigen::VectorXd& F) const {
        F = Eigen::VectorXd::Zero(pb_.aspace().size);
        if (data_.has_loads()) data_.acoustic_load(pb_, t, F);
    }

    Eigen::VectorXd interface_load(const CoupledState& s) const {
        if (!coupled_) return Eigen::VectorXd::Zero(pb_.espace().size);
        Eigen::VectorXd w = s.dpsi + pb_.acoustic().beta.cwiseProduct(s.ddpsi);
        return pb_.rho_f() * (pb_.coupling() * w);
    }

    // A psi~ + B psi_t - C^T u_t - N - F at one time level.
    Eigen::VectorXd acoustic_residual_terms(const CoupledState& s, const Eigen::VectorXd& F,
                                            const Eigen::VectorXd& du) const {
        Eigen::VectorXd tilde = s.psi + pb_.acoustic().beta.cwiseProduct(s.dpsi);
        Eigen::VectorXd r = Eigen::VectorXd::Zero(tilde.size());
        pb_.apply_acoustic_stiffness(tilde, r, tc_.matrix_free);
        r += pb_.absorbing().cwiseProduct(s.dpsi) - F;
        if (coupled_) r -= pb_.coupling_t() * du;
        if (pb_.nonlinear_active()) {
            Eigen::VectorXd N;
            pb_.nonlinear().apply(s.psi, s.dpsi, s.ddpsi, N);
            r -= N;
        }
        return r;
    }

    void acoustic_step(const CoupledState& s, CoupledState& n, const Eigen::VectorXd& Fa,
                       const Eigen::VectorXd& guess) {
        const double dt = tc_.dt, b = tc_.acoustic.beta, g = tc_.acoustic.gamma;
        const auto& av = pb_.acoustic();
        const auto& dir = pb_.adir();
        const Eigen::VectorXd& B = pb_.absorbing();
        Eigen::VectorXd P = s.psi + dt * s.dpsi + dt * dt * (0.5 - b) * s.ddpsi;
        Eigen::VectorXd Q = s.dpsi + dt * (1 - g) * s.ddpsi;
        Eigen::VectorXd pD, vD, aD;
        boundary_acoustic(n.t, pD, vD, aD);
        Eigen::VectorXd Z = P + av.beta.cwiseProduct(Q);
        for (int d : dir.dofs) Z[d] = pD[d] + av.beta[d] * vD[d];
        Eigen::VectorXd AZ = Eigen::VectorXd::Zero(Z.size());
        pb_.apply_acoustic_stiffness(Z, AZ, tc_.matrix_free);
        Eigen::VectorXd fixed = -(1 - af_) * (AZ + B.cwiseProduct(Q) - Fa);
        if (coupled_) fixed += (1 - af_) * (pb_.coupling_t() * n.du);
        if (am_ != 0.0) fixed -= am_ * av.M.cwiseProduct(s.ddpsi);
        if (af_ != 0.0) fixed -= af_ * R_old_;

        if (sdiag_part_.size() == 0) {
            sdiag_part_.resize(Z.size());
            for (Eigen::Index i = 0; i < Z.size(); ++i)
                sdiag_part_[i] = (1 - am_) * av.M[i] / Wc_[i] + (1 - af_) * dt * g * B[i] / Wc_[i];
        }
        // The psi_tt-linear part of the nonlinearity enters the operator with
        // its psi_t factor frozen at the current iterate.
        Eigen::VectorXd shift = sdiag_part_, inv_diag = inv_sdiag_, kcoef;
        auto op = [&](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
            pb_.apply_acoustic_stiffness(y, out, tc_.matrix_free);
            out *= (1 - af_);
            out += shift.cwiseProduct(y);
            for (int d : dir.dofs) out[d] = 0;
        };

        Eigen::VectorXd a = guess;
        for (int d : dir.dofs) a[d] = 0;
        Eigen::VectorXd y = Wc_.cwiseProduct(a), rhs;
        auto assemble_state = [&]() {
            n.ddpsi = a;
            n.psi = P + b * dt * dt * a;
            n.dpsi = Q + g * dt * a;
            for (int d : dir.dofs) {
                n.psi[d] = pD[d];
                n.dpsi[d] = vD[d];
                n.ddpsi[d] = aD[d];
            }
        };
        for (int it = 1;; ++it) {
            rhs = fixed;
            if (pb_.nonlinear_active()) {
                assemble_state();
                pb_.nonlinear().k1_coefficient(n.dpsi, kcoef);
                shift = sdiag_part_ - (1 - af_) * kcoef.cwiseQuotient(Wc_);
                inv_diag = (sdiag_ - (1 - af_) * kcoef.cwiseQuotient(Wc_)).cwiseInverse();
                for (int d : dir.dofs) inv_diag[d] = 0;
                for (int i : dir.free)
                    if (!(inv_diag[i] > 0))
                        throw StepFailure("nonlinear acoustic operator lost definiteness at t=" + std::to_string(n.t));
                Eigen::VectorXd grad_part = Eigen::VectorXd::Zero(Z.size());
                pb_.nonlinear().add_gradient_part(n.psi, n.dpsi, grad_part);
                rhs += (1 - af_) * grad_part;
            }
            for (int d : dir.dofs) rhs[d] = 0;
            stats_.cg_iterations += pcg(op, inv_diag, rhs, y, tc_.lin_tol, lin_max_);
            Eigen::VectorXd anew = y.cwiseQuotient(Wc_);
            for (int d : dir.dofs) anew[d] = 0;
            double diff = (anew - a).norm(), ref = std::max(anew.norm(), 1e-300);
            a = anew;
            ++stats_.picard_sweeps;
            if (!pb_.nonlinear_active() || diff <= tc_.picard.tol * ref) {
                stats_.max_picard = std::max(stats_.max_picard, it);
                break;
            }
            if (it >= tc_.picard.max_iter) {
                std::ostringstream os;
                os << "Picard iteration did not converge at t=" << n.t << " (relative update " << diff / ref
                   << " after " << it << " sweeps)";
                throw StepFailure(os.str());
            }
        }
        assemble_state();
    }

    double source_scale(const Eigen::VectorXd& Fe, const Eigen::VectorXd& Fa, const CoupledState& s) const {
        const auto& eo = pb_.elastic();
        const auto& av = pb_.acoustic();
        double f = (Fe.dot(Fe.cwiseQuotient(eo.M)) + Fa.dot(Fa.cwiseQuotient(av.M))) * tc_.T * tc_.T;
        double dirichlet = 0;
        for (int d : pb_.edir().dofs) dirichlet += eo.M[d] * s.du[d] * s.du[d] + (eo.W[d] + eo.Z[d]) * s.u[d] * s.u[d];
        for (int d : pb_.adir().dofs) dirichlet += av.M[d] * s.dpsi[d] * s.dpsi[d] + av.W[d] * s.psi[d] * s.psi[d];
        return f + dirichlet;
    }

    void check_state(const CoupledState& n, const Eigen::VectorXd& Fe, const Eigen::VectorXd& Fa) {
        if (!n.u.allFinite() || !n.du.allFinite() || !n.psi.allFinite() || !n.dpsi.allFinite() ||
            !n.ddpsi.allFinite()) {
            std::ostringstream os;
            os << "non-finite state at step " << stats_.steps + 1 << " (t=" << n.t << ")";
            throw InstabilityError(os.str());
        }
        source_ref_ = std::max(source_ref_, source_scale(Fe, Fa, n));
        double e = monitor(n);
        double bound = tc_.blowup_factor * (e0_ + source_ref_) + 1e-300;
        if (e > bound) {
            std::ostringstream os;
            os << "energy monitor " << e << " exceeds " << tc_.blowup_factor << " x initial+source bound at step "
               << stats_.steps + 1 << "; reduce the time step";
            throw InstabilityError(os.str());
        }
    }

    const Problem& pb_;
    TimeConfig tc_;
    const ProblemData& data_;
    double am_ = 0, af_ = 0;
    Eigen::VectorXd Wc_, sdiag_, inv_sdiag_, sdiag_part_, elastic_lhs_;
    Eigen::VectorXd g_, g_prev_, Ku_, R_old_, prev_ddpsi_;
    bool have_prev_ = false;
    bool coupled_ = false;
    int lin_max_ = 0;
    double e0_ = 0, source_ref_ = 0;
    RunStats stats_;
};

inline RunStats run_coupled(const Problem& pb, const TimeConfig& tc, const ProblemData& data,
                            const StepObserver& observer = {}, Trajectory* traj = nullptr) {
    CoupledIntegrator integ(pb, tc, data);
    CoupledState s = integ.initial_state();
    const int steps = tc.num_steps();
    const auto& We = pb.elastic().W;
    const auto& Wa = pb.acoustic().W;
    auto record = [&](int k, double prev_a, double prev_u) {
        if (!traj) return;
        traj->times.push_back(s.t);
        double ia = s.ddpsi.dot(Wa.cwiseProduct(s.ddpsi)), iu = s.du.dot(We.cwiseProduct(s.du));
        if (k == 0) {
            traj->acc_ddpsi.push_back(0);
            traj->acc_du.push_back(0);
        } else {
            traj->acc_ddpsi.push_back(traj->acc_ddpsi.back() + 0.5 * tc.dt * (prev_a + ia));
            traj->acc_du.push_back(traj->acc_du.back() + 0.5 * tc.dt * (prev_u + iu));
        }
        if (traj->stride > 0 && (k % traj->stride == 0 || k == steps)) traj->snapshots.push_back(s);
    };
    if (traj) {
        traj->times.clear();
        traj->snapshots.clear();
        traj->acc_ddpsi.clear();
        traj->acc_du.clear();
    }
    double pa = 0, pu = 0;
    record(0, 0, 0);
    if (observer) observer(0, s);
    for (int k = 1; k <= steps; ++k) {
        pa = s.ddpsi.dot(Wa.cwiseProduct(s.ddpsi));
        pu = s.du.dot(We.cwiseProduct(s.du));
        integ.step(s);
        record(k, pa, pu);
        if (observer) observer(k, s);
    }
    return integ.stats();
}

}  // namespace elacu
