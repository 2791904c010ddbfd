#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "elacu/coupled.hpp"

namespace elacu {

struct AcousticNorms {
    double dpsi2 = 0;        // |psi_t|^2
    double ddpsi2 = 0;       // |psi_tt|^2 at this instant; the time integral is kept by the caller
    double grad_tilde2 = 0;  // broken |grad psi~|^2
    double jump2 = 0;        // chi-weighted jump of psi~ on the acoustic interface
};

struct ElasticNorms {
    double du2 = 0, u2 = 0, eps2 = 0;
    double total() const { return du2 + u2 + eps2; }
};

struct EnergySnapshot {
    double t = 0;
    ElasticNorms elastic;
    AcousticNorms acoustic;
    double ddpsi_integral = 0;
    double acoustic_total() const { return acoustic.dpsi2 + ddpsi_integral + acoustic.grad_tilde2 + acoustic.jump2; }
    double total() const { return elastic.total() + acoustic_total(); }
};

// out = (A2 x A1 x A0) in on an n^3 lattice; A_k are row-major (m x n).
inline void tensor_apply(int m, int n, const double* A0, const double* A1, const double* A2, const double* in,
                         double* out, std::vector<double>& t1, std::vector<double>& t2) {
    t1.assign(static_cast<size_t>(m) * n * n, 0.0);
    t2.assign(static_cast<size_t>(m) * m * n, 0.0);
    for (int c = 0; c < n; ++c)
        for (int b = 0; b < n; ++b)
            for (int r = 0; r < m; ++r) {
                double s = 0;
                for (int a = 0; a < n; ++a) s += A0[r * n + a] * in[a + n * (b + n * c)];
                t1[r + m * (b + n * c)] = s;
            }
    for (int c = 0; c < n; ++c)
        for (int s = 0; s < m; ++s)
            for (int b = 0; b < n; ++b) {
                double w = A1[s * n + b];
                for (int r = 0; r < m; ++r) t2[r + m * (s + m * c)] += w * t1[r + m * (b + n * c)];
            }
    for (int t = 0; t < m; ++t)
        for (int i = 0; i < m * m; ++i) out[i + m * m * t] = 0;
    for (int t = 0; t < m; ++t)
        for (int c = 0; c < n; ++c) {
            double w = A2[t * n + c];
            for (int i = 0; i < m * m; ++i) out[i + m * m * t] += w * t2[i + m * m * c];
        }
}

// Volume quadrature with p+2 GLL points per axis on the axis-aligned blocks.
struct BlockQuadrature {
    const BlockSpace* bs = nullptr;
    int n = 0, m = 0;
    std::vector<double> I, D;  // m x n interpolation and reference derivative
    std::vector<double> w;     // m^3 weights times detJ
    double scale[3] = {0, 0, 0};
    std::vector<Vec3> points;  // physical points, element-major

    explicit BlockQuadrature(const BlockSpace& b) : bs(&b), n(b.p + 1), m(b.p + 2) {
        auto q = gll_rule<double>(m - 1);
        I.resize(m * n);
        D.resize(m * n);
        for (int r = 0; r < m; ++r) lagrange_all(b.rule, q.nodes[r], &I[r * n], &D[r * n]);
        Vec3 h = b.mesh->edge();
        double detJ = h[0] * h[1] * h[2] / 8;
        for (int d = 0; d < 3; ++d) scale[d] = 2 / h[d];
        w.resize(m * m * m);
        for (int c = 0; c < m; ++c)
            for (int bb = 0; bb < m; ++bb)
                for (int a = 0; a < m; ++a) w[a + m * (bb + m * c)] = q.weights[a] * q.weights[bb] * q.weights[c] * detJ;
        const int ne = b.mesh->num_elements();
        points.resize(static_cast<size_t>(ne) * m * m * m);
        for (int e = 0; e < ne; ++e)
            for (int c = 0; c < m; ++c)
                for (int bb = 0; bb < m; ++bb)
                    for (int a = 0; a < m; ++a)
                        points[static_cast<size_t>(e) * m * m * m + a + m * (bb + m * c)] =
                            element_map_eval(*b.mesh, e, {q.nodes[a], q.nodes[bb], q.nodes[c]}).x;
    }
    int per_element() const { return m * m * m; }

    void gather(const Eigen::VectorXd& x, int elem, int comp, std::vector<double>& local) const {
        local.resize(n * n * n);
        for_each_element_node(*bs, elem, [&](int l, int node) { local[l] = x[bs->dof(node, comp)]; });
    }
    void values(const std::vector<double>& local, double* out, std::vector<double>& t1, std::vector<double>& t2) const {
        tensor_apply(m, n, I.data(), I.data(), I.data(), local.data(), out, t1, t2);
    }
    void gradient(const std::vector<double>& local, double* gx, double* gy, double* gz, std::vector<double>& t1,
                  std::vector<double>& t2) const {
        const int M = m * m * m;
        tensor_apply(m, n, D.data(), I.data(), I.data(), local.data(), gx, t1, t2);
        tensor_apply(m, n, I.data(), D.data(), I.data(), local.data(), gy, t1, t2);
        tensor_apply(m, n, I.data(), I.data(), D.data(), local.data(), gz, t1, t2);
        for (int i = 0; i < M; ++i) {
            gx[i] *= scale[0];
            gy[i] *= scale[1];
            gz[i] *= scale[2];
        }
    }
};

// Energy-norm parts of a discrete state, or of (exact - discrete) when a
// manufactured case is attached.
class EnergyNorms {
public:
    EnergyNorms(const Problem& pb, const ManufacturedCase* exact = nullptr) : pb_(pb), exact_(exact) {
        for (const auto& bs : pb.aspace().blocks) aq_.emplace_back(bs);
        for (const auto& bs : pb.espace().blocks) eq_.emplace_back(bs);
        beta_.resize(aq_.size());
        for (size_t i = 0; i < aq_.size(); ++i) {
            const auto& ap = acoustic_of(pb.spec().mat, aq_[i].bs->tag());
            beta_[i] = ap.b / (ap.c * ap.c);
        }
        if (exact_) {
            for (const auto& q : aq_) {
                std::vector<double> s(q.points.size()), g(3 * q.points.size());
                for (size_t i = 0; i < q.points.size(); ++i) {
                    auto sh = psi_shape(q.points[i]);
                    s[i] = sh.s;
                    for (int k = 0; k < 3; ++k) g[3 * i + k] = sh.grad[k];
                }
                ashape_.push_back(std::move(s));
                agrad_.push_back(std::move(g));
            }
            for (const auto& q : eq_) {
                std::vector<double> u(3 * q.points.size()), g(9 * q.points.size());
                for (size_t i = 0; i < q.points.size(); ++i) {
                    auto sh = u_shape(q.points[i]);
                    for (int k = 0; k < 3; ++k) {
                        u[3 * i + k] = sh.u[k];
                        for (int j = 0; j < 3; ++j) g[9 * i + 3 * k + j] = sh.grad[k][j];
                    }
                }
                eshape_.push_back(std::move(u));
                egrad_.push_back(std::move(g));
            }
        }
        build_faces();
    }

    const ManufacturedCase* exact() const { return exact_; }

    AcousticNorms acoustic(const Eigen::VectorXd& psi, const Eigen::VectorXd& dpsi, const Eigen::VectorXd& ddpsi,
                           double t) const {
        AcousticNorms out;
        std::vector<double> l1, l2, t1, t2;
        for (size_t bi = 0; bi < aq_.size(); ++bi) {
            const auto& q = aq_[bi];
            const int M = q.per_element();
            const double beta = beta_[bi];
            TimeAmp amp{0, 0, 0};
            if (exact_) amp = exact_->acoustic_amp(q.bs->tag(), t);
            std::vector<double> v(M), a(M), gx(M), gy(M), gz(M);
            Eigen::VectorXd tilde = psi + beta * dpsi;  // only this block's entries are read
            for (int e = 0; e < q.bs->mesh->num_elements(); ++e) {
                q.gather(dpsi, e, 0, l1);
                q.values(l1, v.data(), t1, t2);
                q.gather(ddpsi, e, 0, l1);
                q.values(l1, a.data(), t1, t2);
                q.gather(tilde, e, 0, l2);
                q.gradient(l2, gx.data(), gy.data(), gz.data(), t1, t2);
                const size_t base = static_cast<size_t>(e) * M;
                for (int i = 0; i < M; ++i) {
                    double ev = -v[i], ea = -a[i], g[3] = {-gx[i], -gy[i], -gz[i]};
                    if (exact_) {
                        double s = ashape_[bi][base + i];
                        ev += s * amp.da;
                        ea += s * amp.dda;
                        for (int k = 0; k < 3; ++k) g[k] += agrad_[bi][3 * (base + i) + k] * (amp.a + beta * amp.da);
                    }
                    out.dpsi2 += q.w[i] * ev * ev;
                    out.ddpsi2 += q.w[i] * ea * ea;
                    out.grad_tilde2 += q.w[i] * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
                }
            }
        }
        out.jump2 = jump(psi, dpsi, t);
        return out;
    }

    ElasticNorms elastic(const Eigen::VectorXd& u, const Eigen::VectorXd& du, double t) const {
        ElasticNorms out;
        std::vector<double> l1, t1, t2;
        TimeAmp amp{0, 0, 0};
        if (exact_) amp = exact_->elastic_amp(t);
        for (size_t bi = 0; bi < eq_.size(); ++bi) {
            const auto& q = eq_[bi];
            const int M = q.per_element();
            std::vector<double> uv(3 * M), dv(3 * M), G(9 * M);
            for (int e = 0; e < q.bs->mesh->num_elements(); ++e) {
                for (int k = 0; k < 3; ++k) {
                    q.gather(u, e, k, l1);
                    q.values(l1, &uv[k * M], t1, t2);
                    q.gradient(l1, &G[(3 * k + 0) * M], &G[(3 * k + 1) * M], &G[(3 * k + 2) * M], t1, t2);
                    q.gather(du, e, k, l1);
                    q.values(l1, &dv[k * M], t1, t2);
                }
                const size_t base = static_cast<size_t>(e) * M;
                for (int i = 0; i < M; ++i) {
                    double eu[3], ed[3], eg[3][3];
                    for (int k = 0; k < 3; ++k) {
                        eu[k] = -uv[k * M + i];
                        ed[k] = -dv[k * M + i];
                        for (int j = 0; j < 3; ++j) eg[k][j] = -G[(3 * k + j) * M + i];
                    }
                    if (exact_) {
                        for (int k = 0; k < 3; ++k) {
                            double s = eshape_[bi][3 * (base + i) + k];
                            eu[k] += s * amp.a;
                            ed[k] += s * amp.da;
                            for (int j = 0; j < 3; ++j) eg[k][j] += egrad_[bi][9 * (base + i) + 3 * k + j] * amp.a;
                        }
                    }
                    double su = 0, sd = 0, se = 0;
                    for (int k = 0; k < 3; ++k) {
                        su += eu[k] * eu[k];
                        sd += ed[k] * ed[k];
                        for (int j = 0; j < 3; ++j) {
                            double eps = 0.5 * (eg[k][j] + eg[j][k]);
                            se += eps * eps;
                        }
                    }
                    out.u2 += q.w[i] * su;
                    out.du2 += q.w[i] * sd;
                    out.eps2 += q.w[i] * se;
                }
            }
        }
        return out;
    }

private:
    struct FacePoint {
        std::vector<int> mdofs, sdofs;
        std::vector<double> mval, sval;
        double weight_chi;
        double s_master, s_slave;  // manufactured shape on either side
        BlockTag mtag, stag;
        double mbeta, sbeta;
    };

    void build_faces() {
        const Interface* itf = pb_.aa_interface();
        if (!itf || !pb_.dg_parts()) return;
        const BlockSpace* ms = pb_.aspace().find_block(itf->master_block);
        const BlockSpace* ss = pb_.aspace().find_block(itf->slave_block);
        TensorBasis tb(pb_.spec().p);
        std::vector<Vec3> rg;
        auto quad = face_quadrature(pb_.mesh(), *itf, pb_.spec().p + 2);
        const auto& chi_unit = pb_.dg_parts()->face_chi_unit;
        double bm = 0, bsl = 0;
        for (size_t i = 0; i < aq_.size(); ++i) {
            if (aq_[i].bs == ms) bm = beta_[i];
            if (aq_[i].bs == ss) bsl = beta_[i];
        }
        for (size_t fi = 0; fi < quad.size(); ++fi)
            for (const auto& qp : quad[fi]) {
                FacePoint f;
                tb.eval(qp.master_ref, f.mval, rg);
                tb.eval(qp.slave_ref, f.sval, rg);
                f.mdofs.resize(tb.size());
                f.sdofs.resize(tb.size());
                for_each_element_node(*ms, qp.master_element, [&](int l, int node) { f.mdofs[l] = ms->dof(node); });
                for_each_element_node(*ss, qp.slave_element, [&](int l, int node) { f.sdofs[l] = ss->dof(node); });
                f.weight_chi = qp.weight * pb_.spec().beta * chi_unit[fi];
                double s = psi_shape(qp.phys).s;
                f.s_master = f.s_slave = s;
                f.mtag = ms->tag();
                f.stag = ss->tag();
                f.mbeta = bm;
                f.sbeta = bsl;
                faces_.push_back(std::move(f));
            }
    }

    double jump(const Eigen::VectorXd& psi, const Eigen::VectorXd& dpsi, double t) const {
        double sum = 0;
        for (const auto& f : faces_) {
            double vm = 0, vs = 0;
            for (size_t l = 0; l < f.mdofs.size(); ++l) vm += f.mval[l] * (psi[f.mdofs[l]] + f.mbeta * dpsi[f.mdofs[l]]);
            for (size_t l = 0; l < f.sdofs.size(); ++l) vs += f.sval[l] * (psi[f.sdofs[l]] + f.sbeta * dpsi[f.sdofs[l]]);
            double j = vs - vm;
            if (exact_) {
                auto am = exact_->acoustic_amp(f.mtag, t), as = exact_->acoustic_amp(f.stag, t);
                j += f.s_master * (am.a + f.mbeta * am.da) - f.s_slave * (as.a + f.sbeta * as.da);
            }
            sum += f.weight_chi * j * j;
        }
        return sum;
    }

    const Problem& pb_;
    const ManufacturedCase* exact_;
    std::vector<BlockQuadrature> aq_, eq_;
    std::vector<double> beta_;
    std::vector<std::vector<double>> ashape_, agrad_, eshape_, egrad_;
    std::vector<FacePoint> faces_;
};

// Running sup over time of the elastic and acoustic energies, with the
// psi_tt time integral kept by the trapezoidal rule.
class LinfEAccumulator {
public:
    void add(double t, const ElasticNorms& e, const AcousticNorms& a) {
        if (have_) integral_ += 0.5 * (t - t_prev_) * (a.ddpsi2 + ddpsi_prev_);
        have_ = true;
        t_prev_ = t;
        ddpsi_prev_ = a.ddpsi2;
        sup_e_ = std::max(sup_e_, e.total());
        double without = a.dpsi2 + a.grad_tilde2 + a.jump2;
        sup_a_ = std::max(sup_a_, without + integral_);
        sup_a_plain_ = std::max(sup_a_plain_, without);
        ++samples_;
    }
    // sqrt(sup E_e^2 + sup E_a^2)
    double value(bool with_integral = true) const {
        return std::sqrt(sup_e_ + (with_integral ? sup_a_ : sup_a_plain_));
    }
    double integral() const { return integral_; }
    int samples() const { return samples_; }

private:
    bool have_ = false;
    double t_prev_ = 0, ddpsi_prev_ = 0, integral_ = 0;
    double sup_e_ = 0, sup_a_ = 0, sup_a_plain_ = 0;
    int samples_ = 0;
};

struct ErrorMeasurement {
    double abs = 0, exact = 0, rel = 0;              // including the psi_tt integral
    double abs_plain = 0, exact_plain = 0, rel_plain = 0;
    int samples = 0;
    RunStats stats;
};

// Runs the manufactured problem and measures the L-infinity-in-time energy
// error every `stride` steps and at the final step.
inline ErrorMeasurement measure_error(const Problem& pb, const TimeConfig& tc, const ManufacturedCase& mc,
                                      int stride = 1, const StepObserver& extra = {}) {
    if (stride < 1) throw std::invalid_argument("sampling stride must be positive");
    ManufacturedData md(pb, mc);
    EnergyNorms norms(pb, &mc);
    LinfEAccumulator err, ex;
    const int steps = tc.num_steps();
    const Eigen::VectorXd ze = Eigen::VectorXd::Zero(pb.espace().size), za = Eigen::VectorXd::Zero(pb.aspace().size);
    ErrorMeasurement out;
    out.stats = run_coupled(pb, tc, md, [&](int k, const CoupledState& s) {
        if (extra) extra(k, s);
        if (k % stride != 0 && k != steps) return;
        err.add(s.t, norms.elastic(s.u, s.du, s.t), norms.acoustic(s.psi, s.dpsi, s.ddpsi, s.t));
        ex.add(s.t, norms.elastic(ze, ze, s.t), norms.acoustic(za, za, za, s.t));
    });
    out.abs = err.value(true);
    out.exact = ex.value(true);
    out.abs_plain = err.value(false);
    out.exact_plain = ex.value(false);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.rel = out.exact > 0 ? out.abs / out.exact : nan;
    out.rel_plain = out.exact_plain > 0 ? out.abs_plain / out.exact_plain : nan;
    out.samples = err.samples();
    return out;
}

inline std::vector<double> convergence_rates(const std::vector<double>& errors, const std::vector<double>& hs) {
    if (errors.size() != hs.size() || errors.size() < 2)
        throw std::invalid_argument("convergence rates need two or more matching errors and mesh sizes");
    for (double e : errors)
        if (!(e > 0)) throw std::invalid_argument("convergence rates need positive errors");
    for (size_t i = 1; i < hs.size(); ++i)
        if (!(hs[i] < hs[i - 1]) || !(hs[i] > 0)) throw std::invalid_argument("mesh sizes must strictly decrease");
    std::vector<double> r;
    for (size_t i = 0; i + 1 < errors.size(); ++i)
        r.push_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
    return r;
}

struct InterpolationError {
    double l2 = 0, h1 = 0;  // h1 is the full norm
};

// Error of the nodal interpolant of the manufactured spatial profile on the
// acoustic blocks of `space`.
inline InterpolationError interpolation_error(const FieldSpace& space) {
    auto coeffs = interpolate(space, [](const Vec3& x, BlockTag, double, double* o) { o[0] = psi_shape(x).s; }, 0);
    Eigen::Map<const Eigen::VectorXd> c(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
    Eigen::VectorXd cv = c;
    double l2 = 0, semi = 0;
    std::vector<double> loc, t1, t2;
    for (const auto& bs : space.blocks) {
        BlockQuadrature q(bs);
        const int M = q.per_element();
        std::vector<double> v(M), gx(M), gy(M), gz(M);
        for (int e = 0; e < bs.mesh->num_elements(); ++e) {
            q.gather(cv, e, 0, loc);
            q.values(loc, v.data(), t1, t2);
            q.gradient(loc, gx.data(), gy.data(), gz.data(), t1, t2);
            for (int i = 0; i < M; ++i) {
                auto sh = psi_shape(q.points[static_cast<size_t>(e) * M + i]);
                double d = sh.s - v[i];
                double g0 = sh.grad[0] - gx[i], g1 = sh.grad[1] - gy[i], g2 = sh.grad[2] - gz[i];
                l2 += q.w[i] * d * d;
                semi += q.w[i] * (g0 * g0 + g1 * g1 + g2 * g2);
            }
        }
    }
    return {std::sqrt(l2), std::sqrt(l2 + semi)};
}

// Discrete energy that the linear scheme does not increase: acoustic part
// weighted by rho_f so that the elasto-acoustic coupling cancels.
inline double discrete_energy(const Problem& pb, const CoupledState& s) {
    const auto& eo = pb.elastic();
    const auto& av = pb.acoustic();
    Eigen::VectorXd tilde = s.psi + av.beta.cwiseProduct(s.dpsi);
    Eigen::VectorXd At = Eigen::VectorXd::Zero(tilde.size());
    pb.apply_acoustic_stiffness(tilde, At, true);
    Eigen::VectorXd Ku = eo.K * s.u;
    double ea = 0.5 * pb.rho_f() * (s.dpsi.dot(av.M.cwiseProduct(s.dpsi)) + tilde.dot(At));
    double ee = 0.5 * (s.du.dot(eo.M.cwiseProduct(s.du)) + s.u.dot(Ku) + s.u.dot(eo.Z.cwiseProduct(s.u)));
    return ea + ee;
}

struct PressureFields {
    Eigen::VectorXd acoustic;  // per acoustic dof
    Eigen::VectorXd elastic;   // per elastic node (espace.size / 3)
};

// p = rho psi_t on acoustic nodes; p = -(lambda + 2 mu / 3) div u on elastic
// nodes, with element-wise nodal derivatives averaged over shared nodes.
inline PressureFields postprocess_pressure(const FieldSpace& aspace, const FieldSpace& espace,
                                           const MaterialParams& mat, const Eigen::VectorXd& dpsi,
                                           const Eigen::VectorXd& u) {
    PressureFields out;
    out.acoustic.resize(aspace.size);
    for (const auto& bs : aspace.blocks) {
        double rho = acoustic_of(mat, bs.tag()).rho;
        for (int d = bs.offset; d < bs.offset + bs.num_dofs(); ++d) out.acoustic[d] = rho * dpsi[d];
    }
    out.elastic = Eigen::VectorXd::Zero(espace.size / 3);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(espace.size / 3);
    for (const auto& bs : espace.blocks) {
        const ElasticParams& ep = elastic_of(mat, bs.tag());
        const double k = ep.lambda + 2 * ep.mu / 3;
        const int n = bs.p + 1;
        auto D = differentiation_matrix(bs.rule);
        Vec3 h = bs.mesh->edge();
        std::vector<int> nodes(n * n * n);
        for (int e = 0; e < bs.mesh->num_elements(); ++e) {
            for_each_element_node(bs, e, [&](int l, int node) { nodes[l] = node; });
            for (int c = 0; c < n; ++c)
                for (int b = 0; b < n; ++b)
                    for (int a = 0; a < n; ++a) {
                        double div = 0;
                        for (int m = 0; m < n; ++m) {
                            div += 2 / h[0] * D[a * n + m] * u[bs.dof(nodes[m + n * (b + n * c)], 0)];
                            div += 2 / h[1] * D[b * n + m] * u[bs.dof(nodes[a + n * (m + n * c)], 1)];
                            div += 2 / h[2] * D[c * n + m] * u[bs.dof(nodes[a + n * (b + n * m)], 2)];
                        }
                        int gi = bs.offset / 3 + nodes[a + n * (b + n * c)];
                        out.elastic[gi] += -k * div;
                        count[gi] += 1;
                    }
        }
    }
    for (Eigen::Index i = 0; i < count.size(); ++i)
        if (count[i] > 0) out.elastic[i] /= count[i];
    return out;
}

}  // namespace elacu
