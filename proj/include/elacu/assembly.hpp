#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "elacu/dofs.hpp"
#include "elacu/gll.hpp"
#include "elacu/materials.hpp"
#include "elacu/mesh.hpp"

namespace elacu {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const ElasticParams& elastic_of(const MaterialParams& m, BlockTag t) { return t == BlockTag::t ? m.t_el : m.e; }
inline const AcousticParams& acoustic_of(const MaterialParams& m, BlockTag t) {
    return t == BlockTag::t ? m.t_ac : m.f;
}

// Reference-element data at the GLL nodes of one element; blocks are
// structured, so every element of a block shares it.
struct ElementGeometry {
    int p = 1;
    int n = 2;
    std::vector<double> wdet;                      // w_q detJ_q
    std::vector<std::vector<Vec3>> grad;           // grad[q][i]: physical gradient of phi_i at node q
};

inline ElementGeometry element_geometry(const BlockSpace& bs, int elem = 0) {
    ElementGeometry g;
    g.p = bs.p;
    g.n = bs.p + 1;
    const int N = g.n * g.n * g.n;
    TensorBasis tb(bs.p);
    g.wdet.resize(N);
    g.grad.assign(N, std::vector<Vec3>(N));
    std::vector<double> vals;
    std::vector<Vec3> rg;
    for (int c = 0; c < g.n; ++c)
        for (int b = 0; b < g.n; ++b)
            for (int a = 0; a < g.n; ++a) {
                int q = a + g.n * (b + g.n * c);
                Vec3 xi{tb.rule.nodes[a], tb.rule.nodes[b], tb.rule.nodes[c]};
                auto em = element_map_eval(*bs.mesh, elem, xi);
                Mat3 inv = inverse3(em.J);
                g.wdet[q] = tb.rule.weights[a] * tb.rule.weights[b] * tb.rule.weights[c] * em.detJ;
                tb.eval(xi, vals, rg);
                for (int i = 0; i < N; ++i)
                    for (int k = 0; k < 3; ++k)
                        g.grad[q][i][k] = inv[0][k] * rg[i][0] + inv[1][k] * rg[i][1] + inv[2][k] * rg[i][2];
            }
    return g;
}

template <class F>
inline void for_each_element_node(const BlockSpace& bs, int elem, F&& f) {
    const int n = bs.p + 1;
    for (int c = 0; c < n; ++c)
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a) f(a + n * (b + n * c), bs.elem_node(elem, a, b, c));
}

// Unweighted lumped mass sum_q w_q detJ_q per node, replicated over components.
inline Eigen::VectorXd lumped_mass(const FieldSpace& space) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(space.size);
    for (const auto& bs : space.blocks) {
        auto g = element_geometry(bs);
        for (int e = 0; e < bs.mesh->num_elements(); ++e)
            for_each_element_node(bs, e, [&](int q, int node) {
                for (int c = 0; c < bs.comps; ++c) m[bs.dof(node, c)] += g.wdet[q];
            });
    }
    return m;
}

struct ElasticOperators {
    Eigen::VectorXd M, C, Z, W;
    SpMat K;
};

inline ElasticOperators assemble_elastic(const FieldSpace& space, const MaterialParams& mat) {
    ElasticOperators ops;
    ops.W = lumped_mass(space);
    ops.M.resize(space.size);
    ops.C.resize(space.size);
    ops.Z.resize(space.size);
    Triplets trip;
    for (const auto& bs : space.blocks) {
        const ElasticParams& ep = elastic_of(mat, bs.tag());
        auto g = element_geometry(bs);
        const int N = g.n * g.n * g.n;
        Eigen::MatrixXd Kl = Eigen::MatrixXd::Zero(3 * N, 3 * N);
        for (int q = 0; q < N; ++q) {
            const double w = g.wdet[q];
            for (int i = 0; i < N; ++i) {
                const Vec3& Gi = g.grad[q][i];
                for (int j = 0; j < N; ++j) {
                    const Vec3& Gj = g.grad[q][j];
                    double dot = Gi[0] * Gj[0] + Gi[1] * Gj[1] + Gi[2] * Gj[2];
                    for (int al = 0; al < 3; ++al)
                        for (int be = 0; be < 3; ++be) {
                            double v = ep.lambda * Gi[al] * Gj[be] + ep.mu * Gi[be] * Gj[al];
                            if (al == be) v += ep.mu * dot;
                            Kl(3 * i + al, 3 * j + be) += w * v;
                        }
                }
            }
        }
        std::vector<int> map(3 * N);
        for (int e = 0; e < bs.mesh->num_elements(); ++e) {
            for_each_element_node(bs, e, [&](int l, int node) {
                for (int c = 0; c < 3; ++c) map[3 * l + c] = bs.dof(node, c);
            });
            for (int i = 0; i < 3 * N; ++i)
                for (int j = 0; j < 3 * N; ++j)
                    if (Kl(i, j) != 0.0) trip.emplace_back(map[i], map[j], Kl(i, j));
        }
        for (int d = bs.offset; d < bs.offset + bs.num_dofs(); ++d) {
            ops.M[d] = ep.rho * ops.W[d];
            ops.C[d] = 2 * ep.rho * ep.zeta * ops.W[d];
            ops.Z[d] = ep.rho * ep.zeta * ep.zeta * ops.W[d];
        }
    }
    ops.K.resize(space.size, space.size);
    ops.K.setFromTriplets(trip.begin(), trip.end());
    return ops;
}

struct AcousticVolume {
    Eigen::VectorXd M, W, beta;  // beta = b / c^2 per dof
    SpMat K;
};

inline AcousticVolume assemble_acoustic_volume(const FieldSpace& space, const MaterialParams& mat) {
    AcousticVolume av;
    av.W = lumped_mass(space);
    av.M.resize(space.size);
    av.beta.resize(space.size);
    Triplets trip;
    for (const auto& bs : space.blocks) {
        const AcousticParams& ap = acoustic_of(mat, bs.tag());
        auto g = element_geometry(bs);
        const int N = g.n * g.n * g.n;
        Eigen::MatrixXd Kl = Eigen::MatrixXd::Zero(N, N);
        for (int q = 0; q < N; ++q)
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) {
                    const Vec3 &Gi = g.grad[q][i], &Gj = g.grad[q][j];
                    Kl(i, j) += g.wdet[q] * (Gi[0] * Gj[0] + Gi[1] * Gj[1] + Gi[2] * Gj[2]);
                }
        std::vector<int> map(N);
        for (int e = 0; e < bs.mesh->num_elements(); ++e) {
            for_each_element_node(bs, e, [&](int l, int node) { map[l] = bs.dof(node); });
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j)
                    if (Kl(i, j) != 0.0) trip.emplace_back(map[i], map[j], Kl(i, j));
        }
        for (int d = bs.offset; d < bs.offset + bs.num_dofs(); ++d) {
            av.M[d] = av.W[d] / (ap.c * ap.c);
            av.beta[d] = ap.b / (ap.c * ap.c);
        }
    }
    av.K.resize(space.size, space.size);
    av.K.setFromTriplets(trip.begin(), trip.end());
    return av;
}

// Basis values and physical gradients of one element at a reference point.
struct ElementTrace {
    std::vector<double> val;
    std::vector<Vec3> grad;
};

inline ElementTrace element_trace(const BlockSpace& bs, const TensorBasis& tb, int elem, const Vec3& xi) {
    ElementTrace t;
    std::vector<Vec3> rg;
    tb.eval(xi, t.val, rg);
    auto em = element_map_eval(*bs.mesh, elem, xi);
    Mat3 inv = inverse3(em.J);
    t.grad.resize(rg.size());
    for (size_t i = 0; i < rg.size(); ++i)
        for (int k = 0; k < 3; ++k)
            t.grad[i][k] = inv[0][k] * rg[i][0] + inv[1][k] * rg[i][1] + inv[2][k] * rg[i][2];
    return t;
}

inline double penalty_chi(double beta, int p, double hF) { return beta * p * p / hF; }

// h_F: smallest slave diameter among slave elements overlapping the face.
inline double face_h(const CoupledMesh& mesh, const Interface& itf, const MasterFace& f) {
    double h = 1e300;
    for (const auto& o : f.overlaps) h = std::min(h, element_diameter(mesh.blocks[itf.slave_block], o.slave_element));
    return h;
}

// Symmetric interior-penalty terms on an acoustic-acoustic interface, split
// as flux part plus beta times the unit penalty part.
struct DgParts {
    SpMat flux;
    SpMat penalty;  // assembled with chi / beta = p^2 / h_F
    std::vector<double> face_chi_unit;
    SpMat combined(double beta) const { return flux + beta * penalty; }
};

inline DgParts assemble_dg_interface(const FieldSpace& space, const CoupledMesh& mesh, const Interface& itf, int p) {
    const BlockSpace* ms = space.find_block(itf.master_block);
    const BlockSpace* ss = space.find_block(itf.slave_block);
    if (!ms || !ss) throw AssemblyError("dG interface needs acoustic spaces on both sides");
    TensorBasis tb(p);
    const int N = tb.size();
    auto quad = face_quadrature(mesh, itf, p + 2);
    Triplets tf, tp;
    DgParts out;
    std::vector<int> mapm(N), maps(N);
    for (size_t fi = 0; fi < itf.faces.size(); ++fi) {
        const auto& face = itf.faces[fi];
        if (face.overlaps.empty()) throw AssemblyError("master face without slave pairing");
        const double chi_unit = double(p) * p / face_h(mesh, itf, face);
        out.face_chi_unit.push_back(chi_unit);
        for_each_element_node(*ms, face.element, [&](int l, int node) { mapm[l] = ms->dof(node); });
        // Group quadrature points by slave element.
        std::vector<int> slaves;
        for (const auto& q : quad[fi])
            if (std::find(slaves.begin(), slaves.end(), q.slave_element) == slaves.end())
                slaves.push_back(q.slave_element);
        for (int se : slaves) {
            for_each_element_node(*ss, se, [&](int l, int node) { maps[l] = ss->dof(node); });
            Eigen::MatrixXd Lf = Eigen::MatrixXd::Zero(2 * N, 2 * N), Lp = Eigen::MatrixXd::Zero(2 * N, 2 * N);
            Eigen::VectorXd J(2 * N), G(2 * N);
            for (const auto& q : quad[fi]) {
                if (q.slave_element != se) continue;
                auto tm = element_trace(*ms, tb, q.master_element, q.master_ref);
                auto ts = element_trace(*ss, tb, q.slave_element, q.slave_ref);
                const Vec3& n = q.normal_master;
                for (int i = 0; i < N; ++i) {
                    J[i] = tm.val[i];
                    J[N + i] = -ts.val[i];
                    G[i] = 0.5 * (tm.grad[i][0] * n[0] + tm.grad[i][1] * n[1] + tm.grad[i][2] * n[2]);
                    G[N + i] = 0.5 * (ts.grad[i][0] * n[0] + ts.grad[i][1] * n[1] + ts.grad[i][2] * n[2]);
                }
                Lf.noalias() -= q.weight * (J * G.transpose() + G * J.transpose());
                Lp.noalias() += q.weight * chi_unit * (J * J.transpose());
            }
            auto gidx = [&](int i) { return i < N ? mapm[i] : maps[i - N]; };
            for (int i = 0; i < 2 * N; ++i)
                for (int j = 0; j < 2 * N; ++j) {
                    if (Lf(i, j) != 0.0) tf.emplace_back(gidx(i), gidx(j), Lf(i, j));
                    if (Lp(i, j) != 0.0) tp.emplace_back(gidx(i), gidx(j), Lp(i, j));
                }
        }
    }
    out.flux.resize(space.size, space.size);
    out.penalty.resize(space.size, space.size);
    out.flux.setFromTriplets(tf.begin(), tf.end());
    out.penalty.setFromTriplets(tp.begin(), tp.end());
    return out;
}

// (C)_{ij} = int_Gamma phi^a_j (n^e . phi^e_i); rows elastic dofs, columns acoustic dofs.
inline SpMat assemble_coupling(const FieldSpace& espace, const FieldSpace& aspace, const CoupledMesh& mesh,
                               const std::vector<const Interface*>& interfaces, int p) {
    TensorBasis tb(p);
    const int N = tb.size();
    Triplets trip;
    for (const Interface* itf : interfaces) {
        const BlockSpace* as = aspace.find_block(itf->master_block);
        const BlockSpace* es = espace.find_block(itf->slave_block);
        if (!as || !es) throw AssemblyError("coupling interface lacks an acoustic master or elastic slave");
        auto quad = face_quadrature(mesh, *itf, p + 2);
        std::vector<int> mapa(N), mape(N);
        for (size_t fi = 0; fi < itf->faces.size(); ++fi) {
            if (itf->faces[fi].overlaps.empty()) throw AssemblyError("master face without slave pairing");
            for_each_element_node(*as, itf->faces[fi].element, [&](int l, int node) { mapa[l] = as->dof(node); });
            int last_slave = -1;
            Eigen::MatrixXd L;
            auto flush = [&]() {
                if (last_slave < 0) return;
                for (int i = 0; i < 3 * N; ++i)
                    for (int j = 0; j < N; ++j)
                        if (L(i, j) != 0.0) trip.emplace_back(es->dof(mape[i / 3], i % 3), mapa[j], L(i, j));
            };
            for (const auto& q : quad[fi]) {
                if (q.slave_element != last_slave) {
                    flush();
                    last_slave = q.slave_element;
                    for_each_element_node(*es, last_slave, [&](int l, int node) { mape[l] = node; });
                    L = Eigen::MatrixXd::Zero(3 * N, N);
                }
                std::vector<double> va, ve;
                std::vector<Vec3> g;
                tb.eval(q.master_ref, va, g);
                tb.eval(q.slave_ref, ve, g);
                Vec3 ne{-q.normal_master[0], -q.normal_master[1], -q.normal_master[2]};
                for (int i = 0; i < N; ++i) {
                    if (ve[i] == 0.0) continue;
                    for (int al = 0; al < 3; ++al) {
                        if (ne[al] == 0.0) continue;
                        for (int j = 0; j < N; ++j) L(3 * i + al, j) += q.weight * ve[i] * ne[al] * va[j];
                    }
                }
            }
            flush();
        }
    }
    SpMat C(espace.size, aspace.size);
    C.setFromTriplets(trip.begin(), trip.end());
    return C;
}

// Nodal collocation of (2/c^2)(k1 psi_t psi_tt + k2 grad psi . grad psi_t) tested with phi_j.
inline Eigen::VectorXd assemble_nonlinear_rhs(const FieldSpace& space, const MaterialParams& mat,
                                              const Eigen::VectorXd& psi, const Eigen::VectorXd& dpsi,
                                              const Eigen::VectorXd& ddpsi) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(space.size);
    for (const auto& bs : space.blocks) {
        const AcousticParams& ap = acoustic_of(mat, bs.tag());
        const double c2 = ap.c * ap.c;
        if (ap.k1 == 0.0 && ap.k2 == 0.0) continue;
        auto g = element_geometry(bs);
        const int N = g.n * g.n * g.n;
        std::vector<int> map(N);
        for (int e = 0; e < bs.mesh->num_elements(); ++e) {
            for_each_element_node(bs, e, [&](int l, int node) { map[l] = bs.dof(node); });
            for (int q = 0; q < N; ++q) {
                double val = ap.k1 * dpsi[map[q]] * ddpsi[map[q]];
                if (ap.k2 != 0.0) {
                    Vec3 gp{0, 0, 0}, gd{0, 0, 0};
                    for (int i = 0; i < N; ++i)
                        for (int k = 0; k < 3; ++k) {
                            gp[k] += g.grad[q][i][k] * psi[map[i]];
                            gd[k] += g.grad[q][i][k] * dpsi[map[i]];
                        }
                    val += ap.k2 * (gp[0] * gd[0] + gp[1] * gd[1] + gp[2] * gd[2]);
                }
                out[map[q]] += 2.0 / c2 * val * g.wdet[q];
            }
        }
    }
    return out;
}

// Same collocated quadrature as assemble_nonlinear_rhs, with element gradients
// by sum factorization; this is what the time loop calls every Picard sweep.
class NonlinearOperator {
public:
    NonlinearOperator(const FieldSpace& space, const MaterialParams& mat) : space_(&space) {
        W_ = lumped_mass(space);
        for (const auto& bs : space.blocks) {
            const AcousticParams& ap = acoustic_of(mat, bs.tag());
            Block b;
            b.bs = &bs;
            b.c2 = ap.c * ap.c;
            b.k1 = ap.k1;
            b.k2 = ap.k2;
            Vec3 h = bs.mesh->edge();
            for (int d = 0; d < 3; ++d) b.scale[d] = 2 / h[d];
            auto g = element_geometry(bs);
            b.wdet = g.wdet;
            b.D = differentiation_matrix(bs.rule);
            if (b.k1 != 0.0 || b.k2 != 0.0) active_ = true;
            blocks_.push_back(std::move(b));
        }
    }

    bool active() const { return active_; }

    void apply(const Eigen::VectorXd& psi, const Eigen::VectorXd& dpsi, const Eigen::VectorXd& ddpsi,
               Eigen::VectorXd& out) const {
        k1_coefficient(dpsi, out);
        out.array() *= ddpsi.array();
        add_gradient_part(psi, dpsi, out);
    }

    // Diagonal of the psi_tt-linear part: (2 k1 / c^2) psi_t W.
    void k1_coefficient(const Eigen::VectorXd& dpsi, Eigen::VectorXd& out) const {
        out.setZero(space_->size);
        for (const auto& b : blocks_) {
            const BlockSpace& bs = *b.bs;
            if (b.k1 != 0.0)
                for (int i = bs.offset; i < bs.offset + bs.num_dofs(); ++i) out[i] = 2 * b.k1 / b.c2 * dpsi[i] * W_[i];
        }
    }

    // out += (2 k2 / c^2) grad psi . grad psi_t, collocated.
    void add_gradient_part(const Eigen::VectorXd& psi, const Eigen::VectorXd& dpsi, Eigen::VectorXd& out) const {
        for (const auto& b : blocks_) {
            const BlockSpace& bs = *b.bs;
            if (b.k2 == 0.0) continue;
            const int n = bs.p + 1, N = n * n * n;
            std::vector<int> map(N);
            std::vector<double> lp(N), ld(N);
            for (int e = 0; e < bs.mesh->num_elements(); ++e) {
                for_each_element_node(bs, e, [&](int l, int node) { map[l] = bs.dof(node); });
                for (int l = 0; l < N; ++l) {
                    lp[l] = psi[map[l]];
                    ld[l] = dpsi[map[l]];
                }
                for (int c = 0; c < n; ++c)
                    for (int bb = 0; bb < n; ++bb)
                        for (int a = 0; a < n; ++a) {
                            double gp[3] = {0, 0, 0}, gd[3] = {0, 0, 0};
                            for (int m = 0; m < n; ++m) {
                                int ix = m + n * (bb + n * c), iy = a + n * (m + n * c), iz = a + n * (bb + n * m);
                                double dx = b.D[a * n + m], dy = b.D[bb * n + m], dz = b.D[c * n + m];
                                gp[0] += dx * lp[ix];
                                gd[0] += dx * ld[ix];
                                gp[1] += dy * lp[iy];
                                gd[1] += dy * ld[iy];
                                gp[2] += dz * lp[iz];
                                gd[2] += dz * ld[iz];
                            }
                            double dot = 0;
                            for (int k = 0; k < 3; ++k) dot += gp[k] * gd[k] * b.scale[k] * b.scale[k];
                            int q = a + n * (bb + n * c);
                            out[map[q]] += 2 * b.k2 / b.c2 * dot * b.wdet[q];
                        }
            }
        }
    }

private:
    struct Block {
        const BlockSpace* bs;
        double c2, k1, k2;
        double scale[3];
        std::vector<double> wdet;
        std::vector<double> D;
    };
    const FieldSpace* space_;
    std::vector<Block> blocks_;
    Eigen::VectorXd W_;
    bool active_ = false;
};

using ScalarSource = std::function<double(const Vec3&, BlockTag, double)>;
using VectorSource = std::function<Vec3(const Vec3&, BlockTag, double)>;

inline Eigen::VectorXd assemble_load(const FieldSpace& space, const ScalarSource& f, double t) {
    Eigen::VectorXd W = lumped_mass(space), out(space.size);
    for (const auto& bs : space.blocks)
        for (int node = 0; node < bs.num_nodes(); ++node) {
            int d = bs.dof(node);
            out[d] = W[d] * f(bs.node_coord(node), bs.tag(), t);
        }
    return out;
}

inline Eigen::VectorXd assemble_load(const FieldSpace& space, const VectorSource& f, double t) {
    Eigen::VectorXd W = lumped_mass(space), out(space.size);
    for (const auto& bs : space.blocks)
        for (int node = 0; node < bs.num_nodes(); ++node) {
            Vec3 v = f(bs.node_coord(node), bs.tag(), t);
            for (int c = 0; c < 3; ++c) out[bs.dof(node, c)] = W[bs.dof(node, c)] * v[c];
        }
    return out;
}

// First-order absorbing operator int (1/c) phi_i phi_j over tagged sides,
// GLL-collocated on the face, hence diagonal.
inline Eigen::VectorXd assemble_absorbing(const FieldSpace& space, const std::vector<SideMask>& absorbing,
                                          const MaterialParams& mat) {
    Eigen::VectorXd B = Eigen::VectorXd::Zero(space.size);
    for (const auto& bs : space.blocks) {
        if (bs.block >= static_cast<int>(absorbing.size())) continue;
        const AcousticParams& ap = acoustic_of(mat, bs.tag());
        Vec3 h = bs.mesh->edge();
        const auto& w = bs.rule.weights;
        for (int side = 0; side < 6; ++side) {
            if (!absorbing[bs.block][side]) continue;
            int d = side / 2;
            int t1 = (d + 1) % 3, t2 = (d + 2) % 3;
            double jac = h[t1] * h[t2] / 4;
            for (int node = 0; node < bs.num_nodes(); ++node) {
                auto ijk = bs.node_ijk(node);
                if (!node_on_side(bs, ijk, side)) continue;
                // weight of node along a tangential axis: sum over the 1 or 2 elements sharing it
                auto wsum = [&](int ax, int I) {
                    int a = I % bs.p;
                    if (a != 0) return w[a];
                    double s = 0;
                    if (I > 0) s += w[bs.p];
                    if (I < bs.nn[ax] - 1) s += w[0];
                    return s;
                };
                B[bs.dof(node)] += jac * wsum(t1, ijk[t1]) * wsum(t2, ijk[t2]) / ap.c;
            }
        }
    }
    return B;
}

// Assembled 1-D reference operators along one axis of a structured block.
struct Axis1D {
    int nn = 0, p = 1;
    std::vector<double> K;  // banded, row i holds entries i-p .. i+p
    std::vector<double> W;
    double k(int i, int j) const { return K[i * (2 * p + 1) + (j - i + p)]; }
};

inline Axis1D axis_operator(int nelem, int p) {
    auto rule = gll_rule<double>(p);
    auto D = differentiation_matrix(rule);
    const int n = p + 1;
    Axis1D ax;
    ax.p = p;
    ax.nn = nelem * p + 1;
    ax.K.assign(ax.nn * (2 * p + 1), 0.0);
    ax.W.assign(ax.nn, 0.0);
    for (int e = 0; e < nelem; ++e)
        for (int a = 0; a < n; ++a) {
            int I = e * p + a;
            ax.W[I] += rule.weights[a];
            for (int b = 0; b < n; ++b) {
                double s = 0;
                for (int q = 0; q < n; ++q) s += rule.weights[q] * D[q * n + a] * D[q * n + b];
                int J = e * p + b;
                ax.K[I * (2 * p + 1) + (J - I + p)] += s;
            }
        }
    return ax;
}

// Matrix-free broken Laplacian on structured blocks as a Kronecker sum.
struct StructuredLaplacian {
    struct Block {
        int offset;
        Axis1D ax[3];
        double scale[3];   // detJ (2/h_d)^2
        double mscale;     // detJ
    };
    std::vector<Block> blocks;
    int size = 0;

    explicit StructuredLaplacian(const FieldSpace& space) : size(space.size) {
        for (const auto& bs : space.blocks) {
            Block b;
            b.offset = bs.offset;
            Vec3 h = bs.mesh->edge();
            double detJ = h[0] * h[1] * h[2] / 8;
            for (int d = 0; d < 3; ++d) {
                b.ax[d] = axis_operator(bs.mesh->spec.n[d], bs.p);
                b.scale[d] = detJ * 4 / (h[d] * h[d]);
            }
            b.mscale = detJ;
            blocks.push_back(std::move(b));
        }
    }

    void apply_add(const double* x, double* y) const {
        for (const auto& b : blocks) {
            const int nx = b.ax[0].nn, ny = b.ax[1].nn, nz = b.ax[2].nn, p = b.ax[0].p, bw = 2 * p + 1;
            const double* xb = x + b.offset;
            double* yb = y + b.offset;
            for (int K = 0; K < nz; ++K)
                for (int J = 0; J < ny; ++J) {
                    const double wyz = b.ax[1].W[J] * b.ax[2].W[K];
                    const double wxz_base = b.ax[2].W[K];
                    const double wxy_base = b.ax[1].W[J];
                    for (int I = 0; I < nx; ++I) {
                        const int id = I + nx * (J + ny * K);
                        double s = 0;
                        {
                            const double* row = &b.ax[0].K[I * bw];
                            int lo = std::max(0, I - p), hi = std::min(nx - 1, I + p);
                            double acc = 0;
                            for (int I2 = lo; I2 <= hi; ++I2) acc += row[I2 - I + p] * xb[I2 + nx * (J + ny * K)];
                            s += b.scale[0] * wyz * acc;
                        }
                        {
                            const double* row = &b.ax[1].K[J * bw];
                            int lo = std::max(0, J - p), hi = std::min(ny - 1, J + p);
                            double acc = 0;
                            for (int J2 = lo; J2 <= hi; ++J2) acc += row[J2 - J + p] * xb[I + nx * (J2 + ny * K)];
                            s += b.scale[1] * b.ax[0].W[I] * wxz_base * acc;
                        }
                        {
                            const double* row = &b.ax[2].K[K * bw];
                            int lo = std::max(0, K - p), hi = std::min(nz - 1, K + p);
                            double acc = 0;
                            for (int K2 = lo; K2 <= hi; ++K2) acc += row[K2 - K + p] * xb[I + nx * (J + ny * K2)];
                            s += b.scale[2] * b.ax[0].W[I] * wxy_base * acc;
                        }
                        yb[id] += s;
                    }
                }
        }
    }

    Eigen::VectorXd diagonal() const {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(size);
        for (const auto& b : blocks) {
            const int nx = b.ax[0].nn, ny = b.ax[1].nn, nz = b.ax[2].nn;
            for (int K = 0; K < nz; ++K)
                for (int J = 0; J < ny; ++J)
                    for (int I = 0; I < nx; ++I)
                        d[b.offset + I + nx * (J + ny * K)] =
                            b.scale[0] * b.ax[0].k(I, I) * b.ax[1].W[J] * b.ax[2].W[K] +
                            b.scale[1] * b.ax[0].W[I] * b.ax[1].k(J, J) * b.ax[2].W[K] +
                            b.scale[2] * b.ax[0].W[I] * b.ax[1].W[J] * b.ax[2].k(K, K);
        }
        return d;
    }
};

}  // namespace elacu
