#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "elacu/gll.hpp"

namespace elacu {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BlockTag { e, f, t };

inline char tag_char(BlockTag t) { return t == BlockTag::e ? 'e' : (t == BlockTag::f ? 'f' : 't'); }

struct BlockSpec {
    Vec3 lo{0, 0, 0};
    Vec3 hi{1, 1, 1};
    std::array<int, 3> n{1, 1, 1};
    BlockTag tag = BlockTag::f;
};

// Structured block; hexes list their 8 vertices in lexicographic corner order
// c = dx + 2 dy + 4 dz.
struct BlockMesh {
    BlockSpec spec;
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 8>> hexes;

    int num_elements() const { return static_cast<int>(hexes.size()); }
    int nx() const { return spec.n[0]; }
    int ny() const { return spec.n[1]; }
    int nz() const { return spec.n[2]; }

    int element_id(int i, int j, int k) const { return i + spec.n[0] * (j + spec.n[1] * k); }
    std::array<int, 3> element_ijk(int e) const {
        return {e % spec.n[0], (e / spec.n[0]) % spec.n[1], e / (spec.n[0] * spec.n[1])};
    }
    Vec3 edge() const {
        return {(spec.hi[0] - spec.lo[0]) / spec.n[0], (spec.hi[1] - spec.lo[1]) / spec.n[1],
                (spec.hi[2] - spec.lo[2]) / spec.n[2]};
    }
    double element_diameter() const {
        Vec3 h = edge();
        return std::sqrt(h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
    }
    double volume() const {
        return (spec.hi[0] - spec.lo[0]) * (spec.hi[1] - spec.lo[1]) * (spec.hi[2] - spec.lo[2]);
    }
};

inline BlockMesh build_block_mesh(const BlockSpec& spec) {
    for (int d = 0; d < 3; ++d) {
        if (spec.n[d] < 1) throw GeometryError("block needs at least one element per axis");
        if (!(spec.hi[d] > spec.lo[d])) throw GeometryError("block has zero or negative extent");
    }
    BlockMesh m;
    m.spec = spec;
    const int vx = spec.n[0] + 1, vy = spec.n[1] + 1, vz = spec.n[2] + 1;
    m.vertices.reserve(vx * vy * vz);
    for (int k = 0; k < vz; ++k)
        for (int j = 0; j < vy; ++j)
            for (int i = 0; i < vx; ++i) {
                auto lin = [&](int d, int idx) {
                    if (idx == spec.n[d]) return spec.hi[d];
                    return spec.lo[d] + (spec.hi[d] - spec.lo[d]) * idx / spec.n[d];
                };
                m.vertices.push_back({lin(0, i), lin(1, j), lin(2, k)});
            }
    m.hexes.reserve(spec.n[0] * spec.n[1] * spec.n[2]);
    for (int k = 0; k < spec.n[2]; ++k)
        for (int j = 0; j < spec.n[1]; ++j)
            for (int i = 0; i < spec.n[0]; ++i) {
                std::array<int, 8> h{};
                for (int c = 0; c < 8; ++c) {
                    int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
                    h[c] = (i + di) + vx * ((j + dj) + vy * (k + dk));
                }
                m.hexes.push_back(h);
            }
    return m;
}

struct ElementMap {
    Vec3 x;
    Mat3 J;  // J[i][j] = d x_i / d xi_j
    double detJ;
};

inline double det3(const Mat3& a) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

inline Mat3 inverse3(const Mat3& a) {
    double d = det3(a);
    Mat3 r;
    r[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / d;
    r[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / d;
    r[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / d;
    r[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / d;
    r[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / d;
    r[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / d;
    r[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / d;
    r[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / d;
    r[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / d;
    return r;
}

inline ElementMap element_map_eval(const BlockMesh& m, int elem, const Vec3& xi) {
    if (elem < 0 || elem >= m.num_elements()) throw GeometryError("element id out of range");
    ElementMap out{};
    const auto& h = m.hexes[elem];
    for (int c = 0; c < 8; ++c) {
        double s[3] = {(c & 1) ? 1.0 : -1.0, ((c >> 1) & 1) ? 1.0 : -1.0, ((c >> 2) & 1) ? 1.0 : -1.0};
        double f[3] = {(1 + s[0] * xi[0]) / 2, (1 + s[1] * xi[1]) / 2, (1 + s[2] * xi[2]) / 2};
        double N = f[0] * f[1] * f[2];
        double dN[3] = {s[0] / 2 * f[1] * f[2], f[0] * s[1] / 2 * f[2], f[0] * f[1] * s[2] / 2};
        const Vec3& X = m.vertices[h[c]];
        for (int i = 0; i < 3; ++i) {
            out.x[i] += N * X[i];
            for (int j = 0; j < 3; ++j) out.J[i][j] += dN[j] * X[i];
        }
    }
    out.detJ = det3(out.J);
    if (!(out.detJ > 0)) throw GeometryError("singular or inverted element Jacobian");
    return out;
}

// One overlap rectangle between a master face and a slave face.
struct FaceOverlap {
    int slave_element;
    double x0, x1, y0, y1;
};

struct MasterFace {
    int element;  // element id in the master block
    double x0, x1, y0, y1;
    std::vector<FaceOverlap> overlaps;
    double area() const { return (x1 - x0) * (y1 - y0); }
};

// A flat interface z = const between the master (fluid) block and a slave block.
struct Interface {
    double z;
    int master_block;
    int slave_block;
    int master_side;  // 0: master face at its zmin, 1: at its zmax
    int slave_side;
    std::vector<MasterFace> faces;
};

struct CoupledMesh {
    std::vector<BlockMesh> blocks;
    std::vector<Interface> interfaces;
    int level = 0;
    bool nonconforming = true;

    int block_index(BlockTag t) const {
        for (size_t i = 0; i < blocks.size(); ++i)
            if (blocks[i].spec.tag == t) return static_cast<int>(i);
        return -1;
    }
    double h_max() const {
        double h = 0;
        for (auto& b : blocks) h = std::max(h, b.element_diameter());
        return h;
    }
};

inline double element_diameter(const BlockMesh& m, int elem) {
    double d = 0;
    const auto& h = m.hexes[elem];
    for (int a = 0; a < 8; ++a)
        for (int b = a + 1; b < 8; ++b) {
            const Vec3 &x = m.vertices[h[a]], &y = m.vertices[h[b]];
            d = std::max(d, std::hypot(x[0] - y[0], x[1] - y[1], x[2] - y[2]));
        }
    return d;
}

struct SlaveLocation {
    int element;
    Vec3 ref;
};

// Closed-form point location on a slave block's face lying on plane z.
// Points on shared element edges go to the element with the smaller id.
inline SlaveLocation locate_on_slave(const BlockMesh& slave, double zplane, const Vec3& x) {
    const auto& s = slave.spec;
    int side;
    if (std::abs(zplane - s.lo[2]) < 1e-10 * std::max(1.0, std::abs(zplane))) side = 0;
    else if (std::abs(zplane - s.hi[2]) < 1e-10 * std::max(1.0, std::abs(zplane))) side = 1;
    else throw GeometryError("plane is not a face of the slave block");
    if (std::abs(x[2] - zplane) > 1e-10) throw GeometryError("point does not lie on the interface plane");
    int idx[2];
    double ref[2];
    for (int d = 0; d < 2; ++d) {
        double hd = (s.hi[d] - s.lo[d]) / s.n[d];
        double t = (x[d] - s.lo[d]) / hd;
        if (t < -1e-10 || t > s.n[d] + 1e-10) throw GeometryError("point outside slave footprint");
        double r = std::round(t);
        int i;
        if (std::abs(t - r) < 1e-10) {
            i = std::max(0, static_cast<int>(r) - 1);
            if (r == 0) i = 0;
        } else {
            i = static_cast<int>(std::floor(t));
        }
        i = std::clamp(i, 0, s.n[d] - 1);
        idx[d] = i;
        double lo = s.lo[d] + hd * i;
        ref[d] = 2.0 * (x[d] - lo) / hd - 1.0;
        if (std::abs(ref[d]) > 1.0 && std::abs(ref[d]) < 1.0 + 1e-10) ref[d] = std::copysign(1.0, ref[d]);
    }
    int k = side == 0 ? 0 : s.n[2] - 1;
    return {slave.element_id(idx[0], idx[1], k), {ref[0], ref[1], side == 0 ? -1.0 : 1.0}};
}

inline std::vector<double> grid_lines(const BlockSpec& s, int d) {
    std::vector<double> g(s.n[d] + 1);
    for (int i = 0; i <= s.n[d]; ++i) g[i] = i == s.n[d] ? s.hi[d] : s.lo[d] + (s.hi[d] - s.lo[d]) * i / s.n[d];
    return g;
}

inline Interface make_interface(const std::vector<BlockMesh>& blocks, int master, int slave) {
    const auto& ms = blocks[master].spec;
    const auto& ss = blocks[slave].spec;
    Interface itf{};
    itf.master_block = master;
    itf.slave_block = slave;
    auto near = [](double a, double b) { return std::abs(a - b) < 1e-10 * std::max(1.0, std::abs(a)); };
    if (near(ms.lo[2], ss.hi[2])) {
        itf.z = ms.lo[2];
        itf.master_side = 0;
        itf.slave_side = 1;
    } else if (near(ms.hi[2], ss.lo[2])) {
        itf.z = ms.hi[2];
        itf.master_side = 1;
        itf.slave_side = 0;
    } else {
        throw GeometryError("blocks do not share a z-plane (gap or overlap)");
    }
    for (int d = 0; d < 2; ++d)
        if (!near(ms.lo[d], ss.lo[d]) || !near(ms.hi[d], ss.hi[d]))
            throw GeometryError("interface footprints of master and slave differ");
    auto mgx = grid_lines(ms, 0), mgy = grid_lines(ms, 1);
    auto sgx = grid_lines(ss, 0), sgy = grid_lines(ss, 1);
    auto cuts = [&](double a, double b, const std::vector<double>& sg) {
        std::vector<double> c{a};
        for (double g : sg)
            if (g > a + 1e-12 && g < b - 1e-12) c.push_back(g);
        c.push_back(b);
        return c;
    };
    const int km = itf.master_side == 0 ? 0 : ms.n[2] - 1;
    for (int j = 0; j < ms.n[1]; ++j)
        for (int i = 0; i < ms.n[0]; ++i) {
            MasterFace f;
            f.element = blocks[master].element_id(i, j, km);
            f.x0 = mgx[i];
            f.x1 = mgx[i + 1];
            f.y0 = mgy[j];
            f.y1 = mgy[j + 1];
            auto cx = cuts(f.x0, f.x1, sgx), cy = cuts(f.y0, f.y1, sgy);
            for (size_t b = 0; b + 1 < cy.size(); ++b)
                for (size_t a = 0; a + 1 < cx.size(); ++a) {
                    Vec3 c{(cx[a] + cx[a + 1]) / 2, (cy[b] + cy[b + 1]) / 2, itf.z};
                    auto loc = locate_on_slave(blocks[slave], itf.z, c);
                    f.overlaps.push_back({loc.element, cx[a], cx[a + 1], cy[b], cy[b + 1]});
                }
            itf.faces.push_back(std::move(f));
        }
    return itf;
}

// Master faces are always taken from the fluid block.
inline void collect_interface_faces(CoupledMesh& mesh) {
    mesh.interfaces.clear();
    int f = mesh.block_index(BlockTag::f);
    if (f < 0) throw GeometryError("coupled mesh has no fluid block");
    for (int b = 0; b < static_cast<int>(mesh.blocks.size()); ++b) {
        if (b == f) continue;
        mesh.interfaces.push_back(make_interface(mesh.blocks, f, b));
    }
}

// Three stacked cubes of side L starting at z0; the default is the pi-cube stack.
inline CoupledMesh build_three_cubes(int level, bool nonconforming, double L = std::numbers::pi,
                                     double z0 = 0.0) {
    if (level < 0) throw GeometryError("level must be nonnegative");
    const int outer = 2 << level;
    const int inner = nonconforming ? 3 << level : outer;
    CoupledMesh m;
    m.level = level;
    m.nonconforming = nonconforming;
    const double a = L / 2;
    BlockTag tags[3] = {BlockTag::e, BlockTag::f, BlockTag::t};
    for (int b = 0; b < 3; ++b) {
        BlockSpec s;
        s.lo = {-a, -a, z0 + b * L};
        s.hi = {a, a, z0 + (b + 1) * L};
        int n = b == 1 ? inner : outer;
        s.n = {n, n, n};
        s.tag = tags[b];
        m.blocks.push_back(build_block_mesh(s));
    }
    collect_interface_faces(m);
    return m;
}

struct FaceQuadPoint {
    int master_element;
    Vec3 master_ref;
    Vec3 phys;
    int slave_element;
    Vec3 slave_ref;
    double weight;
    Vec3 normal_master;
};

// Tensor Gauss rule with nq^2 points on every overlap rectangle of every master face.
inline std::vector<std::vector<FaceQuadPoint>> face_quadrature(const CoupledMesh& mesh, const Interface& itf,
                                                              int nq) {
    auto g = gauss_rule(nq);
    const auto& M = mesh.blocks[itf.master_block];
    const auto& S = mesh.blocks[itf.slave_block];
    Vec3 hm = M.edge(), hs = S.edge();
    const double nz = itf.master_side == 0 ? -1.0 : 1.0;
    std::vector<std::vector<FaceQuadPoint>> out;
    out.reserve(itf.faces.size());
    for (const auto& f : itf.faces) {
        std::vector<FaceQuadPoint> pts;
        auto mijk = M.element_ijk(f.element);
        Vec3 mlo{M.spec.lo[0] + hm[0] * mijk[0], M.spec.lo[1] + hm[1] * mijk[1], 0};
        for (const auto& o : f.overlaps) {
            auto sijk = S.element_ijk(o.slave_element);
            Vec3 slo{S.spec.lo[0] + hs[0] * sijk[0], S.spec.lo[1] + hs[1] * sijk[1], 0};
            double jx = (o.x1 - o.x0) / 2, jy = (o.y1 - o.y0) / 2;
            for (int b = 0; b < nq; ++b)
                for (int a = 0; a < nq; ++a) {
                    FaceQuadPoint q;
                    q.master_element = f.element;
                    q.slave_element = o.slave_element;
                    q.phys = {o.x0 + jx * (1 + g.nodes[a]), o.y0 + jy * (1 + g.nodes[b]), itf.z};
                    q.weight = g.weights[a] * g.weights[b] * jx * jy;
                    q.master_ref = {2 * (q.phys[0] - mlo[0]) / hm[0] - 1, 2 * (q.phys[1] - mlo[1]) / hm[1] - 1,
                                    itf.master_side == 0 ? -1.0 : 1.0};
                    q.slave_ref = {2 * (q.phys[0] - slo[0]) / hs[0] - 1, 2 * (q.phys[1] - slo[1]) / hs[1] - 1,
                                   itf.slave_side == 0 ? -1.0 : 1.0};
                    q.normal_master = {0, 0, nz};
                    pts.push_back(q);
                }
        }
        out.push_back(std::move(pts));
    }
    return out;
}

}  // namespace elacu
