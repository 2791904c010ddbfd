#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <vector>

#include "elacu/gll.hpp"
#include "elacu/mesh.hpp"

namespace elacu {

// Conforming Q_p numbering on one structured block. Node (I,J,K) lives on an
// (n p + 1)^3 lattice; vector fields interleave components per node.
struct BlockSpace {
    int block = -1;
    const BlockMesh* mesh = nullptr;
    int p = 1;
    int comps = 1;
    std::array<int, 3> nn{};
    int offset = 0;
    GllRule<double> rule;

    int num_nodes() const { return nn[0] * nn[1] * nn[2]; }
    int num_dofs() const { return num_nodes() * comps; }
    BlockTag tag() const { return mesh->spec.tag; }

    int node_id(int I, int J, int K) const { return I + nn[0] * (J + nn[1] * K); }
    std::array<int, 3> node_ijk(int node) const {
        return {node % nn[0], (node / nn[0]) % nn[1], node / (nn[0] * nn[1])};
    }
    int elem_node(int elem, int a, int b, int c) const {
        auto e = mesh->element_ijk(elem);
        return node_id(e[0] * p + a, e[1] * p + b, e[2] * p + c);
    }
    int dof(int node, int comp = 0) const { return offset + node * comps + comp; }

    double coord_1d(int d, int I) const {
        const auto& s = mesh->spec;
        int e = I / p, a = I % p;
        if (e == s.n[d]) {
            e -= 1;
            a = p;
        }
        double h = (s.hi[d] - s.lo[d]) / s.n[d];
        if (e == s.n[d] - 1 && a == p) return s.hi[d];
        return s.lo[d] + h * e + h * (1.0 + rule.nodes[a]) / 2.0;
    }
    Vec3 node_coord(int node) const {
        auto ijk = node_ijk(node);
        return {coord_1d(0, ijk[0]), coord_1d(1, ijk[1]), coord_1d(2, ijk[2])};
    }
};

inline BlockSpace build_dof_map(const BlockMesh& bm, int p, int comps, int block_index = 0, int offset = 0) {
    BlockSpace s;
    s.block = block_index;
    s.mesh = &bm;
    s.p = p;
    s.comps = comps;
    s.rule = gll_rule<double>(p);
    for (int d = 0; d < 3; ++d) s.nn[d] = bm.spec.n[d] * p + 1;
    s.offset = offset;
    return s;
}

// Global field over a subset of blocks, discontinuous across blocks.
struct FieldSpace {
    std::vector<BlockSpace> blocks;
    int comps = 1;
    int size = 0;

    const BlockSpace* find(BlockTag t) const {
        for (auto& b : blocks)
            if (b.tag() == t) return &b;
        return nullptr;
    }
    const BlockSpace* find_block(int block) const {
        for (auto& b : blocks)
            if (b.block == block) return &b;
        return nullptr;
    }
};

inline FieldSpace build_field_space(const CoupledMesh& mesh, int p, int comps, const std::vector<int>& block_ids) {
    FieldSpace fs;
    fs.comps = comps;
    int off = 0;
    for (int b : block_ids) {
        fs.blocks.push_back(build_dof_map(mesh.blocks[b], p, comps, b, off));
        off += fs.blocks.back().num_dofs();
    }
    fs.size = off;
    return fs;
}

// Sides: 0 x-lo, 1 x-hi, 2 y-lo, 3 y-hi, 4 z-lo, 5 z-hi.
using SideMask = std::array<bool, 6>;

inline bool node_on_side(const BlockSpace& s, const std::array<int, 3>& ijk, int side) {
    int d = side / 2;
    return side % 2 == 0 ? ijk[d] == 0 : ijk[d] == s.nn[d] - 1;
}

// Sides of each block that lie on an interface plane.
inline std::vector<SideMask> interface_sides(const CoupledMesh& mesh) {
    std::vector<SideMask> m(mesh.blocks.size(), SideMask{});
    for (const auto& itf : mesh.interfaces) {
        m[itf.master_block][4 + itf.master_side] = true;
        m[itf.slave_block][4 + itf.slave_side] = true;
    }
    return m;
}

struct DirichletSet {
    std::vector<int> dofs;
    std::vector<int> markers;
    std::vector<char> mask;
    std::vector<int> free;

    bool contains(int dof) const { return mask[dof] != 0; }
};

// Boundary nodes on every non-excluded side, including the rims those sides
// share with interface faces.
inline DirichletSet dirichlet_dofs(const FieldSpace& space, const std::vector<SideMask>& excluded) {
    DirichletSet ds;
    ds.mask.assign(space.size, 0);
    for (const auto& bs : space.blocks) {
        const SideMask& ex = excluded[bs.block];
        for (int node = 0; node < bs.num_nodes(); ++node) {
            auto ijk = bs.node_ijk(node);
            int marker = -1;
            for (int side = 0; side < 6 && marker < 0; ++side)
                if (!ex[side] && node_on_side(bs, ijk, side)) marker = side;
            if (marker < 0) continue;
            for (int c = 0; c < bs.comps; ++c) {
                int d = bs.dof(node, c);
                ds.mask[d] = 1;
                ds.dofs.push_back(d);
                ds.markers.push_back(marker);
            }
        }
    }
    for (int i = 0; i < space.size; ++i)
        if (!ds.mask[i]) ds.free.push_back(i);
    return ds;
}

inline DirichletSet dirichlet_dofs(const FieldSpace& space, const CoupledMesh& mesh) {
    return dirichlet_dofs(space, interface_sides(mesh));
}

using FieldFn = std::function<void(const Vec3& x, BlockTag tag, double t, double* out)>;

inline std::vector<double> interpolate(const FieldSpace& space, const FieldFn& f, double t) {
    std::vector<double> v(space.size, 0.0);
    std::vector<double> buf(space.comps);
    for (const auto& bs : space.blocks)
        for (int node = 0; node < bs.num_nodes(); ++node) {
            f(bs.node_coord(node), bs.tag(), t, buf.data());
            for (int c = 0; c < bs.comps; ++c) v[bs.dof(node, c)] = buf[c];
        }
    return v;
}

// Evaluates the discrete field and its physical gradient inside one element.
struct PointValue {
    std::array<double, 3> value{};
    std::array<Vec3, 3> grad{};
};

inline PointValue evaluate_in_element(const BlockSpace& bs, const double* coeffs, int elem, const Vec3& xi) {
    const int n = bs.p + 1;
    double v[3][16], d[3][16];
    for (int k = 0; k < 3; ++k) lagrange_all(bs.rule, xi[k], v[k], d[k]);
    Vec3 h = bs.mesh->edge();
    PointValue pv;
    for (int c = 0; c < n; ++c)
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a) {
                int node = bs.elem_node(elem, a, b, c);
                double phi = v[0][a] * v[1][b] * v[2][c];
                double g[3] = {d[0][a] * v[1][b] * v[2][c] * 2 / h[0], v[0][a] * d[1][b] * v[2][c] * 2 / h[1],
                               v[0][a] * v[1][b] * d[2][c] * 2 / h[2]};
                for (int comp = 0; comp < bs.comps; ++comp) {
                    double u = coeffs[bs.dof(node, comp)];
                    pv.value[comp] += u * phi;
                    for (int k = 0; k < 3; ++k) pv.grad[comp][k] += u * g[k];
                }
            }
    return pv;
}

}  // namespace elacu
