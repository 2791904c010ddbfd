#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "elacu/io.hpp"
#include "elacu/norms.hpp"

namespace elacu {

// Exit status convention of the command line tool.
enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kNumericalError = 3 };

struct RunnerOptions {
    std::string output_dir = ".";
    bool quiet = false;
};

inline ProblemSpec problem_spec(const RunConfig& c, int level) {
    ProblemSpec s;
    s.level = level;
    s.nonconforming = !c.conforming;
    s.p = c.p;
    s.beta = c.beta;
    s.option = c.option == 1 ? TissueOption::elastic : TissueOption::acoustic;
    s.mat = resolve_materials(c);
    return s;
}

inline std::string output_path(const RunnerOptions& o, const std::string& name) {
    std::filesystem::create_directories(o.output_dir);
    return (std::filesystem::path(o.output_dir) / name).string();
}

// Point location on the uniform lattice of one block.
struct PointLocation {
    int elem = -1;
    Vec3 xi{0, 0, 0};
};

inline PointLocation locate_point(const BlockMesh& m, const Vec3& x) {
    PointLocation loc;
    Vec3 h = m.edge();
    int idx[3];
    for (int d = 0; d < 3; ++d) {
        double t = (x[d] - m.spec.lo[d]) / h[d];
        if (t < -1e-9 || t > m.spec.n[d] + 1e-9) return loc;
        idx[d] = std::clamp(static_cast<int>(std::floor(t)), 0, m.spec.n[d] - 1);
        loc.xi[d] = std::clamp(2 * (t - idx[d]) - 1, -1.0, 1.0);
    }
    loc.elem = m.element_id(idx[0], idx[1], idx[2]);
    return loc;
}

// Pressure at a physical point: rho psi_t on acoustic blocks, the negative
// mean normal stress on elastic blocks.
class PressureProbe {
public:
    PressureProbe(const Problem& pb, const Vec3& x) : x_(x) {
        for (const auto& bs : pb.aspace().blocks) {
            auto l = locate_point(*bs.mesh, x);
            if (l.elem >= 0) {
                bs_ = &bs;
                loc_ = l;
                acoustic_ = true;
                coef_ = acoustic_of(pb.spec().mat, bs.tag()).rho;
                return;
            }
        }
        for (const auto& bs : pb.espace().blocks) {
            auto l = locate_point(*bs.mesh, x);
            if (l.elem >= 0) {
                bs_ = &bs;
                loc_ = l;
                const auto& ep = elastic_of(pb.spec().mat, bs.tag());
                coef_ = ep.lambda + 2 * ep.mu / 3;
                return;
            }
        }
        throw std::invalid_argument("probe point outside the domain");
    }
    double operator()(const CoupledState& s) const {
        if (acoustic_) return coef_ * evaluate_in_element(*bs_, s.dpsi.data(), loc_.elem, loc_.xi).value[0];
        auto pv = evaluate_in_element(*bs_, s.u.data(), loc_.elem, loc_.xi);
        return 0.0 - coef_ * (pv.grad[0][0] + pv.grad[1][1] + pv.grad[2][2]);
    }
    const Vec3& point() const { return x_; }

private:
    Vec3 x_;
    const BlockSpace* bs_ = nullptr;
    PointLocation loc_;
    bool acoustic_ = false;
    double coef_ = 0;
};

inline std::vector<VtkBlock> vtk_blocks(const Problem& pb, const CoupledState& s, bool pressure, bool displacement) {
    auto pf = postprocess_pressure(pb.aspace(), pb.espace(), pb.spec().mat, s.dpsi, s.u);
    std::vector<VtkBlock> out;
    for (const auto& bs : pb.espace().blocks) {
        VtkBlock b;
        b.space = &bs;
        for (int n = 0; n < bs.num_nodes(); ++n) {
            if (pressure) b.pressure.push_back(pf.elastic[bs.offset / 3 + n]);
            if (displacement) b.displacement.push_back({s.u[bs.dof(n, 0)], s.u[bs.dof(n, 1)], s.u[bs.dof(n, 2)]});
        }
        out.push_back(std::move(b));
    }
    for (const auto& bs : pb.aspace().blocks) {
        VtkBlock b;
        b.space = &bs;
        if (pressure)
            for (int n = 0; n < bs.num_nodes(); ++n) b.pressure.push_back(pf.acoustic[bs.dof(n)]);
        out.push_back(std::move(b));
    }
    return out;
}

inline StepObserver vtk_observer(const Problem& pb, const RunConfig& c, const RunnerOptions& o, const std::string& stem) {
    if (c.vtk_stride <= 0) return {};
    bool pr = std::find(c.fields.begin(), c.fields.end(), "pressure") != c.fields.end();
    bool di = std::find(c.fields.begin(), c.fields.end(), "displacement") != c.fields.end();
    const int steps = time_config(c).num_steps();
    return [&pb, &o, stem, pr, di, stride = c.vtk_stride, steps](int k, const CoupledState& s) {
        if (k % stride != 0 && k != steps) return;
        char name[64];
        std::snprintf(name, sizeof name, "%s_%06d.vtk", stem.c_str(), k);
        write_vtk(vtk_blocks(pb, s, pr, di), output_path(o, name));
    };
}

// One level of the configured case. Manufactured and zero runs are measured
// against the manufactured solution of the configured material set.
inline ErrorRow run_level(const RunConfig& c, int level, const RunnerOptions& o, const std::string& vtk_stem = "") {
    ProblemSpec spec = problem_spec(c, level);
    Problem pb(spec);
    TimeConfig tc = time_config(c);
    ErrorRow row;
    row.level = level;
    row.h_max = pb.mesh().h_max();
    row.n_dofs = pb.n_dofs();
    StepObserver vtk = vtk_stem.empty() ? StepObserver{} : vtk_observer(pb, c, o, vtk_stem);
    int set_id = c.material_set == "physical" ? 1 : std::stoi(c.material_set);
    auto mc = make_case(spec.option, set_id, spec.mat);
    if (c.kind == CaseKind::manufactured) {
        auto m = measure_error(pb, tc, mc, c.error_stride, vtk);
        row.err_abs = m.abs;
        row.err_rel = m.rel;
        return row;
    }
    InitialValueData zero([](const Problem&, CoupledState&) {});
    EnergyNorms norms(pb, &mc);
    LinfEAccumulator err, ex;
    const Eigen::VectorXd ze = Eigen::VectorXd::Zero(pb.espace().size), za = Eigen::VectorXd::Zero(pb.aspace().size);
    const int steps = tc.num_steps();
    run_coupled(pb, tc, zero, [&](int k, const CoupledState& s) {
        if (vtk) vtk(k, s);
        if (k % c.error_stride != 0 && k != steps) return;
        err.add(s.t, norms.elastic(s.u, s.du, s.t), norms.acoustic(s.psi, s.dpsi, s.ddpsi, s.t));
        ex.add(s.t, norms.elastic(ze, ze, s.t), norms.acoustic(za, za, za, s.t));
    });
    row.err_abs = err.value();
    row.err_rel = ex.value() > 0 ? row.err_abs / ex.value() : std::numeric_limits<double>::quiet_NaN();
    return row;
}

inline int cmd_run(const RunConfig& c, const RunnerOptions& o) {
    if (c.kind == CaseKind::demo) throw ConfigError("/case: use the demo command for demo configurations");
    ErrorRow row = run_level(c, c.level, o, "run");
    std::vector<ErrorRow> rows{row};
    std::string csv = c.csv.empty() ? "errors.csv" : c.csv;
    write_csv(rows, output_path(o, csv));
    if (!o.quiet) std::cout << kCsvHeader << '\n' << csv_row(row) << '\n';
    return kOk;
}

inline std::vector<ErrorRow> converge_table(const RunConfig& c, int levels, const RunnerOptions& o,
                                            const std::function<void(const std::vector<ErrorRow>&)>& on_row = {}) {
    if (levels < 2) throw ConfigError("--levels: need at least 2 levels for a rate");
    if (c.kind == CaseKind::demo) throw ConfigError("/case: convergence studies need the manufactured case");
    std::vector<ErrorRow> rows;
    std::vector<double> errs, hs;
    for (int L = 0; L < levels; ++L) {
        ErrorRow r = run_level(c, L, o);
        errs.push_back(r.err_rel);
        hs.push_back(r.h_max);
        if (rows.size() >= 1) r.rate = convergence_rates(errs, hs).back();
        rows.push_back(r);
        if (on_row) on_row(rows);
    }
    return rows;
}

inline int cmd_converge(const RunConfig& c, int levels, const RunnerOptions& o) {
    std::string csv = output_path(o, c.csv.empty() ? "convergence.csv" : c.csv);
    std::vector<ErrorRow> partial;
    try {
        auto rows = converge_table(c, levels, o, [&](const std::vector<ErrorRow>& r) {
            partial = r;
            write_csv(r, csv);
            if (!o.quiet) std::cout << csv_row(r.back()) << std::endl;
        });
        if (!o.quiet) std::cout << "observed rate " << format_number(*rows.back().rate) << '\n';
    } catch (...) {
        if (!partial.empty()) write_csv(partial, csv);
        throw;
    }
    return kOk;
}

// Sine pulse with a quadratic ramp up over 2/f and down over the next 2/f.
struct SinePulse {
    double f;
    TimeAmp operator()(double t) const {
        const double w = 2 * std::numbers::pi * f;
        double e = 0, de = 0, dde = 0;
        if (t <= 2 / f) {
            e = (f * t / 2) * (f * t / 2);
            de = f * f * t / 2;
            dde = f * f / 2;
        } else if (t <= 4 / f) {
            double s = f / 2 * (t - 2 / f);
            e = 1 - s * s;
            de = -f * s;
            dde = -f * f / 2;
        }
        if (t < 0) e = de = dde = 0;
        double sn = std::sin(w * t), cs = std::cos(w * t);
        return {e * sn, de * sn + e * w * cs, dde * sn + 2 * de * w * cs - e * w * w * sn};
    }
};

// Quartic hill, 1 at the centre and 0 from radius rm on.
inline double hill(double r, double rm) {
    if (r >= rm) return 0;
    double a = (rm - r) * (rm + r);
    return a * a / (rm * rm * rm * rm);
}

// Zero initial data; the bottom face of the elastic block moves normally with
// a pulsed hill profile.
class DemoData : public ProblemData {
public:
    DemoData(const Problem& pb, const DemoSettings& d) : d_(d) {
        double rm = d.hill_radius > 0 ? d.hill_radius : d.cube / 2;
        const auto& es = pb.espace();
        profile_ = Eigen::VectorXd::Zero(es.size);
        const double zb = pb.spec().z0;
        for (int dof : pb.edir().dofs) {
            for (const auto& bs : es.blocks) {
                if (dof < bs.offset || dof >= bs.offset + bs.num_dofs()) continue;
                int local = dof - bs.offset, node = local / 3, comp = local % 3;
                auto x = bs.node_coord(node);
                if (comp == 2 && std::abs(x[2] - zb) < 1e-12 * d.cube)
                    profile_[dof] = d.amplitude * hill(std::hypot(x[0], x[1]), rm);
            }
        }
    }
    void initial(const Problem&, CoupledState&) const override {}
    bool has_loads() const override { return false; }
    void elastic_boundary(const Problem&, double t, Eigen::VectorXd& u, Eigen::VectorXd& v,
                          Eigen::VectorXd& a) const override {
        auto s = SinePulse{d_.frequency}(t);
        u = profile_ * s.a;
        v = profile_ * s.da;
        a = profile_ * s.dda;
    }

private:
    DemoSettings d_;
    Eigen::VectorXd profile_;
};

struct DemoResult {
    std::vector<double> times;
    std::vector<std::vector<double>> probes;  // per probe, per sample
    std::vector<double> axis_z, axis_max;     // max |p| over time along the axis
    RunStats stats;
};

inline ProblemSpec demo_spec(const RunConfig& c) {
    ProblemSpec s = problem_spec(c, c.level);
    s.cube = c.demo.cube;
    s.z0 = 0;
    s.absorbing.assign(3, SideMask{});
    auto tmesh = build_three_cubes(0, true, s.cube, s.z0);
    int bt = tmesh.block_index(BlockTag::t);
    if (s.option == TissueOption::acoustic) s.absorbing[bt] = {true, true, true, true, false, true};
    return s;
}

inline DemoResult run_demo(const RunConfig& c, const std::function<StepObserver(const Problem&)>& make_extra = {},
                           int axis_samples = 61) {
    Problem pb(demo_spec(c));
    StepObserver extra = make_extra ? make_extra(pb) : StepObserver{};
    DemoData data(pb, c.demo);
    TimeConfig tc = time_config(c);
    const double L = c.demo.cube;
    std::vector<PressureProbe> probes;
    for (int i = 0; i < c.demo.probes; ++i) probes.emplace_back(pb, Vec3{0, 0, 3 * L * (i + 0.5) / c.demo.probes});
    std::vector<PressureProbe> axis;
    DemoResult r;
    for (int i = 0; i < axis_samples; ++i) {
        double z = 3 * L * (i + 0.5) / axis_samples;
        axis.emplace_back(pb, Vec3{0, 0, z});
        r.axis_z.push_back(z);
    }
    r.axis_max.assign(axis_samples, 0.0);
    r.probes.resize(probes.size());
    r.stats = run_coupled(pb, tc, data, [&](int k, const CoupledState& s) {
        if (extra) extra(k, s);
        r.times.push_back(s.t);
        for (size_t i = 0; i < probes.size(); ++i) r.probes[i].push_back(probes[i](s));
        for (size_t i = 0; i < axis.size(); ++i) r.axis_max[i] = std::max(r.axis_max[i], std::abs(axis[i](s)));
    });
    return r;
}

inline int cmd_demo(const RunConfig& c, const RunnerOptions& o) {
    if (c.kind != CaseKind::demo) throw ConfigError("/case: the demo command needs \"case\": \"demo\"");
    DemoResult r = run_demo(c, [&](const Problem& pb) { return vtk_observer(pb, c, o, "demo"); });
    std::string probes = "t";
    for (size_t i = 0; i < r.probes.size(); ++i) probes += ",probe" + std::to_string(i);
    probes += "\n";
    for (size_t k = 0; k < r.times.size(); ++k) {
        probes += format_number(r.times[k]);
        for (const auto& p : r.probes) probes += "," + format_number(p[k]);
        probes += "\n";
    }
    write_text(output_path(o, "probes.csv"), probes);
    std::string axis = "z,max_abs_pressure\n";
    for (size_t i = 0; i < r.axis_z.size(); ++i) axis += format_number(r.axis_z[i]) + "," + format_number(r.axis_max[i]) + "\n";
    write_text(output_path(o, "centerline.csv"), axis);
    if (!o.quiet) {
        std::cout << "demo: " << r.stats.steps << " steps";
        for (size_t i = 0; i < r.probes.size(); ++i) {
            double m = 0;
            for (double v : r.probes[i]) m = std::max(m, std::abs(v));
            std::cout << ", max|p| probe" << i << " = " << format_number(m);
        }
        std::cout << '\n';
    }
    return kOk;
}

}  // namespace elacu
