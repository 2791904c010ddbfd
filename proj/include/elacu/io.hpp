#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "elacu/coupled.hpp"
#include "elacu/materials.hpp"

namespace elacu {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CaseKind { manufactured, zero, demo };

struct DemoSettings {
    double frequency = 1e5;
    double amplitude = 1e-7;    // peak boundary displacement (m)
    double hill_radius = 0;     // 0: half the cube edge
    double cube = 0.01;         // cube edge (m)
    double zeta = 0;            // elastic damping used for both elastic families
    int probes = 3;             // on the axis, one per cube centre when 3
    bool operator==(const DemoSettings&) const = default;
};

struct RunConfig {
    // geometry
    int option = 2;
    int level = 0;
    bool conforming = false;
    // discretization
    int p = 2;
    double beta = 10;
    // materials: a named set, or the physical table; per-block numeric overrides win
    std::string material_set = "1";  // "1", "2" or "physical"
    std::map<std::string, std::map<std::string, double>> overrides;
    std::string model = "table";  // table | linear | westervelt | kuznetsov | explicit
    double k1 = 0, k2 = 0;        // explicit model only
    // time
    double T = 2 * std::numbers::pi;
    double dt = 2 * std::numbers::pi / 2000;
    std::string scheme = "partitioned";
    std::string traction = "corrected";
    std::string integrator = "newmark";  // newmark | genalpha | custom
    double nm_beta = 0.25, nm_gamma = 0.5, alpha_m = 0, alpha_f = 0;
    double picard_tol = 1e-10;
    int picard_max = 50;
    double linear_tol = 1e-12;
    int linear_max = 0;
    double coupling_tol = 1e-10;
    int coupling_max = 30;
    // case and outputs
    CaseKind kind = CaseKind::manufactured;
    std::string csv;
    int vtk_stride = 0;
    std::vector<std::string> fields{"pressure", "displacement"};
    int error_stride = 1;
    DemoSettings demo;

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

using nlohmann::json;

inline std::string type_name(const json& j) { return j.type_name(); }

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object, got " + type_name(obj));
    std::set<std::string> ok(allowed.begin(), allowed.end());
    std::vector<std::string> unknown;
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) unknown.push_back(it.key());
    if (!unknown.empty()) {
        std::string msg = "unknown key(s) in " + (path.empty() ? std::string("/") : path) + ":";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
}

inline double get_number(const json& obj, const std::string& key, const std::string& path, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path + "/" + key + ": expected a number, got " + type_name(v));
    double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path + "/" + key + ": must be finite");
    return d;
}

inline int get_int(const json& obj, const std::string& key, const std::string& path, int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(path + "/" + key + ": expected an integer, got " + type_name(v));
    return v.get<int>();
}

inline bool get_bool(const json& obj, const std::string& key, const std::string& path, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError(path + "/" + key + ": expected a boolean, got " + type_name(v));
    return v.get<bool>();
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& path,
                              const std::string& fallback, std::initializer_list<const char*> choices) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(path + "/" + key + ": expected a string, got " + type_name(v));
    std::string s = v.get<std::string>();
    if (choices.size() > 0) {
        bool found = false;
        std::string list;
        for (const char* c : choices) {
            found = found || s == c;
            list += std::string(list.empty() ? "" : ", ") + c;
        }
        if (!found) throw ConfigError(path + "/" + key + ": '" + s + "' is not one of " + list);
    }
    return s;
}

inline const char* case_name(CaseKind k) {
    return k == CaseKind::manufactured ? "manufactured" : (k == CaseKind::zero ? "zero" : "demo");
}

inline const std::map<std::string, std::vector<std::string>>& override_fields() {
    static const std::map<std::string, std::vector<std::string>> m{
        {"elastic", {"rho", "lambda", "mu", "zeta"}},
        {"fluid", {"rho", "c", "b", "k1", "k2", "b_over_a"}},
        {"tissue_elastic", {"rho", "lambda", "mu", "zeta"}},
        {"tissue_acoustic", {"rho", "c", "b", "k1", "k2", "b_over_a"}},
    };
    return m;
}

}  // namespace detail

inline MaterialParams resolve_materials(const RunConfig& c);

inline void validate(const RunConfig& c) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (c.option != 1 && c.option != 2) fail("/geometry/option: must be 1 or 2");
    if (c.level < 0 || c.level > 6) fail("/geometry/level: must lie in 0..6");
    if (c.p < 1 || c.p > 8) fail("/discretization/p: must lie in 1..8");
    if (!(c.beta > 0)) fail("/discretization/beta: must be positive");
    if (c.material_set != "1" && c.material_set != "2" && c.material_set != "physical")
        fail("/materials/set: must be 1, 2 or \"physical\"");
    if (!(c.T > 0)) fail("/time/T: must be positive");
    if (!(c.dt > 0) || c.dt > c.T) fail("/time/dt: must satisfy 0 < dt <= T");
    if (!(c.nm_beta > 0) || !(c.nm_gamma >= 0.5)) fail("/time/integrator: need beta > 0 and gamma >= 1/2");
    if (!(c.alpha_m < 1) || !(c.alpha_f >= 0 && c.alpha_f < 1)) fail("/time/integrator: need alpha_m < 1, 0 <= alpha_f < 1");
    if (!(c.picard_tol > 0) || c.picard_max < 1) fail("/time/picard: tolerance and iteration cap must be positive");
    if (!(c.linear_tol > 0) || c.linear_max < 0) fail("/time/linear: invalid tolerance or iteration cap");
    if (!(c.coupling_tol > 0) || c.coupling_max < 1) fail("/time/coupling: invalid tolerance or iteration cap");
    if (c.vtk_stride < 0) fail("/outputs/vtk_stride: must be non-negative");
    if (c.error_stride < 1) fail("/outputs/error_stride: must be positive");
    for (const auto& f : c.fields)
        if (f != "pressure" && f != "displacement") fail("/outputs/fields: unknown field '" + f + "'");
    if (c.kind == CaseKind::manufactured && c.material_set == "physical")
        fail("/case: the manufactured solution needs synthetic set 1 or 2");
    if (c.model != "table") {
        for (const char* blk : {"fluid", "tissue_acoustic"}) {
            auto it = c.overrides.find(blk);
            if (it != c.overrides.end() && (it->second.count("k1") || it->second.count("k2")))
                fail(std::string("/materials/") + blk + ": explicit k1/k2 conflict with model '" + c.model +
                     "'; pick one source");
        }
    }
    if (c.demo.frequency <= 0 || c.demo.cube <= 0 || c.demo.hill_radius < 0 || c.demo.zeta < 0 || c.demo.probes < 1)
        fail("/demo: frequency and cube must be positive, radius and zeta non-negative, probes >= 1");
    resolve_materials(c);
}

inline RunConfig parse_config(const std::string& text) {
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    detail::check_keys(root, "", {"geometry", "discretization", "materials", "model", "time", "outputs", "case", "demo"});
    RunConfig c;
    auto section = [&](const char* name) -> json {
        if (!root.contains(name)) return json::object();
        return root.at(name);
    };
    json g = section("geometry");
    detail::check_keys(g, "/geometry", {"option", "level", "conforming"});
    c.option = detail::get_int(g, "option", "/geometry", c.option);
    c.level = detail::get_int(g, "level", "/geometry", c.level);
    c.conforming = detail::get_bool(g, "conforming", "/geometry", c.conforming);

    json d = section("discretization");
    detail::check_keys(d, "/discretization", {"p", "beta"});
    c.p = detail::get_int(d, "p", "/discretization", c.p);
    c.beta = detail::get_number(d, "beta", "/discretization", c.beta);

    json m = section("materials");
    detail::check_keys(m, "/materials", {"set", "elastic", "fluid", "tissue_elastic", "tissue_acoustic"});
    if (m.contains("set")) {
        const json& s = m.at("set");
        if (s.is_number_integer())
            c.material_set = std::to_string(s.get<int>());
        else if (s.is_string())
            c.material_set = s.get<std::string>();
        else
            throw ConfigError("/materials/set: expected 1, 2 or \"physical\", got " + std::string(s.type_name()));
    }
    for (const auto& [blk, names] : detail::override_fields()) {
        if (!m.contains(blk)) continue;
        const json& b = m.at(blk);
        std::string path = "/materials/" + blk;
        if (!b.is_object()) throw ConfigError(path + ": expected an object, got " + b.type_name());
        for (auto it = b.begin(); it != b.end(); ++it) {
            if (std::find(names.begin(), names.end(), it.key()) == names.end())
                throw ConfigError("unknown key(s) in " + path + ": " + it.key());
            c.overrides[blk][it.key()] = detail::get_number(b, it.key(), path, 0);
        }
    }

    if (root.contains("model")) {
        const json& mo = root.at("model");
        if (mo.is_string()) {
            c.model = detail::get_string(root, "model", "", c.model, {"table", "linear", "westervelt", "kuznetsov"});
        } else if (mo.is_object()) {
            detail::check_keys(mo, "/model", {"k1", "k2"});
            if (!mo.contains("k1") || !mo.contains("k2")) throw ConfigError("/model: explicit model needs k1 and k2");
            c.model = "explicit";
            c.k1 = detail::get_number(mo, "k1", "/model", 0);
            c.k2 = detail::get_number(mo, "k2", "/model", 0);
        } else {
            throw ConfigError("/model: expected a model name or {k1, k2}, got " + std::string(mo.type_name()));
        }
    }

    json t = section("time");
    detail::check_keys(t, "/time", {"T", "dt", "scheme", "traction", "integrator", "picard", "linear", "coupling"});
    c.T = detail::get_number(t, "T", "/time", c.T);
    c.dt = detail::get_number(t, "dt", "/time", c.dt);
    c.scheme = detail::get_string(t, "scheme", "/time", c.scheme, {"partitioned", "monolithic"});
    c.traction = detail::get_string(t, "traction", "/time", c.traction, {"corrected", "lagged", "extrapolated"});
    if (t.contains("integrator")) {
        const json& in = t.at("integrator");
        if (in.is_string()) {
            c.integrator = detail::get_string(t, "integrator", "/time", c.integrator, {"newmark", "genalpha"});
            if (c.integrator == "genalpha") {
                auto ga = NewmarkParams::genalpha();
                c.nm_beta = ga.beta;
                c.nm_gamma = ga.gamma;
                c.alpha_m = ga.alpha_m;
                c.alpha_f = ga.alpha_f;
            }
        } else if (in.is_object()) {
            detail::check_keys(in, "/time/integrator", {"beta", "gamma", "alpha_m", "alpha_f"});
            c.integrator = "custom";
            c.nm_beta = detail::get_number(in, "beta", "/time/integrator", c.nm_beta);
            c.nm_gamma = detail::get_number(in, "gamma", "/time/integrator", c.nm_gamma);
            c.alpha_m = detail::get_number(in, "alpha_m", "/time/integrator", c.alpha_m);
            c.alpha_f = detail::get_number(in, "alpha_f", "/time/integrator", c.alpha_f);
        } else {
            throw ConfigError("/time/integrator: expected a name or parameter object, got " + std::string(in.type_name()));
        }
    }
    auto tol_block = [&](const char* name, double& tol, int& cap) {
        if (!t.contains(name)) return;
        const json& b = t.at(name);
        std::string path = std::string("/time/") + name;
        detail::check_keys(b, path, {"tol", "max"});
        tol = detail::get_number(b, "tol", path, tol);
        cap = detail::get_int(b, "max", path, cap);
    };
    tol_block("picard", c.picard_tol, c.picard_max);
    tol_block("linear", c.linear_tol, c.linear_max);
    tol_block("coupling", c.coupling_tol, c.coupling_max);

    json o = section("outputs");
    detail::check_keys(o, "/outputs", {"csv", "vtk_stride", "fields", "error_stride"});
    c.csv = detail::get_string(o, "csv", "/outputs", c.csv, {});
    c.vtk_stride = detail::get_int(o, "vtk_stride", "/outputs", c.vtk_stride);
    c.error_stride = detail::get_int(o, "error_stride", "/outputs", c.error_stride);
    if (o.contains("fields")) {
        const json& f = o.at("fields");
        if (!f.is_array()) throw ConfigError("/outputs/fields: expected an array, got " + std::string(f.type_name()));
        c.fields.clear();
        for (size_t i = 0; i < f.size(); ++i) {
            if (!f[i].is_string())
                throw ConfigError("/outputs/fields/" + std::to_string(i) + ": expected a string, got " + f[i].type_name());
            c.fields.push_back(f[i].get<std::string>());
        }
    }

    std::string kind = detail::get_string(root, "case", "", "manufactured", {"manufactured", "zero", "demo"});
    c.kind = kind == "manufactured" ? CaseKind::manufactured : (kind == "zero" ? CaseKind::zero : CaseKind::demo);

    json dm = section("demo");
    detail::check_keys(dm, "/demo", {"frequency", "amplitude", "hill_radius", "cube", "zeta", "probes"});
    c.demo.frequency = detail::get_number(dm, "frequency", "/demo", c.demo.frequency);
    c.demo.amplitude = detail::get_number(dm, "amplitude", "/demo", c.demo.amplitude);
    c.demo.hill_radius = detail::get_number(dm, "hill_radius", "/demo", c.demo.hill_radius);
    c.demo.cube = detail::get_number(dm, "cube", "/demo", c.demo.cube);
    c.demo.zeta = detail::get_number(dm, "zeta", "/demo", c.demo.zeta);
    c.demo.probes = detail::get_int(dm, "probes", "/demo", c.demo.probes);

    validate(c);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read configuration file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string serialize_config(const RunConfig& c) {
    using detail::json;
    json j;
    j["geometry"] = {{"option", c.option}, {"level", c.level}, {"conforming", c.conforming}};
    j["discretization"] = {{"p", c.p}, {"beta", c.beta}};
    json m = json::object();
    if (c.material_set == "1" || c.material_set == "2")
        m["set"] = std::stoi(c.material_set);
    else
        m["set"] = c.material_set;
    for (const auto& [blk, vals] : c.overrides)
        for (const auto& [k, v] : vals) m[blk][k] = v;
    j["materials"] = m;
    if (c.model == "explicit")
        j["model"] = {{"k1", c.k1}, {"k2", c.k2}};
    else
        j["model"] = c.model;
    json t = {{"T", c.T}, {"dt", c.dt}, {"scheme", c.scheme}, {"traction", c.traction}};
    if (c.integrator == "custom")
        t["integrator"] = {{"beta", c.nm_beta}, {"gamma", c.nm_gamma}, {"alpha_m", c.alpha_m}, {"alpha_f", c.alpha_f}};
    else
        t["integrator"] = c.integrator;
    t["picard"] = {{"tol", c.picard_tol}, {"max", c.picard_max}};
    t["linear"] = {{"tol", c.linear_tol}, {"max", c.linear_max}};
    t["coupling"] = {{"tol", c.coupling_tol}, {"max", c.coupling_max}};
    j["time"] = t;
    j["outputs"] = {{"csv", c.csv}, {"vtk_stride", c.vtk_stride}, {"fields", c.fields}, {"error_stride", c.error_stride}};
    j["case"] = detail::case_name(c.kind);
    j["demo"] = {{"frequency", c.demo.frequency}, {"amplitude", c.demo.amplitude}, {"hill_radius", c.demo.hill_radius},
                 {"cube", c.demo.cube}, {"zeta", c.demo.zeta}, {"probes", c.demo.probes}};
    return j.dump(2);
}

inline MaterialParams physical_material_params() {
    auto t = physical_materials();
    MaterialParams m;
    m.e = t.silicone;
    m.f = t.water;
    m.t_el = t.tissue_elastic;
    m.t_ac = t.tissue;
    return m;
}

// Named set, then numeric overrides, then the nonlinearity model.
inline MaterialParams resolve_materials(const RunConfig& c) {
    MaterialParams m = c.material_set == "physical" ? physical_material_params() : material_set(std::stoi(c.material_set));
    if (c.material_set == "physical") m.e.zeta = m.t_el.zeta = c.demo.zeta;
    auto set_el = [](ElasticParams& e, const std::string& k, double v) {
        if (k == "rho") e.rho = v;
        else if (k == "lambda") e.lambda = v;
        else if (k == "mu") e.mu = v;
        else if (k == "zeta") e.zeta = v;
    };
    auto set_ac = [](AcousticParams& a, const std::string& k, double v) {
        if (k == "rho") a.rho = v;
        else if (k == "c") a.c = v;
        else if (k == "b") a.b = v;
        else if (k == "k1") a.k1 = v;
        else if (k == "k2") a.k2 = v;
        else if (k == "b_over_a") a.b_over_a = v;
    };
    for (const auto& [blk, vals] : c.overrides)
        for (const auto& [k, v] : vals) {
            if (blk == "elastic") set_el(m.e, k, v);
            else if (blk == "tissue_elastic") set_el(m.t_el, k, v);
            else if (blk == "fluid") set_ac(m.f, k, v);
            else if (blk == "tissue_acoustic") set_ac(m.t_ac, k, v);
        }
    ModelChoice mc;
    if (c.model == "linear") mc.kind = ModelKind::linear;
    else if (c.model == "westervelt") mc.kind = ModelKind::westervelt;
    else if (c.model == "kuznetsov") mc.kind = ModelKind::kuznetsov;
    else if (c.model == "explicit") mc = {ModelKind::explicit_k, c.k1, c.k2};
    apply_model(m.f, mc);
    apply_model(m.t_ac, mc);
    bool tissue_elastic = c.option == 1;
    if (!admissible(m.e) || !admissible(m.f) || (tissue_elastic ? !admissible(m.t_el) : !admissible(m.t_ac)))
        throw ConfigError("/materials: parameters violate rho > 0, c > 0, b > 0, mu > 0, lambda + 2mu/3 > 0, zeta >= 0");
    return m;
}

inline TimeConfig time_config(const RunConfig& c) {
    TimeConfig tc;
    tc.T = c.T;
    tc.dt = c.dt;
    tc.scheme = c.scheme == "monolithic" ? Scheme::monolithic : Scheme::partitioned;
    tc.traction = c.traction == "lagged" ? Traction::lagged
                 : c.traction == "extrapolated" ? Traction::extrapolated
                                                : Traction::corrected;
    tc.acoustic = {c.nm_beta, c.nm_gamma, c.alpha_m, c.alpha_f};
    tc.picard = {c.picard_tol, c.picard_max};
    tc.lin_tol = c.linear_tol;
    tc.lin_max = c.linear_max;
    tc.mono_tol = c.coupling_tol;
    tc.mono_max = c.coupling_max;
    return tc;
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct ErrorRow {
    int level = 0;
    double h_max = 0;
    long n_dofs = 0;
    double err_abs = 0, err_rel = 0;
    std::optional<double> rate;
};

inline const char* kCsvHeader = "level,h_max,n_dofs,err_abs_LinfE,err_rel_LinfE,rate";

inline std::string csv_row(const ErrorRow& r) {
    std::string s = std::to_string(r.level) + "," + format_number(r.h_max) + "," + std::to_string(r.n_dofs) + "," +
                    format_number(r.err_abs) + "," + format_number(r.err_rel) + ",";
    if (r.rate) s += format_number(*r.rate);
    return s;
}

inline std::string csv_table(const std::vector<ErrorRow>& rows) {
    std::string s = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) s += csv_row(r) + "\n";
    return s;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

inline void write_csv(const std::vector<ErrorRow>& rows, const std::string& path) { write_text(path, csv_table(rows)); }

inline std::vector<ErrorRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw IoError("unexpected CSV header");
    std::vector<ErrorRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.push_back("");
        if (cells.size() != 6) throw IoError("CSV row with " + std::to_string(cells.size()) + " columns");
        ErrorRow r;
        r.level = std::stoi(cells[0]);
        r.h_max = std::stod(cells[1]);
        r.n_dofs = std::stol(cells[2]);
        r.err_abs = std::stod(cells[3]);
        r.err_rel = std::stod(cells[4]);
        if (!cells[5].empty()) r.rate = std::stod(cells[5]);
        rows.push_back(r);
    }
    return rows;
}

// One block of nodal data on the GLL lattice of a block space.
struct VtkBlock {
    const BlockSpace* space = nullptr;
    std::vector<double> pressure;   // per node
    std::vector<Vec3> displacement; // per node
};

// Legacy ASCII VTK; each element becomes p^3 linear hexahedra on its GLL sub-lattice.
inline std::string vtk_text(const std::vector<VtkBlock>& blocks, const std::string& title = "elacu fields") {
    std::ostringstream os;
    os.precision(12);
    long npts = 0, ncells = 0;
    for (const auto& b : blocks) {
        npts += b.space->num_nodes();
        long cx = b.space->nn[0] - 1, cy = b.space->nn[1] - 1, cz = b.space->nn[2] - 1;
        ncells += cx * cy * cz;
    }
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << npts << " double\n";
    for (const auto& b : blocks)
        for (int n = 0; n < b.space->num_nodes(); ++n) {
            auto x = b.space->node_coord(n);
            os << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
        }
    os << "CELLS " << ncells << ' ' << ncells * 9 << '\n';
    long base = 0;
    for (const auto& b : blocks) {
        const auto& s = *b.space;
        for (int k = 0; k + 1 < s.nn[2]; ++k)
            for (int j = 0; j + 1 < s.nn[1]; ++j)
                for (int i = 0; i + 1 < s.nn[0]; ++i) {
                    os << 8;
                    const int corner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                              {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
                    for (const auto& c : corner) os << ' ' << base + s.node_id(i + c[0], j + c[1], k + c[2]);
                    os << '\n';
                }
        base += s.num_nodes();
    }
    os << "CELL_TYPES " << ncells << '\n';
    for (long c = 0; c < ncells; ++c) os << "12\n";
    os << "POINT_DATA " << npts << '\n';
    os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (const auto& b : blocks)
        for (int n = 0; n < b.space->num_nodes(); ++n)
            os << (b.pressure.empty() ? 0.0 : b.pressure[n]) << '\n';
    os << "VECTORS displacement double\n";
    for (const auto& b : blocks)
        for (int n = 0; n < b.space->num_nodes(); ++n) {
            Vec3 u = b.displacement.empty() ? Vec3{0, 0, 0} : b.displacement[n];
            os << u[0] << ' ' << u[1] << ' ' << u[2] << '\n';
        }
    return os.str();
}

inline void write_vtk(const std::vector<VtkBlock>& blocks, const std::string& path) { write_text(path, vtk_text(blocks)); }

}  // namespace elacu
