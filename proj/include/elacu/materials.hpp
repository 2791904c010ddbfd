#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace elacu {

struct ElasticParams {
    double rho = 1, lambda = 1, mu = 1, zeta = 0;
};

struct AcousticParams {
    double rho = 1, c = 1, b = 0, k1 = 0, k2 = 0;
    double b_over_a = 0;
};

enum class TissueOption { elastic = 1, acoustic = 2 };

enum class ModelKind { table, linear, westervelt, kuznetsov, explicit_k };

struct ModelChoice {
    ModelKind kind = ModelKind::table;
    double k1 = 0, k2 = 0;
};

// Piecewise-constant coefficients; the tissue block carries both families and
// the option decides which one is read.
struct MaterialParams {
    ElasticParams e;
    AcousticParams f;
    ElasticParams t_el;
    AcousticParams t_ac;
};

struct MaterialError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline MaterialParams material_set(int set_id) {
    MaterialParams m;
    if (set_id == 1) {
        m.t_el = {1.6018, 12.3041, 6.4070, 6.0};
        m.f = {0.51, 1.0, 1.0, 1.0 / 10, 0.0};
        m.e = {1.0, 2.87, 1.69, 3.0};
        m.t_ac = {1.6018, 2.0, 0.5, 1.0 / 16, 0.0};
    } else if (set_id == 2) {
        m.t_el = {2.0, 6.0, 4.0, 2.0};
        m.f = {2.0, std::sqrt(2.0), 1.0, 1.0 / 20, 0.25};
        m.e = {6.0, 10.0, 6.0, 4.0};
        m.t_ac = {2.0, 1.0, 5.5, 0.25, 1.0};
    } else {
        throw MaterialError("unknown material set " + std::to_string(set_id));
    }
    return m;
}

inline ElasticParams lame_from_young(double rho, double E, double nu, double zeta = 0) {
    return {rho, E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu)), zeta};
}

struct PhysicalTable {
    AcousticParams water;
    AcousticParams tissue;
    ElasticParams silicone;
    ElasticParams tissue_elastic;
    double silicone_loss = 1.0;
    double tissue_alpha = 0.2668;
};

inline PhysicalTable physical_materials() {
    PhysicalTable p;
    p.water = {998.23, 1500.0, 6e-9, 0, 0, 5.0};
    p.tissue = {1000.0, 1540.0, 6.4117e-4, 0, 0, 7.44};
    p.silicone = lame_from_young(1100.0, 5e7, 0.49);
    p.tissue_elastic = lame_from_young(1000.0, 1e9, 0.375);
    return p;
}

struct NonlinearCoeffs {
    double k1, k2;
};

inline NonlinearCoeffs nonlinearity_coeffs(ModelKind model, double c, double b_over_a) {
    if (!(c > 0)) throw MaterialError("sound speed must be positive");
    switch (model) {
        case ModelKind::linear: return {0, 0};
        case ModelKind::westervelt: return {(2 + b_over_a) / (2 * c * c), 0};
        case ModelKind::kuznetsov: return {b_over_a / (2 * c * c), 1};
        default: throw MaterialError("nonlinearity_coeffs needs a named model");
    }
}

inline void apply_model(AcousticParams& a, const ModelChoice& m) {
    switch (m.kind) {
        case ModelKind::table: break;
        case ModelKind::explicit_k:
            a.k1 = m.k1;
            a.k2 = m.k2;
            break;
        default: {
            auto k = nonlinearity_coeffs(m.kind, a.c, a.b_over_a);
            a.k1 = k.k1;
            a.k2 = k.k2;
        }
    }
}

struct Option1Residuals {
    double elastic_block;
    double tissue_block;
    bool ok(double tol = 5e-4) const { return elastic_block < tol && tissue_block < tol; }
};

inline Option1Residuals validate_option1_constraints(const MaterialParams& m) {
    return {std::abs(m.e.lambda - 2 * m.e.mu + m.f.rho), std::abs(m.t_el.lambda - 2 * m.t_el.mu + m.f.rho)};
}

inline bool admissible(const ElasticParams& e) {
    return e.rho > 0 && e.mu > 0 && e.lambda + 2 * e.mu / 3 > 0 && e.zeta >= 0;
}
inline bool admissible(const AcousticParams& a) { return a.rho > 0 && a.c > 0 && a.b > 0; }

}  // namespace elacu
