#include "msdarcy/fields.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace msdarcy {

static void check_quadrature_positivity(const CoefficientField& f);

namespace {

/// Map raw 64-bit RNG output to [0,1) deterministically across platforms
/// (std::uniform_real_distribution is implementation-defined).
double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<double> read_table(const std::string& path, Index expected) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open coefficient table: " + path);
    std::vector<double> vals;
    vals.reserve(expected);
    double v;
    while (in >> v) vals.push_back(v);
    if (static_cast<Index>(vals.size()) != expected)
        throw ConfigError("coefficient table " + path + " has " + std::to_string(vals.size()) +
                          " entries, expected " + std::to_string(expected));
    return vals;
}

} // namespace

double bubble_mask(double x, double y) {
    return std::max(0.0, 1.0 - 32.0 * x * (1.0 - x) * y * (1.0 - y));
}

std::vector<std::pair<Vec3, double>> reference_rule(QuadratureRule rule) {
    std::vector<std::pair<Vec3, double>> pts;
    if (rule == QuadratureRule::midpoint) {
        pts.push_back({Vec3(0.5, 0.5, 0.5), 1.0});
        return pts;
    }
    const double a = 0.5 - 0.5 / std::sqrt(3.0);
    const double b = 0.5 + 0.5 / std::sqrt(3.0);
    const double g[2] = {a, b};
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) pts.push_back({Vec3(g[i], g[j], g[k]), 0.125});
    return pts;
}

bool CoefficientField::cellwise_constant() const {
    switch (variant_) {
        case PermeabilityVariant::uniform:
        case PermeabilityVariant::channel:
        case PermeabilityVariant::user_table:
        case PermeabilityVariant::constant_tensor:
            return true;
        case PermeabilityVariant::vanishing_channel:
        case PermeabilityVariant::random_shale:
            // Constant except on bubble-masked cells.
            return bubble_.empty();
        case PermeabilityVariant::oscillatory:
        case PermeabilityVariant::analytic:
            return false;
    }
    return false;
}

QuadratureRule CoefficientField::recommended_rule() const {
    return cellwise_constant() ? QuadratureRule::midpoint : QuadratureRule::gauss2;
}

double CoefficientField::base_value(Index cell, const Vec3& x) const {
    if (analytic_) return analytic_(x);
    double v = cell_values_.empty() ? 1.0 : cell_values_[cell];
    if (!bubble_.empty() && bubble_[cell]) {
        const auto lo = grid_->cell_lower(cell);
        const double rx = (x[0] - lo[0]) / grid_->spacing(0);
        const double ry = (x[1] - lo[1]) / grid_->spacing(1);
        v *= bubble_mask(rx, ry);
    }
    return v;
}

double CoefficientField::value(Index cell, const Vec3& x) const {
    if (is_tensor())
        throw ConfigError("scalar value() called on a tensor coefficient");
    double v = base_value(cell, x);
    if (!cell_scale_.empty()) v *= cell_scale_[cell];
    return v;
}

Mat3 CoefficientField::tensor_value(Index cell, const Vec3& x) const {
    if (is_tensor()) {
        Mat3 t = tensor_;
        if (!cell_scale_.empty()) t *= cell_scale_[cell];
        return t;
    }
    return value(cell, x) * Mat3::Identity();
}

CoefficientField CoefficientField::scaled_by(const std::vector<double>& factors) const {
    if (static_cast<Index>(factors.size()) != grid_->cell_count())
        throw ConfigError("cell scale size mismatch");
    CoefficientField out = *this;
    if (out.cell_scale_.empty()) {
        out.cell_scale_ = factors;
    } else {
        for (Index c = 0; c < grid_->cell_count(); ++c) out.cell_scale_[c] *= factors[c];
    }
    return out;
}

CoefficientField make_permeability(PermeabilityVariant variant, const NestedGridPair& pair,
                                   const PermeabilityParams& params,
                                   std::optional<std::uint64_t> seed) {
    const CartesianGrid& g = pair.fine();
    CoefficientField f;
    f.variant_ = variant;
    f.grid_ = &g;
    const Index n = g.cell_count();

    auto in_box = [](const Box& b, const std::array<double, 3>& x) {
        return x[0] > b.lo[0] && x[0] < b.hi[0] && x[1] > b.lo[1] && x[1] < b.hi[1] &&
               x[2] > b.lo[2] && x[2] < b.hi[2];
    };

    switch (variant) {
        case PermeabilityVariant::uniform:
            f.cell_values_.assign(n, params.uniform_value);
            break;
        case PermeabilityVariant::channel:
        case PermeabilityVariant::vanishing_channel: {
            f.cell_values_.assign(n, params.channel_outside);
            if (variant == PermeabilityVariant::vanishing_channel)
                f.bubble_.assign(n, 0);
            for (Index c = 0; c < n; ++c) {
                if (!in_box(params.channel_box, g.cell_center(c))) continue;
                if (variant == PermeabilityVariant::channel) {
                    f.cell_values_[c] = params.channel_inside;
                } else {
                    // Vanishing channel: the bubble itself is the permeability,
                    // equal to 1 on the cell's reference-square boundary.
                    f.cell_values_[c] = 1.0;
                    f.bubble_[c] = 1;
                }
            }
            break;
        }
        case PermeabilityVariant::oscillatory:
            f.analytic_ = [](const Vec3& x) {
                return (std::sin(20.0 * M_PI * x[0]) + 1.5) * (std::sin(20.0 * M_PI * x[1]) + 1.5);
            };
            break;
        case PermeabilityVariant::random_shale: {
            if (!seed) throw ConfigError("random_shale requires a seed");
            const double fs = params.shale_fraction, fh = params.high_fraction;
            if (fs < 0 || fh < 0 || fs + fh > 1.0)
                throw ConfigError("random_shale fractions out of range");
            f.cell_values_.assign(n, params.moderate_hi);
            f.bubble_.assign(n, 0);
            // The field is essentially two-dimensional: one draw per (x,y)
            // column, constant in z, iterated in cell-index order.
            std::mt19937_64 rng(*seed);
            const int nx = g.count(0), ny = g.count(1), nz = g.count(2);
            for (int iy = 0; iy < ny; ++iy)
                for (int ix = 0; ix < nx; ++ix) {
                    const double u = unit_uniform(rng);
                    double v;
                    bool bub = false;
                    if (u < fs) {
                        v = params.shale_value;
                        bub = true;
                    } else if (u < fs + fh) {
                        v = params.high_value;
                    } else if (u < fs + fh + (1.0 - fs - fh) / 2.0) {
                        v = params.moderate_hi;
                    } else {
                        v = params.moderate_lo;
                    }
                    for (int iz = 0; iz < nz; ++iz) {
                        const Index c = g.cell_index(ix, iy, iz);
                        f.cell_values_[c] = v;
                        f.bubble_[c] = bub ? 1 : 0;
                    }
                }
            break;
        }
        case PermeabilityVariant::user_table:
            f.cell_values_ = read_table(params.table_path, n);
            for (Index c = 0; c < n; ++c)
                if (f.cell_values_[c] < 0.0)
                    throw DegenerateCoefficient("negative permeability in table at cell " +
                                                std::to_string(c));
            break;
        case PermeabilityVariant::constant_tensor: {
            f.tensor_ = 0.5 * (params.tensor + params.tensor.transpose());
            Eigen::SelfAdjointEigenSolver<Mat3> es(f.tensor_);
            if (es.eigenvalues().minCoeff() <= 0.0)
                throw DegenerateCoefficient("constant tensor coefficient is not SPD");
            break;
        }
        case PermeabilityVariant::analytic:
            throw ConfigError("analytic coefficients are built with make_analytic_field");
    }

    check_quadrature_positivity(f);
    return f;
}

// Degeneracy guard: every cell must see at least one strictly positive
// quadrature value under the field's own recommended rule.
static void check_quadrature_positivity(const CoefficientField& f) {
    if (f.is_tensor()) return;
    const auto rule = f.recommended_rule();
    for (Index c = 0; c < f.grid().cell_count(); ++c) {
        bool positive = false;
        for (const auto& qp : sample_at_quadrature(f, c, rule)) {
            if (qp.value < 0.0)
                throw DegenerateCoefficient("negative coefficient at quadrature point in cell " +
                                            std::to_string(c));
            if (qp.value > 0.0) positive = true;
        }
        if (!positive)
            throw DegenerateCoefficient("coefficient vanishes on the whole quadrature set of cell " +
                                        std::to_string(c));
    }
}

CoefficientField make_cellwise_field(const CartesianGrid& grid, std::vector<double> values) {
    if (static_cast<Index>(values.size()) != grid.cell_count())
        throw ConfigError("cellwise field value count does not match the grid");
    CoefficientField f;
    f.variant_ = PermeabilityVariant::user_table;
    f.grid_ = &grid;
    f.cell_values_ = std::move(values);
    check_quadrature_positivity(f);
    return f;
}

CoefficientField make_tensor_field(const CartesianGrid& grid, const Mat3& tensor) {
    CoefficientField f;
    f.variant_ = PermeabilityVariant::constant_tensor;
    f.grid_ = &grid;
    f.tensor_ = 0.5 * (tensor + tensor.transpose());
    Eigen::SelfAdjointEigenSolver<Mat3> es(f.tensor_);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw DegenerateCoefficient("constant tensor coefficient is not SPD");
    return f;
}

CoefficientField make_analytic_field(const CartesianGrid& grid,
                                     std::function<double(const Vec3&)> fn) {
    if (!fn) throw ConfigError("analytic coefficient requires a callable");
    CoefficientField f;
    f.variant_ = PermeabilityVariant::analytic;
    f.grid_ = &grid;
    f.analytic_ = std::move(fn);
    check_quadrature_positivity(f);
    return f;
}

std::vector<QuadraturePoint> sample_at_quadrature(const CoefficientField& field, Index cell,
                                                  QuadratureRule rule) {
    const CartesianGrid& g = field.grid();
    const auto lo = g.cell_lower(cell);
    const double vol = g.cell_volume();
    std::vector<QuadraturePoint> out;
    for (const auto& [ref, w] : reference_rule(rule)) {
        QuadraturePoint qp;
        qp.x = Vec3(lo[0] + ref[0] * g.spacing(0), lo[1] + ref[1] * g.spacing(1),
                    lo[2] + ref[2] * g.spacing(2));
        qp.weight = w * vol;
        qp.value = field.is_tensor() ? field.tensor_value(cell, qp.x).trace() / 3.0
                                     : field.value(cell, qp.x);
        out.push_back(qp);
    }
    return out;
}

double SourceField::total_integral() const {
    double s = 0.0;
    for (double d : density) s += d;
    return s * grid->cell_volume();
}

double SourceField::l2_scale() const {
    double m = 0.0;
    for (double d : density) m = std::max(m, std::abs(d));
    return m;
}

SourceField make_source(SourceVariant variant, const NestedGridPair& pair,
                        const SourceParams& params) {
    const CartesianGrid& g = pair.fine();
    SourceField s;
    s.variant = variant;
    s.grid = &g;
    s.density.assign(g.cell_count(), 0.0);

    const Box& box = g.box();
    double H = params.H;
    if (std::isnan(H)) H = pair.coarse().spacing(0);

    switch (variant) {
        case SourceVariant::corner_wells_3d:
        case SourceVariant::corner_wells_2d: {
            const bool flat = (variant == SourceVariant::corner_wells_2d);
            for (Index c = 0; c < g.cell_count(); ++c) {
                const auto x = g.cell_center(c);
                const bool in_z_lo = flat || (x[2] < box.lo[2] + H);
                const bool in_z_hi = flat || (x[2] > box.hi[2] - H);
                if (x[0] < box.lo[0] + H && x[1] < box.lo[1] + H && in_z_lo)
                    s.density[c] = 1.0;
                else if (x[0] > box.hi[0] - H && x[1] > box.hi[1] - H && in_z_hi)
                    s.density[c] = -1.0;
            }
            break;
        }
        case SourceVariant::two_spot: {
            const auto& cg = pair.coarse();
            const Index inj = cg.cell_index(0, 0, 0);
            const Index prod = cg.cell_index(cg.count(0) - 1, cg.count(1) - 1, cg.count(2) - 1);
            for (Index fc : pair.fine_cells_of_coarse(inj)) s.density[fc] = params.rate;
            for (Index fc : pair.fine_cells_of_coarse(prod)) s.density[fc] = -params.rate;
            break;
        }
        case SourceVariant::user_table:
            s.density = read_table(params.table_path, g.cell_count());
            break;
    }

    const double tol = 1e-14 * std::max(1.0, s.l2_scale()) * box.volume();
    if (std::abs(s.total_integral()) > tol)
        throw CompatibilityError("source does not integrate to zero: total = " +
                                 std::to_string(s.total_integral()));
    return s;
}

} // namespace msdarcy
