#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "msdarcy/grid.hpp"

namespace msdarcy {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Convert grid geometry triples to Eigen vectors.
inline Vec3 to_vec(const std::array<double, 3>& a) { return Vec3(a[0], a[1], a[2]); }

enum class QuadratureRule {
    midpoint, ///< single point at the cell center, weight |cell|
    gauss2,   ///< tensor-product 2x2x2 Gauss rule, exact through degree 3 per axis
};

struct QuadraturePoint {
    Vec3 x;          ///< physical coordinates
    double weight;   ///< physical weight; weights of a cell sum to |cell|
    double value;    ///< sampled coefficient value (scalar fields)
};

/// Quadrature abscissae/weights on the reference cell [0,1]^3.
std::vector<std::pair<Vec3, double>> reference_rule(QuadratureRule rule);

enum class PermeabilityVariant {
    uniform,
    channel,
    vanishing_channel,
    oscillatory,
    random_shale,
    user_table,
    constant_tensor, ///< homogenized reference coefficient
    analytic,        ///< arbitrary positive point function (direct factory only)
};

struct PermeabilityParams {
    double uniform_value = 1.0;
    /// Channel box (paper setup: one fine-cell-wide run across the domain in x).
    Box channel_box{{0.0, 4.0 / 24.0, 7.0 / 24.0}, {1.0, 5.0 / 24.0, 8.0 / 24.0}};
    double channel_inside = 1e-4;
    double channel_outside = 1.0;
    /// random_shale composition (fractions sum to <= 1; remainder split between
    /// the two moderate values).
    double shale_fraction = 0.10;
    double high_fraction = 0.10;
    double shale_value = 1e-6;
    double high_value = 100.0;
    double moderate_hi = 1.0;
    double moderate_lo = 0.1;
    /// user_table source file (text: one value per line, or raw little-endian
    /// doubles; both in cell-index order).
    std::string table_path;
    /// constant_tensor value.
    Mat3 tensor = Mat3::Identity();
};

/// Permeability field on the fine grid. Values are nonnegative; the "bubble"
/// mask max(0, 1-32*x(1-x)*y(1-y)) on a cell's reference (x,y) square may drive
/// the coefficient to zero inside a cell, which the expanded formulation
/// tolerates as long as the cell's quadrature set sees nonzero values.
class CoefficientField {
public:
    PermeabilityVariant variant() const { return variant_; }
    const CartesianGrid& grid() const { return *grid_; }

    bool cellwise_constant() const;
    QuadratureRule recommended_rule() const;

    /// Scalar value at a physical point inside `cell`.
    double value(Index cell, const Vec3& x) const;
    /// Tensor value (scalar kinds return value*I).
    Mat3 tensor_value(Index cell, const Vec3& x) const;
    bool is_tensor() const { return variant_ == PermeabilityVariant::constant_tensor; }

    /// Per-cell multiplicative scaling (used for mobility-weighted coefficients);
    /// empty means 1 everywhere.
    const std::vector<double>& cell_scale() const { return cell_scale_; }
    /// A copy of this field scaled cellwise by `factors` (size = cell count).
    CoefficientField scaled_by(const std::vector<double>& factors) const;

    friend CoefficientField make_permeability(PermeabilityVariant variant,
                                              const NestedGridPair& pair,
                                              const PermeabilityParams& params,
                                              std::optional<std::uint64_t> seed);
    friend CoefficientField make_cellwise_field(const CartesianGrid& grid,
                                                std::vector<double> values);
    friend CoefficientField make_tensor_field(const CartesianGrid& grid, const Mat3& tensor);
    friend CoefficientField make_analytic_field(const CartesianGrid& grid,
                                                std::function<double(const Vec3&)> fn);

private:
    double base_value(Index cell, const Vec3& x) const;

    PermeabilityVariant variant_ = PermeabilityVariant::uniform;
    const CartesianGrid* grid_ = nullptr;
    std::vector<double> cell_values_;  ///< per-cell base value (scalar kinds)
    std::vector<std::uint8_t> bubble_; ///< per-cell: multiply by the bubble mask
    std::function<double(const Vec3&)> analytic_;
    Mat3 tensor_ = Mat3::Identity();
    std::vector<double> cell_scale_;
};

CoefficientField make_permeability(PermeabilityVariant variant, const NestedGridPair& pair,
                                   const PermeabilityParams& params = {},
                                   std::optional<std::uint64_t> seed = std::nullopt);

/// Coefficient on an arbitrary grid with one nonnegative value per cell.
CoefficientField make_cellwise_field(const CartesianGrid& grid, std::vector<double> values);
/// Constant SPD tensor coefficient on an arbitrary grid.
CoefficientField make_tensor_field(const CartesianGrid& grid, const Mat3& tensor);
/// Pointwise-analytic positive coefficient (sampled with the 2x2x2 Gauss rule).
CoefficientField make_analytic_field(const CartesianGrid& grid,
                                     std::function<double(const Vec3&)> fn);

/// Sample the coefficient on one cell; weights sum to the cell volume and all
/// values are the coefficient at the points (scalar fields only).
std::vector<QuadraturePoint> sample_at_quadrature(const CoefficientField& field, Index cell,
                                                  QuadratureRule rule);

/// The reference-square bubble of the vanishing-permeability cells.
double bubble_mask(double x, double y);

// ------------------------------------------------------------------- sources

enum class SourceVariant { corner_wells_3d, corner_wells_2d, two_spot, user_table };

struct SourceParams {
    /// Corner-well extent; defaults to the coarse spacing when NaN.
    double H = std::numeric_limits<double>::quiet_NaN();
    double rate = 1.0; ///< two_spot well density (per unit volume)
    std::string table_path;
};

/// Piecewise-constant (per fine cell) volumetric source density.
struct SourceField {
    SourceVariant variant = SourceVariant::corner_wells_3d;
    const CartesianGrid* grid = nullptr;
    std::vector<double> density; ///< per fine cell

    double cell_integral(Index cell) const { return density[cell] * grid->cell_volume(); }
    double total_integral() const;
    double l2_scale() const; ///< max |density|, used in compatibility tolerances
};

SourceField make_source(SourceVariant variant, const NestedGridPair& pair,
                        const SourceParams& params = {});

} // namespace msdarcy
