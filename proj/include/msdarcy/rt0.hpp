#pragma once

#include <Eigen/Dense>

#include "msdarcy/fields.hpp"
#include "msdarcy/grid.hpp"

namespace msdarcy {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Lowest-order Raviart-Thomas element on an axis-aligned hexahedron.
///
/// Local face order: (x-lo, x-hi, y-lo, y-hi, z-lo, z-hi). Each shape function
/// carries unit total flux in the +axis direction through its own face and zero
/// through the others, so a local coefficient vector holds signed face fluxes
/// in the global orientation convention. With that normalization
/// div(phi_i) = sign_i / |K| with sign = -1 on "lo" faces and +1 on "hi" faces.
class RT0Element {
public:
    RT0Element() = default;
    RT0Element(double hx, double hy, double hz);
    explicit RT0Element(const CartesianGrid& grid)
        : RT0Element(grid.spacing(0), grid.spacing(1), grid.spacing(2)) {}

    double volume() const { return vol_; }
    double area(int axis) const { return area_[axis]; }
    static double sign(int local_face) { return (local_face % 2 == 0) ? -1.0 : 1.0; }

    /// Unweighted mass matrix N[i][j] = int_K phi_i . phi_j (exact).
    const Mat6& mass() const { return mass_; }
    /// Divergence integrals b[i] = int_K div phi_i = sign_i.
    const Vec6& div_int() const { return div_int_; }

    /// Velocity value at reference coordinates r in [0,1]^3 for local dofs v.
    Vec3 evaluate(const Vec6& v, const Vec3& r) const;
    /// Per-component integrals over the cell: int_K v dx.
    Vec3 component_integral(const Vec6& v) const;
    /// Divergence of the field with local dofs v (constant over the cell).
    double divergence(const Vec6& v) const { return div_int_.dot(v) / vol_; }

    /// Weighted mass matrix int_K phi_i . (k phi_j) for a scalar or tensor
    /// coefficient sampled with `rule`. Cellwise-constant scalar fields use the
    /// exact N-scaling path automatically.
    Mat6 weighted_mass(const CoefficientField& field, Index cell, QuadratureRule rule) const;

    /// Moment vector int_K (k e) . phi_i for a constant direction e (used by the
    /// periodic cell problems).
    Vec6 weighted_direction_moment(const CoefficientField& field, Index cell,
                                   QuadratureRule rule, const Vec3& e) const;

    /// L2 inner product of two local fields: v1^T N v2.
    double inner(const Vec6& a, const Vec6& b) const { return a.dot(mass_ * b); }

private:
    double h_[3] = {1.0, 1.0, 1.0};
    double vol_ = 1.0;
    double area_[3] = {1.0, 1.0, 1.0};
    Mat6 mass_ = Mat6::Zero();
    Vec6 div_int_ = Vec6::Zero();
};

/// Element matrices of the expanded mixed formulation for one cell:
/// Mk (k-weighted mass), N (pairing), b_div (+-1 divergence integrals).
struct CellMatrices {
    Mat6 Mk;
    Mat6 N;
    Vec6 b_div;
};

/// Spec operation: compute the RT0 element matrices of one fine cell.
/// Throws DegenerateCoefficient when the weighted mass matrix is singular
/// (coefficient vanishes at every quadrature point of the cell).
CellMatrices local_rt0_matrices(const CartesianGrid& grid, Index cell,
                                const CoefficientField& field, QuadratureRule rule);

} // namespace msdarcy
