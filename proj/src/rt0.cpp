#include "msdarcy/rt0.hpp"

#include <cmath>

#include "msdarcy/errors.hpp"

namespace msdarcy {

RT0Element::RT0Element(double hx, double hy, double hz) {
    h_[0] = hx;
    h_[1] = hy;
    h_[2] = hz;
    vol_ = hx * hy * hz;
    for (int a = 0; a < 3; ++a) {
        area_[a] = vol_ / h_[a];
    }
    // Same-axis blocks only: for axis a with shapes lo = (1-t)/A, hi = t/A on
    // t in [0, h_a] (t measured in physical units scaled by h),
    // int phi_lo^2 = h/(3A), int phi_lo phi_hi = h/(6A), int phi_hi^2 = h/(3A).
    for (int a = 0; a < 3; ++a) {
        const int lo = 2 * a;
        const int hi = 2 * a + 1;
        const double diag = h_[a] / (3.0 * area_[a]);
        const double cross = h_[a] / (6.0 * area_[a]);
        mass_(lo, lo) = diag;
        mass_(hi, hi) = diag;
        mass_(lo, hi) = cross;
        mass_(hi, lo) = cross;
        div_int_(lo) = -1.0;
        div_int_(hi) = 1.0;
    }
}

Vec3 RT0Element::evaluate(const Vec6& v, const Vec3& r) const {
    Vec3 out;
    for (int a = 0; a < 3; ++a) {
        const double lo = (1.0 - r[a]) / area_[a];
        const double hi = r[a] / area_[a];
        out[a] = v[2 * a] * lo + v[2 * a + 1] * hi;
    }
    return out;
}

Vec3 RT0Element::component_integral(const Vec6& v) const {
    Vec3 out;
    for (int a = 0; a < 3; ++a) {
        out[a] = (v[2 * a] + v[2 * a + 1]) * h_[a] / 2.0;
    }
    return out;
}

Mat6 RT0Element::weighted_mass(const CoefficientField& field, Index cell,
                               QuadratureRule rule) const {
    if (field.cellwise_constant() && !field.is_tensor()) {
        return field.value(cell, to_vec(field.grid().cell_center(cell))) * mass_;
    }
    Mat6 out = Mat6::Zero();
    const auto points = sample_at_quadrature(field, cell, rule);
    for (const auto& qp : points) {
        // Reference coordinates of the quadrature point within the cell.
        const Vec3 lower = to_vec(field.grid().cell_lower(cell));
        Vec3 r;
        for (int a = 0; a < 3; ++a) {
            r[a] = (qp.x[a] - lower[a]) / h_[a];
        }
        Eigen::Matrix<double, 3, 6> phi = Eigen::Matrix<double, 3, 6>::Zero();
        for (int a = 0; a < 3; ++a) {
            phi(a, 2 * a) = (1.0 - r[a]) / area_[a];
            phi(a, 2 * a + 1) = r[a] / area_[a];
        }
        Eigen::Matrix<double, 3, 6> kphi;
        if (field.is_tensor()) {
            kphi = field.tensor_value(cell, qp.x) * phi;
        } else {
            kphi = qp.value * phi;
        }
        out += qp.weight * phi.transpose() * kphi;
    }
    return out;
}

Vec6 RT0Element::weighted_direction_moment(const CoefficientField& field, Index cell,
                                           QuadratureRule rule, const Vec3& e) const {
    Vec6 out = Vec6::Zero();
    const auto points = sample_at_quadrature(field, cell, rule);
    for (const auto& qp : points) {
        const Vec3 lower = to_vec(field.grid().cell_lower(cell));
        Vec3 r;
        for (int a = 0; a < 3; ++a) {
            r[a] = (qp.x[a] - lower[a]) / h_[a];
        }
        Vec3 ke;
        if (field.is_tensor()) {
            ke = field.tensor_value(cell, qp.x) * e;
        } else {
            ke = qp.value * e;
        }
        for (int a = 0; a < 3; ++a) {
            out[2 * a] += qp.weight * ke[a] * (1.0 - r[a]) / area_[a];
            out[2 * a + 1] += qp.weight * ke[a] * r[a] / area_[a];
        }
    }
    return out;
}

CellMatrices local_rt0_matrices(const CartesianGrid& grid, Index cell,
                                const CoefficientField& field, QuadratureRule rule) {
    if (cell < 0 || cell >= grid.cell_count()) {
        throw IndexError("local_rt0_matrices: cell index out of range");
    }
    RT0Element elem(grid);
    CellMatrices out;
    out.N = elem.mass();
    out.b_div = elem.div_int();
    out.Mk = elem.weighted_mass(field, cell, rule);
    // The weighted mass matrix must be invertible for the flux elimination.
    Eigen::FullPivLU<Mat6> lu(out.Mk);
    if (!lu.isInvertible()) {
        throw DegenerateCoefficient("local_rt0_matrices: weighted mass matrix is singular");
    }
    return out;
}

} // namespace msdarcy
