#pragma once

#include <array>

#include "msdarcy/fine_solver.hpp"

namespace msdarcy {

/// Output of the periodic cell problems on one unit cell Y.
///
/// `correctors[i]` is the cellwise corrector pressure for the unit direction
/// e_i, gauged to zero volume-weighted mean. `k_star` is the homogenized
/// tensor: column i is the negative volume average of the flux response to
/// the constant gradient e_i.
struct CellProblemResult {
    Mat3 k_star = Mat3::Identity();
    std::array<Eigen::VectorXd, 3> correctors;
    std::array<SolverStats, 3> stats;
};

/// Solve the three periodic cell problems on `cell_grid` with coefficient
/// `k_Y` and average the flux responses into the homogenized tensor.
///
/// Faces on the high boundary plane of each axis are identified with their
/// low-plane counterparts, so the problem lives on the torus and is pure
/// Neumann; the pressure gauge is fixed by the zero-mean convention.
/// Coefficients that vanish on a whole cell raise DegenerateCoefficient.
CellProblemResult homogenize_cell(const CoefficientField& k_Y, const CartesianGrid& cell_grid,
                                  SolverConfig cfg = {});

/// Fine expanded solve with the constant SPD tensor `k_star` (the smooth
/// homogenized reference problem).
ExpandedSolution homogenized_reference(const Mat3& k_star, const SourceField& f,
                                       const CartesianGrid& grid,
                                       const BoundaryCondition& bc = {}, SolverConfig cfg = {});

/// Volume-averaged harmonic and arithmetic means of a scalar coefficient,
/// sampled with its recommended quadrature rule (the Voigt-Reuss bounds of
/// every homogenized eigenvalue). A coefficient that touches zero has
/// harmonic mean zero.
struct FieldMeans {
    double harmonic = 0.0;
    double arithmetic = 0.0;
};
FieldMeans field_means(const CoefficientField& k);

/// Two-layer laminate on the grid box: `a` on the lower half of the first
/// coordinate, `b` above, so the 11 entry of k* is the harmonic mean.
CoefficientField make_laminate(const CartesianGrid& grid, double a, double b);
/// Two-phase checkerboard in (y1, y2): `a` on the quadrants where both halves
/// agree, `b` elsewhere; constant in y3. Cell counts must be even in y1, y2.
CoefficientField make_checkerboard(const CartesianGrid& grid, double a, double b);

} // namespace msdarcy
