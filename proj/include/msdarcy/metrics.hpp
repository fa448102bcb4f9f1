#pragma once

#include <string>

#include "msdarcy/coarse.hpp"

namespace msdarcy {

/// Absolute L2 errors and norms of one candidate solution against a fine
/// reference, plus the multiplier error in the discrete -1/2 trace norm when
/// the coarse solution is supplied. The fingerprint is filled by the caller
/// (experiment drivers) to make reports self-describing.
struct ErrorReport {
    double u_error = 0.0;
    double u_norm = 0.0;
    double gradp_error = 0.0;
    double gradp_norm = 0.0;
    double p_error = 0.0;
    double p_norm = 0.0;
    double multiplier_error = 0.0;
    std::string fingerprint;
};

/// L2 norm of a P0 field (one value per cell).
double l2_norm_cellwise(const CartesianGrid& grid, const Eigen::VectorXd& v);
/// L2 norm of a broken RT0 field (local face totals per cell).
double l2_norm_broken(const CartesianGrid& grid, const std::vector<Vec6>& v);
/// L2 norm of a conforming RT0 field (one total flux per face).
double l2_norm_faces(const CartesianGrid& grid, const Eigen::VectorXd& face_dofs);
/// Relative L2 difference of two P0 fields: ||a - b|| / ||b|| (0/0 gives 0).
double relative_cellwise_error(const CartesianGrid& grid, const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b);

/// All error norms of a downscaled coarse solution against the fine reference.
/// Velocity and gradient differences are integrated exactly through the RT0
/// mass matrix; the velocity is compared through its broken representation
/// (identical to the face fluxes for conforming variants, faithful for the
/// nonconforming oversampled one); pressure is P0. When `coarse` and `op` are
/// given, the multiplier error sums h_K ||P_e(p_ref) - lambda||^2 over the
/// interior coarse faces (the ones carrying multiplier unknowns; each enters
/// once per adjacent cell), where P_e projects the face-averaged reference
/// pressure trace onto the multiplier profiles.
ErrorReport compute_errors(const ExpandedSolution& reference, const DownscaledSolution& candidate,
                           const NestedGridPair& pair, const CoarseSolution* coarse = nullptr,
                           const CoarseOperator* op = nullptr);

/// Gradient error of the postprocessed form -u/k (defined only where k stays
/// strictly positive), integrated with the 2x2x2 Gauss rule per cell against
/// the reference broken gradient. Returns the error and the reference norm
/// under the same quadrature.
struct PostprocessedGradient {
    double error = 0.0;
    double norm = 0.0;
};
PostprocessedGradient postprocessed_gradient_error(const std::vector<Vec6>& theta_ref,
                                                   const std::vector<Vec6>& u_candidate,
                                                   const CoefficientField& k);

/// Largest per-coarse-cell defect |int_K div u - int_K f| of a conforming
/// fine-face flux against the source (the conservation statement tested by
/// the acceptance suite).
double max_coarse_divergence_defect(const NestedGridPair& pair, const Eigen::VectorXd& fine_u,
                                    const SourceField& f);

/// Same defect for a broken velocity (local face totals per fine cell). Within
/// a coarse cell the two sides of an interior fine face cancel, so this
/// measures the boundary flux of each coarse cell: it agrees with the
/// conforming overload for conforming fields and is the meaningful statement
/// for the oversampled variant, whose velocity is single-valued only inside
/// coarse cells.
double max_coarse_divergence_defect(const NestedGridPair& pair, const std::vector<Vec6>& fine_u,
                                    const SourceField& f);

} // namespace msdarcy
