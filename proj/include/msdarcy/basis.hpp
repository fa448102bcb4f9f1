#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "msdarcy/fields.hpp"
#include "msdarcy/fine_solver.hpp"
#include "msdarcy/grid.hpp"
#include "msdarcy/rt0.hpp"

namespace msdarcy {

enum class BasisVariant { local, oversampled, global };

/// Velocity/gradient basis pair of one (coarse cell, face, profile) slot,
/// stored as fine coefficients over the coarse cell's fine cells (ascending
/// global fine index, the order of NestedGridPair::fine_cells_of_coarse).
struct BasisPair {
    std::vector<Vec6> psi; ///< velocity, per-cell face fluxes
    std::vector<Vec6> eta; ///< gradient, broken RT0
};

/// Normal-flux profile on a coarse face: +axis totals per fine face (ascending
/// global fine index), summing to 1.
struct FaceProfile {
    std::vector<double> flux;
};

/// Complete multiscale basis for one nested grid pair.
///
/// Cell slots enumerate (local face 0..5) x (profiles kept on that face), face
/// index major. Coarse boundary faces carry single-sided bases; their slots
/// become unknowns only under pressure coarse boundary conditions.
struct CoarseBasisSet {
    BasisVariant variant = BasisVariant::local;
    const NestedGridPair* pair = nullptr;
    int layers = 0; ///< oversampling layers (oversampled variant)
    std::vector<std::vector<FaceProfile>> face_profiles; ///< per coarse face
    std::vector<std::vector<BasisPair>> cells;           ///< per coarse cell, slot order
    std::vector<std::vector<double>> norm_ratio; ///< |psi| * sqrt(|e|/h_K) per slot

    int profiles_on(Index coarse_face) const {
        return static_cast<int>(face_profiles[static_cast<std::size_t>(coarse_face)].size());
    }
    /// Slot index of (local face, profile) in a coarse cell, or -1.
    int slot_of(Index coarse_cell, int local_face, int profile) const;
    int slot_count(Index coarse_cell) const {
        return static_cast<int>(cells[static_cast<std::size_t>(coarse_cell)].size());
    }
};

/// Precomputed global velocity fields used by the global basis variant.
struct GlobalFieldSet {
    enum class Provenance { solution_field, harmonic_coordinates };
    Provenance provenance = Provenance::solution_field;
    std::vector<Eigen::VectorXd> fields; ///< conforming face fluxes on the fine grid
};

/// Spec operation: one basis per coarse face with the uniform flux profile,
/// from single-cell Neumann solves.
CoarseBasisSet build_local_basis(const NestedGridPair& pair, const CoefficientField& k,
                                 SolverConfig cfg = {});

/// Spec operation: oversampled basis. Solves the six macro-face problems on
/// each oversample region, then restricts with the coefficients that reproduce
/// the coarse RT0 fields exactly for constant coefficients.
CoarseBasisSet build_oversampled_basis(const NestedGridPair& pair, const CoefficientField& k,
                                       int layers, SolverConfig cfg = {});

/// Spec operation: global-field-driven basis. Face profiles are the global
/// fields' normal traces rescaled to unit total flux; faces where a field's
/// total flux nearly vanishes (|total| < tau_flux * ||u_i||) fall back to the
/// uniform profile, and near-identical profiles are deduplicated per face.
CoarseBasisSet build_global_basis(const NestedGridPair& pair, const CoefficientField& k,
                                  const GlobalFieldSet& global_fields, SolverConfig cfg = {},
                                  double tau_flux = 1e-8);

/// Spec operation: d divergence-free fields from pressure data x_i.
GlobalFieldSet compute_harmonic_global_fields(const CartesianGrid& grid,
                                              const CoefficientField& k, SolverConfig cfg = {});

/// Spec operation: single global field = fine solution velocity.
GlobalFieldSet compute_solution_global_field(const CartesianGrid& grid, const CoefficientField& k,
                                             const SourceField& f,
                                             const BoundaryCondition& bc = {},
                                             SolverConfig cfg = {});

/// Binary container round-trip so IMPES runs can reuse a fixed basis.
void save_basis(const CoarseBasisSet& set, const std::string& path);
CoarseBasisSet load_basis(const std::string& path, const NestedGridPair& pair);

} // namespace msdarcy
