#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <vector>

#include "msdarcy/fields.hpp"
#include "msdarcy/grid.hpp"
#include "msdarcy/hybrid_solver.hpp"
#include "msdarcy/rt0.hpp"

namespace msdarcy {

/// Boundary condition applied on the whole outer boundary.
struct BoundaryCondition {
    enum class Kind {
        no_flow,  ///< u . n = 0 (default)
        pressure, ///< prescribed pressure trace, imposed weakly
        flux      ///< prescribed normal flux density (+axis orientation)
    };
    Kind kind = Kind::no_flow;
    std::function<double(const Vec3&)> pressure;
    std::function<double(const Vec3&)> flux;
};

/// Face classification inside an assembled system.
enum class FaceKind : int { interior = 0, fixed_flux = 1, pressure = 2 };

/// Assembled expanded mixed system on one grid: per-cell element blocks plus
/// face classification. DoF ordering of the direct (uncondensed) form:
/// [theta: 6 per cell, cell-major | u: one per non-fixed face, ascending face
/// index | p: per cell | mean-constraint row when pure Neumann].
struct SaddleSystem {
    CartesianGrid grid;
    QuadratureRule rule = QuadratureRule::midpoint;
    std::vector<Mat6> Mk;           ///< k-weighted mass per cell
    Mat6 N;                         ///< shared unweighted pairing block
    Vec6 b_div;                     ///< shared divergence integrals
    std::vector<FaceKind> face_kind;
    std::vector<double> face_value; ///< fixed faces: +axis total flux; pressure faces: mean trace
    std::vector<Index> face_lambda; ///< interior faces: multiplier id; else -1
    Index n_lambda = 0;
    Eigen::VectorXd f;              ///< per-cell source integrals
    bool pure_neumann = true;
};

/// Three-field solution on one grid.
struct ExpandedSolution {
    std::vector<Vec6> theta;    ///< broken gradient per cell
    std::vector<Vec6> u_broken; ///< per-cell face fluxes (+axis totals)
    Eigen::VectorXd u;          ///< conforming flux per face
    Eigen::VectorXd p;          ///< pressure per cell
    Eigen::VectorXd lambda;     ///< pressure trace per face
    SolverStats stats;
};

/// Spec operation: assemble the expanded mixed system.
/// Pure-Neumann data must be compatible (total source balances prescribed
/// boundary flux) or CompatibilityError is thrown.
SaddleSystem assemble_expanded_fine(const CartesianGrid& grid, const CoefficientField& k,
                                    const SourceField& f, const BoundaryCondition& bc = {});
SaddleSystem assemble_expanded_fine(const NestedGridPair& pair, const CoefficientField& k,
                                    const SourceField& f, const BoundaryCondition& bc = {});

/// Condensed form of a SaddleSystem plus the recovery maps.
class FineCondensed {
public:
    FineCondensed(const SaddleSystem& system, SolverConfig cfg = {},
                  std::shared_ptr<CondensedFactorCache> cache = nullptr);

    const HybridCondensedSystem& engine() const { return *engine_; }

    /// Loads realizing the system's own right-hand side (source + folded BCs).
    HybridLoads system_loads() const;

    /// Loads for custom per-cell source integrals and, optionally, alternative
    /// prescribed face fluxes (face-indexed +axis totals; nullptr keeps the
    /// system's own values).
    HybridLoads make_loads(const Eigen::VectorXd& source_integrals,
                           const Eigen::VectorXd* fixed_face_totals) const;

    /// Map a hybrid solution back to the three-field form. Broken face fluxes
    /// recovered from the two sides of each interior face must agree to the
    /// solver tolerance; they are averaged into the conforming flux vector.
    ExpandedSolution recover(const HybridSolution& hybrid,
                             const Eigen::VectorXd* fixed_face_totals = nullptr) const;

private:
    const SaddleSystem* sys_;
    SolverConfig cfg_;
    std::unique_ptr<HybridCondensedSystem> engine_;
    std::vector<std::array<int, 6>> free_slot_; ///< per cell: local face -> slot or -1
};

/// Spec operation: cellwise elimination to the sparse symmetric (p, lambda)
/// system with recovery maps.
FineCondensed hybridize_and_condense(const SaddleSystem& system, SolverConfig cfg = {});

/// Spec operation: solve via the condensed path.
ExpandedSolution solve_expanded_fine(const SaddleSystem& system, SolverConfig cfg = {});

/// Direct (uncondensed) assembly of the conforming saddle system; retained as
/// a test oracle for the hybrid path.
SpMat direct_saddle_matrix(const SaddleSystem& system);
Eigen::VectorXd direct_saddle_rhs(const SaddleSystem& system);
ExpandedSolution solve_direct_saddle(const SaddleSystem& system);

/// Prebuilt local Neumann solver on a subgrid: the condensed structure is
/// factorized once and reused for many right-hand sides (basis construction).
class LocalNeumannContext {
public:
    LocalNeumannContext(const Subgrid& sub, const CoefficientField& k, QuadratureRule rule,
                        SolverConfig cfg = {});

    const CartesianGrid& grid() const { return grid_; }

    /// Solve with per-cell divergence density `div_density` and per-face
    /// boundary data `boundary_flux` (+axis total flux; entries on interior
    /// faces are ignored). Pressure is volume-weighted mean-zero.
    /// Incompatible data throws CompatibilityError.
    ExpandedSolution solve(const Eigen::VectorXd& div_density,
                           const Eigen::VectorXd& boundary_flux) const;

private:
    CartesianGrid grid_;
    SaddleSystem sys_;
    std::unique_ptr<FineCondensed> cond_;
};

/// Spec operation: one-shot local Neumann solve (see LocalNeumannContext).
ExpandedSolution solve_local_neumann(const Subgrid& sub, const CoefficientField& k,
                                     const Eigen::VectorXd& div_density,
                                     const Eigen::VectorXd& boundary_flux,
                                     QuadratureRule rule, SolverConfig cfg = {});

} // namespace msdarcy
