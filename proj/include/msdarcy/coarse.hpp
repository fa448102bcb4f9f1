#pragma once

#include "msdarcy/basis.hpp"
#include "msdarcy/fine_solver.hpp"

namespace msdarcy {

/// How the coarse saddle system is solved. Both routes produce the same
/// discrete solution (to solver accuracy); the hybrid route eliminates
/// (theta, u) cellwise and solves the condensed multiplier system, the direct
/// route assembles the conforming saddle system with shared velocity slots.
enum class CoarseSolveMode { hybrid, direct };

/// Identity of one velocity/gradient coefficient slot on a coarse cell:
/// slots are ordered by local face (x-lo, x-hi, y-lo, y-hi, z-lo, z-hi), and
/// within a face by the face's profile index.
struct CoarseSlotRef {
    Index coarse_face = -1;
    int local_face = 0;
    int profile = 0;
};

/// Coefficients of a coarse solve in the multiscale basis.
struct CoarseSolution {
    std::vector<Eigen::VectorXd> theta; ///< per coarse cell, one entry per slot
    std::vector<Eigen::VectorXd> u;     ///< per coarse cell, per slot (+axis totals; fixed slots included)
    Eigen::VectorXd p;                  ///< per coarse cell
    std::vector<Eigen::VectorXd> lambda; ///< per coarse face, one entry per profile
    SolverStats stats;
};

/// Fine-grid representation of a coarse solution through the basis.
struct DownscaledSolution {
    Eigen::VectorXd u;          ///< conforming fine face fluxes (+axis totals)
    std::vector<Vec6> u_broken; ///< per fine cell velocity coefficients
    std::vector<Vec6> theta;    ///< per fine cell gradient coefficients
    Eigen::VectorXd p;          ///< per fine cell (piecewise constant per coarse cell)
    /// L2 norm of the normal-flux density jump across coarse interfaces; zero
    /// (to rounding) for conforming bases, a nonconformity measure for the
    /// oversampled one.
    double interface_jump = 0.0;
};

struct CoarseSystem;

/// Structure of the coarse problem for a fixed (grid pair, basis, source,
/// boundary data): slot tables, pairing blocks, multiplier ids and load
/// skeletons. Assembling for a specific effective coefficient is then cheap,
/// which is what the sequential-splitting flow solver relies on.
///
/// Boundary handling mirrors the fine solver: no-flow and prescribed-flux
/// faces have their slot values fixed (a prescribed total flux is carried by
/// the face's first profile), pressure faces keep free slots and load the
/// momentum equation with the trace paired against each profile.
class CoarseOperator {
public:
    CoarseOperator(const NestedGridPair& pair, const CoarseBasisSet& basis,
                   const SourceField& f, const BoundaryCondition& bc);

    const NestedGridPair& pair() const { return *pair_; }
    const CoarseBasisSet& basis() const { return *basis_; }

    const std::vector<CoarseSlotRef>& slots(Index coarse_cell) const {
        return slots_[static_cast<std::size_t>(coarse_cell)];
    }
    /// Index of a slot among the cell's free slots, or -1 if its value is fixed.
    int free_index(Index coarse_cell, int slot) const {
        return free_idx_[static_cast<std::size_t>(coarse_cell)][static_cast<std::size_t>(slot)];
    }
    double fixed_value(Index coarse_cell, int slot) const {
        return fixed_val_[static_cast<std::size_t>(coarse_cell)][static_cast<std::size_t>(slot)];
    }
    FaceKind coarse_face_kind(Index coarse_face) const {
        return face_kind_[static_cast<std::size_t>(coarse_face)];
    }
    Index lambda_base(Index coarse_face) const {
        return lambda_base_[static_cast<std::size_t>(coarse_face)];
    }
    Index lambda_count() const { return n_lambda_; }
    bool pure_neumann() const { return pure_neumann_; }
    /// Multiplier Gram matrix of a coarse face (profiles paired against the
    /// unit-mean multiplier shapes).
    const Eigen::MatrixXd& face_gram(Index coarse_face) const {
        return gram_[static_cast<std::size_t>(coarse_face)];
    }
    /// Pressure faces: trace paired against each profile (empty elsewhere).
    const Eigen::VectorXd& pressure_pairing(Index coarse_face) const {
        return face_pd_[static_cast<std::size_t>(coarse_face)];
    }

    /// Element blocks and loads for a given effective coefficient on the fine
    /// grid. Throws DegenerateBasis if a cell's gradient block is singular.
    CoarseSystem assemble(const CoefficientField& k_eff) const;

private:
    friend CoarseSolution solve_coarse_direct(const CoarseSystem& sys, SolverConfig cfg);
    friend DownscaledSolution downscale(const CoarseOperator& op, const CoarseSolution& sol);

    const NestedGridPair* pair_;
    const CoarseBasisSet* basis_;

    std::vector<std::vector<CoarseSlotRef>> slots_;
    std::vector<std::vector<int>> free_idx_;
    std::vector<std::vector<double>> fixed_val_;
    std::vector<Eigen::VectorXd> sigma_;  ///< per cell: divergence sign per slot
    std::vector<Eigen::MatrixXd> Pfull_;  ///< per cell: nt x nt pairing (all slots)
    std::vector<Eigen::MatrixXd> elemP_;  ///< per cell: free rows of Pfull_
    std::vector<std::vector<HybridElement::Coupling>> couplings_;
    std::vector<Eigen::VectorXd> g_;      ///< per cell: momentum loads on free slots
    std::vector<Eigen::VectorXd> r1fold_; ///< per cell: folded fixed-slot loads
    std::vector<double> F_;               ///< per cell: source integral incl. folds
    std::vector<std::vector<Eigen::MatrixXd>> Nq_; ///< per cell, per fine cell: eta^T N eta

    std::vector<FaceKind> face_kind_;
    std::vector<Eigen::VectorXd> face_pd_; ///< pressure faces: trace paired per profile
    std::vector<Index> lambda_base_;
    std::vector<Eigen::MatrixXd> gram_;
    Index n_lambda_ = 0;
    bool pure_neumann_ = false;
};

/// Assembled coarse problem, ready for either solve mode. References the
/// operator it came from, which must outlive it.
struct CoarseSystem {
    const CoarseOperator* op = nullptr;
    std::vector<HybridElement> elements;
    HybridLoads loads;
};

CoarseSystem assemble_coarse(const CoarseOperator& op, const CoefficientField& k_eff);

CoarseSolution solve_coarse(const CoarseSystem& sys, CoarseSolveMode mode, SolverConfig cfg = {},
                            std::shared_ptr<CondensedFactorCache> cache = nullptr);

DownscaledSolution downscale(const CoarseOperator& op, const CoarseSolution& sol);

/// Fine-grid RT0 coefficients of a broken coarse RT0 field given by per-cell
/// coefficient six-vectors (+axis face totals). Used to compare multiscale
/// fields against coarse-grid reference assemblies.
std::vector<Vec6> inject_coarse_broken(const NestedGridPair& pair,
                                       const std::vector<Vec6>& cell_dofs);

} // namespace msdarcy
