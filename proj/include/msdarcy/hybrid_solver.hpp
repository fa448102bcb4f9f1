#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <string>
#include <vector>

#include "msdarcy/grid.hpp"

namespace msdarcy {

using SpMat = Eigen::SparseMatrix<double>;

/// Linear-solver settings shared by all condensed solves.
struct SolverConfig {
    double rel_tol = 1e-10; ///< relative residual target for the condensed system
    int max_refine = 3;     ///< iterative-refinement sweeps per factorization
    /// Pure-Neumann handling: when true, the one-dimensional nullspace is
    /// removed by deflation inside a matrix-free CG instead of augmenting a
    /// constraint row and factorizing. Memory-proof for very large systems
    /// (periodic cell problems); valid for single-profile multiplier
    /// structures, where the nullvector is constant over (p, lambda).
    bool deflate = false;
};

/// Outcome bookkeeping for one condensed solve.
struct SolverStats {
    std::string method;                 ///< factorization that produced the result
    double residual = 0.0;              ///< final relative residual
    double constraint_multiplier = 0.0; ///< mean-constraint multiplier (pure Neumann)
    std::vector<double> history;        ///< residuals of every attempt, in order
};

/// One element block of a hybridized expanded mixed system.
///
/// Block equations, with one pressure p per element, broken-gradient
/// coefficients theta (size nt), free velocity coefficients u (size nu) and
/// global multipliers lambda:
///   A theta + P^T u            = r1
///   P theta + b p - C lambda   = g
///   b^T u                      = F
///   sum_elements C^T u         = 0
/// Velocity slots with prescribed values are folded into the loads by the
/// caller and do not appear here.
struct HybridElement {
    Eigen::MatrixXd A; ///< nt x nt symmetric positive definite
    Eigen::MatrixXd P; ///< nu x nt pairing block
    Eigen::VectorXd b; ///< nu divergence integrals
    struct Coupling {
        int slot;      ///< local free velocity slot
        Index lambda;  ///< global multiplier id
        double weight; ///< coupling coefficient
    };
    std::vector<Coupling> couplings;
    double volume = 1.0; ///< weight in the mean-zero pressure constraint
};

/// Right-hand sides for one solve on a fixed element structure. Empty vectors
/// (or empty containers) are treated as zeros.
struct HybridLoads {
    std::vector<Eigen::VectorXd> r1;
    std::vector<Eigen::VectorXd> g;
    Eigen::VectorXd F;
};

/// Solution of one hybrid solve in recovered form.
struct HybridSolution {
    Eigen::VectorXd p;
    Eigen::VectorXd lambda;
    std::vector<Eigen::VectorXd> u;     ///< free velocity slots per element
    std::vector<Eigen::VectorXd> theta; ///< gradient slots per element
    SolverStats stats;
};

/// Reusable factorization cache: keeps the symbolic analysis alive across
/// repeated assemblies with an identical sparsity pattern (IMPES stepping).
struct CondensedFactorCache {
    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool analyzed = false;
    Index dim = 0;
};

/// Cellwise elimination of (theta, u) down to a sparse symmetric system in
/// (p, lambda), plus the affine recovery maps. The element structure is
/// factorized once; `solve` may be called repeatedly with new loads.
///
/// Pure-Neumann problems carry a one-dimensional pressure nullspace; it is
/// removed by augmenting a volume-weighted zero-mean constraint row.
class HybridCondensedSystem {
public:
    HybridCondensedSystem(std::vector<HybridElement> elements, Index n_lambda,
                          bool pure_neumann, SolverConfig cfg = {},
                          std::shared_ptr<CondensedFactorCache> cache = nullptr);

    Index element_count() const { return static_cast<Index>(ops_.size()); }
    Index lambda_count() const { return n_lambda_; }
    bool pure_neumann() const { return pure_neumann_; }
    /// Assembled condensed matrix (augmented by the constraint row when pure
    /// Neumann); exposed for diagnostics and tests.
    const SpMat& matrix() const { return K_; }

    HybridSolution solve(const HybridLoads& loads) const;

private:
    struct LocalOps {
        Eigen::MatrixXd Ainv; ///< A^{-1}
        Eigen::MatrixXd AiPt; ///< A^{-1} P^T
        Eigen::MatrixXd W;    ///< (P A^{-1} P^T)^{-1}
        Eigen::MatrixXd Cl;   ///< nu x nl local coupling matrix
        Eigen::MatrixXd WCl;  ///< W Cl
        Eigen::VectorXd Wb;   ///< W b
        Eigen::VectorXd b;
        double volume = 1.0;
        std::vector<Index> lam; ///< global ids of the local multipliers
    };

    Eigen::VectorXd solve_condensed(const Eigen::VectorXd& rhs, SolverStats& stats) const;

    std::vector<LocalOps> ops_;
    Index n_lambda_ = 0;
    bool pure_neumann_ = false;
    SolverConfig cfg_;
    SpMat K_;
    std::shared_ptr<CondensedFactorCache> cache_;
    bool ldlt_ok_ = false;
    bool deflated_ = false;
    mutable std::unique_ptr<Eigen::SparseLU<SpMat>> lu_;
    mutable bool lu_tried_ = false;
};

} // namespace msdarcy
