#include "msdarcy/hybrid_solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "msdarcy/errors.hpp"

namespace msdarcy {

namespace {

Eigen::VectorXd zero_or(const std::vector<Eigen::VectorXd>& list, Index i, Eigen::Index n) {
    if (list.empty() || list[static_cast<std::size_t>(i)].size() == 0) {
        return Eigen::VectorXd::Zero(n);
    }
    const auto& v = list[static_cast<std::size_t>(i)];
    if (v.size() != n) {
        throw SolverError("hybrid solve: load vector has wrong size");
    }
    return v;
}

} // namespace

HybridCondensedSystem::HybridCondensedSystem(std::vector<HybridElement> elements,
                                             Index n_lambda, bool pure_neumann,
                                             SolverConfig cfg,
                                             std::shared_ptr<CondensedFactorCache> cache)
    : n_lambda_(n_lambda), pure_neumann_(pure_neumann), cfg_(cfg), cache_(std::move(cache)) {
    const Index ne = static_cast<Index>(elements.size());
    ops_.resize(elements.size());
    std::vector<Eigen::Triplet<double>> trips;

    for (Index e = 0; e < ne; ++e) {
        const HybridElement& el = elements[static_cast<std::size_t>(e)];
        LocalOps& op = ops_[static_cast<std::size_t>(e)];
        const Eigen::Index nt = el.A.rows();
        const Eigen::Index nu = el.P.rows();
        if (el.A.cols() != nt || el.P.cols() != nt || el.b.size() != nu) {
            throw SolverError("hybrid element " + std::to_string(e) + ": inconsistent block sizes");
        }

        Eigen::FullPivLU<Eigen::MatrixXd> alu(el.A);
        if (!alu.isInvertible()) {
            throw SolverError("hybrid element " + std::to_string(e) + ": singular A block");
        }
        op.Ainv = alu.inverse();
        op.AiPt = op.Ainv * el.P.transpose();
        op.b = el.b;
        op.volume = el.volume;

        // Local multiplier ids, deduplicated in ascending order.
        op.lam.clear();
        for (const auto& c : el.couplings) {
            op.lam.push_back(c.lambda);
        }
        std::sort(op.lam.begin(), op.lam.end());
        op.lam.erase(std::unique(op.lam.begin(), op.lam.end()), op.lam.end());
        const Eigen::Index nl = static_cast<Eigen::Index>(op.lam.size());
        op.Cl = Eigen::MatrixXd::Zero(nu, nl);
        for (const auto& c : el.couplings) {
            if (c.slot < 0 || c.slot >= nu || c.lambda < 0 || c.lambda >= n_lambda_) {
                throw SolverError("hybrid element " + std::to_string(e) + ": coupling out of range");
            }
            const auto pos = std::lower_bound(op.lam.begin(), op.lam.end(), c.lambda) - op.lam.begin();
            op.Cl(c.slot, pos) += c.weight;
        }

        if (nu > 0) {
            const Eigen::MatrixXd S = el.P * op.AiPt;
            Eigen::FullPivLU<Eigen::MatrixXd> slu(S);
            if (!slu.isInvertible()) {
                throw SolverError("hybrid element " + std::to_string(e) + ": singular Schur block");
            }
            op.W = slu.inverse();
            op.Wb = op.W * el.b;
            op.WCl = op.W * op.Cl;

            trips.emplace_back(static_cast<int>(e), static_cast<int>(e), el.b.dot(op.Wb));
            for (Eigen::Index j = 0; j < nl; ++j) {
                const double v = el.b.dot(op.WCl.col(j));
                const int lj = static_cast<int>(ne + op.lam[static_cast<std::size_t>(j)]);
                trips.emplace_back(static_cast<int>(e), lj, -v);
                trips.emplace_back(lj, static_cast<int>(e), -v);
            }
            const Eigen::MatrixXd G = op.Cl.transpose() * op.WCl;
            for (Eigen::Index i = 0; i < nl; ++i) {
                for (Eigen::Index j = 0; j < nl; ++j) {
                    trips.emplace_back(static_cast<int>(ne + op.lam[static_cast<std::size_t>(i)]),
                                       static_cast<int>(ne + op.lam[static_cast<std::size_t>(j)]),
                                       G(i, j));
                }
            }
        } else {
            op.W.resize(0, 0);
            op.Wb.resize(0);
            op.WCl.resize(0, nl);
        }
    }

    deflated_ = pure_neumann_ && cfg_.deflate;
    Index dim = ne + n_lambda_;
    if (pure_neumann_ && !deflated_) {
        const int m = static_cast<int>(dim);
        for (Index e = 0; e < ne; ++e) {
            const double vol = elements[static_cast<std::size_t>(e)].volume;
            trips.emplace_back(static_cast<int>(e), m, vol);
            trips.emplace_back(m, static_cast<int>(e), vol);
        }
        dim += 1;
    }

    K_.resize(static_cast<int>(dim), static_cast<int>(dim));
    K_.setFromTriplets(trips.begin(), trips.end());
    K_.makeCompressed();

    if (deflated_) {
        return; // matrix-free path; no factorization
    }
    if (!cache_) {
        cache_ = std::make_shared<CondensedFactorCache>();
    }
    if (cache_->analyzed && cache_->dim == dim) {
        cache_->ldlt.factorize(K_);
    } else {
        cache_->ldlt.analyzePattern(K_);
        cache_->ldlt.factorize(K_);
        cache_->analyzed = true;
        cache_->dim = dim;
    }
    ldlt_ok_ = (cache_->ldlt.info() == Eigen::Success);
}

Eigen::VectorXd HybridCondensedSystem::solve_condensed(const Eigen::VectorXd& rhs,
                                                       SolverStats& stats) const {
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        stats.method = "trivial";
        stats.residual = 0.0;
        return Eigen::VectorXd::Zero(rhs.size());
    }

    if (deflated_) {
        // Deflated Jacobi-preconditioned CG on the singular PSD matrix. The
        // nullvector is constant over (p, lambda); the load is projected onto
        // its orthogonal complement (it is compatible up to rounding anyway).
        const Index dim = K_.rows();
        Eigen::VectorXd nvec = Eigen::VectorXd::Ones(dim);
        nvec.normalize();
        const auto project = [&](Eigen::VectorXd& v) { v -= nvec.dot(v) * nvec; };

        Eigen::VectorXd diag = K_.diagonal();
        const double dmax = diag.maxCoeff();
        if (!(dmax > 0.0)) {
            throw SolverError("deflated solve: condensed diagonal is not positive");
        }
        diag = diag.cwiseMax(1e-14 * dmax);

        Eigen::VectorXd b = rhs;
        project(b);
        const double bn = std::max(b.norm(), 1e-300);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
        Eigen::VectorXd r = b;
        Eigen::VectorXd z = r.cwiseQuotient(diag);
        project(z);
        Eigen::VectorXd pk = z;
        double rz = r.dot(z);
        const Index max_it = 20000;
        double res = r.norm() / bn;
        Index it = 0;
        for (; it < max_it && res > cfg_.rel_tol; ++it) {
            Eigen::VectorXd q = K_ * pk;
            project(q);
            const double pq = pk.dot(q);
            if (!(pq > 0.0)) break;
            const double alpha = rz / pq;
            x += alpha * pk;
            r -= alpha * q;
            res = r.norm() / bn;
            if (res <= cfg_.rel_tol) break;
            z = r.cwiseQuotient(diag);
            project(z);
            const double rz_new = r.dot(z);
            pk = z + (rz_new / rz) * pk;
            rz = rz_new;
        }
        project(x);
        res = (K_ * x - b).norm() / bn;
        stats.method = "projected_cg";
        stats.residual = res;
        stats.history.push_back(res);
        if (!(res <= std::sqrt(cfg_.rel_tol))) {
            throw SolverError("deflated condensed solve stalled at residual " +
                              std::to_string(res));
        }
        return x;
    }

    auto attempt = [&](const char* name, auto&& apply) -> std::pair<bool, Eigen::VectorXd> {
        Eigen::VectorXd x = apply(rhs);
        double res = (K_ * x - rhs).norm() / rhs_norm;
        stats.history.push_back(res);
        for (int it = 0; it < cfg_.max_refine && res > cfg_.rel_tol; ++it) {
            const Eigen::VectorXd dx = apply(Eigen::VectorXd(K_ * x - rhs));
            x -= dx;
            res = (K_ * x - rhs).norm() / rhs_norm;
            stats.history.push_back(res);
        }
        if (res <= cfg_.rel_tol) {
            stats.method = name;
            stats.residual = res;
            return {true, std::move(x)};
        }
        return {false, Eigen::VectorXd()};
    };

    if (ldlt_ok_) {
        auto [ok, x] = attempt("ldlt", [&](const Eigen::VectorXd& r) { return cache_->ldlt.solve(r); });
        if (ok) return x;
    }

    if (!lu_tried_) {
        lu_tried_ = true;
        lu_ = std::make_unique<Eigen::SparseLU<SpMat>>();
        lu_->compute(K_);
        if (lu_->info() != Eigen::Success) {
            lu_.reset();
        }
    }
    if (lu_) {
        auto [ok, x] = attempt("sparse-lu", [&](const Eigen::VectorXd& r) { return lu_->solve(r); });
        if (ok) return x;
    }

    // Last resort: iterative solve. The augmented matrix is symmetric
    // indefinite with a zero diagonal entry, so it needs an unpreconditioned
    // general Krylov method; the unaugmented matrix is SPD and takes CG.
    const Eigen::Index max_it = std::max<Eigen::Index>(2000, 20 * K_.rows());
    if (pure_neumann_) {
        Eigen::BiCGSTAB<SpMat, Eigen::IdentityPreconditioner> it;
        it.setTolerance(cfg_.rel_tol / 10.0);
        it.setMaxIterations(max_it);
        it.compute(K_);
        auto [ok, x] = attempt("bicgstab", [&](const Eigen::VectorXd& r) { return it.solve(r); });
        if (ok) return x;
    } else {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> it;
        it.setTolerance(cfg_.rel_tol / 10.0);
        it.setMaxIterations(max_it);
        it.compute(K_);
        auto [ok, x] = attempt("cg", [&](const Eigen::VectorXd& r) { return it.solve(r); });
        if (ok) return x;
    }

    std::ostringstream msg;
    msg << "condensed solve failed; residual history:";
    for (double r : stats.history) {
        msg << ' ' << r;
    }
    throw SolverError(msg.str());
}

HybridSolution HybridCondensedSystem::solve(const HybridLoads& loads) const {
    const Index ne = element_count();
    if (!loads.r1.empty() && static_cast<Index>(loads.r1.size()) != ne) {
        throw SolverError("hybrid solve: r1 list size mismatch");
    }
    if (!loads.g.empty() && static_cast<Index>(loads.g.size()) != ne) {
        throw SolverError("hybrid solve: g list size mismatch");
    }
    if (loads.F.size() != 0 && loads.F.size() != ne) {
        throw SolverError("hybrid solve: F size mismatch");
    }

    const Index dim = ne + n_lambda_ + ((pure_neumann_ && !deflated_) ? 1 : 0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    std::vector<Eigen::VectorXd> ghat(static_cast<std::size_t>(ne));
    std::vector<Eigen::VectorXd> r1s(static_cast<std::size_t>(ne));

    for (Index e = 0; e < ne; ++e) {
        const LocalOps& op = ops_[static_cast<std::size_t>(e)];
        const Eigen::Index nt = op.Ainv.rows();
        const Eigen::Index nu = op.b.size();
        Eigen::VectorXd r1 = zero_or(loads.r1, e, nt);
        Eigen::VectorXd g = zero_or(loads.g, e, nu);
        Eigen::VectorXd gh = g - op.AiPt.transpose() * r1;
        const double F = (loads.F.size() != 0) ? loads.F(e) : 0.0;
        if (nu > 0) {
            rhs(e) += F + op.Wb.dot(gh);
            for (std::size_t j = 0; j < op.lam.size(); ++j) {
                rhs(ne + op.lam[j]) -= op.WCl.col(static_cast<Eigen::Index>(j)).dot(gh);
            }
        } else {
            rhs(e) += F;
        }
        ghat[static_cast<std::size_t>(e)] = std::move(gh);
        r1s[static_cast<std::size_t>(e)] = std::move(r1);
    }

    HybridSolution sol;
    const Eigen::VectorXd x = solve_condensed(rhs, sol.stats);
    sol.p = x.head(ne);
    sol.lambda = x.segment(ne, n_lambda_);
    if (pure_neumann_ && !deflated_) {
        sol.stats.constraint_multiplier = x(dim - 1);
    }

    sol.u.resize(static_cast<std::size_t>(ne));
    sol.theta.resize(static_cast<std::size_t>(ne));
    for (Index e = 0; e < ne; ++e) {
        const LocalOps& op = ops_[static_cast<std::size_t>(e)];
        const Eigen::Index nu = op.b.size();
        Eigen::VectorXd lam_loc(static_cast<Eigen::Index>(op.lam.size()));
        for (std::size_t j = 0; j < op.lam.size(); ++j) {
            lam_loc(static_cast<Eigen::Index>(j)) = sol.lambda(op.lam[j]);
        }
        Eigen::VectorXd ubar;
        if (nu > 0) {
            ubar = sol.p(e) * op.Wb - op.WCl * lam_loc - op.W * ghat[static_cast<std::size_t>(e)];
        } else {
            ubar.resize(0);
        }
        sol.theta[static_cast<std::size_t>(e)] =
            op.Ainv * r1s[static_cast<std::size_t>(e)] - op.AiPt * ubar;
        sol.u[static_cast<std::size_t>(e)] = std::move(ubar);
    }

    if (deflated_) {
        // The deflated solve fixes sum(p) + sum(lambda) = 0; restore the
        // volume-weighted zero-mean pressure gauge. Shifting p and lambda by
        // the same constant leaves every recovered field unchanged.
        double vp = 0.0;
        double vol = 0.0;
        for (Index e = 0; e < ne; ++e) {
            vp += ops_[static_cast<std::size_t>(e)].volume * sol.p(e);
            vol += ops_[static_cast<std::size_t>(e)].volume;
        }
        const double shift = vp / vol;
        sol.p.array() -= shift;
        sol.lambda.array() -= shift;
    }
    return sol;
}

} // namespace msdarcy
