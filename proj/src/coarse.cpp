#include "msdarcy/coarse.hpp"

#include <Eigen/SparseLU>
#include <cmath>

#include "msdarcy/errors.hpp"

namespace msdarcy {

namespace {

double slot_sign(int local_face) { return (local_face % 2 == 0) ? -1.0 : 1.0; }

} // namespace

CoarseOperator::CoarseOperator(const NestedGridPair& pair, const CoarseBasisSet& basis,
                               const SourceField& f, const BoundaryCondition& bc)
    : pair_(&pair), basis_(&basis) {
    const CartesianGrid& coarse = pair.coarse();
    const CartesianGrid& fine = pair.fine();
    if (basis.pair == nullptr ||
        !(same_grid(basis.pair->fine(), fine) && same_grid(basis.pair->coarse(), coarse))) {
        throw ConfigError("coarse operator: basis was built for a different grid pair");
    }
    if (f.grid == nullptr || !same_grid(*f.grid, fine)) {
        throw ConfigError("coarse operator: source field is not on the fine grid");
    }

    const Index nfc = coarse.face_count();
    const Index nk = coarse.cell_count();

    // ---- boundary classification -------------------------------------------
    face_kind_.assign(static_cast<std::size_t>(nfc), FaceKind::interior);
    face_pd_.resize(static_cast<std::size_t>(nfc));
    std::vector<double> face_total(static_cast<std::size_t>(nfc), 0.0);
    pure_neumann_ = (bc.kind != BoundaryCondition::Kind::pressure);
    for (Index fc : coarse.boundary_faces()) {
        const int axis = coarse.face_axis(fc);
        switch (bc.kind) {
        case BoundaryCondition::Kind::no_flow:
            face_kind_[static_cast<std::size_t>(fc)] = FaceKind::fixed_flux;
            break;
        case BoundaryCondition::Kind::flux: {
            if (!bc.flux) throw ConfigError("flux boundary condition needs a flux function");
            face_kind_[static_cast<std::size_t>(fc)] = FaceKind::fixed_flux;
            face_total[static_cast<std::size_t>(fc)] =
                bc.flux(to_vec(coarse.face_center(fc))) * coarse.face_area(axis);
            break;
        }
        case BoundaryCondition::Kind::pressure: {
            if (!bc.pressure) throw ConfigError("pressure boundary condition needs a trace function");
            face_kind_[static_cast<std::size_t>(fc)] = FaceKind::pressure;
            const auto& profs = basis.face_profiles[static_cast<std::size_t>(fc)];
            const auto fine_faces = pair.fine_faces_of_coarse_face(fc);
            Eigen::VectorXd pd(static_cast<Index>(profs.size()));
            for (std::size_t j = 0; j < profs.size(); ++j) {
                double s = 0.0;
                for (std::size_t m = 0; m < fine_faces.size(); ++m) {
                    s += profs[j].flux[m] * bc.pressure(to_vec(fine.face_center(fine_faces[m])));
                }
                pd(static_cast<Index>(j)) = s;
            }
            face_pd_[static_cast<std::size_t>(fc)] = std::move(pd);
            break;
        }
        }
    }

    // ---- multiplier Gram matrices and ids -----------------------------------
    gram_.resize(static_cast<std::size_t>(nfc));
    lambda_base_.assign(static_cast<std::size_t>(nfc), -1);
    for (Index fc = 0; fc < nfc; ++fc) {
        const auto& profs = basis.face_profiles[static_cast<std::size_t>(fc)];
        const int np = static_cast<int>(profs.size());
        const int axis = coarse.face_axis(fc);
        const double scale = coarse.face_area(axis) / fine.face_area(axis);
        Eigen::MatrixXd G(np, np);
        for (int i = 0; i < np; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = 0.0;
                for (std::size_t m = 0; m < profs[static_cast<std::size_t>(i)].flux.size(); ++m) {
                    s += profs[static_cast<std::size_t>(i)].flux[m] *
                         profs[static_cast<std::size_t>(j)].flux[m];
                }
                G(i, j) = G(j, i) = scale * s;
            }
        }
        gram_[static_cast<std::size_t>(fc)] = std::move(G);
        if (face_kind_[static_cast<std::size_t>(fc)] == FaceKind::interior) {
            lambda_base_[static_cast<std::size_t>(fc)] = n_lambda_;
            n_lambda_ += np;
        }
    }

    // ---- per-cell structure --------------------------------------------------
    slots_.resize(static_cast<std::size_t>(nk));
    free_idx_.resize(static_cast<std::size_t>(nk));
    fixed_val_.resize(static_cast<std::size_t>(nk));
    sigma_.resize(static_cast<std::size_t>(nk));
    Pfull_.resize(static_cast<std::size_t>(nk));
    elemP_.resize(static_cast<std::size_t>(nk));
    couplings_.resize(static_cast<std::size_t>(nk));
    g_.resize(static_cast<std::size_t>(nk));
    r1fold_.resize(static_cast<std::size_t>(nk));
    F_.resize(static_cast<std::size_t>(nk));
    Nq_.resize(static_cast<std::size_t>(nk));

    const RT0Element fine_elem(fine);
    const Mat6& N = fine_elem.mass();

    double sum_abs_f = 0.0;
    double sum_abs_v = 0.0;
    for (Index K = 0; K < nk; ++K) {
        const std::size_t Ku = static_cast<std::size_t>(K);
        const auto faces = coarse.cell_faces(K);
        auto& sl = slots_[Ku];
        for (int lf = 0; lf < 6; ++lf) {
            for (int j = 0; j < basis.profiles_on(faces[static_cast<std::size_t>(lf)]); ++j) {
                sl.push_back({faces[static_cast<std::size_t>(lf)], lf, j});
            }
        }
        const int nt = static_cast<int>(sl.size());
        if (basis.slot_count(K) != nt) {
            throw ConfigError("coarse operator: basis slot count mismatch on a cell");
        }

        const auto kcells = pair.fine_cells_of_coarse(K);
        const auto& cb = basis.cells[Ku];
        Eigen::MatrixXd Pfull = Eigen::MatrixXd::Zero(nt, nt);
        auto& nq = Nq_[Ku];
        nq.assign(kcells.size(), Eigen::MatrixXd(nt, nt));
        Eigen::MatrixXd E(6, nt), S(6, nt);
        for (std::size_t c = 0; c < kcells.size(); ++c) {
            for (int t = 0; t < nt; ++t) {
                E.col(t) = cb[static_cast<std::size_t>(t)].eta[c];
                S.col(t) = cb[static_cast<std::size_t>(t)].psi[c];
            }
            const Eigen::MatrixXd NE = N * E;
            Pfull.noalias() += S.transpose() * NE;
            nq[c].noalias() = E.transpose() * NE;
        }
        Pfull_[Ku] = std::move(Pfull);

        auto& sig = sigma_[Ku];
        sig.resize(nt);
        auto& fid = free_idx_[Ku];
        auto& fv = fixed_val_[Ku];
        fid.assign(static_cast<std::size_t>(nt), -1);
        fv.assign(static_cast<std::size_t>(nt), 0.0);
        int nfree = 0;
        for (int s = 0; s < nt; ++s) {
            const CoarseSlotRef& ref = sl[static_cast<std::size_t>(s)];
            sig(s) = slot_sign(ref.local_face);
            if (face_kind_[static_cast<std::size_t>(ref.coarse_face)] == FaceKind::fixed_flux) {
                fv[static_cast<std::size_t>(s)] =
                    (ref.profile == 0) ? face_total[static_cast<std::size_t>(ref.coarse_face)]
                                       : 0.0;
            } else {
                fid[static_cast<std::size_t>(s)] = nfree++;
            }
        }

        Eigen::MatrixXd eP(nfree, nt);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(nfree);
        auto& cpl = couplings_[Ku];
        for (int s = 0; s < nt; ++s) {
            const int fs = fid[static_cast<std::size_t>(s)];
            if (fs < 0) continue;
            eP.row(fs) = Pfull_[Ku].row(s);
            const CoarseSlotRef& ref = sl[static_cast<std::size_t>(s)];
            const std::size_t fcu = static_cast<std::size_t>(ref.coarse_face);
            if (face_kind_[fcu] == FaceKind::interior) {
                const Eigen::MatrixXd& G = gram_[fcu];
                for (int j = 0; j < G.cols(); ++j) {
                    cpl.push_back({fs, lambda_base_[fcu] + j, sig(s) * G(ref.profile, j)});
                }
            } else { // pressure face
                g(fs) = sig(s) * face_pd_[fcu](ref.profile);
            }
        }
        elemP_[Ku] = std::move(eP);
        g_[Ku] = std::move(g);

        Eigen::VectorXd r1 = Eigen::VectorXd::Zero(nt);
        double F = 0.0;
        for (Index c : kcells) {
            F += f.cell_integral(c);
            sum_abs_f += std::abs(f.cell_integral(c));
        }
        for (int s = 0; s < nt; ++s) {
            const double v = fv[static_cast<std::size_t>(s)];
            if (fid[static_cast<std::size_t>(s)] >= 0 || v == 0.0) continue;
            r1.noalias() -= Pfull_[Ku].row(s).transpose() * v;
            F -= sig(s) * v;
            sum_abs_v += std::abs(sig(s) * v);
        }
        r1fold_[Ku] = std::move(r1);
        F_[Ku] = F;
    }

    if (pure_neumann_) {
        double total = 0.0;
        for (double v : F_) total += v;
        const double scale = std::max({1.0, sum_abs_f, sum_abs_v});
        if (std::abs(total) > 1e-12 * scale) {
            throw CompatibilityError(
                "coarse operator: source and prescribed fluxes are incompatible (residual " +
                std::to_string(total) + ")");
        }
    }
}

CoarseSystem CoarseOperator::assemble(const CoefficientField& k_eff) const {
    const CartesianGrid& fine = pair_->fine();
    if (!same_grid(k_eff.grid(), fine)) {
        throw ConfigError("assemble_coarse: effective coefficient is not on the fine grid");
    }
    const bool fast = k_eff.cellwise_constant() && !k_eff.is_tensor();
    const RT0Element fine_elem(fine);
    const QuadratureRule rule = k_eff.recommended_rule();

    CoarseSystem sys;
    sys.op = this;
    const Index nk = pair_->coarse().cell_count();
    sys.elements.resize(static_cast<std::size_t>(nk));
    sys.loads.r1.resize(static_cast<std::size_t>(nk));
    sys.loads.g.resize(static_cast<std::size_t>(nk));
    sys.loads.F.resize(nk);

    for (Index K = 0; K < nk; ++K) {
        const std::size_t Ku = static_cast<std::size_t>(K);
        const auto kcells = pair_->fine_cells_of_coarse(K);
        const int nt = static_cast<int>(slots_[Ku].size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nt, nt);
        if (fast) {
            for (std::size_t c = 0; c < kcells.size(); ++c) {
                A.noalias() +=
                    k_eff.value(kcells[c], to_vec(fine.cell_center(kcells[c]))) * Nq_[Ku][c];
            }
        } else {
            const auto& cb = basis_->cells[Ku];
            Eigen::MatrixXd E(6, nt);
            for (std::size_t c = 0; c < kcells.size(); ++c) {
                for (int t = 0; t < nt; ++t) {
                    E.col(t) = cb[static_cast<std::size_t>(t)].eta[c];
                }
                const Mat6 Mk = fine_elem.weighted_mass(k_eff, kcells[c], rule);
                A.noalias() += E.transpose() * Mk * E;
            }
        }
        if (!Eigen::FullPivLU<Eigen::MatrixXd>(A).isInvertible()) {
            throw DegenerateBasis("coarse cell " + std::to_string(K) +
                                  ": gradient basis block is singular");
        }

        HybridElement& el = sys.elements[Ku];
        el.A = std::move(A);
        el.P = elemP_[Ku];
        const Index nfree = elemP_[Ku].rows();
        el.b.resize(nfree);
        for (int s = 0; s < nt; ++s) {
            const int fs = free_idx_[Ku][static_cast<std::size_t>(s)];
            if (fs >= 0) el.b(fs) = sigma_[Ku](s);
        }
        el.couplings = couplings_[Ku];
        el.volume = pair_->coarse().cell_volume();

        sys.loads.r1[Ku] = r1fold_[Ku];
        sys.loads.g[Ku] = g_[Ku];
        sys.loads.F(K) = F_[Ku];
    }
    return sys;
}

CoarseSystem assemble_coarse(const CoarseOperator& op, const CoefficientField& k_eff) {
    return op.assemble(k_eff);
}

namespace {

/// Expand per-element free-slot velocity values into full slot vectors and
/// attach multiplier values for every coarse face.
CoarseSolution finish_solution(const CoarseOperator& op, std::vector<Eigen::VectorXd> theta,
                               const std::vector<Eigen::VectorXd>& u_free, Eigen::VectorXd p,
                               const Eigen::VectorXd& lambda_interior, SolverStats stats) {
    const CartesianGrid& coarse = op.pair().coarse();
    const CoarseBasisSet& basis = op.basis();
    CoarseSolution out;
    out.theta = std::move(theta);
    out.p = std::move(p);
    out.stats = std::move(stats);

    const Index nk = coarse.cell_count();
    out.u.resize(static_cast<std::size_t>(nk));
    for (Index K = 0; K < nk; ++K) {
        const auto& sl = op.slots(K);
        Eigen::VectorXd full(static_cast<Index>(sl.size()));
        for (int s = 0; s < static_cast<int>(sl.size()); ++s) {
            const int fs = op.free_index(K, s);
            full(s) = (fs >= 0) ? u_free[static_cast<std::size_t>(K)](fs) : op.fixed_value(K, s);
        }
        out.u[static_cast<std::size_t>(K)] = std::move(full);
    }

    out.lambda.resize(static_cast<std::size_t>(coarse.face_count()));
    for (Index fc = 0; fc < coarse.face_count(); ++fc) {
        const int np = basis.profiles_on(fc);
        Eigen::VectorXd lam(np);
        switch (op.coarse_face_kind(fc)) {
        case FaceKind::interior:
            lam = lambda_interior.segment(op.lambda_base(fc), np);
            break;
        case FaceKind::pressure:
            // Mortar representation of the prescribed trace: Gram * lam = <p_D, profiles>.
            lam = op.face_gram(fc).ldlt().solve(op.pressure_pairing(fc));
            break;
        case FaceKind::fixed_flux: {
            const auto cells = coarse.face_cells(fc);
            lam.setConstant(out.p((cells[0] >= 0) ? cells[0] : cells[1]));
            break;
        }
        }
        out.lambda[static_cast<std::size_t>(fc)] = std::move(lam);
    }
    return out;
}

} // namespace

CoarseSolution solve_coarse_direct(const CoarseSystem& sys, SolverConfig cfg) {
    const CoarseOperator& op = *sys.op;
    const NestedGridPair& pair = op.pair();
    const CartesianGrid& coarse = pair.coarse();
    const CoarseBasisSet& basis = op.basis();
    const Index nk = coarse.cell_count();
    const Index nfc = coarse.face_count();

    // Unknown layout: [theta per cell | shared u per (face, profile) | p | mean].
    std::vector<Index> th_off(static_cast<std::size_t>(nk) + 1, 0);
    for (Index K = 0; K < nk; ++K) {
        th_off[static_cast<std::size_t>(K) + 1] =
            th_off[static_cast<std::size_t>(K)] + static_cast<Index>(op.slots(K).size());
    }
    std::vector<Index> ubase(static_cast<std::size_t>(nfc), -1);
    Index nu = 0;
    for (Index fc = 0; fc < nfc; ++fc) {
        if (op.coarse_face_kind(fc) != FaceKind::fixed_flux) {
            ubase[static_cast<std::size_t>(fc)] = nu;
            nu += basis.profiles_on(fc);
        }
    }
    const Index u0 = th_off[static_cast<std::size_t>(nk)];
    const Index p0 = u0 + nu;
    const Index dim = p0 + nk + (op.pure_neumann() ? 1 : 0);

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (Index K = 0; K < nk; ++K) {
        const std::size_t Ku = static_cast<std::size_t>(K);
        const HybridElement& el = sys.elements[Ku];
        const auto& sl = op.slots(K);
        const Index base = th_off[Ku];
        const int nt = static_cast<int>(sl.size());
        for (int t1 = 0; t1 < nt; ++t1) {
            for (int t2 = 0; t2 < nt; ++t2) {
                trips.emplace_back(base + t1, base + t2, el.A(t1, t2));
            }
        }
        for (int s = 0; s < nt; ++s) {
            const int fs = op.free_index(K, s);
            if (fs < 0) continue;
            const CoarseSlotRef& ref = sl[static_cast<std::size_t>(s)];
            const Index ud = u0 + ubase[static_cast<std::size_t>(ref.coarse_face)] + ref.profile;
            for (int t = 0; t < nt; ++t) {
                const double v = el.P(fs, t);
                trips.emplace_back(ud, base + t, v);
                trips.emplace_back(base + t, ud, v);
            }
            trips.emplace_back(p0 + K, ud, el.b(fs));
            trips.emplace_back(ud, p0 + K, el.b(fs));
            rhs(ud) += sys.loads.g[Ku](fs);
        }
        rhs.segment(base, nt) = sys.loads.r1[Ku];
        rhs(p0 + K) = sys.loads.F(K);
    }
    if (op.pure_neumann()) {
        for (Index K = 0; K < nk; ++K) {
            trips.emplace_back(dim - 1, p0 + K, coarse.cell_volume());
            trips.emplace_back(p0 + K, dim - 1, coarse.cell_volume());
        }
    }

    SpMat M(dim, dim);
    M.setFromTriplets(trips.begin(), trips.end());
    M.makeCompressed();
    Eigen::SparseLU<SpMat> lu(M);
    if (lu.info() != Eigen::Success) {
        throw SolverError("solve_coarse(direct): saddle factorization failed");
    }
    Eigen::VectorXd x = lu.solve(rhs);
    const double nb = std::max(rhs.norm(), 1e-300);
    double res = (M * x - rhs).norm() / nb;
    for (int it = 0; it < cfg.max_refine && res > cfg.rel_tol; ++it) {
        x += lu.solve(rhs - M * x);
        res = (M * x - rhs).norm() / nb;
    }
    if (!(res <= std::sqrt(cfg.rel_tol))) {
        throw SolverError("solve_coarse(direct): residual " + std::to_string(res));
    }
    SolverStats stats;
    stats.method = "sparse_lu(saddle)";
    stats.residual = res;
    stats.history.push_back(res);

    std::vector<Eigen::VectorXd> theta(static_cast<std::size_t>(nk));
    std::vector<Eigen::VectorXd> u_free(static_cast<std::size_t>(nk));
    for (Index K = 0; K < nk; ++K) {
        const std::size_t Ku = static_cast<std::size_t>(K);
        const auto& sl = op.slots(K);
        const int nt = static_cast<int>(sl.size());
        theta[Ku] = x.segment(th_off[Ku], nt);
        Eigen::VectorXd uf(static_cast<Index>(sys.elements[Ku].P.rows()));
        for (int s = 0; s < nt; ++s) {
            const int fs = op.free_index(K, s);
            if (fs < 0) continue;
            const CoarseSlotRef& ref = sl[static_cast<std::size_t>(s)];
            uf(fs) = x(u0 + ubase[static_cast<std::size_t>(ref.coarse_face)] + ref.profile);
        }
        u_free[Ku] = std::move(uf);
    }
    Eigen::VectorXd p = x.segment(p0, nk);

    // Interior multipliers from the lower cell's momentum rows:
    // Gram * lam = P theta + b p (sigma = +1 on the lower cell's high face).
    Eigen::VectorXd lam_int(op.lambda_count());
    for (Index fc = 0; fc < nfc; ++fc) {
        if (op.coarse_face_kind(fc) != FaceKind::interior) continue;
        const Index K = coarse.face_cells(fc)[0];
        const int lf = 2 * coarse.face_axis(fc) + 1;
        const int np = basis.profiles_on(fc);
        Eigen::VectorXd r(np);
        for (int j = 0; j < np; ++j) {
            const int s = basis.slot_of(K, lf, j);
            const int fs = op.free_index(K, s);
            r(j) = sys.elements[static_cast<std::size_t>(K)].P.row(fs).dot(
                       theta[static_cast<std::size_t>(K)]) +
                   sys.elements[static_cast<std::size_t>(K)].b(fs) * p(K);
        }
        lam_int.segment(op.lambda_base(fc), np) = op.face_gram(fc).ldlt().solve(r);
    }

    return finish_solution(op, std::move(theta), u_free, std::move(p), lam_int, std::move(stats));
}

CoarseSolution solve_coarse(const CoarseSystem& sys, CoarseSolveMode mode, SolverConfig cfg,
                            std::shared_ptr<CondensedFactorCache> cache) {
    if (sys.op == nullptr) throw ConfigError("solve_coarse: empty system");
    if (mode == CoarseSolveMode::direct) {
        return solve_coarse_direct(sys, cfg);
    }
    const CoarseOperator& op = *sys.op;
    HybridCondensedSystem engine(sys.elements, op.lambda_count(), op.pure_neumann(), cfg,
                                 std::move(cache));
    HybridSolution h = engine.solve(sys.loads);
    return finish_solution(op, std::move(h.theta), h.u, std::move(h.p), h.lambda,
                           std::move(h.stats));
}

DownscaledSolution downscale(const CoarseOperator& op, const CoarseSolution& sol) {
    const NestedGridPair& pair = op.pair();
    const CartesianGrid& fine = pair.fine();
    const CartesianGrid& coarse = pair.coarse();
    const CoarseBasisSet& basis = op.basis();

    DownscaledSolution out;
    out.u_broken.assign(static_cast<std::size_t>(fine.cell_count()), Vec6::Zero());
    out.theta.assign(static_cast<std::size_t>(fine.cell_count()), Vec6::Zero());
    out.p.resize(fine.cell_count());

    for (Index K = 0; K < coarse.cell_count(); ++K) {
        const std::size_t Ku = static_cast<std::size_t>(K);
        const auto kcells = pair.fine_cells_of_coarse(K);
        const auto& cb = basis.cells[Ku];
        for (std::size_t t = 0; t < cb.size(); ++t) {
            const double cu = sol.u[Ku](static_cast<Index>(t));
            const double cth = sol.theta[Ku](static_cast<Index>(t));
            if (cu == 0.0 && cth == 0.0) continue;
            for (std::size_t c = 0; c < kcells.size(); ++c) {
                const std::size_t fc = static_cast<std::size_t>(kcells[c]);
                out.u_broken[fc] += cu * cb[t].psi[c];
                out.theta[fc] += cth * cb[t].eta[c];
            }
        }
        for (Index c : kcells) {
            out.p(c) = sol.p(K);
        }
    }

    double umax = 1e-300;
    for (const Vec6& v : out.u_broken) {
        umax = std::max(umax, v.cwiseAbs().maxCoeff());
    }

    out.u.resize(fine.face_count());
    const bool conforming = (basis.variant != BasisVariant::oversampled);
    double jump2 = 0.0;
    for (Index f = 0; f < fine.face_count(); ++f) {
        const int axis = fine.face_axis(f);
        const auto cells = fine.face_cells(f);
        const double vlo =
            (cells[0] >= 0) ? out.u_broken[static_cast<std::size_t>(cells[0])](2 * axis + 1) : 0.0;
        const double vhi =
            (cells[1] >= 0) ? out.u_broken[static_cast<std::size_t>(cells[1])](2 * axis) : 0.0;
        if (cells[0] < 0) {
            out.u(f) = vhi;
            continue;
        }
        if (cells[1] < 0) {
            out.u(f) = vlo;
            continue;
        }
        const bool same_coarse = pair.coarse_cell_of_fine(cells[0]) ==
                                 pair.coarse_cell_of_fine(cells[1]);
        if ((same_coarse || conforming) && std::abs(vlo - vhi) > 1e-7 * umax) {
            throw SolverError("downscale: conforming velocity sides disagree on fine face " +
                              std::to_string(f));
        }
        if (!same_coarse && !conforming) {
            const double fa = fine.face_area(axis);
            const double d = (vlo - vhi) / fa;
            jump2 += d * d * fa;
        }
        out.u(f) = 0.5 * (vlo + vhi);
    }
    out.interface_jump = std::sqrt(jump2);
    return out;
}

std::vector<Vec6> inject_coarse_broken(const NestedGridPair& pair,
                                       const std::vector<Vec6>& cell_dofs) {
    const CartesianGrid& fine = pair.fine();
    const CartesianGrid& coarse = pair.coarse();
    if (cell_dofs.size() != static_cast<std::size_t>(coarse.cell_count())) {
        throw ConfigError("inject_coarse_broken: one six-vector per coarse cell required");
    }
    std::vector<Vec6> out(static_cast<std::size_t>(fine.cell_count()), Vec6::Zero());
    for (Index K = 0; K < coarse.cell_count(); ++K) {
        const Vec6& d = cell_dofs[static_cast<std::size_t>(K)];
        const auto K0 = coarse.cell_lower(K);
        for (Index c : pair.fine_cells_of_coarse(K)) {
            const auto lower = fine.cell_lower(c);
            Vec6& v = out[static_cast<std::size_t>(c)];
            for (int a = 0; a < 3; ++a) {
                const double h = coarse.spacing(a);
                const double area = coarse.face_area(a);
                const double fa = fine.face_area(a);
                const double xlo = lower[static_cast<std::size_t>(a)];
                const double xhi = xlo + fine.spacing(a);
                const auto density = [&](double x) {
                    const double t = (x - K0[static_cast<std::size_t>(a)]) / h;
                    return (d(2 * a) * (1.0 - t) + d(2 * a + 1) * t) / area;
                };
                v(2 * a) = density(xlo) * fa;
                v(2 * a + 1) = density(xhi) * fa;
            }
        }
    }
    return out;
}

} // namespace msdarcy
