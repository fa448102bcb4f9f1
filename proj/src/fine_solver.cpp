#include "msdarcy/fine_solver.hpp"

#include <cmath>
#include <string>

#include "msdarcy/errors.hpp"

namespace msdarcy {

namespace {

/// Outward sign of a boundary face relative to the domain: -1 on the low side
/// of its axis, +1 on the high side.
double outward_sign(const CartesianGrid& g, Index face) {
    const auto cells = g.face_cells(face);
    if (cells[0] < 0) return -1.0;
    if (cells[1] < 0) return 1.0;
    throw IndexError("outward_sign: face is interior");
}

} // namespace

SaddleSystem assemble_expanded_fine(const CartesianGrid& grid, const CoefficientField& k,
                                    const SourceField& f, const BoundaryCondition& bc) {
    if (!same_grid(k.grid(), grid)) {
        throw ConfigError("assemble_expanded_fine: coefficient lives on a different grid");
    }
    if (f.grid == nullptr || !same_grid(*f.grid, grid)) {
        throw ConfigError("assemble_expanded_fine: source lives on a different grid");
    }

    SaddleSystem sys;
    sys.grid = grid;
    sys.rule = k.recommended_rule();
    const RT0Element elem(grid);
    sys.N = elem.mass();
    sys.b_div = elem.div_int();

    const Index nc = grid.cell_count();
    sys.Mk.resize(static_cast<std::size_t>(nc));
    for (Index c = 0; c < nc; ++c) {
        sys.Mk[static_cast<std::size_t>(c)] = local_rt0_matrices(grid, c, k, sys.rule).Mk;
    }

    const Index nf = grid.face_count();
    sys.face_kind.assign(static_cast<std::size_t>(nf), FaceKind::interior);
    sys.face_value.assign(static_cast<std::size_t>(nf), 0.0);
    sys.face_lambda.assign(static_cast<std::size_t>(nf), -1);
    sys.n_lambda = 0;
    sys.pure_neumann = (bc.kind != BoundaryCondition::Kind::pressure);
    for (Index face = 0; face < nf; ++face) {
        if (!grid.is_boundary_face(face)) {
            sys.face_lambda[static_cast<std::size_t>(face)] = sys.n_lambda++;
            continue;
        }
        switch (bc.kind) {
        case BoundaryCondition::Kind::no_flow:
            sys.face_kind[static_cast<std::size_t>(face)] = FaceKind::fixed_flux;
            break;
        case BoundaryCondition::Kind::flux: {
            if (!bc.flux) throw ConfigError("flux boundary condition needs a flux function");
            sys.face_kind[static_cast<std::size_t>(face)] = FaceKind::fixed_flux;
            const double density = bc.flux(to_vec(grid.face_center(face)));
            sys.face_value[static_cast<std::size_t>(face)] =
                density * grid.face_area(grid.face_axis(face));
            break;
        }
        case BoundaryCondition::Kind::pressure: {
            if (!bc.pressure) throw ConfigError("pressure boundary condition needs a trace function");
            sys.face_kind[static_cast<std::size_t>(face)] = FaceKind::pressure;
            sys.face_value[static_cast<std::size_t>(face)] =
                bc.pressure(to_vec(grid.face_center(face)));
            break;
        }
        }
    }

    sys.f.resize(nc);
    double abs_source = 0.0;
    for (Index c = 0; c < nc; ++c) {
        sys.f(c) = f.cell_integral(c);
        abs_source += std::abs(sys.f(c));
    }

    if (sys.pure_neumann) {
        double total = sys.f.sum();
        double abs_flux = 0.0;
        for (Index face : grid.boundary_faces()) {
            const double v = sys.face_value[static_cast<std::size_t>(face)];
            total -= outward_sign(grid, face) * v;
            abs_flux += std::abs(v);
        }
        const double scale = std::max({1.0, abs_source, abs_flux});
        if (std::abs(total) > 1e-12 * scale) {
            throw CompatibilityError("assemble_expanded_fine: source/boundary-flux imbalance " +
                                     std::to_string(total));
        }
    }
    return sys;
}

SaddleSystem assemble_expanded_fine(const NestedGridPair& pair, const CoefficientField& k,
                                    const SourceField& f, const BoundaryCondition& bc) {
    return assemble_expanded_fine(pair.fine(), k, f, bc);
}

FineCondensed::FineCondensed(const SaddleSystem& system, SolverConfig cfg,
                             std::shared_ptr<CondensedFactorCache> cache)
    : sys_(&system), cfg_(cfg) {
    const CartesianGrid& g = system.grid;
    const Index nc = g.cell_count();
    std::vector<HybridElement> elements(static_cast<std::size_t>(nc));
    free_slot_.assign(static_cast<std::size_t>(nc), {-1, -1, -1, -1, -1, -1});

    for (Index c = 0; c < nc; ++c) {
        const auto faces = g.cell_faces(c);
        HybridElement& el = elements[static_cast<std::size_t>(c)];
        int nu = 0;
        for (int i = 0; i < 6; ++i) {
            if (system.face_kind[static_cast<std::size_t>(faces[i])] != FaceKind::fixed_flux) {
                free_slot_[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] = nu++;
            }
        }
        el.A = system.Mk[static_cast<std::size_t>(c)];
        el.P.resize(nu, 6);
        el.b.resize(nu);
        el.volume = g.cell_volume();
        for (int i = 0; i < 6; ++i) {
            const int s = free_slot_[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
            if (s < 0) continue;
            el.P.row(s) = system.N.row(i);
            el.b(s) = system.b_div(i);
            const Index lam = system.face_lambda[static_cast<std::size_t>(faces[i])];
            if (lam >= 0) {
                el.couplings.push_back({s, lam, system.b_div(i)});
            }
        }
    }
    engine_ = std::make_unique<HybridCondensedSystem>(std::move(elements), system.n_lambda,
                                                      system.pure_neumann, cfg, std::move(cache));
}

HybridLoads FineCondensed::make_loads(const Eigen::VectorXd& source_integrals,
                                      const Eigen::VectorXd* fixed_face_totals) const {
    const CartesianGrid& g = sys_->grid;
    const Index nc = g.cell_count();
    if (source_integrals.size() != nc) {
        throw ConfigError("make_loads: source vector size mismatch");
    }
    HybridLoads loads;
    loads.F = source_integrals;
    loads.r1.assign(static_cast<std::size_t>(nc), Eigen::VectorXd());
    loads.g.assign(static_cast<std::size_t>(nc), Eigen::VectorXd());

    for (Index c = 0; c < nc; ++c) {
        const auto faces = g.cell_faces(c);
        const auto& slots = free_slot_[static_cast<std::size_t>(c)];
        Eigen::VectorXd r1;
        int nu = 0;
        for (int i = 0; i < 6; ++i) {
            nu += (slots[static_cast<std::size_t>(i)] >= 0) ? 1 : 0;
        }
        Eigen::VectorXd gvec;
        for (int i = 0; i < 6; ++i) {
            const Index face = faces[i];
            const int s = slots[static_cast<std::size_t>(i)];
            if (s < 0) {
                const double v = fixed_face_totals
                                     ? (*fixed_face_totals)(face)
                                     : sys_->face_value[static_cast<std::size_t>(face)];
                if (v != 0.0) {
                    if (r1.size() == 0) r1 = Eigen::VectorXd::Zero(6);
                    r1 -= sys_->N.col(i) * v;
                    loads.F(c) -= sys_->b_div(i) * v;
                }
            } else if (sys_->face_kind[static_cast<std::size_t>(face)] == FaceKind::pressure) {
                if (gvec.size() == 0) gvec = Eigen::VectorXd::Zero(nu);
                gvec(s) = sys_->b_div(i) * sys_->face_value[static_cast<std::size_t>(face)];
            }
        }
        if (r1.size() != 0) loads.r1[static_cast<std::size_t>(c)] = std::move(r1);
        if (gvec.size() != 0) loads.g[static_cast<std::size_t>(c)] = std::move(gvec);
    }
    return loads;
}

HybridLoads FineCondensed::system_loads() const { return make_loads(sys_->f, nullptr); }

ExpandedSolution FineCondensed::recover(const HybridSolution& hybrid,
                                        const Eigen::VectorXd* fixed_face_totals) const {
    const CartesianGrid& g = sys_->grid;
    const Index nc = g.cell_count();
    const Index nf = g.face_count();

    ExpandedSolution out;
    out.stats = hybrid.stats;
    out.p = hybrid.p;
    out.theta.resize(static_cast<std::size_t>(nc));
    out.u_broken.resize(static_cast<std::size_t>(nc));
    double umax = 0.0;
    for (Index c = 0; c < nc; ++c) {
        out.theta[static_cast<std::size_t>(c)] = hybrid.theta[static_cast<std::size_t>(c)];
        const auto faces = g.cell_faces(c);
        Vec6 ub;
        for (int i = 0; i < 6; ++i) {
            const int s = free_slot_[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
            if (s >= 0) {
                ub(i) = hybrid.u[static_cast<std::size_t>(c)](s);
            } else {
                ub(i) = fixed_face_totals ? (*fixed_face_totals)(faces[i])
                                          : sys_->face_value[static_cast<std::size_t>(faces[i])];
            }
            umax = std::max(umax, std::abs(ub(i)));
        }
        out.u_broken[static_cast<std::size_t>(c)] = ub;
    }

    out.u.resize(nf);
    out.lambda.resize(nf);
    const double jump_tol = 1e-8 * std::max(umax, 1e-30);
    for (Index face = 0; face < nf; ++face) {
        const int axis = g.face_axis(face);
        const auto cells = g.face_cells(face);
        double value = 0.0;
        if (cells[0] >= 0 && cells[1] >= 0) {
            const double v_lo = out.u_broken[static_cast<std::size_t>(cells[0])](2 * axis + 1);
            const double v_hi = out.u_broken[static_cast<std::size_t>(cells[1])](2 * axis);
            if (std::abs(v_lo - v_hi) > jump_tol) {
                throw SolverError("recover: interior flux mismatch " +
                                  std::to_string(std::abs(v_lo - v_hi)) + " on face " +
                                  std::to_string(face));
            }
            value = 0.5 * (v_lo + v_hi);
        } else if (cells[0] >= 0) {
            value = out.u_broken[static_cast<std::size_t>(cells[0])](2 * axis + 1);
        } else {
            value = out.u_broken[static_cast<std::size_t>(cells[1])](2 * axis);
        }
        out.u(face) = value;

        const Index lam = sys_->face_lambda[static_cast<std::size_t>(face)];
        if (lam >= 0) {
            out.lambda(face) = hybrid.lambda(lam);
        } else if (sys_->face_kind[static_cast<std::size_t>(face)] == FaceKind::pressure) {
            out.lambda(face) = sys_->face_value[static_cast<std::size_t>(face)];
        } else {
            out.lambda(face) = out.p(cells[0] >= 0 ? cells[0] : cells[1]);
        }
    }
    return out;
}

FineCondensed hybridize_and_condense(const SaddleSystem& system, SolverConfig cfg) {
    return FineCondensed(system, cfg);
}

ExpandedSolution solve_expanded_fine(const SaddleSystem& system, SolverConfig cfg) {
    FineCondensed cond(system, cfg);
    return cond.recover(cond.engine().solve(cond.system_loads()));
}

// --------------------------------------------------------- direct saddle form

namespace {

struct DirectLayout {
    Index n_theta;
    Index n_u;
    Index n_p;
    Index dim;
    std::vector<Index> u_col; ///< per face, -1 when fixed
    bool augmented;
};

DirectLayout direct_layout(const SaddleSystem& sys) {
    DirectLayout lay;
    const Index nc = sys.grid.cell_count();
    const Index nf = sys.grid.face_count();
    lay.n_theta = 6 * nc;
    lay.u_col.assign(static_cast<std::size_t>(nf), -1);
    Index nu = 0;
    for (Index f = 0; f < nf; ++f) {
        if (sys.face_kind[static_cast<std::size_t>(f)] != FaceKind::fixed_flux) {
            lay.u_col[static_cast<std::size_t>(f)] = nu++;
        }
    }
    lay.n_u = nu;
    lay.n_p = nc;
    lay.augmented = sys.pure_neumann;
    lay.dim = lay.n_theta + lay.n_u + lay.n_p + (lay.augmented ? 1 : 0);
    return lay;
}

} // namespace

SpMat direct_saddle_matrix(const SaddleSystem& sys) {
    const DirectLayout lay = direct_layout(sys);
    const CartesianGrid& g = sys.grid;
    const Index nc = g.cell_count();
    std::vector<Eigen::Triplet<double>> trips;

    for (Index c = 0; c < nc; ++c) {
        const Index t0 = 6 * c;
        const auto& A = sys.Mk[static_cast<std::size_t>(c)];
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) {
                trips.emplace_back(static_cast<int>(t0 + i), static_cast<int>(t0 + j), A(i, j));
            }
        }
        const auto faces = g.cell_faces(c);
        for (int i = 0; i < 6; ++i) {
            const Index ucol = lay.u_col[static_cast<std::size_t>(faces[i])];
            if (ucol < 0) continue;
            const Index uidx = lay.n_theta + ucol;
            for (int t = 0; t < 6; ++t) {
                trips.emplace_back(static_cast<int>(t0 + t), static_cast<int>(uidx), sys.N(t, i));
                trips.emplace_back(static_cast<int>(uidx), static_cast<int>(t0 + t), sys.N(i, t));
            }
            const Index pidx = lay.n_theta + lay.n_u + c;
            trips.emplace_back(static_cast<int>(uidx), static_cast<int>(pidx), sys.b_div(i));
            trips.emplace_back(static_cast<int>(pidx), static_cast<int>(uidx), sys.b_div(i));
        }
    }
    if (lay.augmented) {
        const Index m = lay.dim - 1;
        for (Index c = 0; c < nc; ++c) {
            const Index pidx = lay.n_theta + lay.n_u + c;
            trips.emplace_back(static_cast<int>(pidx), static_cast<int>(m), g.cell_volume());
            trips.emplace_back(static_cast<int>(m), static_cast<int>(pidx), g.cell_volume());
        }
    }
    SpMat K(static_cast<int>(lay.dim), static_cast<int>(lay.dim));
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();
    return K;
}

Eigen::VectorXd direct_saddle_rhs(const SaddleSystem& sys) {
    const DirectLayout lay = direct_layout(sys);
    const CartesianGrid& g = sys.grid;
    const Index nc = g.cell_count();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(lay.dim);

    for (Index c = 0; c < nc; ++c) {
        const Index t0 = 6 * c;
        const Index pidx = lay.n_theta + lay.n_u + c;
        rhs(pidx) = sys.f(c);
        const auto faces = g.cell_faces(c);
        for (int i = 0; i < 6; ++i) {
            const Index face = faces[i];
            const Index ucol = lay.u_col[static_cast<std::size_t>(face)];
            if (ucol < 0) {
                const double v = sys.face_value[static_cast<std::size_t>(face)];
                if (v != 0.0) {
                    rhs.segment<6>(t0) -= sys.N.col(i) * v;
                    rhs(pidx) -= sys.b_div(i) * v;
                }
            } else if (sys.face_kind[static_cast<std::size_t>(face)] == FaceKind::pressure) {
                rhs(lay.n_theta + ucol) +=
                    sys.b_div(i) * sys.face_value[static_cast<std::size_t>(face)];
            }
        }
    }
    return rhs;
}

ExpandedSolution solve_direct_saddle(const SaddleSystem& sys) {
    const DirectLayout lay = direct_layout(sys);
    const SpMat K = direct_saddle_matrix(sys);
    const Eigen::VectorXd rhs = direct_saddle_rhs(sys);

    Eigen::SparseLU<SpMat> lu;
    lu.compute(K);
    if (lu.info() != Eigen::Success) {
        throw SolverError("direct saddle factorization failed");
    }
    const Eigen::VectorXd x = lu.solve(rhs);
    const double rhs_norm = std::max(rhs.norm(), 1e-300);
    const double res = (K * x - rhs).norm() / rhs_norm;
    if (!(res <= 1e-8)) {
        throw SolverError("direct saddle solve residual " + std::to_string(res));
    }

    const CartesianGrid& g = sys.grid;
    const Index nc = g.cell_count();
    const Index nf = g.face_count();
    ExpandedSolution out;
    out.stats.method = "direct-saddle";
    out.stats.residual = res;
    out.theta.resize(static_cast<std::size_t>(nc));
    for (Index c = 0; c < nc; ++c) {
        out.theta[static_cast<std::size_t>(c)] = x.segment<6>(6 * c);
    }
    out.u.resize(nf);
    for (Index f = 0; f < nf; ++f) {
        const Index ucol = lay.u_col[static_cast<std::size_t>(f)];
        out.u(f) = (ucol >= 0) ? x(lay.n_theta + ucol) : sys.face_value[static_cast<std::size_t>(f)];
    }
    out.p = x.segment(lay.n_theta + lay.n_u, nc);
    out.u_broken.resize(static_cast<std::size_t>(nc));
    for (Index c = 0; c < nc; ++c) {
        const auto faces = g.cell_faces(c);
        for (int i = 0; i < 6; ++i) {
            out.u_broken[static_cast<std::size_t>(c)](i) = out.u(faces[i]);
        }
    }
    out.lambda.resize(0);
    return out;
}

// --------------------------------------------------------- local Neumann

LocalNeumannContext::LocalNeumannContext(const Subgrid& sub, const CoefficientField& k,
                                         QuadratureRule rule, SolverConfig cfg)
    : grid_(sub.grid()) {
    if (!same_grid(k.grid(), sub.parent())) {
        throw ConfigError("solve_local_neumann: coefficient lives on a different parent grid");
    }
    sys_.grid = grid_;
    sys_.rule = rule;
    const RT0Element elem(grid_);
    sys_.N = elem.mass();
    sys_.b_div = elem.div_int();

    const Index nc = grid_.cell_count();
    sys_.Mk.resize(static_cast<std::size_t>(nc));
    for (Index lc = 0; lc < nc; ++lc) {
        sys_.Mk[static_cast<std::size_t>(lc)] =
            local_rt0_matrices(k.grid(), sub.parent_cell(lc), k, rule).Mk;
    }

    const Index nf = grid_.face_count();
    sys_.face_kind.assign(static_cast<std::size_t>(nf), FaceKind::interior);
    sys_.face_value.assign(static_cast<std::size_t>(nf), 0.0);
    sys_.face_lambda.assign(static_cast<std::size_t>(nf), -1);
    sys_.n_lambda = 0;
    sys_.pure_neumann = true;
    for (Index f = 0; f < nf; ++f) {
        if (grid_.is_boundary_face(f)) {
            sys_.face_kind[static_cast<std::size_t>(f)] = FaceKind::fixed_flux;
        } else {
            sys_.face_lambda[static_cast<std::size_t>(f)] = sys_.n_lambda++;
        }
    }
    sys_.f = Eigen::VectorXd::Zero(nc);
    cond_ = std::make_unique<FineCondensed>(sys_, cfg);
}

ExpandedSolution LocalNeumannContext::solve(const Eigen::VectorXd& div_density,
                                            const Eigen::VectorXd& boundary_flux) const {
    const Index nc = grid_.cell_count();
    if (div_density.size() != nc) {
        throw ConfigError("solve_local_neumann: divergence vector size mismatch");
    }
    if (boundary_flux.size() != grid_.face_count()) {
        throw ConfigError("solve_local_neumann: boundary flux vector size mismatch");
    }

    const double vol = grid_.cell_volume();
    double total = div_density.sum() * vol;
    double abs_scale = div_density.cwiseAbs().sum() * vol;
    for (Index f : grid_.boundary_faces()) {
        total -= outward_sign(grid_, f) * boundary_flux(f);
        abs_scale += std::abs(boundary_flux(f));
    }
    if (std::abs(total) > 1e-12 * std::max(1.0, abs_scale)) {
        throw CompatibilityError("solve_local_neumann: data imbalance " + std::to_string(total));
    }

    const HybridLoads loads = cond_->make_loads(div_density * vol, &boundary_flux);
    return cond_->recover(cond_->engine().solve(loads), &boundary_flux);
}

ExpandedSolution solve_local_neumann(const Subgrid& sub, const CoefficientField& k,
                                     const Eigen::VectorXd& div_density,
                                     const Eigen::VectorXd& boundary_flux, QuadratureRule rule,
                                     SolverConfig cfg) {
    LocalNeumannContext ctx(sub, k, rule, cfg);
    return ctx.solve(div_density, boundary_flux);
}

} // namespace msdarcy
