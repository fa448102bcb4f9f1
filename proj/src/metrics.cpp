#include "msdarcy/metrics.hpp"

#include <cmath>
#include <limits>

namespace msdarcy {

namespace {

/// Gather the per-face conforming dofs of one cell into local order.
Vec6 cell_face_dofs(const CartesianGrid& grid, const Eigen::VectorXd& face_dofs, Index cell) {
    const auto faces = grid.cell_faces(cell);
    Vec6 v;
    for (int lf = 0; lf < 6; ++lf) v[lf] = face_dofs[faces[lf]];
    return v;
}

/// Face-averaged trace of a P0 pressure on one fine face (single-sided on the
/// boundary).
double pressure_trace(const CartesianGrid& grid, const Eigen::VectorXd& p, Index face) {
    const auto cells = grid.face_cells(face);
    if (cells[0] < 0) return p[cells[1]];
    if (cells[1] < 0) return p[cells[0]];
    return 0.5 * (p[cells[0]] + p[cells[1]]);
}

} // namespace

double l2_norm_cellwise(const CartesianGrid& grid, const Eigen::VectorXd& v) {
    return std::sqrt(grid.cell_volume() * v.squaredNorm());
}

double l2_norm_broken(const CartesianGrid& grid, const std::vector<Vec6>& v) {
    const RT0Element elem(grid);
    double s = 0.0;
    for (const Vec6& c : v) s += elem.inner(c, c);
    return std::sqrt(s);
}

double l2_norm_faces(const CartesianGrid& grid, const Eigen::VectorXd& face_dofs) {
    const RT0Element elem(grid);
    double s = 0.0;
    for (Index c = 0; c < grid.cell_count(); ++c) {
        const Vec6 v = cell_face_dofs(grid, face_dofs, c);
        s += elem.inner(v, v);
    }
    return std::sqrt(s);
}

double relative_cellwise_error(const CartesianGrid& grid, const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b) {
    const double nb = l2_norm_cellwise(grid, b);
    const double diff = l2_norm_cellwise(grid, a - b);
    if (nb == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / nb;
}

ErrorReport compute_errors(const ExpandedSolution& reference, const DownscaledSolution& candidate,
                           const NestedGridPair& pair, const CoarseSolution* coarse,
                           const CoarseOperator* op) {
    const CartesianGrid& g = pair.fine();
    const Index nc = g.cell_count();
    if (static_cast<Index>(reference.theta.size()) != nc ||
        static_cast<Index>(candidate.theta.size()) != nc ||
        reference.p.size() != nc || candidate.p.size() != nc)
        throw ConfigError("error norms need reference and candidate on the same fine grid");

    const bool broken = static_cast<Index>(candidate.u_broken.size()) == nc;
    if (!broken && candidate.u.size() != g.face_count())
        throw ConfigError("error norms need a candidate velocity on the fine grid");

    const RT0Element elem(g);
    ErrorReport r;
    double ue = 0.0, un = 0.0, te = 0.0, tn = 0.0;
    for (Index c = 0; c < nc; ++c) {
        const Vec6 uref = cell_face_dofs(g, reference.u, c);
        const Vec6 ucand = broken ? candidate.u_broken[static_cast<std::size_t>(c)]
                                  : cell_face_dofs(g, candidate.u, c);
        const Vec6 du = uref - ucand;
        ue += elem.inner(du, du);
        un += elem.inner(uref, uref);
        const Vec6 dt = reference.theta[c] - candidate.theta[c];
        te += elem.inner(dt, dt);
        tn += elem.inner(reference.theta[c], reference.theta[c]);
    }
    r.u_error = std::sqrt(ue);
    r.u_norm = std::sqrt(un);
    r.gradp_error = std::sqrt(te);
    r.gradp_norm = std::sqrt(tn);
    r.p_error = l2_norm_cellwise(g, reference.p - candidate.p);
    r.p_norm = l2_norm_cellwise(g, reference.p);

    if (coarse != nullptr && op != nullptr) {
        const CartesianGrid& cg = pair.coarse();
        const double hK = cg.diameter();
        double me = 0.0;
        for (Index fc = 0; fc < cg.face_count(); ++fc) {
            if (op->coarse_face_kind(fc) != FaceKind::interior) continue;
            const auto& profiles = op->basis().face_profiles[fc];
            const Index np = static_cast<Index>(profiles.size());
            if (np == 0) continue;
            // Projection of the reference trace onto the multiplier profiles:
            // with the |e|-scaled profile basis, the normal equations reduce to
            // gram * c = sum_m t_m flux_{j,m}.
            const auto fine_faces = pair.fine_faces_of_coarse_face(fc);
            Eigen::VectorXd pairing = Eigen::VectorXd::Zero(np);
            for (std::size_t m = 0; m < fine_faces.size(); ++m) {
                const double t = pressure_trace(g, reference.p, fine_faces[m]);
                for (Index j = 0; j < np; ++j)
                    pairing[j] += t * profiles[static_cast<std::size_t>(j)].flux[m];
            }
            const Eigen::MatrixXd& gram = op->face_gram(fc);
            const Eigen::VectorXd proj = gram.ldlt().solve(pairing);
            const Eigen::VectorXd d = proj - coarse->lambda[static_cast<std::size_t>(fc)];
            const double area = cg.face_area(cg.face_axis(fc));
            const double face_err2 = area * d.dot(gram * d);
            me += 2 * hK * face_err2; // one contribution per adjacent coarse cell
        }
        r.multiplier_error = std::sqrt(me);
    }
    return r;
}

PostprocessedGradient postprocessed_gradient_error(const std::vector<Vec6>& theta_ref,
                                                   const std::vector<Vec6>& u_candidate,
                                                   const CoefficientField& k) {
    const CartesianGrid& g = k.grid();
    if (theta_ref.size() != u_candidate.size() ||
        static_cast<Index>(theta_ref.size()) != g.cell_count())
        throw ConfigError("postprocessed gradient needs matching fine fields");
    const RT0Element elem(g);
    const auto rule = reference_rule(QuadratureRule::gauss2);
    PostprocessedGradient out;
    for (Index c = 0; c < g.cell_count(); ++c) {
        const auto lo = g.cell_lower(c);
        for (const auto& [ref, w] : rule) {
            const Vec3 x(lo[0] + ref[0] * g.spacing(0), lo[1] + ref[1] * g.spacing(1),
                         lo[2] + ref[2] * g.spacing(2));
            const double kv = k.value(c, x);
            if (kv <= 0.0)
                throw DegenerateCoefficient(
                    "postprocessed gradient requires strictly positive permeability");
            const Vec3 grad_ref = elem.evaluate(theta_ref[c], ref);
            const Vec3 grad_cand = -elem.evaluate(u_candidate[c], ref) / kv;
            const double wt = w * g.cell_volume();
            out.error += wt * (grad_ref - grad_cand).squaredNorm();
            out.norm += wt * grad_ref.squaredNorm();
        }
    }
    out.error = std::sqrt(out.error);
    out.norm = std::sqrt(out.norm);
    return out;
}

double max_coarse_divergence_defect(const NestedGridPair& pair, const Eigen::VectorXd& fine_u,
                                    const SourceField& f) {
    const CartesianGrid& g = pair.fine();
    if (fine_u.size() != g.face_count() || f.grid == nullptr || !same_grid(*f.grid, g))
        throw ConfigError("divergence defect needs a fine face flux and matching source");
    double worst = 0.0;
    for (Index K = 0; K < pair.coarse().cell_count(); ++K) {
        double div = 0.0, src = 0.0;
        for (Index c : pair.fine_cells_of_coarse(K)) {
            const auto faces = g.cell_faces(c);
            for (int lf = 0; lf < 6; ++lf) div += RT0Element::sign(lf) * fine_u[faces[lf]];
            src += f.cell_integral(c);
        }
        worst = std::max(worst, std::abs(div - src));
    }
    return worst;
}

double max_coarse_divergence_defect(const NestedGridPair& pair, const std::vector<Vec6>& fine_u,
                                    const SourceField& f) {
    const CartesianGrid& g = pair.fine();
    if (static_cast<Index>(fine_u.size()) != g.cell_count() || f.grid == nullptr ||
        !same_grid(*f.grid, g))
        throw ConfigError("divergence defect needs a fine broken flux and matching source");
    double worst = 0.0;
    for (Index K = 0; K < pair.coarse().cell_count(); ++K) {
        double div = 0.0, src = 0.0;
        for (Index c : pair.fine_cells_of_coarse(K)) {
            const Vec6& v = fine_u[static_cast<std::size_t>(c)];
            for (int lf = 0; lf < 6; ++lf) div += RT0Element::sign(lf) * v(lf);
            src += f.cell_integral(c);
        }
        worst = std::max(worst, std::abs(div - src));
    }
    return worst;
}

} // namespace msdarcy
