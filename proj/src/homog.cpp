#include "msdarcy/homog.hpp"

#include <cmath>

namespace msdarcy {

namespace {

/// Representative of a face on the periodic torus: high-plane boundary faces
/// fold onto the matching low-plane face, everything else maps to itself.
Index periodic_representative(const CartesianGrid& g, Index face) {
    const int axis = g.face_axis(face);
    auto c = g.face_coords(face);
    if (c[axis] == g.count(axis)) c[axis] = 0;
    return g.face_index(axis, c[0], c[1], c[2]);
}

} // namespace

CellProblemResult homogenize_cell(const CoefficientField& k_Y, const CartesianGrid& cell_grid,
                                  SolverConfig cfg) {
    if (!same_grid(k_Y.grid(), cell_grid))
        throw ConfigError("cell coefficient does not live on the cell grid");

    const CartesianGrid& g = cell_grid;
    const Index nc = g.cell_count();
    const RT0Element elem(g);
    const QuadratureRule rule = k_Y.recommended_rule();

    // One multiplier per periodic face class, numbered by representative face.
    std::vector<Index> lambda_of(g.face_count(), -1);
    Index n_lambda = 0;
    for (Index f = 0; f < g.face_count(); ++f)
        if (periodic_representative(g, f) == f) lambda_of[f] = n_lambda++;

    std::vector<HybridElement> elements(nc);
    for (Index c = 0; c < nc; ++c) {
        const CellMatrices cm = local_rt0_matrices(g, c, k_Y, rule);
        HybridElement& el = elements[c];
        el.A = cm.Mk;
        el.P = cm.N;
        el.b = cm.b_div;
        el.volume = g.cell_volume();
        const auto faces = g.cell_faces(c);
        for (int lf = 0; lf < 6; ++lf)
            el.couplings.push_back(
                {lf, lambda_of[periodic_representative(g, faces[lf])], RT0Element::sign(lf)});
    }

    // The torus problem is pure Neumann with a single uniform trace profile
    // per face; eliminate the constant (p, lambda) nullvector by deflation so
    // very fine cell grids stay within memory.
    cfg.deflate = true;
    HybridCondensedSystem engine(std::move(elements), n_lambda, /*pure_neumann=*/true, cfg);

    CellProblemResult out;
    out.k_star = Mat3::Zero();
    const double cell_volume = nc * g.cell_volume();
    for (int i = 0; i < 3; ++i) {
        HybridLoads loads;
        loads.r1.resize(nc);
        Vec3 e = Vec3::Zero();
        e[i] = 1.0;
        for (Index c = 0; c < nc; ++c)
            loads.r1[c] = -elem.weighted_direction_moment(k_Y, c, rule, e);

        const HybridSolution sol = engine.solve(loads);

        // k* e_i = <k (e_i + grad N_i)> = -<u_i> over Y.
        Vec3 flux = Vec3::Zero();
        for (Index c = 0; c < nc; ++c) flux += elem.component_integral(Vec6(sol.u[c]));
        out.k_star.col(i) = -flux / cell_volume;

        out.correctors[i] = sol.p;
        out.correctors[i].array() -= sol.p.mean();
        out.stats[i] = sol.stats;
    }
    return out;
}

ExpandedSolution homogenized_reference(const Mat3& k_star, const SourceField& f,
                                       const CartesianGrid& grid, const BoundaryCondition& bc,
                                       SolverConfig cfg) {
    const CoefficientField k = make_tensor_field(grid, k_star);
    const SaddleSystem sys = assemble_expanded_fine(grid, k, f, bc);
    return solve_expanded_fine(sys, cfg);
}

FieldMeans field_means(const CoefficientField& k) {
    if (k.is_tensor()) throw ConfigError("field_means expects a scalar coefficient");
    const CartesianGrid& g = k.grid();
    const QuadratureRule rule = k.recommended_rule();
    double vol = 0.0, sum = 0.0, inv_sum = 0.0;
    bool touches_zero = false;
    for (Index c = 0; c < g.cell_count(); ++c) {
        for (const auto& qp : sample_at_quadrature(k, c, rule)) {
            vol += qp.weight;
            sum += qp.weight * qp.value;
            if (qp.value > 0.0)
                inv_sum += qp.weight / qp.value;
            else
                touches_zero = true;
        }
    }
    FieldMeans m;
    m.arithmetic = sum / vol;
    m.harmonic = touches_zero ? 0.0 : vol / inv_sum;
    return m;
}

CoefficientField make_laminate(const CartesianGrid& grid, double a, double b) {
    const double mid = 0.5 * (grid.box().lo[0] + grid.box().hi[0]);
    std::vector<double> vals(grid.cell_count());
    for (Index c = 0; c < grid.cell_count(); ++c)
        vals[c] = grid.cell_center(c)[0] < mid ? a : b;
    return make_cellwise_field(grid, std::move(vals));
}

CoefficientField make_checkerboard(const CartesianGrid& grid, double a, double b) {
    if (grid.count(0) % 2 != 0 || grid.count(1) % 2 != 0)
        throw ConfigError("checkerboard needs even cell counts in y1 and y2");
    const double mx = 0.5 * (grid.box().lo[0] + grid.box().hi[0]);
    const double my = 0.5 * (grid.box().lo[1] + grid.box().hi[1]);
    std::vector<double> vals(grid.cell_count());
    for (Index c = 0; c < grid.cell_count(); ++c) {
        const auto x = grid.cell_center(c);
        vals[c] = ((x[0] < mx) == (x[1] < my)) ? a : b;
    }
    return make_cellwise_field(grid, std::move(vals));
}

} // namespace msdarcy
