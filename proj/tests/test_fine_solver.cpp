#include <doctest.h>

#include <cmath>

#include "msdarcy/fine_solver.hpp"
#include "msdarcy/metrics.hpp"

using namespace msdarcy;

namespace {

SourceField zero_source(const CartesianGrid& g) {
    SourceField f;
    f.variant = SourceVariant::user_table;
    f.grid = &g;
    f.density.assign(static_cast<std::size_t>(g.cell_count()), 0.0);
    return f;
}

CoefficientField wavy_field(const CartesianGrid& g) {
    std::vector<double> vals(static_cast<std::size_t>(g.cell_count()));
    for (Index c = 0; c < g.cell_count(); ++c)
        vals[static_cast<std::size_t>(c)] = 1.0 + 0.8 * std::sin(3.7 * double(c));
    return make_cellwise_field(g, std::move(vals));
}

double face_scale(const CartesianGrid& g, const Eigen::VectorXd& u) {
    return std::max(1e-30, u.cwiseAbs().maxCoeff());
}

} // namespace

TEST_CASE("linear pressure patch test is exact") {
    const CartesianGrid g({4, 3, 5}, Box{{0, 0, 0}, {1, 2, 1}});
    const auto k = make_cellwise_field(g, std::vector<double>(g.cell_count(), 2.0));
    const Vec3 a(1.0, -0.5, 0.25);
    BoundaryCondition bc;
    bc.kind = BoundaryCondition::Kind::pressure;
    bc.pressure = [&](const Vec3& x) { return a.dot(x) + 3.0; };
    const auto f = zero_source(g);

    const auto sys = assemble_expanded_fine(g, k, f, bc);
    CHECK_FALSE(sys.pure_neumann);
    const auto sol = solve_expanded_fine(sys);

    // Exact: p = a.x + 3 (cell centers), theta = a, u = -k a.
    for (Index c = 0; c < g.cell_count(); ++c) {
        CHECK(sol.p(c) == doctest::Approx(a.dot(to_vec(g.cell_center(c))) + 3.0).epsilon(1e-10));
        const RT0Element el(g);
        const Vec3 th = el.evaluate(sol.theta[c], Vec3(0.5, 0.5, 0.5));
        CHECK((th - a).norm() == doctest::Approx(0.0).epsilon(1e-9));
    }
    for (Index face = 0; face < g.face_count(); ++face) {
        const int axis = g.face_axis(face);
        const double expect = -2.0 * a(axis) * g.face_area(axis);
        CHECK(sol.u(face) == doctest::Approx(expect).epsilon(1e-9));
    }
    // Multiplier = pressure trace on interior faces.
    for (Index face = 0; face < g.face_count(); ++face)
        CHECK(sol.lambda(face) ==
              doctest::Approx(a.dot(to_vec(g.face_center(face))) + 3.0).epsilon(1e-9));
}

TEST_CASE("uniform inflow with flux boundary data recovers the linear pressure") {
    const CartesianGrid g({4, 4, 4}, Box{});
    const auto k = make_cellwise_field(g, std::vector<double>(g.cell_count(), 1.0));
    BoundaryCondition bc;
    bc.kind = BoundaryCondition::Kind::flux;
    // u = e_x: +axis flux density 1 on x-boundary faces, 0 elsewhere.
    bc.flux = [](const Vec3& x) { return (x[0] < 1e-12 || x[0] > 1.0 - 1e-12) ? 1.0 : 0.0; };
    const auto f = zero_source(g);
    const auto sol = solve_expanded_fine(assemble_expanded_fine(g, k, f, bc));

    for (Index face = 0; face < g.face_count(); ++face) {
        const double expect = (g.face_axis(face) == 0) ? g.face_area(0) : 0.0;
        CHECK(sol.u(face) == doctest::Approx(expect).epsilon(1e-9));
    }
    // Pure Neumann: pressure is gauged to volume-weighted zero mean; p = 0.5 - x.
    for (Index c = 0; c < g.cell_count(); ++c)
        CHECK(sol.p(c) == doctest::Approx(0.5 - g.cell_center(c)[0]).epsilon(1e-9));
}

TEST_CASE("hybrid and direct saddle solves agree") {
    const CartesianGrid g({4, 4, 2}, Box{});
    const auto k = wavy_field(g);
    SourceField f = zero_source(g);
    // Compatible interior source: +/- pair.
    f.density[0] = 1.0;
    f.density[static_cast<std::size_t>(g.cell_count() - 1)] = -1.0;

    const auto sys = assemble_expanded_fine(g, k, f);
    const auto hybrid = solve_expanded_fine(sys);
    const auto direct = solve_direct_saddle(sys);

    CHECK((hybrid.u - direct.u).cwiseAbs().maxCoeff() <=
          1e-10 * face_scale(g, direct.u));
    CHECK((hybrid.p - direct.p).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(1e-30, direct.p.cwiseAbs().maxCoeff()));
    for (Index c = 0; c < g.cell_count(); ++c)
        CHECK((hybrid.theta[c] - direct.theta[c]).norm() <= 1e-8);
}

TEST_CASE("expanded solution satisfies u = -k theta cellwise for constant k") {
    const CartesianGrid g({4, 4, 4}, Box{});
    const auto k = wavy_field(g);
    SourceField f = zero_source(g);
    f.density[0] = 1.0;
    f.density[static_cast<std::size_t>(g.cell_count() - 1)] = -1.0;
    const auto sol = solve_expanded_fine(assemble_expanded_fine(g, k, f));

    const Vec3 c0 = to_vec(g.cell_center(0));
    for (Index c = 0; c < g.cell_count(); ++c) {
        const double kc = k.value(c, to_vec(g.cell_center(c)));
        CHECK((sol.u_broken[c] + kc * sol.theta[c]).norm() <=
              1e-9 * std::max(1.0, sol.u_broken[c].norm()));
    }
    (void)c0;
}

TEST_CASE("conservation holds cell by cell") {
    const CartesianGrid g({6, 5, 4}, Box{});
    const auto k = wavy_field(g);
    SourceField f = zero_source(g);
    for (Index c = 0; c < g.cell_count(); ++c)
        f.density[static_cast<std::size_t>(c)] = (c % 2 == 0) ? 1.0 : -1.2;
    // Rebalance to compatibility.
    double total = 0.0;
    for (double d : f.density) total += d;
    for (double& d : f.density) d -= total / double(g.cell_count());

    const auto sol = solve_expanded_fine(assemble_expanded_fine(g, k, f));
    const RT0Element el(g);
    for (Index c = 0; c < g.cell_count(); ++c) {
        const double div = el.div_int().dot(sol.u_broken[c]);
        CHECK(std::abs(div - f.cell_integral(c)) <= 1e-12);
    }
}

TEST_CASE("incompatible pure-Neumann data is rejected") {
    const CartesianGrid g({3, 3, 3}, Box{});
    const auto k = make_cellwise_field(g, std::vector<double>(27, 1.0));
    SourceField f = zero_source(g);
    for (double& d : f.density) d = 1.0; // net injection, no outflow
    CHECK_THROWS_AS(assemble_expanded_fine(g, k, f), CompatibilityError);
}

TEST_CASE("deflated and augmented pure-Neumann paths agree") {
    const CartesianGrid g({4, 4, 2}, Box{});
    const auto k = wavy_field(g);
    SourceField f = zero_source(g);
    f.density[2] = 1.0;
    f.density[29] = -1.0;
    const auto sys = assemble_expanded_fine(g, k, f);

    SolverConfig plain;
    SolverConfig defl;
    defl.deflate = true;
    const auto a = solve_expanded_fine(sys, plain);
    const auto b = solve_expanded_fine(sys, defl);
    CHECK(b.stats.method == "projected_cg");
    CHECK((a.u - b.u).cwiseAbs().maxCoeff() <= 1e-7 * face_scale(g, a.u));
    CHECK((a.p - b.p).cwiseAbs().maxCoeff() <= 1e-7 * std::max(1e-30, a.p.cwiseAbs().maxCoeff()));
}

TEST_CASE("broken fluxes recovered from both sides agree with the conforming vector") {
    const CartesianGrid g({4, 4, 4}, Box{});
    const auto k = wavy_field(g);
    SourceField f = zero_source(g);
    f.density[0] = 1.0;
    f.density[63] = -1.0;
    const auto sol = solve_expanded_fine(assemble_expanded_fine(g, k, f));
    const double scale = face_scale(g, sol.u);
    for (Index c = 0; c < g.cell_count(); ++c) {
        const auto faces = g.cell_faces(c);
        for (int lf = 0; lf < 6; ++lf)
            CHECK(std::abs(sol.u_broken[c](lf) - sol.u(faces[lf])) <= 1e-8 * scale);
    }
}

TEST_CASE("FineCondensed reuses its factorization for custom loads") {
    const CartesianGrid g({4, 4, 2}, Box{});
    const auto k = wavy_field(g);
    SourceField f1 = zero_source(g);
    f1.density[0] = 1.0;
    f1.density[31] = -1.0;
    SourceField f2 = zero_source(g);
    f2.density[5] = 2.0;
    f2.density[26] = -2.0;

    const auto sys1 = assemble_expanded_fine(g, k, f1);
    const FineCondensed cond(sys1);
    const auto sol_a = cond.recover(cond.engine().solve(cond.system_loads()));

    // Same structure, alternative source: matches a fresh assembly of f2.
    Eigen::VectorXd integ2(g.cell_count());
    for (Index c = 0; c < g.cell_count(); ++c) integ2(c) = f2.cell_integral(c);
    const auto sol_b = cond.recover(cond.engine().solve(cond.make_loads(integ2, nullptr)));
    const auto sys2 = assemble_expanded_fine(g, k, f2);
    const auto sol_ref = solve_expanded_fine(sys2);
    CHECK((sol_b.u - sol_ref.u).cwiseAbs().maxCoeff() <= 1e-9 * face_scale(g, sol_ref.u));
    CHECK((sol_b.p - sol_ref.p).cwiseAbs().maxCoeff() <=
          1e-9 * std::max(1e-30, sol_ref.p.cwiseAbs().maxCoeff()));

    // And the original loads still solve the original problem.
    const auto sol_ref1 = solve_expanded_fine(sys1);
    CHECK((sol_a.u - sol_ref1.u).cwiseAbs().maxCoeff() <= 1e-9 * face_scale(g, sol_ref1.u));
}

TEST_CASE("factor cache survives repeated assemblies with the same pattern") {
    const CartesianGrid g({4, 4, 2}, Box{});
    SourceField f = zero_source(g);
    f.density[0] = 1.0;
    f.density[31] = -1.0;
    auto cache = std::make_shared<CondensedFactorCache>();
    Eigen::VectorXd first_p;
    for (int pass = 0; pass < 3; ++pass) {
        std::vector<double> vals(32);
        for (int i = 0; i < 32; ++i) vals[i] = 1.0 + 0.1 * pass + 0.05 * i;
        const auto k = make_cellwise_field(g, vals);
        const auto sys = assemble_expanded_fine(g, k, f);
        const FineCondensed cond(sys, SolverConfig{}, cache);
        const auto sol = cond.recover(cond.engine().solve(cond.system_loads()));
        const auto ref = solve_expanded_fine(sys);
        CHECK((sol.p - ref.p).cwiseAbs().maxCoeff() <=
              1e-9 * std::max(1e-30, ref.p.cwiseAbs().maxCoeff()));
        if (pass == 0) first_p = sol.p;
    }
    CHECK(cache->analyzed);
}

TEST_CASE("local Neumann solves reproduce restricted global fields") {
    // Global uniform flow restricted to a subgrid solves the local problem
    // with its own boundary fluxes.
    const CartesianGrid g({6, 6, 6}, Box{});
    const auto pair = build_nested({6, 6, 6}, {2, 2, 2}, Box{});
    const Index cc = pair.coarse().cell_index(1, 0, 1);
    const Subgrid sub(pair.fine(), pair.coarse_cell_region(cc));
    const auto k = make_cellwise_field(pair.fine(),
                                       std::vector<double>(pair.fine().cell_count(), 1.5));

    const auto& lg = sub.grid();
    Eigen::VectorXd bflux = Eigen::VectorXd::Zero(lg.face_count());
    for (Index face = 0; face < lg.face_count(); ++face)
        if (lg.is_boundary_face(face) && lg.face_axis(face) == 0)
            bflux(face) = lg.face_area(0); // u = e_x through the region
    const Eigen::VectorXd div = Eigen::VectorXd::Zero(lg.cell_count());

    const auto sol = solve_local_neumann(sub, k, div, bflux, QuadratureRule::midpoint);
    for (Index face = 0; face < lg.face_count(); ++face) {
        const double expect = (lg.face_axis(face) == 0) ? lg.face_area(0) : 0.0;
        CHECK(std::abs(sol.u(face) - expect) <= 1e-9 * lg.face_area(0));
    }
    // Mean-zero local pressure, slope -1/k along x.
    double mean = 0.0;
    for (Index c = 0; c < lg.cell_count(); ++c) mean += sol.p(c);
    CHECK(std::abs(mean / double(lg.cell_count())) <= 1e-10);

    // Incompatible data must be refused.
    Eigen::VectorXd bad = bflux;
    bad(0) += 1.0;
    CHECK_THROWS_AS(solve_local_neumann(sub, k, div, bad, QuadratureRule::midpoint),
                    CompatibilityError);

    // The reusable context gives the same answer.
    const LocalNeumannContext ctx(sub, k, QuadratureRule::midpoint);
    const auto sol2 = ctx.solve(div, bflux);
    CHECK((sol2.u - sol.u).cwiseAbs().maxCoeff() <= 1e-10 * face_scale(lg, sol.u));
}

TEST_CASE("vanishing-bubble coefficient solves under the Gauss rule") {
    const auto pair = build_nested({8, 8, 8}, {4, 4, 4}, Box{});
    PermeabilityParams params;
    params.channel_box = Box{{0.0, 3.0 / 8.0, 3.0 / 8.0}, {1.0, 5.0 / 8.0, 5.0 / 8.0}};
    const auto k = make_permeability(PermeabilityVariant::vanishing_channel, pair, params);
    const auto f = make_source(SourceVariant::corner_wells_3d, pair);
    const auto sys = assemble_expanded_fine(pair, k, f);
    CHECK(sys.rule == QuadratureRule::gauss2);
    const auto sol = solve_expanded_fine(sys);
    CHECK(std::isfinite(sol.p.sum()));
    const RT0Element el(pair.fine());
    for (Index c = 0; c < pair.fine().cell_count(); ++c) {
        const double div = el.div_int().dot(sol.u_broken[c]);
        CHECK(std::abs(div - f.cell_integral(c)) <= 1e-12);
    }
    CHECK(sol.stats.residual <= 1e-9);
    CHECK_FALSE(sol.stats.method.empty());
}
