#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "msdarcy/metrics.hpp"
#include "msdarcy/twophase.hpp"

using namespace msdarcy;

namespace {

SourceField zero_wells(const CartesianGrid& g) {
    SourceField s;
    s.variant = SourceVariant::user_table;
    s.grid = &g;
    s.density.assign(static_cast<std::size_t>(g.cell_count()), 0.0);
    return s;
}

CoefficientField unit_field(const CartesianGrid& g) {
    return make_cellwise_field(g, std::vector<double>(static_cast<std::size_t>(g.cell_count()), 1.0));
}

} // namespace

TEST_CASE("quadratic mobilities at the endpoints and midpoint") {
    const MobilityModel model; // mu_w = 0.5, mu_o = 1
    const auto m0 = mobilities(0.0, model);
    CHECK(m0.lambda_w == 0.0);
    CHECK(m0.lambda_o == 1.0);
    CHECK(m0.lambda_total == 1.0);
    CHECK(m0.f_w == 0.0);

    const auto m1 = mobilities(1.0, model);
    CHECK(m1.lambda_w == 2.0);
    CHECK(m1.lambda_o == 0.0);
    CHECK(m1.lambda_total == 2.0);
    CHECK(m1.f_w == 1.0);

    const auto mh = mobilities(0.5, model);
    CHECK(mh.lambda_w == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mh.lambda_o == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(mh.lambda_total == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(mh.f_w == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(mobilities(-0.01, model), DomainError);
    CHECK_THROWS_AS(mobilities(1.01, model), DomainError);

    MobilityModel bad;
    bad.mu_w = 0.0;
    CHECK_THROWS_AS(mobilities(0.5, bad), ConfigError);
    bad.mu_w = 0.5;
    bad.mu_o = -1.0;
    CHECK_THROWS_AS(mobilities(0.5, bad), ConfigError);
}

TEST_CASE("linear test mode is plain advection") {
    MobilityModel model;
    model.linear_fractional_flow = true;
    for (double s : {0.0, 0.3, 0.8, 1.0}) {
        const auto m = mobilities(s, model);
        CHECK(m.lambda_w == s);
        CHECK(m.lambda_o == 1.0 - s);
        CHECK(m.lambda_total == 1.0);
        CHECK(m.f_w == s);
    }
    CHECK(max_fractional_flow_slope(model) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fractional-flow slope of the quadratic model") {
    const MobilityModel model;
    const double slope = max_fractional_flow_slope(model);
    CHECK(slope > 1.9);
    CHECK(slope < 2.3);
}

TEST_CASE("two-cell upwind update by hand") {
    const CartesianGrid g({2, 1, 1}, Box{});
    const auto wells = zero_wells(g);
    MobilityModel model;
    model.linear_fractional_flow = true;

    Eigen::VectorXd flux = Eigen::VectorXd::Zero(g.face_count());
    const Index mid = g.cell_face(0, 0, 1); // hi x-face of cell 0
    flux[mid] = 0.1;

    CHECK(cfl_limit(g, flux, wells, model) == doctest::Approx(5.0).epsilon(1e-12));

    SaturationState state;
    state.S.resize(2);
    state.S << 0.6, 0.2;
    const double dt = 1.0;
    TransportDiagnostics diag;
    const auto next = transport_step(state, flux, wells, model, dt, &diag);
    // Water crosses the middle face at rate F * f_w(upwind) = 0.1 * 0.6.
    CHECK(next.S[0] == doctest::Approx(0.6 - dt / 0.5 * 0.06).epsilon(1e-14));
    CHECK(next.S[1] == doctest::Approx(0.2 + dt / 0.5 * 0.06).epsilon(1e-14));
    CHECK(diag.balance_defect <= 1e-15);
    CHECK(next.time == dt);
    CHECK(next.step == 1);

    // Reversed flux upwinds from the other side.
    flux[mid] = -0.1;
    const auto back = transport_step(state, flux, wells, model, dt, nullptr);
    CHECK(back.S[0] == doctest::Approx(0.6 + dt / 0.5 * 0.1 * 0.2).epsilon(1e-14));
    CHECK(back.S[1] == doctest::Approx(0.2 - dt / 0.5 * 0.1 * 0.2).epsilon(1e-14));

    // dt beyond the CFL limit is rejected.
    flux[mid] = 0.1;
    CHECK_THROWS_AS(transport_step(state, flux, wells, model, 1.5 * 5.0, nullptr), CFLError);
}

TEST_CASE("transport rejects saturations that leave the unit interval") {
    const CartesianGrid g({2, 1, 1}, Box{});
    MobilityModel model;
    model.linear_fractional_flow = true;
    const Eigen::VectorXd flux = Eigen::VectorXd::Zero(g.face_count());

    // Input outside [0,1] trips the mobility evaluation.
    SaturationState bad;
    bad.S.resize(2);
    bad.S << 1.5, 0.0;
    const auto wells = zero_wells(g);
    CHECK_THROWS_AS(transport_step(bad, flux, wells, model, 0.1, nullptr), DomainError);

    // Injection into a nearly full cell overshoots 1 (the CFL limit only sees
    // outflow, so the step itself must catch the excursion).
    SourceField pair_wells = zero_wells(g);
    pair_wells.density[0] = 1.0;
    pair_wells.density[1] = -1.0;
    SaturationState full;
    full.S.resize(2);
    full.S << 0.9, 0.1;
    CHECK_THROWS_AS(transport_step(full, flux, pair_wells, model, 1.0, nullptr), DomainError);
}

TEST_CASE("well source lives on the coarse well cells") {
    const auto pair = build_nested({8, 8, 4}, {2, 2, 1}, Box{});
    WellConfig wells;
    wells.injector = 0;
    wells.producer = pair.coarse().cell_count() - 1;
    wells.rate = pair.coarse().cell_volume();
    const auto src = well_source(pair, wells);

    CHECK(std::abs(src.total_integral()) <= 1e-14);
    double injected = 0.0;
    for (Index c : pair.fine_cells_of_coarse(wells.injector)) injected += src.cell_integral(c);
    CHECK(injected == doctest::Approx(wells.rate).epsilon(1e-13));
    for (Index c = 0; c < pair.fine().cell_count(); ++c) {
        const Index K = pair.coarse_cell_of_fine(c);
        if (K == wells.injector)
            CHECK(src.density[c] == doctest::Approx(1.0).epsilon(1e-13));
        else if (K == wells.producer)
            CHECK(src.density[c] == doctest::Approx(-1.0).epsilon(1e-13));
        else
            CHECK(src.density[c] == 0.0);
    }

    WellConfig same = wells;
    same.producer = same.injector;
    CHECK_THROWS_AS(well_source(pair, same), ConfigError);
    WellConfig negative = wells;
    negative.rate = -1.0;
    CHECK_THROWS_AS(well_source(pair, negative), ConfigError);
    WellConfig out_of_range = wells;
    out_of_range.producer = pair.coarse().cell_count();
    CHECK_THROWS_AS(well_source(pair, out_of_range), ConfigError);
}

TEST_CASE("one-dimensional coupled run stays monotone, bounded, conservative") {
    const auto pair = build_nested({16, 1, 1}, {4, 1, 1}, Box{});
    const CartesianGrid& g = pair.fine();
    const auto k = unit_field(g);
    MobilityModel model;
    model.linear_fractional_flow = true;

    WellConfig wells;
    wells.injector = 0;
    wells.producer = 3;
    wells.rate = pair.coarse().cell_volume();
    const auto src = well_source(pair, wells);

    // Linear mode keeps the total mobility at 1, so one pressure solve serves
    // the whole run.
    const auto sol = solve_expanded_fine(assemble_expanded_fine(pair, k, src));

    SaturationState state;
    state.S = Eigen::VectorXd::Zero(g.cell_count());
    const double dt = 0.9 * cfl_limit(g, sol.u, src, model);
    CHECK(dt > 0.0);
    double max_defect = 0.0;
    for (int step = 0; step < 120; ++step) {
        TransportDiagnostics diag;
        state = transport_step(state, sol.u, src, model, dt, &diag);
        max_defect = std::max(max_defect, diag.balance_defect);
        CHECK(diag.pre_clamp_min >= -1e-12);
        CHECK(diag.pre_clamp_max <= 1.0 + 1e-12);
    }
    CHECK(max_defect <= 1e-12);
    CHECK(state.S[0] > 0.5); // the injector block has filled substantially
    for (Index c = 0; c + 1 < g.cell_count(); ++c)
        CHECK(state.S[c] >= state.S[c + 1] - 1e-10); // front profile non-increasing
}

TEST_CASE("pressure step with unit total mobility is the plain coarse solve") {
    const auto pair = build_nested({8, 8, 1}, {2, 2, 1}, Box{});
    const CartesianGrid& g = pair.fine();
    std::vector<double> vals(static_cast<std::size_t>(g.cell_count()));
    for (Index c = 0; c < g.cell_count(); ++c)
        vals[static_cast<std::size_t>(c)] = 1.0 + 0.8 * std::sin(2.3 * double(c));
    const auto k = make_cellwise_field(g, std::move(vals));

    WellConfig wells;
    wells.injector = 0;
    wells.producer = 3;
    wells.rate = pair.coarse().cell_volume();
    const auto src = well_source(pair, wells);
    const BoundaryCondition bc;

    const auto basis = build_local_basis(pair, k);
    const CoarseOperator op(pair, basis, src, bc);

    MobilityModel model;
    model.linear_fractional_flow = true;
    SaturationState state;
    state.S = Eigen::VectorXd::Constant(g.cell_count(), 0.37);
    const auto stepped = pressure_step(state, op, k, model);

    const auto plain = downscale(op, solve_coarse(op.assemble(k), CoarseSolveMode::hybrid));
    const double uscale = std::max(1e-12, plain.u.cwiseAbs().maxCoeff());
    CHECK((stepped.u - plain.u).cwiseAbs().maxCoeff() <= 1e-12 * uscale);
    const double pscale = std::max(1e-12, plain.p.cwiseAbs().maxCoeff());
    CHECK((stepped.p - plain.p).cwiseAbs().maxCoeff() <= 1e-12 * pscale);

    // The downscaled velocity balances the wells on every coarse cell.
    CHECK(max_coarse_divergence_defect(pair, stepped.u, src) <= 1e-12 * src.l2_scale());
}

TEST_CASE("side-by-side IMPES smoke run") {
    const auto pair = build_nested({8, 8, 1}, {2, 2, 1}, Box{});
    const CartesianGrid& g = pair.fine();
    const auto k = unit_field(g);

    WellConfig wells;
    wells.injector = 0;
    wells.producer = 3;
    wells.rate = pair.coarse().cell_volume();
    const auto src = well_source(pair, wells);

    const auto local = build_local_basis(pair, k);
    const auto gf = compute_solution_global_field(g, k, src);
    const auto global = build_global_basis(pair, k, gf);

    ImpesOptions opts;
    opts.steps = 6;
    opts.snapshot_step = 3;
    const auto series = run_impes(pair, k, wells, {&local, &global}, opts);

    REQUIRE(series.times.size() == 6);
    REQUIRE(series.errors.size() == 2);
    for (const auto& e : series.errors) {
        REQUIRE(e.size() == 6);
        for (double v : e) {
            CHECK(std::isfinite(v));
            CHECK(v < 1.0);
        }
    }
    // First step: S = 0 everywhere makes f_w = 0, so every pipeline deposits
    // exactly the injected water and nothing moves; errors vanish.
    CHECK(series.errors[0][0] <= 1e-12);
    CHECK(series.errors[1][0] <= 1e-12);

    CHECK(series.ref_snapshot.size() == g.cell_count());
    CHECK(series.snapshots[0].size() == g.cell_count());
    CHECK(series.snapshots[1].size() == g.cell_count());
    CHECK(series.ref_final.size() == g.cell_count());
    CHECK(series.finals[0].size() == g.cell_count());
    CHECK(series.finals[1].size() == g.cell_count());
    CHECK(series.ref_final.maxCoeff() > 0.0);

    CHECK(series.max_balance_defect <= 1e-12);
    CHECK(series.s_min >= -1e-12);
    CHECK(series.s_max <= 1.0 + 1e-12);

    // Times are strictly increasing shared clocks.
    for (std::size_t i = 0; i + 1 < series.times.size(); ++i)
        CHECK(series.times[i] < series.times[i + 1]);
}
