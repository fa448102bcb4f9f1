#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "msdarcy/fields.hpp"

using namespace msdarcy;

namespace {
Vec3 center(const CartesianGrid& g, Index c) { return to_vec(g.cell_center(c)); }
} // namespace

TEST_CASE("uniform and channel permeability variants") {
    const auto pair = build_nested({24, 24, 24}, {8, 8, 8}, Box{});
    const auto& g = pair.fine();

    const auto uni = make_permeability(PermeabilityVariant::uniform, pair);
    CHECK(uni.cellwise_constant());
    CHECK(uni.recommended_rule() == QuadratureRule::midpoint);
    CHECK(uni.value(0, center(g, 0)) == 1.0);

    const auto chan = make_permeability(PermeabilityVariant::channel, pair);
    Index inside = 0;
    for (Index c = 0; c < g.cell_count(); ++c) {
        const double v = chan.value(c, center(g, c));
        const auto x = g.cell_center(c);
        const bool in = x[1] > 4.0 / 24 && x[1] < 5.0 / 24 && x[2] > 7.0 / 24 && x[2] < 8.0 / 24;
        CHECK(v == (in ? 1e-4 : 1.0));
        if (in) ++inside;
    }
    CHECK(inside == 24); // one fine-cell-wide channel across the whole x extent
}

TEST_CASE("vanishing channel carries the bubble and needs the Gauss rule") {
    const auto pair = build_nested({24, 24, 24}, {8, 8, 8}, Box{});
    const auto& g = pair.fine();
    const auto k = make_permeability(PermeabilityVariant::vanishing_channel, pair);
    CHECK_FALSE(k.cellwise_constant());
    CHECK(k.recommended_rule() == QuadratureRule::gauss2);

    Index zeros = 0, channel_cells = 0;
    for (Index c = 0; c < g.cell_count(); ++c) {
        const auto x = g.cell_center(c);
        const bool in = x[1] > 4.0 / 24 && x[1] < 5.0 / 24 && x[2] > 7.0 / 24 && x[2] < 8.0 / 24;
        const double v = k.value(c, center(g, c));
        if (in) {
            ++channel_cells;
            CHECK(v >= 0.0);
            if (v == 0.0) ++zeros;
        } else {
            CHECK(v == 1.0);
        }
        // Gauss points stay strictly positive (construction would have thrown
        // otherwise); spot-check the smallest sample per channel cell.
        if (in) {
            double mn = 1e300;
            for (const auto& q : sample_at_quadrature(k, c, QuadratureRule::gauss2))
                mn = std::min(mn, q.value);
            CHECK(mn > 0.0);
        }
    }
    CHECK(channel_cells == 24);
    CHECK(zeros > 0); // the bubble really vanishes at some cell centers
}

TEST_CASE("oscillatory field is the analytic product formula") {
    const auto pair = build_nested({20, 20, 4}, {10, 10, 1}, Box{{0, 0, 0}, {1, 1, 0.125}});
    const auto k = make_permeability(PermeabilityVariant::oscillatory, pair);
    CHECK_FALSE(k.cellwise_constant());
    for (Index c : {Index(0), Index(57), Index(399)}) {
        const Vec3 x = center(pair.fine(), c);
        const double expect =
            (std::sin(20.0 * M_PI * x[0]) + 1.5) * (std::sin(20.0 * M_PI * x[1]) + 1.5);
        CHECK(k.value(c, x) == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("random shale is seeded, z-constant and fraction-faithful") {
    const auto pair = build_nested({100, 100, 8}, {10, 10, 1}, Box{{0, 0, 0}, {1, 1, 0.125}});
    const auto& g = pair.fine();
    const auto a = make_permeability(PermeabilityVariant::random_shale, pair, {}, 2021);
    const auto b = make_permeability(PermeabilityVariant::random_shale, pair, {}, 2021);
    const auto c = make_permeability(PermeabilityVariant::random_shale, pair, {}, 7);

    bool differs = false;
    Index shale = 0, high = 0;
    for (Index i = 0; i < g.cell_count(); ++i) {
        const Vec3 x = center(g, i);
        CHECK(a.value(i, x) == b.value(i, x));
        if (a.value(i, x) != c.value(i, x)) differs = true;
    }
    CHECK(differs);

    // Constant along z: every column matches its iz=0 cell.
    for (int ix = 0; ix < g.count(0); ix += 7)
        for (int iy = 0; iy < g.count(1); iy += 7) {
            const Index c0 = g.cell_index(ix, iy, 0);
            const double v0 = a.value(c0, center(g, c0));
            for (int iz = 1; iz < g.count(2); ++iz) {
                const Index ci = g.cell_index(ix, iy, iz);
                CHECK(a.value(ci, center(g, ci)) == v0);
            }
        }

    // Composition: ~10% shale columns, ~10% high, remainder split.
    for (int ix = 0; ix < g.count(0); ++ix)
        for (int iy = 0; iy < g.count(1); ++iy) {
            const Index ci = g.cell_index(ix, iy, 0);
            const double v = a.value(ci, center(g, ci));
            // Shale columns carry the bubble, so the sampled value is
            // shale_value * bubble <= shale_value.
            if (v <= 1e-6) ++shale;
            if (v == 100.0) ++high;
        }
    const double ncol = 100.0 * 100.0;
    CHECK(shale / ncol == doctest::Approx(0.10).epsilon(0.25));
    CHECK(high / ncol == doctest::Approx(0.10).epsilon(0.25));

    CHECK_THROWS_AS(make_permeability(PermeabilityVariant::random_shale, pair), ConfigError);
}

TEST_CASE("direct factories validate their inputs") {
    const CartesianGrid g({2, 2, 1}, Box{});

    const auto f = make_cellwise_field(g, {1.0, 2.0, 3.0, 4.0});
    CHECK(f.cellwise_constant());
    for (Index c = 0; c < 4; ++c) CHECK(f.value(c, center(g, c)) == double(c + 1));
    CHECK_THROWS_AS(make_cellwise_field(g, {1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(make_cellwise_field(g, {1.0, 0.0, 3.0, 4.0}), DegenerateCoefficient);
    CHECK_THROWS_AS(make_cellwise_field(g, {1.0, -2.0, 3.0, 4.0}), DegenerateCoefficient);

    Mat3 spd;
    spd << 2, 0.1, 0, 0.1, 1, 0, 0, 0, 3;
    const auto t = make_tensor_field(g, spd);
    CHECK(t.is_tensor());
    CHECK((t.tensor_value(0, center(g, 0)) - spd).norm() == 0.0);
    Mat3 bad = spd;
    bad(2, 2) = -1.0;
    CHECK_THROWS_AS(make_tensor_field(g, bad), DegenerateCoefficient);

    const auto an = make_analytic_field(g, [](const Vec3& x) { return 1.0 + x[0]; });
    CHECK_FALSE(an.cellwise_constant());
    CHECK(an.value(0, Vec3(0.25, 0.1, 0.2)) == doctest::Approx(1.25).epsilon(1e-15));
    CHECK_THROWS_AS(make_analytic_field(g, [](const Vec3& x) { return x[0] - 10.0; }),
                    DegenerateCoefficient);
    CHECK_THROWS_AS(make_analytic_field(g, nullptr), ConfigError);
}

TEST_CASE("sample_at_quadrature weights sum to the cell volume") {
    const CartesianGrid g({3, 2, 1}, Box{{0, 0, 0}, {1.5, 1, 0.5}});
    const auto k = make_analytic_field(g, [](const Vec3& x) { return 1.0 + x[0] * x[1]; });
    for (const QuadratureRule rule : {QuadratureRule::midpoint, QuadratureRule::gauss2}) {
        for (Index c = 0; c < g.cell_count(); ++c) {
            const auto pts = sample_at_quadrature(k, c, rule);
            double w = 0.0;
            for (const auto& q : pts) {
                w += q.weight;
                CHECK(q.value == doctest::Approx(1.0 + q.x[0] * q.x[1]).epsilon(1e-14));
            }
            CHECK(w == doctest::Approx(g.cell_volume()).epsilon(1e-14));
        }
    }
}

TEST_CASE("cellwise scaling composes and keeps the variant") {
    const auto pair = build_nested({4, 4, 4}, {2, 2, 2}, Box{});
    const auto k = make_permeability(PermeabilityVariant::uniform, pair);
    std::vector<double> s(64, 2.0);
    s[10] = 0.5;
    const auto ks = k.scaled_by(s);
    CHECK(ks.value(10, center(pair.fine(), 10)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ks.value(11, center(pair.fine(), 11)) == doctest::Approx(2.0).epsilon(1e-15));
    const auto kss = ks.scaled_by(s);
    CHECK(kss.value(10, center(pair.fine(), 10)) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(k.scaled_by(std::vector<double>(3, 1.0)), ConfigError);
}

TEST_CASE("user tables load in cell order and reject bad files") {
    const auto pair = build_nested({2, 2, 1}, {1, 1, 1}, Box{});
    const std::string path = "fields_table_test.txt";
    {
        std::ofstream out(path);
        out << "1.0\n2.0\n3.0\n4.0\n";
    }
    PermeabilityParams params;
    params.table_path = path;
    const auto k = make_permeability(PermeabilityVariant::user_table, pair, params);
    for (Index c = 0; c < 4; ++c)
        CHECK(k.value(c, center(pair.fine(), c)) == double(c + 1));
    std::remove(path.c_str());
    CHECK_THROWS_AS(make_permeability(PermeabilityVariant::user_table, pair, params), ConfigError);
}

TEST_CASE("corner-well sources are compatible and footprint-sized") {
    const auto pair = build_nested({24, 24, 24}, {8, 8, 8}, Box{});
    const auto f = make_source(SourceVariant::corner_wells_3d, pair); // H = coarse spacing
    const auto& g = pair.fine();
    Index pos = 0, neg = 0;
    for (Index c = 0; c < g.cell_count(); ++c) {
        if (f.density[c] > 0) ++pos;
        if (f.density[c] < 0) ++neg;
    }
    CHECK(pos == 27); // (24/8)^3 fine cells in the corner coarse cell
    CHECK(neg == 27);
    CHECK(f.density[g.cell_index(0, 0, 0)] == 1.0);
    CHECK(f.density[g.cell_index(23, 23, 23)] == -1.0);
    CHECK(std::abs(f.total_integral()) <= 1e-13);
    CHECK(f.l2_scale() == 1.0);
    CHECK(f.cell_integral(0) == doctest::Approx(g.cell_volume()).epsilon(1e-15));

    // 2-D wells span the whole z extent.
    const auto slab = build_nested({20, 20, 4}, {10, 10, 1}, Box{{0, 0, 0}, {1, 1, 0.125}});
    const auto f2 = make_source(SourceVariant::corner_wells_2d, slab);
    for (int iz = 0; iz < 4; ++iz) {
        CHECK(f2.density[slab.fine().cell_index(0, 0, iz)] == 1.0);
        CHECK(f2.density[slab.fine().cell_index(19, 19, iz)] == -1.0);
    }
    CHECK(std::abs(f2.total_integral()) <= 1e-13);

    // Explicit H overrides the footprint.
    SourceParams sp;
    sp.H = 0.25;
    const auto f3 = make_source(SourceVariant::corner_wells_3d, pair, sp);
    Index pos3 = 0;
    for (double d : f3.density)
        if (d > 0) ++pos3;
    CHECK(pos3 == 6 * 6 * 6);
}

TEST_CASE("two-spot source fills the corner coarse cells at the given rate") {
    const auto pair = build_nested({8, 8, 4}, {4, 4, 1}, Box{{0, 0, 0}, {1, 1, 0.125}});
    SourceParams sp;
    sp.rate = 3.0;
    const auto f = make_source(SourceVariant::two_spot, pair, sp);
    const auto inj = pair.fine_cells_of_coarse(pair.coarse().cell_index(0, 0, 0));
    for (Index c : inj) CHECK(f.density[c] == 3.0);
    CHECK(std::abs(f.total_integral()) <= 1e-13);
}
