#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "msdarcy/experiments.hpp"

using namespace msdarcy;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& leaf) {
    const auto dir = fs::temp_directory_path() / "msdarcy_experiment_tests" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("experiment defaults resolve to canonical values") {
    ExperimentConfig cfg; // table1
    const auto m = experiment_to_config(cfg);
    CHECK(m.at("experiment") == "table1");
    CHECK(m.at("fine") == "24,24,24");
    CHECK(m.at("coarse") == "8,8,8");
    CHECK(m.at("basis") == "default");
    CHECK(m.at("layers") == "1");
    CHECK(m.at("tol") == "1.000e-10");
    CHECK(m.at("seed") == "2021");
    CHECK(m.at("steps") == "2000");
    CHECK(m.at("snapshot") == "700");
    CHECK(m.at("source_h") == "auto");

    ExperimentConfig slab;
    slab.experiment = "table3";
    const auto m3 = experiment_to_config(slab);
    CHECK(m3.at("fine") == "100,100,8");
    CHECK(m3.at("coarse") == "20,20,1");
    CHECK(m3.at("source_h") == format_double(0.1, 6));
}

TEST_CASE("canonical config text reparses to itself") {
    for (const std::string exp : {"table1", "table3", "impes", "convergence", "homog-check"}) {
        ExperimentConfig cfg;
        cfg.experiment = exp;
        const auto canonical = experiment_to_config(cfg);
        const auto reparsed = experiment_from_config(parse_config(serialize_config(canonical)));
        CHECK(experiment_to_config(reparsed) == canonical);
    }
}

TEST_CASE("config keys override the defaults") {
    const auto cfg = experiment_from_config(parse_config(
        "experiment = table2\nfine = 8,8,8\ncoarse = 4,4,4\nbasis = os\nlayers = 2\n"
        "tol = 1e-8\nseed = 7\nout = /tmp/xyz\nsteps = 11\nsnapshot = 5\nsource_h = 0.25\n"));
    CHECK(cfg.experiment == "table2");
    CHECK(cfg.fine == std::array<int, 3>{8, 8, 8});
    CHECK(cfg.coarse == std::array<int, 3>{4, 4, 4});
    CHECK(cfg.basis == "os");
    CHECK(cfg.layers == 2);
    CHECK(cfg.tol == 1e-8);
    CHECK(cfg.seed == 7);
    CHECK(cfg.out_dir == "/tmp/xyz");
    CHECK(cfg.steps == 11);
    CHECK(cfg.snapshot == 5);
    CHECK(cfg.source_h == 0.25);
}

TEST_CASE("invalid experiment configuration is rejected") {
    ExperimentConfig bogus;
    bogus.experiment = "tableX";
    CHECK_THROWS_AS(experiment_to_config(bogus), ConfigError);

    ExperimentConfig badbasis;
    badbasis.basis = "fancy";
    CHECK_THROWS_AS(experiment_to_config(badbasis), ConfigError);

    CHECK_THROWS_AS(experiment_from_config(parse_config("seed = -x\n")), ConfigError);
    CHECK_THROWS_AS(experiment_from_config(parse_config("source_h = wide\n")), ConfigError);
    CHECK_THROWS_AS(experiment_from_config(parse_config("fine = 1,2\n")), ConfigError);
}

TEST_CASE("propagated errors carry the experiment fingerprint") {
    ExperimentConfig cfg;
    cfg.experiment = "table1";
    cfg.fine = {7, 7, 7}; // not divisible by the coarse counts
    cfg.coarse = {4, 4, 4};
    cfg.basis = "local";
    try {
        run_table(cfg);
        FAIL("expected NestingError");
    } catch (const NestingError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[config]") != std::string::npos);
        CHECK(msg.find("fine = 7,7,7") != std::string::npos);
    }
}

TEST_CASE("small table run produces a coherent outcome and artifacts") {
    const auto dir = scratch_dir("table1_small");
    ExperimentConfig cfg;
    cfg.experiment = "table1";
    cfg.fine = {8, 8, 8};
    cfg.coarse = {4, 4, 4};
    cfg.basis = "local";
    cfg.out_dir = dir.string();

    const auto out = run_table(cfg);
    REQUIRE(out.runs.size() == 1);
    const auto& run = out.runs[0];
    CHECK(run.variant == "local");
    CHECK(run.coarse == std::array<int, 3>{4, 4, 4});
    CHECK(out.reference.u_norm > 0.0);
    CHECK(out.reference.gradp_norm > 0.0);
    CHECK(out.reference.p_norm > 0.0);
    CHECK(run.errors.u_error > 0.0);
    CHECK(run.errors.u_error < out.reference.u_norm);
    CHECK(run.conservation_defect <= 1e-12 * out.source_l2);
    CHECK(out.reference_conservation <= 1e-12 * out.source_l2);
    CHECK(run.has_postprocessed); // table1 reports the -u/k gradient column
    CHECK(run.postprocessed.norm > 0.0);
    CHECK(out.fingerprint.at("experiment") == "table1");

    CHECK(fs::exists(dir / "config.txt"));
    CHECK(fs::exists(dir / "table1.csv"));
    CHECK(fs::exists(dir / "table1_details.csv"));
    CHECK(fs::exists(dir / "table1_reference.vtk"));

    const std::string details = slurp(dir / "table1_details.csv");
    CHECK(details.rfind("variant,coarse,u_error,u_norm,gradp_error,gradp_norm,p_error,p_norm,"
                        "multiplier_error,conservation_defect,interface_jump\n",
                        0) == 0);
    CHECK(details.find("reference,8,8,8") != std::string::npos);
    CHECK(details.find("local,4,4,4") != std::string::npos);

    // Identical configuration reproduces the files byte for byte.
    const auto dir2 = scratch_dir("table1_small_repeat");
    ExperimentConfig cfg2 = cfg;
    cfg2.out_dir = dir2.string();
    run_table(cfg2);
    CHECK(slurp(dir2 / "table1.csv") == slurp(dir / "table1.csv"));
    CHECK(slurp(dir2 / "table1_details.csv") == slurp(dir / "table1_details.csv"));
}

TEST_CASE("homog check battery layout") {
    const auto dir = scratch_dir("homog_small");
    ExperimentConfig cfg;
    cfg.experiment = "homog-check";
    cfg.fine = {8, 8, 8};
    cfg.out_dir = dir.string();
    const auto out = run_homog_check(cfg);

    REQUIRE(out.entries.size() == 5);
    CHECK(out.entries[0].field == "constant");
    CHECK(out.entries[0].n == 8);
    CHECK((out.entries[0].k_star - Mat3::Identity()).norm() <= 1e-8);
    CHECK(out.entries[1].field == "laminate");
    CHECK(out.entries[1].n == 8);
    CHECK(out.entries[1].expected(0, 0) == doctest::Approx(1.6).epsilon(1e-14));
    CHECK(out.entries[1].expected(1, 1) == doctest::Approx(2.5).epsilon(1e-14));
    CHECK((out.entries[1].k_star - out.entries[1].expected).norm() <= 1e-8);
    for (std::size_t i = 2; i < 5; ++i) {
        CHECK(out.entries[i].field == "checkerboard");
        CHECK(out.entries[i].expected(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(out.entries[i].expected(2, 2) == doctest::Approx(2.5).epsilon(1e-14));
        CHECK(out.entries[i].k_star(0, 0) >= out.entries[i].means.harmonic - 1e-8);
        CHECK(out.entries[i].k_star(0, 0) <= out.entries[i].means.arithmetic + 1e-8);
    }
    CHECK(out.entries[2].n == 16);
    CHECK(out.entries[3].n == 32);
    CHECK(out.entries[4].n == 64);

    CHECK(fs::exists(dir / "homog.csv"));
    CHECK(fs::exists(dir / "k_star.txt"));
    const std::string csv = slurp(dir / "homog.csv");
    CHECK(csv.rfind("field,n,k11,k22,k33,expected_k11,expected_k22,expected_k33,"
                    "harmonic_mean,arithmetic_mean\n",
                    0) == 0);
}

TEST_CASE("impes experiment smoke run with artifacts") {
    const auto dir = scratch_dir("impes_small");
    ExperimentConfig cfg;
    cfg.experiment = "impes";
    cfg.fine = {8, 8, 2};
    cfg.coarse = {2, 2, 1};
    cfg.steps = 4;
    cfg.snapshot = 2;
    cfg.out_dir = dir.string();

    const auto out = run_impes_experiment(cfg);
    REQUIRE(out.series.times.size() == 4);
    REQUIRE(out.series.errors.size() == 2);
    CHECK(out.series.errors[0].size() == 4);
    CHECK(out.series.errors[1].size() == 4);
    CHECK(out.series.max_balance_defect <= 1e-12);
    CHECK(out.series.s_min >= -1e-12);
    CHECK(out.series.s_max <= 1.0 + 1e-12);
    CHECK(out.series.ref_snapshot.size() == 8 * 8 * 2);

    CHECK(fs::exists(dir / "config.txt"));
    CHECK(fs::exists(dir / "impes_errors.csv"));
    CHECK(fs::exists(dir / "impes_snapshot.vtk"));
    CHECK(fs::exists(dir / "impes_final.vtk"));
    const std::string csv = slurp(dir / "impes_errors.csv");
    CHECK(csv.rfind("step,time,local_sat_error,global_sat_error\n", 0) == 0);
}

TEST_CASE("convergence sweep structure on a reduced fine grid") {
    const auto dir = scratch_dir("convergence_small");
    ExperimentConfig cfg;
    cfg.experiment = "convergence";
    cfg.fine = {16, 16, 16};
    cfg.out_dir = dir.string();

    const auto out = run_convergence(cfg);
    REQUIRE(out.points.size() == 3);
    CHECK(out.points[0].H == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(out.points[1].H == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(out.points[2].H == doctest::Approx(0.0625).epsilon(1e-14));
    for (const auto& pt : out.points) {
        CHECK(pt.errors.u_norm > 0.0);
        CHECK(pt.errors.u_error >= 0.0);
    }
    // Errors shrink with the coarse spacing.
    CHECK(out.points[2].errors.u_error < out.points[0].errors.u_error);

    CHECK(fs::exists(dir / "convergence.csv"));
    CHECK(fs::exists(dir / "convergence_slopes.csv"));
}
