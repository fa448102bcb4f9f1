#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "msdarcy/io.hpp"

using namespace msdarcy;

namespace {

std::filesystem::path scratch_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "msdarcy_io_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("config parsing and canonical serialization") {
    const auto cfg = parse_config("b = 2\n# a comment\n\n  a=1  \nc = hello world\n");
    REQUIRE(cfg.size() == 3);
    CHECK(cfg.at("a") == "1");
    CHECK(cfg.at("b") == "2");
    CHECK(cfg.at("c") == "hello world");
    CHECK(serialize_config(cfg) == "a = 1\nb = 2\nc = hello world\n");

    // Round trip through the parser is the identity on canonical text.
    CHECK(parse_config(serialize_config(cfg)) == cfg);
}

TEST_CASE("malformed config lines name the line number") {
    try {
        parse_config("a = 1\nbogus line\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(" = 5\n"), ConfigError);
}

TEST_CASE("typed config lookups") {
    const auto cfg = parse_config("n = 12\nx = 2.5\ngrid = 4, 8,2\nname = run7\nbad = 12x\n");
    CHECK(config_string(cfg, "name", "zz") == "run7");
    CHECK(config_string(cfg, "missing", "zz") == "zz");
    CHECK(config_int(cfg, "n", -1) == 12);
    CHECK(config_int(cfg, "missing", -1) == -1);
    CHECK(config_double(cfg, "x", 0.0) == 2.5);
    CHECK(config_double(cfg, "missing", 1.5) == 1.5);
    CHECK(config_counts(cfg, "grid", {1, 1, 1}) == std::array<int, 3>{4, 8, 2});
    CHECK(config_counts(cfg, "missing", {1, 2, 3}) == std::array<int, 3>{1, 2, 3});

    CHECK_THROWS_AS(config_int(cfg, "bad", 0), ConfigError);
    CHECK_THROWS_AS(config_int(cfg, "x", 0), ConfigError);
    CHECK_THROWS_AS(config_double(cfg, "bad", 0.0), ConfigError);
    CHECK_THROWS_AS(config_counts(parse_config("g = 1,2\n"), "g", {0, 0, 0}), ConfigError);
    CHECK_THROWS_AS(config_counts(parse_config("g = 1,2,3,4\n"), "g", {0, 0, 0}), ConfigError);
    CHECK_THROWS_AS(config_counts(parse_config("g = 1,two,3\n"), "g", {0, 0, 0}), ConfigError);
}

TEST_CASE("config file round trip") {
    const auto path = (scratch_dir() / "roundtrip.cfg").string();
    const auto cfg = parse_config("beta = 0.5\nalpha = x\n");
    save_config(cfg, path);
    CHECK(load_config(path) == cfg);
    CHECK(slurp(path) == "alpha = x\nbeta = 0.5\n");
    CHECK_THROWS_AS(load_config((scratch_dir() / "does_not_exist.cfg").string()), ConfigError);
}

TEST_CASE("scientific formatting is fixed-width and locale independent") {
    CHECK(format_double(1.0) == "1.000000000e+00");
    CHECK(format_double(0.0) == "0.000000000e+00");
    CHECK(format_double(-0.5, 3) == "-5.000e-01");
    CHECK(format_double(12345.6789, 2) == "1.23e+04");
    CHECK(format_double(5.649e-3, 4) == "5.6490e-03");
}

TEST_CASE("CSV writing preserves the exact column order") {
    const auto path = (scratch_dir() / "t.csv").string();
    write_csv(path, {"rowlabel", "a", "b"},
              {{"first", "1", "2"}, {"second", format_double(0.25, 2), "x y"}});
    CHECK(slurp(path) == "rowlabel,a,b\nfirst,1,2\nsecond,2.50e-01,x y\n");

    CHECK_THROWS_AS(write_csv(path, {"a", "b"}, {{"only one"}}), ConfigError);
}

TEST_CASE("legacy VTK structured-points cell data") {
    const CartesianGrid g({2, 2, 1}, Box{});
    VtkCellData data;
    Eigen::VectorXd p(4);
    p << 0.0, 1.0, 2.0, 3.0;
    data.scalars.emplace_back("pressure", p);
    std::vector<Vec3> v(4, Vec3(1.0, 0.0, -2.0));
    data.vectors.emplace_back("velocity", v);

    const auto path = (scratch_dir() / "f.vtk").string();
    write_vtk_cells(path, g, data);
    const std::string text = slurp(path);

    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# vtk DataFile Version 3.0");
    std::getline(in, line); // free-text title
    std::getline(in, line);
    CHECK(line == "ASCII");
    std::getline(in, line);
    CHECK(line == "DATASET STRUCTURED_POINTS");
    std::getline(in, line);
    CHECK(line == "DIMENSIONS 3 3 2");
    std::getline(in, line);
    CHECK(line.rfind("ORIGIN ", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("SPACING ", 0) == 0);
    std::getline(in, line);
    CHECK(line == "CELL_DATA 4");
    std::getline(in, line);
    CHECK(line == "SCALARS pressure double 1");
    std::getline(in, line);
    CHECK(line == "LOOKUP_TABLE default");
    for (int i = 0; i < 4; ++i) {
        std::getline(in, line);
        CHECK(line == format_double(double(i)));
    }
    std::getline(in, line);
    CHECK(line == "VECTORS velocity double");
    for (int i = 0; i < 4; ++i) {
        std::getline(in, line);
        CHECK(line == format_double(1.0) + " " + format_double(0.0) + " " + format_double(-2.0));
    }

    // Identical input produces a byte-identical file.
    const auto path2 = (scratch_dir() / "f2.vtk").string();
    write_vtk_cells(path2, g, data);
    CHECK(slurp(path2) == text);

    VtkCellData bad;
    bad.scalars.emplace_back("short", Eigen::VectorXd::Zero(3));
    CHECK_THROWS_AS(write_vtk_cells(path2, g, bad), ConfigError);
}

TEST_CASE("cell-center velocity of a uniform flow") {
    const CartesianGrid g({3, 2, 2}, Box{});
    Eigen::VectorXd dofs = Eigen::VectorXd::Zero(g.face_count());
    for (Index f = 0; f < g.face_count(); ++f)
        if (g.face_axis(f) == 0) dofs[f] = g.face_area(0);
    const auto v = cell_center_velocity(g, dofs);
    REQUIRE(v.size() == static_cast<std::size_t>(g.cell_count()));
    for (const auto& vc : v) CHECK((vc - Vec3(1.0, 0.0, 0.0)).norm() <= 1e-13);

    CHECK_THROWS_AS(cell_center_velocity(g, Eigen::VectorXd::Zero(3)), ConfigError);
}
