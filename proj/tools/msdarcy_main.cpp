#include "msdarcy/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace msdarcy;

std::string grid_tag(const std::array<int, 3>& c) {
    return std::to_string(c[0]) + "x" + std::to_string(c[1]) + "x" + std::to_string(c[2]);
}

void print_table(const std::string& name, const TableOutcome& out) {
    std::cout << name << ": reference |u| = " << format_double(out.reference.u_norm)
              << ", |grad p| = " << format_double(out.reference.gradp_norm)
              << ", |p| = " << format_double(out.reference.p_norm) << '\n';
    for (const auto& r : out.runs) {
        std::cout << "  " << r.variant << " @ " << grid_tag(r.coarse)
                  << ": u_err = " << format_double(r.errors.u_error)
                  << ", gradp_err = " << format_double(r.errors.gradp_error);
        if (r.has_postprocessed)
            std::cout << ", postprocessed_gradp_err = " << format_double(r.postprocessed.error);
        std::cout << ", multiplier_err = " << format_double(r.errors.multiplier_error)
                  << ", conservation = " << format_double(r.conservation_defect) << '\n';
    }
}

void print_convergence(const ConvergenceOutcome& out) {
    std::cout << "convergence:\n";
    for (const auto& pt : out.points)
        std::cout << "  H = " << format_double(pt.H, 4)
                  << ": u_err = " << format_double(pt.errors.u_error)
                  << ", gradp_err = " << format_double(pt.errors.gradp_error)
                  << ", p_err = " << format_double(pt.errors.p_error) << '\n';
    std::cout << "  slopes: u = " << format_double(out.u_slope, 3)
              << ", gradp = " << format_double(out.gradp_slope, 3)
              << ", p = " << format_double(out.p_slope, 3) << '\n';
}

void print_homog(const HomogOutcome& out) {
    std::cout << "homog-check:\n";
    for (const auto& e : out.entries) {
        std::cout << "  " << e.field << " n=" << e.n << ": diag(k*) = ["
                  << format_double(e.k_star(0, 0), 6) << ", " << format_double(e.k_star(1, 1), 6)
                  << ", " << format_double(e.k_star(2, 2), 6) << "], expected ["
                  << format_double(e.expected(0, 0), 6) << ", "
                  << format_double(e.expected(1, 1), 6) << ", "
                  << format_double(e.expected(2, 2), 6) << "], harmonic/arithmetic mean = "
                  << format_double(e.means.harmonic, 6) << "/"
                  << format_double(e.means.arithmetic, 6) << '\n';
    }
}

void print_impes(const ImpesOutcome& out) {
    const auto& s = out.series;
    std::cout << "impes: " << s.times.size() << " steps, final time = "
              << format_double(s.times.empty() ? 0.0 : s.times.back(), 6) << '\n';
    if (!s.errors.empty() && !s.errors[0].empty())
        std::cout << "  final saturation error: local = " << format_double(s.errors[0].back())
                  << ", global = " << format_double(s.errors[1].back()) << '\n';
    std::cout << "  max water balance defect = " << format_double(s.max_balance_defect)
              << ", saturation range = [" << format_double(s.s_min, 6) << ", "
              << format_double(s.s_max, 6) << "]\n";
}

void dispatch(const ExperimentConfig& cfg) {
    const std::string& e = cfg.experiment;
    if (e == "table1" || e == "table2" || e == "table3" || e == "table4")
        print_table(e, run_table(cfg));
    else if (e == "convergence")
        print_convergence(run_convergence(cfg));
    else if (e == "homog-check")
        print_homog(run_homog_check(cfg));
    else if (e == "impes")
        print_impes(run_impes_experiment(cfg));
    else
        throw ConfigError("unknown experiment: " + e);
    std::cout << "done" << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"msdarcy - multiscale expanded mixed finite elements for Darcy flow"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* run_cmd =
        app.add_subcommand("run", "run an experiment described by a key = value config file");
    run_cmd->add_option("config-file", config_path, "path to a flat key = value config file")
        ->required();

    // Direct experiment subcommands sharing one flag set.
    std::string fine_str, coarse_str, basis, out_dir;
    long layers = -1, seed = -1, steps = -1, snapshot = -1;
    double tol = -1.0, source_h = -1.0;
    const std::vector<std::string> names = {"table1", "table2",      "table3",     "table4",
                                            "impes",  "convergence", "homog-check"};
    const std::vector<std::string> blurbs = {
        "highly permeable channel, unit cube",
        "channel with an interior vanishing-permeability bubble",
        "oscillatory permeability on a thin slab, two coarse grids",
        "seeded random shale field on a thin slab, two coarse grids",
        "two-phase IMPES simulation with multiscale pressure solves",
        "coarse-grid convergence sweep with a smooth coefficient",
        "periodic cell problems versus closed-form effective tensors"};
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < names.size(); ++i) {
        CLI::App* c = app.add_subcommand(names[i], blurbs[i]);
        c->add_option("--fine", fine_str, "fine grid cell counts NX,NY,NZ");
        c->add_option("--coarse", coarse_str, "coarse grid cell counts NX,NY,NZ");
        c->add_option("--basis", basis, "basis variant: local, os, or global")
            ->check(CLI::IsMember({"local", "os", "global"}));
        c->add_option("--layers", layers, "oversampling layers of fine cells");
        c->add_option("--tol", tol, "relative solver tolerance");
        c->add_option("--out", out_dir, "directory for CSV/VTK artifacts");
        c->add_option("--seed", seed, "seed for randomized permeability fields");
        if (names[i] == "impes") {
            c->add_option("--steps", steps, "number of IMPES time steps");
            c->add_option("--snapshot", snapshot, "step index of the saved snapshot");
        }
        c->add_option("--source-h", source_h, "well footprint size for the source term");
        cmds.push_back(c);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        ConfigMap map;
        if (run_cmd->parsed()) {
            map = load_config(config_path);
            if (map.find("experiment") == map.end())
                throw ConfigError("config file must set key 'experiment': " + config_path);
        } else {
            for (std::size_t i = 0; i < names.size(); ++i)
                if (cmds[i]->parsed()) map["experiment"] = names[i];
            if (!fine_str.empty()) map["fine"] = fine_str;
            if (!coarse_str.empty()) map["coarse"] = coarse_str;
            if (!basis.empty()) map["basis"] = basis;
            if (layers >= 0) map["layers"] = std::to_string(layers);
            if (tol >= 0.0) map["tol"] = format_double(tol, 6);
            if (!out_dir.empty()) map["out"] = out_dir;
            if (seed >= 0) map["seed"] = std::to_string(seed);
            if (steps >= 0) map["steps"] = std::to_string(steps);
            if (snapshot >= 0) map["snapshot"] = std::to_string(snapshot);
            if (source_h >= 0.0) map["source_h"] = format_double(source_h, 9);
        }
        dispatch(experiment_from_config(map));
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error (config): " << e.what() << '\n';
        return 2;
    } catch (const NestingError& e) {
        std::cerr << "error (grid nesting): " << e.what() << '\n';
        return 3;
    } catch (const InvalidGrid& e) {
        std::cerr << "error (grid): " << e.what() << '\n';
        return 3;
    } catch (const IndexError& e) {
        std::cerr << "error (index): " << e.what() << '\n';
        return 4;
    } catch (const DegenerateCoefficient& e) {
        std::cerr << "error (degenerate coefficient): " << e.what() << '\n';
        return 5;
    } catch (const CompatibilityError& e) {
        std::cerr << "error (compatibility): " << e.what() << '\n';
        return 6;
    } catch (const SolverError& e) {
        std::cerr << "error (solver): " << e.what() << '\n';
        return 7;
    } catch (const CFLError& e) {
        std::cerr << "error (cfl): " << e.what() << '\n';
        return 8;
    } catch (const OversampleError& e) {
        std::cerr << "error (oversampling): " << e.what() << '\n';
        return 9;
    } catch (const DegenerateBasis& e) {
        std::cerr << "error (degenerate basis): " << e.what() << '\n';
        return 10;
    } catch (const DomainError& e) {
        std::cerr << "error (domain): " << e.what() << '\n';
        return 11;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error (internal): " << e.what() << '\n';
        return 1;
    }
}
