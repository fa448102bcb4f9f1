#include "msdarcy/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

namespace msdarcy {

namespace {

namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ExperimentDefaults {
    std::array<int, 3> fine;
    std::array<int, 3> coarse;
    Box box;
    double source_h; ///< NaN = coarse spacing
};

ExperimentDefaults defaults_for(const std::string& experiment) {
    const Box unit{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const Box slab{{0.0, 0.0, 0.0}, {1.0, 1.0, 0.125}};
    if (experiment == "table1" || experiment == "table2")
        return {{24, 24, 24}, {8, 8, 8}, unit, kNaN};
    if (experiment == "table3" || experiment == "table4")
        return {{100, 100, 8}, {20, 20, 1}, slab, 0.1};
    if (experiment == "impes") return {{40, 40, 4}, {10, 10, 1}, slab, kNaN};
    if (experiment == "convergence") return {{32, 32, 32}, {4, 4, 4}, unit, 0.25};
    if (experiment == "homog-check") return {{64, 64, 64}, {0, 0, 0}, unit, kNaN};
    throw ConfigError("unknown experiment: " + experiment);
}

ExperimentConfig resolve(ExperimentConfig cfg) {
    const ExperimentDefaults d = defaults_for(cfg.experiment);
    if (cfg.fine == std::array<int, 3>{0, 0, 0}) cfg.fine = d.fine;
    if (cfg.coarse == std::array<int, 3>{0, 0, 0}) cfg.coarse = d.coarse;
    if (std::isnan(cfg.source_h)) cfg.source_h = d.source_h;
    if (!cfg.basis.empty() && cfg.basis != "local" && cfg.basis != "os" && cfg.basis != "global")
        throw ConfigError("basis must be local, os, or global: " + cfg.basis);
    return cfg;
}

Box box_for(const std::string& experiment) { return defaults_for(experiment).box; }

std::string triple(const std::array<int, 3>& a) {
    return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]);
}

SolverConfig solver_of(const ExperimentConfig& cfg) {
    SolverConfig s;
    s.rel_tol = cfg.tol;
    return s;
}

/// Append the canonical configuration to every propagated error message.
template <typename F>
auto with_fingerprint(const ConfigMap& fp, F&& fn) -> decltype(fn()) {
    const auto tag = [&fp] { return "\n[config]\n" + serialize_config(fp); };
    try {
        return fn();
    } catch (const NestingError& e) {
        throw NestingError(e.what() + tag());
    } catch (const InvalidGrid& e) {
        throw InvalidGrid(e.what() + tag());
    } catch (const IndexError& e) {
        throw IndexError(e.what() + tag());
    } catch (const DegenerateCoefficient& e) {
        throw DegenerateCoefficient(e.what() + tag());
    } catch (const CompatibilityError& e) {
        throw CompatibilityError(e.what() + tag());
    } catch (const SolverError& e) {
        throw SolverError(e.what() + tag());
    } catch (const CFLError& e) {
        throw CFLError(e.what() + tag());
    } catch (const OversampleError& e) {
        throw OversampleError(e.what() + tag());
    } catch (const DegenerateBasis& e) {
        throw DegenerateBasis(e.what() + tag());
    } catch (const DomainError& e) {
        throw DomainError(e.what() + tag());
    } catch (const ConfigError& e) {
        throw ConfigError(e.what() + tag());
    } catch (const Error& e) {
        throw ConfigError(e.what() + tag());
    }
}

CoefficientField table_field(const std::string& experiment, const NestedGridPair& pair,
                             std::uint64_t seed) {
    if (experiment == "table1") return make_permeability(PermeabilityVariant::channel, pair);
    if (experiment == "table2")
        return make_permeability(PermeabilityVariant::vanishing_channel, pair);
    if (experiment == "table3") return make_permeability(PermeabilityVariant::oscillatory, pair);
    if (experiment == "table4" || experiment == "impes")
        return make_permeability(PermeabilityVariant::random_shale, pair, {}, seed);
    throw ConfigError("no permeability defined for experiment " + experiment);
}

CoarseBasisSet build_named_basis(const std::string& name, const NestedGridPair& pair,
                                 const CoefficientField& k, int layers, const SolverConfig& solver,
                                 const Eigen::VectorXd* global_field) {
    if (name == "local") return build_local_basis(pair, k, solver);
    if (name == "os") return build_oversampled_basis(pair, k, layers, solver);
    if (name == "global") {
        if (global_field == nullptr)
            throw ConfigError("global basis requested without a global field");
        GlobalFieldSet gf;
        gf.provenance = GlobalFieldSet::Provenance::solution_field;
        gf.fields = {*global_field};
        return build_global_basis(pair, k, gf, solver);
    }
    throw ConfigError("unknown basis variant: " + name);
}

VariantRun evaluate_variant(const std::string& name, const NestedGridPair& pair,
                            const CoefficientField& k, const SourceField& f,
                            const BoundaryCondition& bc, const CoarseBasisSet& basis,
                            const ExpandedSolution& reference, const SolverConfig& solver,
                            bool postprocess) {
    CoarseOperator op(pair, basis, f, bc);
    const CoarseSystem sys = op.assemble(k);
    const CoarseSolution sol = solve_coarse(sys, CoarseSolveMode::hybrid, solver);
    const DownscaledSolution down = downscale(op, sol);

    VariantRun run;
    run.variant = name;
    run.coarse = {pair.coarse().count(0), pair.coarse().count(1), pair.coarse().count(2)};
    run.errors = compute_errors(reference, down, pair, &sol, &op);
    if (postprocess) {
        run.postprocessed = postprocessed_gradient_error(reference.theta, down.u_broken, k);
        run.has_postprocessed = true;
    }
    run.conservation_defect = max_coarse_divergence_defect(pair, down.u_broken, f);
    run.interface_jump = down.interface_jump;
    run.coarse_stats = sol.stats;
    return run;
}

ErrorReport reference_report(const CartesianGrid& fine, const ExpandedSolution& ref) {
    ErrorReport r;
    r.u_norm = l2_norm_faces(fine, ref.u);
    r.gradp_norm = l2_norm_broken(fine, ref.theta);
    r.p_norm = l2_norm_cellwise(fine, ref.p);
    return r;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

void write_solution_vtk(const std::string& path, const CartesianGrid& grid,
                        const Eigen::VectorXd& p, const Eigen::VectorXd& face_u) {
    VtkCellData data;
    data.scalars.emplace_back("pressure", p);
    data.vectors.emplace_back("velocity", cell_center_velocity(grid, face_u));
    write_vtk_cells(path, grid, data);
}

const VariantRun* find_run(const TableOutcome& out, const std::string& variant,
                           const std::array<int, 3>& coarse) {
    for (const auto& run : out.runs)
        if (run.variant == variant && run.coarse == coarse) return &run;
    return nullptr;
}

std::string fmt(double v) { return format_double(v); }

void write_table_csv(const ExperimentConfig& cfg, const TableOutcome& out,
                     const std::vector<std::array<int, 3>>& coarse_grids) {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows(4);
    const std::array<std::string, 4> quantity = {"velocity_error", "velocity_norm",
                                                 "gradp_error", "gradp_norm"};
    for (int i = 0; i < 4; ++i) rows[i].push_back(quantity[i]);
    header.push_back("quantity");

    auto push_expanded = [&](const VariantRun& run, const std::string& label) {
        header.push_back(label);
        rows[0].push_back(fmt(run.errors.u_error));
        rows[1].push_back(fmt(out.reference.u_norm));
        rows[2].push_back(fmt(run.errors.gradp_error));
        rows[3].push_back(fmt(out.reference.gradp_norm));
    };
    auto push_postprocessed = [&](const VariantRun& run, const std::string& label) {
        header.push_back(label);
        rows[0].push_back(fmt(run.errors.u_error));
        rows[1].push_back(fmt(out.reference.u_norm));
        rows[2].push_back(fmt(run.postprocessed.error));
        rows[3].push_back(fmt(run.postprocessed.norm));
    };

    if (cfg.experiment == "table1") {
        // Paper layout: MsFEM, GMsFEM (postprocessed gradient), then the
        // expanded variants reporting theta directly.
        const VariantRun* local = find_run(out, "local", coarse_grids[0]);
        const VariantRun* global = find_run(out, "global", coarse_grids[0]);
        if (local && local->has_postprocessed) push_postprocessed(*local, "msfem");
        if (global && global->has_postprocessed) push_postprocessed(*global, "gmsfem");
        if (local) push_expanded(*local, "expanded_msfem");
        if (global) push_expanded(*global, "expanded_gmsfem");
    } else if (cfg.experiment == "table2") {
        const VariantRun* local = find_run(out, "local", coarse_grids[0]);
        const VariantRun* global = find_run(out, "global", coarse_grids[0]);
        if (local) push_expanded(*local, "expanded_msfem");
        if (global) push_expanded(*global, "expanded_gmsfem");
    } else {
        for (const auto& cg : coarse_grids) {
            const std::string tag =
                "c" + std::to_string(cg[0]) + "x" + std::to_string(cg[1]) + "x" +
                std::to_string(cg[2]);
            const VariantRun* local = find_run(out, "local", cg);
            const VariantRun* global = find_run(out, "global", cg);
            if (local) push_expanded(*local, tag + "_expanded_msfem");
            if (global) push_expanded(*global, tag + "_expanded_gmsfem");
        }
    }
    write_csv(cfg.out_dir + "/" + cfg.experiment + ".csv", header, rows);
}

} // namespace

ExperimentConfig experiment_from_config(const ConfigMap& map) {
    ExperimentConfig cfg;
    cfg.experiment = config_string(map, "experiment", cfg.experiment);
    cfg.fine = config_counts(map, "fine", cfg.fine);
    cfg.coarse = config_counts(map, "coarse", cfg.coarse);
    cfg.basis = config_string(map, "basis", cfg.basis);
    if (cfg.basis == "default") cfg.basis.clear(); // the canonical spelling of "unset"
    cfg.layers = static_cast<int>(config_int(map, "layers", cfg.layers));
    cfg.tol = config_double(map, "tol", cfg.tol);
    const std::string seed = config_string(map, "seed", std::to_string(cfg.seed));
    try {
        cfg.seed = std::stoull(seed);
    } catch (const std::exception&) {
        throw ConfigError("config key 'seed' is not an unsigned integer: " + seed);
    }
    cfg.out_dir = config_string(map, "out", cfg.out_dir);
    cfg.steps = static_cast<int>(config_int(map, "steps", cfg.steps));
    cfg.snapshot = static_cast<int>(config_int(map, "snapshot", cfg.snapshot));
    if (config_string(map, "source_h", "auto") != "auto")
        cfg.source_h = config_double(map, "source_h", cfg.source_h);
    return cfg;
}

ConfigMap experiment_to_config(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = resolve(raw);
    ConfigMap m;
    m["experiment"] = cfg.experiment;
    m["fine"] = triple(cfg.fine);
    m["coarse"] = triple(cfg.coarse);
    m["basis"] = cfg.basis.empty() ? "default" : cfg.basis;
    m["layers"] = std::to_string(cfg.layers);
    m["tol"] = format_double(cfg.tol, 3);
    m["seed"] = std::to_string(cfg.seed);
    m["out"] = cfg.out_dir;
    m["steps"] = std::to_string(cfg.steps);
    m["snapshot"] = std::to_string(cfg.snapshot);
    m["source_h"] = std::isnan(cfg.source_h) ? "auto" : format_double(cfg.source_h, 6);
    return m;
}

TableOutcome run_table(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = resolve(raw);
    if (cfg.experiment != "table1" && cfg.experiment != "table2" && cfg.experiment != "table3" &&
        cfg.experiment != "table4")
        throw ConfigError("run_table cannot run experiment " + cfg.experiment);
    const ConfigMap fp = experiment_to_config(cfg);
    return with_fingerprint(fp, [&]() -> TableOutcome {
        const bool slab = cfg.experiment == "table3" || cfg.experiment == "table4";
        const Box box = box_for(cfg.experiment);
        const SolverConfig solver = solver_of(cfg);
        const BoundaryCondition bc; // no-flow everywhere, pure Neumann

        // Coarse grids of the experiment: the slab tables sweep the two paper
        // grids unless the user pinned one explicitly.
        std::vector<std::array<int, 3>> coarse_grids;
        if (slab && raw.coarse == std::array<int, 3>{0, 0, 0})
            coarse_grids = {{20, 20, 1}, {10, 10, 1}};
        else
            coarse_grids = {cfg.coarse};

        std::vector<std::unique_ptr<NestedGridPair>> pairs;
        for (const auto& cg : coarse_grids)
            pairs.push_back(std::make_unique<NestedGridPair>(build_nested(cfg.fine, cg, box)));

        // Fields are rebuilt per pair (they hold a grid reference); the seed
        // makes the random field identical across pairs.
        std::vector<CoefficientField> fields;
        for (const auto& p : pairs) fields.push_back(table_field(cfg.experiment, *p, cfg.seed));

        SourceParams sp;
        sp.H = cfg.source_h;
        const SourceVariant sv =
            slab ? SourceVariant::corner_wells_2d : SourceVariant::corner_wells_3d;
        const SourceField f = make_source(sv, *pairs[0], sp);

        const SaddleSystem ref_sys = assemble_expanded_fine(*pairs[0], fields[0], f, bc);
        const ExpandedSolution ref = solve_expanded_fine(ref_sys, solver);

        TableOutcome out;
        out.fingerprint = fp;
        out.reference = reference_report(pairs[0]->fine(), ref);
        out.reference.fingerprint = serialize_config(fp);
        out.reference_conservation = max_coarse_divergence_defect(*pairs[0], ref.u, f);
        out.source_l2 = f.l2_scale();

        std::vector<std::string> variants;
        if (cfg.basis.empty())
            variants = {"local", "global"};
        else
            variants = {cfg.basis};

        const bool postprocess = cfg.experiment == "table1";
        for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
            for (const auto& name : variants) {
                const CoarseBasisSet basis =
                    build_named_basis(name, *pairs[pi], fields[pi], cfg.layers, solver, &ref.u);
                VariantRun run = evaluate_variant(name, *pairs[pi], fields[pi], f, bc, basis, ref,
                                                  solver, postprocess);
                run.errors.fingerprint = serialize_config(fp);
                out.runs.push_back(std::move(run));
            }
        }

        if (!cfg.out_dir.empty()) {
            ensure_out_dir(cfg.out_dir);
            save_config(fp, cfg.out_dir + "/config.txt");
            write_table_csv(cfg, out, coarse_grids);

            std::vector<std::string> dheader = {"variant", "coarse", "u_error", "u_norm",
                                                "gradp_error", "gradp_norm", "p_error", "p_norm",
                                                "multiplier_error", "conservation_defect",
                                                "interface_jump"};
            std::vector<std::vector<std::string>> drows;
            drows.push_back({"reference", triple({cfg.fine[0], cfg.fine[1], cfg.fine[2]}),
                             fmt(0.0), fmt(out.reference.u_norm), fmt(0.0),
                             fmt(out.reference.gradp_norm), fmt(0.0), fmt(out.reference.p_norm),
                             fmt(0.0), fmt(out.reference_conservation), fmt(0.0)});
            for (const auto& run : out.runs)
                drows.push_back({run.variant, triple(run.coarse), fmt(run.errors.u_error),
                                 fmt(run.errors.u_norm), fmt(run.errors.gradp_error),
                                 fmt(run.errors.gradp_norm), fmt(run.errors.p_error),
                                 fmt(run.errors.p_norm), fmt(run.errors.multiplier_error),
                                 fmt(run.conservation_defect), fmt(run.interface_jump)});
            write_csv(cfg.out_dir + "/" + cfg.experiment + "_details.csv", dheader, drows);

            write_solution_vtk(cfg.out_dir + "/" + cfg.experiment + "_reference.vtk",
                               pairs[0]->fine(), ref.p, ref.u);
        }
        return out;
    });
}

ConvergenceOutcome run_convergence(const ExperimentConfig& raw) {
    ExperimentConfig cfg = resolve(raw);
    cfg.experiment = "convergence";
    const ConfigMap fp = experiment_to_config(cfg);
    return with_fingerprint(fp, [&]() -> ConvergenceOutcome {
        const Box box = box_for(cfg.experiment);
        const SolverConfig solver = solver_of(cfg);
        const BoundaryCondition bc;
        const std::string variant = cfg.basis.empty() ? "local" : cfg.basis;

        const std::vector<std::array<int, 3>> coarse_grids = {{4, 4, 4}, {8, 8, 8}, {16, 16, 16}};
        std::vector<std::unique_ptr<NestedGridPair>> pairs;
        for (const auto& cg : coarse_grids)
            pairs.push_back(std::make_unique<NestedGridPair>(build_nested(cfg.fine, cg, box)));

        auto smooth = [](const Vec3& x) {
            return 2.0 + std::sin(2.0 * M_PI * x[0]) * std::sin(2.0 * M_PI * x[1]);
        };
        std::vector<CoefficientField> fields;
        for (const auto& p : pairs) fields.push_back(make_analytic_field(p->fine(), smooth));

        SourceParams sp;
        sp.H = cfg.source_h;
        const SourceField f = make_source(SourceVariant::corner_wells_3d, *pairs[0], sp);

        const SaddleSystem ref_sys = assemble_expanded_fine(*pairs[0], fields[0], f, bc);
        const ExpandedSolution ref = solve_expanded_fine(ref_sys, solver);

        ConvergenceOutcome out;
        out.fingerprint = fp;
        for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
            const CoarseBasisSet basis =
                build_named_basis(variant, *pairs[pi], fields[pi], cfg.layers, solver, &ref.u);
            ConvergencePoint point;
            point.H = pairs[pi]->coarse().spacing(0);
            const VariantRun run = evaluate_variant(variant, *pairs[pi], fields[pi], f, bc, basis,
                                                    ref, solver, false);
            point.errors = run.errors;
            point.errors.fingerprint = serialize_config(fp);
            point.conservation_defect = run.conservation_defect;
            out.points.push_back(std::move(point));
        }

        auto slope = [&](auto pick) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            const double n = static_cast<double>(out.points.size());
            for (const auto& pt : out.points) {
                const double x = std::log(pt.H), y = std::log(pick(pt.errors));
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
            return (n * sxy - sx * sy) / (n * sxx - sx * sx);
        };
        out.u_slope = slope([](const ErrorReport& e) { return e.u_error; });
        out.gradp_slope = slope([](const ErrorReport& e) { return e.gradp_error; });
        out.p_slope = slope([](const ErrorReport& e) { return e.p_error; });

        if (!cfg.out_dir.empty()) {
            ensure_out_dir(cfg.out_dir);
            save_config(fp, cfg.out_dir + "/config.txt");
            std::vector<std::vector<std::string>> rows;
            for (const auto& pt : out.points)
                rows.push_back({fmt(pt.H), fmt(pt.errors.u_error), fmt(pt.errors.gradp_error),
                                fmt(pt.errors.p_error), fmt(pt.errors.u_norm),
                                fmt(pt.errors.gradp_norm), fmt(pt.errors.p_norm)});
            write_csv(cfg.out_dir + "/convergence.csv",
                      {"H", "u_error", "gradp_error", "p_error", "u_norm", "gradp_norm", "p_norm"},
                      rows);
            write_csv(cfg.out_dir + "/convergence_slopes.csv", {"quantity", "slope"},
                      {{"u", fmt(out.u_slope)},
                       {"gradp", fmt(out.gradp_slope)},
                       {"p", fmt(out.p_slope)}});
        }
        return out;
    });
}

HomogOutcome run_homog_check(const ExperimentConfig& raw) {
    ExperimentConfig cfg = resolve(raw);
    cfg.experiment = "homog-check";
    const ConfigMap fp = experiment_to_config(cfg);
    return with_fingerprint(fp, [&]() -> HomogOutcome {
        const Box unit{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
        const SolverConfig solver = solver_of(cfg);
        const double a = 1.0, b = 4.0;

        HomogOutcome out;
        out.fingerprint = fp;

        {
            const CartesianGrid grid({8, 8, 8}, unit);
            const CoefficientField k = make_laminate(grid, 1.0, 1.0);
            HomogEntry e;
            e.field = "constant";
            e.n = 8;
            e.k_star = homogenize_cell(k, grid, solver).k_star;
            e.expected = Mat3::Identity();
            e.means = field_means(k);
            out.entries.push_back(e);
        }
        {
            const CartesianGrid grid(cfg.fine, unit);
            const CoefficientField k = make_laminate(grid, a, b);
            HomogEntry e;
            e.field = "laminate";
            e.n = cfg.fine[0];
            e.k_star = homogenize_cell(k, grid, solver).k_star;
            e.expected = Mat3::Identity();
            e.expected(0, 0) = 2.0 * a * b / (a + b);
            e.expected(1, 1) = e.expected(2, 2) = 0.5 * (a + b);
            e.means = field_means(k);
            out.entries.push_back(e);
        }
        for (int n : {16, 32, 64}) {
            const CartesianGrid grid({n, n, 1}, unit);
            const CoefficientField k = make_checkerboard(grid, a, b);
            HomogEntry e;
            e.field = "checkerboard";
            e.n = n;
            e.k_star = homogenize_cell(k, grid, solver).k_star;
            e.expected = Mat3::Identity();
            e.expected(0, 0) = e.expected(1, 1) = std::sqrt(a * b);
            e.expected(2, 2) = 0.5 * (a + b);
            e.means = field_means(k);
            out.entries.push_back(e);
        }

        if (!cfg.out_dir.empty()) {
            ensure_out_dir(cfg.out_dir);
            save_config(fp, cfg.out_dir + "/config.txt");
            std::vector<std::vector<std::string>> rows;
            for (const auto& e : out.entries)
                rows.push_back({e.field, std::to_string(e.n), fmt(e.k_star(0, 0)),
                                fmt(e.k_star(1, 1)), fmt(e.k_star(2, 2)), fmt(e.expected(0, 0)),
                                fmt(e.expected(1, 1)), fmt(e.expected(2, 2)), fmt(e.means.harmonic),
                                fmt(e.means.arithmetic)});
            write_csv(cfg.out_dir + "/homog.csv",
                      {"field", "n", "k11", "k22", "k33", "expected_k11", "expected_k22",
                       "expected_k33", "harmonic_mean", "arithmetic_mean"},
                      rows);
            // The headline tensor as a small text matrix.
            std::ofstream ks(cfg.out_dir + "/k_star.txt");
            for (int i = 0; i < 3; ++i)
                ks << fmt(out.entries[1].k_star(i, 0)) << ' ' << fmt(out.entries[1].k_star(i, 1))
                   << ' ' << fmt(out.entries[1].k_star(i, 2)) << '\n';
        }
        return out;
    });
}

ImpesOutcome run_impes_experiment(const ExperimentConfig& raw) {
    ExperimentConfig cfg = resolve(raw);
    cfg.experiment = "impes";
    const ConfigMap fp = experiment_to_config(cfg);
    return with_fingerprint(fp, [&]() -> ImpesOutcome {
        const Box box = box_for(cfg.experiment);
        const SolverConfig solver = solver_of(cfg);
        const BoundaryCondition bc;
        const NestedGridPair pair = build_nested(cfg.fine, cfg.coarse, box);
        const CoefficientField k =
            make_permeability(PermeabilityVariant::random_shale, pair, {}, cfg.seed);

        const CartesianGrid& cg = pair.coarse();
        WellConfig wells;
        wells.injector = cg.cell_index(0, 0, 0);
        wells.producer = cg.cell_index(cg.count(0) - 1, cg.count(1) - 1, cg.count(2) - 1);
        wells.rate = cg.cell_volume(); // unit source density over the well cells
        const SourceField src = well_source(pair, wells);

        const CoarseBasisSet local = build_local_basis(pair, k, solver);
        const GlobalFieldSet gf =
            compute_solution_global_field(pair.fine(), k, src, bc, solver);
        const CoarseBasisSet global = build_global_basis(pair, k, gf, solver);

        ImpesOptions opts;
        opts.steps = cfg.steps;
        opts.snapshot_step = cfg.snapshot;
        opts.solver = solver;

        ImpesOutcome out;
        out.fingerprint = fp;
        out.series = run_impes(pair, k, wells, {&local, &global}, opts);

        if (!cfg.out_dir.empty()) {
            ensure_out_dir(cfg.out_dir);
            save_config(fp, cfg.out_dir + "/config.txt");
            std::vector<std::vector<std::string>> rows;
            for (std::size_t s = 0; s < out.series.times.size(); ++s)
                rows.push_back({std::to_string(s + 1), fmt(out.series.times[s]),
                                fmt(out.series.errors[0][s]), fmt(out.series.errors[1][s])});
            write_csv(cfg.out_dir + "/impes_errors.csv",
                      {"step", "time", "local_sat_error", "global_sat_error"}, rows);

            if (out.series.ref_snapshot.size() > 0) {
                VtkCellData snap;
                snap.scalars.emplace_back("saturation_reference", out.series.ref_snapshot);
                snap.scalars.emplace_back("saturation_local", out.series.snapshots[0]);
                snap.scalars.emplace_back("saturation_global", out.series.snapshots[1]);
                write_vtk_cells(cfg.out_dir + "/impes_snapshot.vtk", pair.fine(), snap);
            }
            VtkCellData fin;
            fin.scalars.emplace_back("saturation_reference", out.series.ref_final);
            fin.scalars.emplace_back("saturation_local", out.series.finals[0]);
            fin.scalars.emplace_back("saturation_global", out.series.finals[1]);
            write_vtk_cells(cfg.out_dir + "/impes_final.vtk", pair.fine(), fin);
        }
        return out;
    });
}

void run_experiment(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = resolve(raw);
    if (cfg.experiment == "table1" || cfg.experiment == "table2" || cfg.experiment == "table3" ||
        cfg.experiment == "table4") {
        run_table(cfg);
    } else if (cfg.experiment == "convergence") {
        run_convergence(cfg);
    } else if (cfg.experiment == "homog-check") {
        run_homog_check(cfg);
    } else if (cfg.experiment == "impes") {
        run_impes_experiment(cfg);
    } else {
        throw ConfigError("unknown experiment: " + cfg.experiment);
    }
}

} // namespace msdarcy
