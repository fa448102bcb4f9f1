#include "msdarcy/twophase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msdarcy/metrics.hpp"

namespace msdarcy {

Mobilities mobilities(double S_w, const MobilityModel& model) {
    if (model.mu_w <= 0.0 || model.mu_o <= 0.0)
        throw ConfigError("viscosities must be positive");
    if (S_w < 0.0 || S_w > 1.0)
        throw DomainError("saturation " + std::to_string(S_w) + " outside [0,1]");
    Mobilities m;
    if (model.linear_fractional_flow) {
        m.lambda_w = S_w;
        m.lambda_o = 1.0 - S_w;
        m.lambda_total = 1.0;
        m.f_w = S_w;
        return m;
    }
    m.lambda_w = S_w * S_w / model.mu_w;
    m.lambda_o = (1.0 - S_w) * (1.0 - S_w) / model.mu_o;
    m.lambda_total = m.lambda_w + m.lambda_o;
    m.f_w = m.lambda_w / m.lambda_total;
    return m;
}

double max_fractional_flow_slope(const MobilityModel& model) {
    const int n = 4096;
    double prev = mobilities(0.0, model).f_w;
    double slope = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double cur = mobilities(static_cast<double>(i) / n, model).f_w;
        slope = std::max(slope, (cur - prev) * n);
        prev = cur;
    }
    return slope;
}

SourceField well_source(const NestedGridPair& pair, const WellConfig& wells) {
    const Index ncoarse = pair.coarse().cell_count();
    if (wells.injector < 0 || wells.injector >= ncoarse || wells.producer < 0 ||
        wells.producer >= ncoarse)
        throw ConfigError("well coarse-cell id out of range");
    if (wells.injector == wells.producer)
        throw ConfigError("injector and producer must be distinct coarse cells");
    if (wells.rate <= 0.0) throw ConfigError("well rate must be positive");

    SourceField s;
    s.variant = SourceVariant::two_spot;
    s.grid = &pair.fine();
    s.density.assign(static_cast<std::size_t>(pair.fine().cell_count()), 0.0);
    const double coarse_volume = pair.coarse().cell_volume();
    for (Index c : pair.fine_cells_of_coarse(wells.injector))
        s.density[static_cast<std::size_t>(c)] = wells.rate / coarse_volume;
    for (Index c : pair.fine_cells_of_coarse(wells.producer))
        s.density[static_cast<std::size_t>(c)] = -wells.rate / coarse_volume;
    return s;
}

double cfl_limit(const CartesianGrid& grid, const Eigen::VectorXd& face_flux,
                 const SourceField& wells, const MobilityModel& model) {
    if (face_flux.size() != grid.face_count() || wells.grid == nullptr ||
        !same_grid(*wells.grid, grid))
        throw ConfigError("CFL limit needs a face flux and source on the same grid");
    const double slope = max_fractional_flow_slope(model);
    const double vol = grid.cell_volume();
    double limit = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < grid.cell_count(); ++c) {
        const auto faces = grid.cell_faces(c);
        double out = 0.0;
        for (int lf = 0; lf < 6; ++lf)
            out += std::max(0.0, RT0Element::sign(lf) * face_flux[faces[lf]]);
        const double q = wells.density[static_cast<std::size_t>(c)] * vol;
        if (q < 0.0) out -= q;
        if (out > 0.0) limit = std::min(limit, vol / (slope * out));
    }
    return limit;
}

SaturationState transport_step(const SaturationState& state, const Eigen::VectorXd& face_flux,
                               const SourceField& wells, const MobilityModel& model, double dt,
                               TransportDiagnostics* diag) {
    const CartesianGrid& g = *wells.grid;
    if (state.S.size() != g.cell_count() || face_flux.size() != g.face_count())
        throw ConfigError("transport step got mismatched field sizes");
    const double limit = cfl_limit(g, face_flux, wells, model);
    if (dt > limit * (1.0 + 1e-12))
        throw CFLError("dt = " + std::to_string(dt) + " exceeds the CFL limit " +
                       std::to_string(limit));

    const Index nc = g.cell_count();
    Eigen::VectorXd fw(nc);
    for (Index c = 0; c < nc; ++c) fw[c] = mobilities(state.S[c], model).f_w;

    // Water flux per face: total flux times the upwind fractional flow.
    Eigen::VectorXd wflux = Eigen::VectorXd::Zero(g.face_count());
    for (Index f = 0; f < g.face_count(); ++f) {
        const double q = face_flux[f];
        if (q == 0.0) continue;
        const auto cells = g.face_cells(f);
        Index up = q > 0.0 ? cells[0] : cells[1];
        if (up < 0) up = cells[0] >= 0 ? cells[0] : cells[1];
        wflux[f] = q * fw[up];
    }

    const double vol = g.cell_volume();
    SaturationState next;
    next.S.resize(nc);
    next.time = state.time + dt;
    next.step = state.step + 1;
    double mass_change = 0.0, well_water = 0.0;
    double smin = std::numeric_limits<double>::infinity(), smax = -smin;
    for (Index c = 0; c < nc; ++c) {
        const auto faces = g.cell_faces(c);
        double div_w = 0.0;
        for (int lf = 0; lf < 6; ++lf) div_w += RT0Element::sign(lf) * wflux[faces[lf]];
        const double q = wells.density[static_cast<std::size_t>(c)] * vol;
        const double src_w = q >= 0.0 ? q : q * fw[c];
        double s = state.S[c] + dt / vol * (src_w - div_w);
        mass_change += (s - state.S[c]) * vol;
        well_water += src_w;
        smin = std::min(smin, s);
        smax = std::max(smax, s);
        // Rounding-level excursions are cleaned up; anything larger means the
        // update was not monotone and must surface as an error.
        if (s < 0.0 || s > 1.0) {
            if (s < -1e-12 || s > 1.0 + 1e-12)
                throw DomainError("saturation " + std::to_string(s) + " left [0,1] in cell " +
                                  std::to_string(c));
            s = std::clamp(s, 0.0, 1.0);
        }
        next.S[c] = s;
    }
    if (diag != nullptr) {
        diag->balance_defect = std::abs(mass_change - dt * well_water);
        diag->pre_clamp_min = smin;
        diag->pre_clamp_max = smax;
    }
    return next;
}

DownscaledSolution pressure_step(const SaturationState& state, const CoarseOperator& op,
                                 const CoefficientField& k, const MobilityModel& model,
                                 CoarseSolveMode mode, const SolverConfig& cfg,
                                 std::shared_ptr<CondensedFactorCache> cache) {
    const Index nc = k.grid().cell_count();
    if (state.S.size() != nc) throw ConfigError("saturation does not live on the fine grid");
    std::vector<double> scale(static_cast<std::size_t>(nc));
    for (Index c = 0; c < nc; ++c)
        scale[static_cast<std::size_t>(c)] = mobilities(state.S[c], model).lambda_total;
    const CoefficientField k_eff = k.scaled_by(scale);
    const CoarseSystem sys = op.assemble(k_eff);
    const CoarseSolution sol = solve_coarse(sys, mode, cfg, std::move(cache));
    return downscale(op, sol);
}

ImpesSeries run_impes(const NestedGridPair& pair, const CoefficientField& k,
                      const WellConfig& wells, const std::vector<const CoarseBasisSet*>& bases,
                      const ImpesOptions& opts) {
    const CartesianGrid& g = pair.fine();
    const SourceField src = well_source(pair, wells);
    const BoundaryCondition bc; // no-flow

    // One coarse operator per basis, built once; the bases stay fixed.
    std::vector<CoarseOperator> ops;
    ops.reserve(bases.size());
    for (const CoarseBasisSet* b : bases) {
        if (b == nullptr) throw ConfigError("null basis handed to run_impes");
        ops.emplace_back(pair, *b, src, bc);
    }
    std::vector<std::shared_ptr<CondensedFactorCache>> coarse_caches(bases.size());
    for (auto& c : coarse_caches) c = std::make_shared<CondensedFactorCache>();
    auto ref_cache = std::make_shared<CondensedFactorCache>();

    const Index nc = g.cell_count();
    SaturationState ref_state{Eigen::VectorXd::Zero(nc), 0.0, 0};
    std::vector<SaturationState> states(bases.size(), ref_state);

    ImpesSeries series;
    series.errors.resize(bases.size());
    series.snapshots.resize(bases.size());
    series.finals.resize(bases.size());

    std::vector<double> scale(static_cast<std::size_t>(nc));
    for (int step = 0; step < opts.steps; ++step) {
        // Pressure solves with the current saturations.
        for (Index c = 0; c < nc; ++c)
            scale[static_cast<std::size_t>(c)] = mobilities(ref_state.S[c], opts.model).lambda_total;
        const CoefficientField k_ref = k.scaled_by(scale);
        const SaddleSystem ref_sys = assemble_expanded_fine(pair, k_ref, src, bc);
        FineCondensed ref_cond(ref_sys, opts.solver, ref_cache);
        const ExpandedSolution ref_sol = ref_cond.recover(ref_cond.engine().solve(ref_cond.system_loads()));

        std::vector<DownscaledSolution> coarse_sols;
        coarse_sols.reserve(bases.size());
        for (std::size_t i = 0; i < bases.size(); ++i)
            coarse_sols.push_back(pressure_step(states[i], ops[i], k, opts.model, opts.mode,
                                                opts.solver, coarse_caches[i]));

        // Shared time step: the strictest CFL limit across pipelines.
        double limit = cfl_limit(g, ref_sol.u, src, opts.model);
        for (const auto& cs : coarse_sols)
            limit = std::min(limit, cfl_limit(g, cs.u, src, opts.model));
        if (!std::isfinite(limit)) throw CFLError("no outflow anywhere; CFL limit unbounded");
        const double dt = opts.dt_factor * limit;

        TransportDiagnostics diag;
        ref_state = transport_step(ref_state, ref_sol.u, src, opts.model, dt, &diag);
        series.max_balance_defect = std::max(series.max_balance_defect, diag.balance_defect);
        series.s_min = std::min(series.s_min, diag.pre_clamp_min);
        series.s_max = std::max(series.s_max, diag.pre_clamp_max);
        for (std::size_t i = 0; i < bases.size(); ++i) {
            states[i] = transport_step(states[i], coarse_sols[i].u, src, opts.model, dt, &diag);
            series.max_balance_defect = std::max(series.max_balance_defect, diag.balance_defect);
            series.s_min = std::min(series.s_min, diag.pre_clamp_min);
            series.s_max = std::max(series.s_max, diag.pre_clamp_max);
            series.errors[i].push_back(relative_cellwise_error(g, states[i].S, ref_state.S));
        }
        series.times.push_back(ref_state.time);

        if (ref_state.step == opts.snapshot_step) {
            series.ref_snapshot = ref_state.S;
            for (std::size_t i = 0; i < bases.size(); ++i) series.snapshots[i] = states[i].S;
        }
    }
    series.ref_final = ref_state.S;
    for (std::size_t i = 0; i < bases.size(); ++i) series.finals[i] = states[i].S;
    return series;
}

} // namespace msdarcy
