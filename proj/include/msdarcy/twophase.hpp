#pragma once

#include "msdarcy/coarse.hpp"

namespace msdarcy {

/// Quadratic relative-permeability mobility model. The linear test mode
/// replaces the fractional flow by f_w = S with unit total mobility, which
/// turns the saturation equation into plain linear advection for oracle tests.
struct MobilityModel {
    double mu_w = 0.5;
    double mu_o = 1.0;
    bool linear_fractional_flow = false;
};

struct Mobilities {
    double lambda_w = 0.0;
    double lambda_o = 0.0;
    double lambda_total = 0.0;
    double f_w = 0.0;
};

/// Spec operation: pointwise mobilities lambda_w = S^2/mu_w, lambda_o =
/// (1-S)^2/mu_o, f_w = lambda_w/(lambda_w+lambda_o). S outside [0,1] raises
/// DomainError.
Mobilities mobilities(double S_w, const MobilityModel& model);

/// Largest slope of the fractional-flow curve over [0,1] (sampled densely);
/// enters the CFL limit of the explicit upwind transport.
double max_fractional_flow_slope(const MobilityModel& model);

/// Water saturation per fine cell plus simulation clock.
struct SaturationState {
    Eigen::VectorXd S;
    double time = 0.0;
    int step = 0;
};

/// Two-spot well pair: uniform-density source over one whole coarse cell each,
/// balanced rates. Water is injected (saturation 1), total fluid is produced.
struct WellConfig {
    Index injector = 0;  ///< coarse cell id
    Index producer = 0;  ///< coarse cell id
    double rate = 1.0;   ///< injected volume per unit time (= produced volume)
};

/// Fine source field of the well pair: +rate/|K| on the injector's fine cells,
/// -rate/|K| on the producer's.
SourceField well_source(const NestedGridPair& pair, const WellConfig& wells);

/// Largest dt the explicit upwind update accepts for this velocity field:
/// min over cells of |cell| / (slope * (outflow + producer withdrawal)).
double cfl_limit(const CartesianGrid& grid, const Eigen::VectorXd& face_flux,
                 const SourceField& wells, const MobilityModel& model);

/// Optional per-step diagnostics of a transport update.
struct TransportDiagnostics {
    double balance_defect = 0.0; ///< |sum dS*|cell| - dt*(water in - water out)|
    double pre_clamp_min = 0.0;  ///< saturation extremes before rounding cleanup
    double pre_clamp_max = 0.0;
};

/// Spec operation: one explicit upwind finite-volume saturation step with
/// face flux `face_flux` (conforming, +axis totals per fine face). Injector
/// cells source water at f_w = 1; producer cells remove total fluid at the
/// local fractional flow. dt above the CFL limit raises CFLError; saturations
/// leaving [0,1] by more than rounding noise raise DomainError, excursions
/// within 1e-12 are clamped.
SaturationState transport_step(const SaturationState& state, const Eigen::VectorXd& face_flux,
                               const SourceField& wells, const MobilityModel& model, double dt,
                               TransportDiagnostics* diag = nullptr);

/// Spec operation: mobility-weighted coarse pressure solve with the fixed
/// multiscale basis, downscaled to a conservative fine velocity. The operator
/// carries the basis and the well source; `k` is the time-zero permeability.
DownscaledSolution pressure_step(const SaturationState& state, const CoarseOperator& op,
                                 const CoefficientField& k, const MobilityModel& model,
                                 CoarseSolveMode mode = CoarseSolveMode::hybrid,
                                 const SolverConfig& cfg = {},
                                 std::shared_ptr<CondensedFactorCache> cache = nullptr);

/// Options of a side-by-side IMPES run.
struct ImpesOptions {
    int steps = 2000;
    int snapshot_step = 700;
    double dt_factor = 0.9; ///< fraction of the shared CFL limit
    MobilityModel model;
    CoarseSolveMode mode = CoarseSolveMode::hybrid;
    SolverConfig solver;
};

/// Time series of a run: per-step times, per-pipeline relative L2 saturation
/// errors against the fine reference, snapshots, and conservation/bounds
/// bookkeeping across every pipeline.
struct ImpesSeries {
    std::vector<double> times;
    std::vector<std::vector<double>> errors; ///< [pipeline][step]
    Eigen::VectorXd ref_snapshot;
    std::vector<Eigen::VectorXd> snapshots;  ///< per pipeline, at snapshot_step
    Eigen::VectorXd ref_final;
    std::vector<Eigen::VectorXd> finals;     ///< per pipeline
    double max_balance_defect = 0.0;
    double s_min = 1.0; ///< smallest pre-clamp saturation seen anywhere
    double s_max = 0.0; ///< largest pre-clamp saturation seen anywhere
};

/// Spec operation: run the fine-reference IMPES and one coarse IMPES per
/// basis side by side with a shared dt (the smallest CFL limit across
/// pipelines), starting from S = 0. Bases stay fixed for the whole run.
ImpesSeries run_impes(const NestedGridPair& pair, const CoefficientField& k,
                      const WellConfig& wells, const std::vector<const CoarseBasisSet*>& bases,
                      const ImpesOptions& opts = {});

} // namespace msdarcy
