#pragma once

#include <cstdint>
#include <limits>

#include "msdarcy/basis.hpp"
#include "msdarcy/homog.hpp"
#include "msdarcy/io.hpp"
#include "msdarcy/metrics.hpp"
#include "msdarcy/twophase.hpp"

namespace msdarcy {

/// Complete, self-describing description of one experiment. Zero grid counts
/// and NaN extents mean "use the experiment's canonical value".
struct ExperimentConfig {
    std::string experiment = "table1"; ///< table1..4 | impes | convergence | homog-check
    std::array<int, 3> fine{0, 0, 0};
    std::array<int, 3> coarse{0, 0, 0};
    std::string basis;   ///< empty = the experiment's canonical variants; else local|os|global
    int layers = 1;      ///< oversampling layers
    double tol = 1e-10;  ///< condensed-solver relative tolerance
    std::uint64_t seed = 2021; ///< random-field seed (table4, impes)
    std::string out_dir;       ///< empty = no artifacts written
    int steps = 2000;          ///< impes step count
    int snapshot = 700;        ///< impes snapshot step
    double source_h = std::numeric_limits<double>::quiet_NaN(); ///< corner-well extent
};

ExperimentConfig experiment_from_config(const ConfigMap& map);
/// Canonical form: every field serialized, defaults resolved per experiment.
ConfigMap experiment_to_config(const ExperimentConfig& cfg);

/// One (variant, coarse grid) column of a table experiment.
struct VariantRun {
    std::string variant;
    std::array<int, 3> coarse{0, 0, 0};
    ErrorReport errors;                  ///< expanded-formulation errors
    PostprocessedGradient postprocessed; ///< -u/k gradient columns (k > 0 only)
    bool has_postprocessed = false;
    double conservation_defect = 0.0; ///< max per-coarse-cell |int div u - int f|
    double interface_jump = 0.0;      ///< oversampled nonconformity measure
    SolverStats coarse_stats;
};

struct TableOutcome {
    ErrorReport reference;                ///< norms of the fine reference
    double reference_conservation = 0.0;  ///< defect of the reference velocity
    double source_l2 = 0.0;               ///< L2 norm of the source density
    std::vector<VariantRun> runs;
    ConfigMap fingerprint;
};

/// Run a table1..table4 experiment (fine reference, bases, coarse solves,
/// error reports). Artifacts are written when cfg.out_dir is set.
TableOutcome run_table(const ExperimentConfig& cfg);

struct ConvergencePoint {
    double H = 0.0;
    ErrorReport errors;
    double conservation_defect = 0.0; ///< max per-coarse-cell |int div u - int f|
};
struct ConvergenceOutcome {
    std::vector<ConvergencePoint> points;
    double u_slope = 0.0;
    double gradp_slope = 0.0;
    double p_slope = 0.0;
    ConfigMap fingerprint;
};

/// Coarse-size sweep with a smooth coefficient on a fixed fine grid; slopes
/// are least-squares fits of log(error) against log(H).
ConvergenceOutcome run_convergence(const ExperimentConfig& cfg);

struct HomogEntry {
    std::string field; ///< constant | laminate | checkerboard
    int n = 0;         ///< cells per axis in the varying directions
    Mat3 k_star = Mat3::Identity();
    Mat3 expected = Mat3::Identity(); ///< closed-form target
    FieldMeans means;                 ///< Voigt-Reuss bounds of the eigenvalues
};
struct HomogOutcome {
    std::vector<HomogEntry> entries;
    ConfigMap fingerprint;
};

/// Periodic homogenization battery: constant sanity row, the laminate on the
/// full-size cell grid, and a checkerboard refinement sequence.
HomogOutcome run_homog_check(const ExperimentConfig& cfg);

struct ImpesOutcome {
    ImpesSeries series; ///< pipelines ordered [local, global]
    ConfigMap fingerprint;
};

/// Two-spot IMPES on the seeded shale field: fine reference, local-basis and
/// global-basis pipelines side by side.
ImpesOutcome run_impes_experiment(const ExperimentConfig& cfg);

/// Spec operation: dispatch on cfg.experiment and write all artifacts.
void run_experiment(const ExperimentConfig& cfg);

} // namespace msdarcy
