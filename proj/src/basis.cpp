#include "msdarcy/basis.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "msdarcy/errors.hpp"

namespace msdarcy {

namespace {

/// Faces of one boundary side of a grid, ascending face index (which is also
/// x-fastest lexicographic order in the transverse coordinates).
std::vector<Index> side_faces(const CartesianGrid& g, int axis, int side) {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{g.count(0), g.count(1), g.count(2)};
    lo[axis] = (side == 0) ? 0 : g.count(axis);
    hi[axis] = lo[axis] + 1;
    std::vector<Index> out;
    for (int iz = lo[2]; iz < hi[2]; ++iz) {
        for (int iy = lo[1]; iy < hi[1]; ++iy) {
            for (int ix = lo[0]; ix < hi[0]; ++ix) {
                out.push_back(g.face_index(axis, ix, iy, iz));
            }
        }
    }
    return out;
}

FaceProfile uniform_profile(const NestedGridPair& pair, Index coarse_face) {
    const int axis = pair.coarse().face_axis(coarse_face);
    const double ratio = pair.fine().face_area(axis) / pair.coarse().face_area(axis);
    FaceProfile prof;
    prof.flux.assign(pair.fine_faces_of_coarse_face(coarse_face).size(), ratio);
    return prof;
}

double basis_sign(int local_face) { return (local_face % 2 == 0) ? -1.0 : 1.0; }

/// Solve one basis problem on a single-coarse-cell subgrid: +axis flux profile
/// on local face `lf`, zero on the other boundary faces, constant divergence.
BasisPair solve_cell_basis(const LocalNeumannContext& ctx, int lf, const FaceProfile& prof,
                           double cell_volume) {
    const CartesianGrid& g = ctx.grid();
    const auto faces = side_faces(g, lf / 2, lf % 2);
    if (faces.size() != prof.flux.size()) {
        throw ConfigError("basis: face profile length mismatch");
    }
    Eigen::VectorXd bflux = Eigen::VectorXd::Zero(g.face_count());
    for (std::size_t i = 0; i < faces.size(); ++i) {
        bflux(faces[i]) = prof.flux[i];
    }
    const Eigen::VectorXd dens = Eigen::VectorXd::Constant(
        g.cell_count(), basis_sign(lf) / cell_volume);
    const ExpandedSolution sol = ctx.solve(dens, bflux);

    BasisPair bp;
    bp.psi = sol.u_broken;
    bp.eta = sol.theta;
    return bp;
}

double basis_norm(const BasisPair& bp, const RT0Element& elem) {
    double s = 0.0;
    for (const auto& v : bp.psi) {
        s += elem.inner(v, v);
    }
    return std::sqrt(s);
}

void init_set(CoarseBasisSet& set, const NestedGridPair& pair) {
    set.pair = &pair;
    set.face_profiles.resize(static_cast<std::size_t>(pair.coarse().face_count()));
    set.cells.resize(static_cast<std::size_t>(pair.coarse().cell_count()));
    set.norm_ratio.resize(set.cells.size());
}

double ratio_of(const CoarseBasisSet& set, Index coarse_cell, int lf, double norm) {
    const auto& coarse = set.pair->coarse();
    (void)coarse_cell;
    return norm * std::sqrt(coarse.face_area(lf / 2)) / std::sqrt(coarse.diameter());
}

} // namespace

int CoarseBasisSet::slot_of(Index coarse_cell, int local_face, int profile) const {
    const auto faces = pair->coarse().cell_faces(coarse_cell);
    int s = 0;
    for (int i = 0; i < local_face; ++i) {
        s += profiles_on(faces[i]);
    }
    if (profile < 0 || profile >= profiles_on(faces[local_face])) {
        return -1;
    }
    return s + profile;
}

CoarseBasisSet build_local_basis(const NestedGridPair& pair, const CoefficientField& k,
                                 SolverConfig cfg) {
    CoarseBasisSet set;
    set.variant = BasisVariant::local;
    init_set(set, pair);
    const auto& coarse = pair.coarse();
    for (Index f = 0; f < coarse.face_count(); ++f) {
        set.face_profiles[static_cast<std::size_t>(f)] = {uniform_profile(pair, f)};
    }

    const RT0Element fine_elem(pair.fine());
    const double kvol = coarse.cell_volume();
    for (Index K = 0; K < coarse.cell_count(); ++K) {
        const Subgrid sub(pair.fine(), pair.coarse_cell_region(K));
        const LocalNeumannContext ctx(sub, k, k.recommended_rule(), cfg);
        const auto faces = coarse.cell_faces(K);
        for (int lf = 0; lf < 6; ++lf) {
            try {
                BasisPair bp = solve_cell_basis(
                    ctx, lf, set.face_profiles[static_cast<std::size_t>(faces[lf])][0], kvol);
                const double nrm = basis_norm(bp, fine_elem);
                set.norm_ratio[static_cast<std::size_t>(K)].push_back(ratio_of(set, K, lf, nrm));
                set.cells[static_cast<std::size_t>(K)].push_back(std::move(bp));
            } catch (const DegenerateCoefficient& e) {
                throw DegenerateCoefficient("coarse cell " + std::to_string(K) + ": " + e.what());
            }
        }
    }
    return set;
}

CoarseBasisSet build_oversampled_basis(const NestedGridPair& pair, const CoefficientField& k,
                                       int layers, SolverConfig cfg) {
    CoarseBasisSet set;
    set.variant = BasisVariant::oversampled;
    set.layers = layers;
    init_set(set, pair);
    const auto& coarse = pair.coarse();
    const auto& fine = pair.fine();
    for (Index f = 0; f < coarse.face_count(); ++f) {
        set.face_profiles[static_cast<std::size_t>(f)] = {uniform_profile(pair, f)};
    }

    const RT0Element fine_elem(fine);
    for (Index K = 0; K < coarse.cell_count(); ++K) {
        const SubgridRegion region = oversample_region(pair, K, layers);
        const Subgrid sub(fine, region);
        const CartesianGrid& sg = sub.grid();
        const LocalNeumannContext ctx(sub, k, k.recommended_rule(), cfg);

        // Solve the six macro-face problems on the region S.
        const double svol = sg.box().volume();
        std::vector<BasisPair> macro(6);
        for (int l = 0; l < 6; ++l) {
            Eigen::VectorXd bflux = Eigen::VectorXd::Zero(sg.face_count());
            const auto faces = side_faces(sg, l / 2, l % 2);
            const double side_area = svol / sg.box().extent(l / 2);
            for (Index f : faces) {
                bflux(f) = sg.face_area(l / 2) / side_area;
            }
            const Eigen::VectorXd dens =
                Eigen::VectorXd::Constant(sg.cell_count(), basis_sign(l) / svol);
            const ExpandedSolution sol = ctx.solve(dens, bflux);
            macro[static_cast<std::size_t>(l)].psi = sol.u_broken;
            macro[static_cast<std::size_t>(l)].eta = sol.theta;
        }

        // Combination coefficients: the RT0 macro shapes of S, restricted to K,
        // must reproduce K's own RT0 shapes; G holds their fluxes through K's
        // faces, so the columns of G^{-1} are the coefficients c_j.
        Mat6 G = Mat6::Zero();
        for (int a = 0; a < 3; ++a) {
            const double S0 = sg.box().lo[a];
            const double S1 = sg.box().hi[a];
            const double L = S1 - S0;
            const double As = svol / L;
            const double K0 = coarse.cell_lower(K)[a];
            const double K1 = K0 + coarse.spacing(a);
            const double ca = coarse.face_area(a);
            G(2 * a, 2 * a) = ca * (S1 - K0) / (L * As);
            G(2 * a, 2 * a + 1) = ca * (K0 - S0) / (L * As);
            G(2 * a + 1, 2 * a) = ca * (S1 - K1) / (L * As);
            G(2 * a + 1, 2 * a + 1) = ca * (K1 - S0) / (L * As);
        }
        Eigen::FullPivLU<Mat6> glu(G);
        if (!glu.isInvertible()) {
            throw OversampleError("oversample coefficient system singular on coarse cell " +
                                  std::to_string(K));
        }
        const Mat6 Ginv = glu.inverse();

        // Restriction map: position of each of K's fine cells inside S.
        const auto kcells = pair.fine_cells_of_coarse(K);
        std::vector<Index> loc(kcells.size());
        for (std::size_t i = 0; i < kcells.size(); ++i) {
            const auto c = fine.cell_coords(kcells[i]);
            loc[i] = sg.cell_index(c[0] - region.lo[0], c[1] - region.lo[1], c[2] - region.lo[2]);
        }

        for (int j = 0; j < 6; ++j) {
            BasisPair bp;
            bp.psi.assign(kcells.size(), Vec6::Zero());
            bp.eta.assign(kcells.size(), Vec6::Zero());
            for (int l = 0; l < 6; ++l) {
                const double c = Ginv(l, j);
                if (c == 0.0) continue;
                const auto& m = macro[static_cast<std::size_t>(l)];
                for (std::size_t i = 0; i < kcells.size(); ++i) {
                    bp.psi[i] += c * m.psi[static_cast<std::size_t>(loc[i])];
                    bp.eta[i] += c * m.eta[static_cast<std::size_t>(loc[i])];
                }
            }
            const double nrm = basis_norm(bp, fine_elem);
            set.norm_ratio[static_cast<std::size_t>(K)].push_back(ratio_of(set, K, j, nrm));
            set.cells[static_cast<std::size_t>(K)].push_back(std::move(bp));
        }
    }
    return set;
}

CoarseBasisSet build_global_basis(const NestedGridPair& pair, const CoefficientField& k,
                                  const GlobalFieldSet& global_fields, SolverConfig cfg,
                                  double tau_flux) {
    const auto& fine = pair.fine();
    const auto& coarse = pair.coarse();
    for (const auto& u : global_fields.fields) {
        if (u.size() != fine.face_count()) {
            throw ConfigError("build_global_basis: global field face-vector size mismatch");
        }
    }
    if (global_fields.fields.empty()) {
        throw ConfigError("build_global_basis: no global fields given");
    }

    // L2 norms of the global fields, for the flux fallback threshold.
    const RT0Element fine_elem(fine);
    std::vector<double> field_norm;
    for (const auto& u : global_fields.fields) {
        double s = 0.0;
        for (Index c = 0; c < fine.cell_count(); ++c) {
            const auto faces = fine.cell_faces(c);
            Vec6 uc;
            for (int i = 0; i < 6; ++i) uc(i) = u(faces[i]);
            s += fine_elem.inner(uc, uc);
        }
        field_norm.push_back(std::sqrt(s));
    }

    CoarseBasisSet set;
    set.variant = BasisVariant::global;
    init_set(set, pair);

    for (Index f = 0; f < coarse.face_count(); ++f) {
        const auto fine_faces = pair.fine_faces_of_coarse_face(f);
        std::vector<FaceProfile>& kept = set.face_profiles[static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < global_fields.fields.size(); ++i) {
            const auto& u = global_fields.fields[i];
            FaceProfile prof;
            prof.flux.resize(fine_faces.size());
            double total = 0.0;
            for (std::size_t m = 0; m < fine_faces.size(); ++m) {
                prof.flux[m] = u(fine_faces[m]);
                total += prof.flux[m];
            }
            if (std::abs(total) < tau_flux * field_norm[i]) {
                prof = uniform_profile(pair, f);
            } else {
                for (double& v : prof.flux) v /= total;
            }
            // Deduplicate near-identical profiles (they would make the coarse
            // system singular).
            double pmax = 0.0;
            for (double v : prof.flux) pmax = std::max(pmax, std::abs(v));
            bool duplicate = false;
            for (const auto& q : kept) {
                double diff = 0.0;
                for (std::size_t m = 0; m < q.flux.size(); ++m) {
                    diff = std::max(diff, std::abs(q.flux[m] - prof.flux[m]));
                }
                if (diff <= 1e-10 * std::max(pmax, 1e-300)) {
                    duplicate = true;
                    break;
                }
            }
            if (!duplicate) {
                kept.push_back(std::move(prof));
            }
        }
    }

    const double kvol = coarse.cell_volume();
    for (Index K = 0; K < coarse.cell_count(); ++K) {
        const Subgrid sub(fine, pair.coarse_cell_region(K));
        const LocalNeumannContext ctx(sub, k, k.recommended_rule(), cfg);
        const auto faces = coarse.cell_faces(K);
        for (int lf = 0; lf < 6; ++lf) {
            const auto& profs = set.face_profiles[static_cast<std::size_t>(faces[lf])];
            for (const FaceProfile& prof : profs) {
                BasisPair bp = solve_cell_basis(ctx, lf, prof, kvol);
                const double nrm = basis_norm(bp, fine_elem);
                set.norm_ratio[static_cast<std::size_t>(K)].push_back(ratio_of(set, K, lf, nrm));
                set.cells[static_cast<std::size_t>(K)].push_back(std::move(bp));
            }
        }
    }
    return set;
}

GlobalFieldSet compute_harmonic_global_fields(const CartesianGrid& grid,
                                              const CoefficientField& k, SolverConfig cfg) {
    SourceField zero;
    zero.variant = SourceVariant::user_table;
    zero.grid = &grid;
    zero.density.assign(static_cast<std::size_t>(grid.cell_count()), 0.0);

    GlobalFieldSet out;
    out.provenance = GlobalFieldSet::Provenance::harmonic_coordinates;
    for (int axis = 0; axis < 3; ++axis) {
        BoundaryCondition bc;
        bc.kind = BoundaryCondition::Kind::pressure;
        bc.pressure = [axis](const Vec3& x) { return x(axis); };
        const SaddleSystem sys = assemble_expanded_fine(grid, k, zero, bc);
        out.fields.push_back(solve_expanded_fine(sys, cfg).u);
    }
    return out;
}

GlobalFieldSet compute_solution_global_field(const CartesianGrid& grid,
                                             const CoefficientField& k, const SourceField& f,
                                             const BoundaryCondition& bc, SolverConfig cfg) {
    const SaddleSystem sys = assemble_expanded_fine(grid, k, f, bc);
    GlobalFieldSet out;
    out.provenance = GlobalFieldSet::Provenance::solution_field;
    out.fields.push_back(solve_expanded_fine(sys, cfg).u);
    return out;
}

// ----------------------------------------------------------- serialization

namespace {

constexpr char kMagic[8] = {'M', 'S', 'D', 'B', 'A', 'S', '0', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void save_basis(const CoarseBasisSet& set, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw ConfigError("save_basis: cannot open " + path);
    }
    os.write(kMagic, sizeof(kMagic));
    put<std::int64_t>(os, static_cast<std::int64_t>(set.variant));
    put<std::int64_t>(os, set.layers);
    for (int a = 0; a < 3; ++a) put<std::int64_t>(os, set.pair->fine().count(a));
    for (int a = 0; a < 3; ++a) put<std::int64_t>(os, set.pair->coarse().count(a));

    put<std::int64_t>(os, static_cast<std::int64_t>(set.face_profiles.size()));
    for (const auto& profs : set.face_profiles) {
        put<std::int64_t>(os, static_cast<std::int64_t>(profs.size()));
        for (const auto& p : profs) {
            put<std::int64_t>(os, static_cast<std::int64_t>(p.flux.size()));
            os.write(reinterpret_cast<const char*>(p.flux.data()),
                     static_cast<std::streamsize>(p.flux.size() * sizeof(double)));
        }
    }
    put<std::int64_t>(os, static_cast<std::int64_t>(set.cells.size()));
    for (std::size_t K = 0; K < set.cells.size(); ++K) {
        const auto& slots = set.cells[K];
        put<std::int64_t>(os, static_cast<std::int64_t>(slots.size()));
        for (std::size_t s = 0; s < slots.size(); ++s) {
            put<std::int64_t>(os, static_cast<std::int64_t>(slots[s].psi.size()));
            for (const Vec6& v : slots[s].psi) {
                os.write(reinterpret_cast<const char*>(v.data()), 6 * sizeof(double));
            }
            for (const Vec6& v : slots[s].eta) {
                os.write(reinterpret_cast<const char*>(v.data()), 6 * sizeof(double));
            }
            put<double>(os, set.norm_ratio[K][s]);
        }
    }
    if (!os) {
        throw ConfigError("save_basis: write failed for " + path);
    }
}

CoarseBasisSet load_basis(const std::string& path, const NestedGridPair& pair) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ConfigError("load_basis: cannot open " + path);
    }
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ConfigError("load_basis: bad container header in " + path);
    }
    CoarseBasisSet set;
    set.variant = static_cast<BasisVariant>(get<std::int64_t>(is));
    set.layers = static_cast<int>(get<std::int64_t>(is));
    for (int a = 0; a < 3; ++a) {
        if (get<std::int64_t>(is) != pair.fine().count(a)) {
            throw ConfigError("load_basis: fine grid shape mismatch");
        }
    }
    for (int a = 0; a < 3; ++a) {
        if (get<std::int64_t>(is) != pair.coarse().count(a)) {
            throw ConfigError("load_basis: coarse grid shape mismatch");
        }
    }
    set.pair = &pair;

    const auto nfaces = get<std::int64_t>(is);
    if (nfaces != pair.coarse().face_count()) {
        throw ConfigError("load_basis: face count mismatch");
    }
    set.face_profiles.resize(static_cast<std::size_t>(nfaces));
    for (auto& profs : set.face_profiles) {
        profs.resize(static_cast<std::size_t>(get<std::int64_t>(is)));
        for (auto& p : profs) {
            p.flux.resize(static_cast<std::size_t>(get<std::int64_t>(is)));
            is.read(reinterpret_cast<char*>(p.flux.data()),
                    static_cast<std::streamsize>(p.flux.size() * sizeof(double)));
        }
    }
    const auto ncells = get<std::int64_t>(is);
    if (ncells != pair.coarse().cell_count()) {
        throw ConfigError("load_basis: cell count mismatch");
    }
    set.cells.resize(static_cast<std::size_t>(ncells));
    set.norm_ratio.resize(static_cast<std::size_t>(ncells));
    for (std::size_t K = 0; K < set.cells.size(); ++K) {
        const auto nslots = get<std::int64_t>(is);
        set.cells[K].resize(static_cast<std::size_t>(nslots));
        for (auto& slot : set.cells[K]) {
            const auto nf = get<std::int64_t>(is);
            slot.psi.resize(static_cast<std::size_t>(nf));
            slot.eta.resize(static_cast<std::size_t>(nf));
            for (Vec6& v : slot.psi) {
                is.read(reinterpret_cast<char*>(v.data()), 6 * sizeof(double));
            }
            for (Vec6& v : slot.eta) {
                is.read(reinterpret_cast<char*>(v.data()), 6 * sizeof(double));
            }
            set.norm_ratio[K].push_back(get<double>(is));
        }
    }
    if (!is) {
        throw ConfigError("load_basis: truncated container " + path);
    }
    return set;
}

} // namespace msdarcy
