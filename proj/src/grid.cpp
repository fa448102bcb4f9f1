#include "msdarcy/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace msdarcy {

namespace {

std::string coords_str(int ix, int iy, int iz) {
    return "(" + std::to_string(ix) + "," + std::to_string(iy) + "," + std::to_string(iz) + ")";
}

} // namespace

CartesianGrid::CartesianGrid(std::array<int, 3> counts, Box box) : n_(counts), box_(box) {
    for (int a = 0; a < 3; ++a) {
        if (n_[a] <= 0)
            throw InvalidGrid("cell count must be positive, got " + std::to_string(n_[a]) +
                              " on axis " + std::to_string(a));
        if (!(box_.extent(a) > 0.0))
            throw InvalidGrid("domain box degenerate on axis " + std::to_string(a));
        h_[a] = box_.extent(a) / n_[a];
    }
    face_offset_[0] = 0;
    for (int a = 0; a < 3; ++a) {
        std::array<Index, 3> m = {n_[0], n_[1], n_[2]};
        m[a] += 1;
        face_offset_[a + 1] = face_offset_[a] + m[0] * m[1] * m[2];
    }
}

double CartesianGrid::diameter() const {
    return std::sqrt(h_[0] * h_[0] + h_[1] * h_[1] + h_[2] * h_[2]);
}

Index CartesianGrid::cell_index(int ix, int iy, int iz) const {
    if (ix < 0 || ix >= n_[0] || iy < 0 || iy >= n_[1] || iz < 0 || iz >= n_[2])
        throw IndexError("cell coords out of range: " + coords_str(ix, iy, iz));
    return ix + static_cast<Index>(n_[0]) * (iy + static_cast<Index>(n_[1]) * iz);
}

void CartesianGrid::check_cell(Index cell) const {
    if (cell < 0 || cell >= cell_count())
        throw IndexError("cell index out of range: " + std::to_string(cell));
}

std::array<int, 3> CartesianGrid::cell_coords(Index cell) const {
    check_cell(cell);
    const int ix = static_cast<int>(cell % n_[0]);
    const Index rest = cell / n_[0];
    const int iy = static_cast<int>(rest % n_[1]);
    const int iz = static_cast<int>(rest / n_[1]);
    return {ix, iy, iz};
}

std::array<double, 3> CartesianGrid::cell_center(Index cell) const {
    const auto c = cell_coords(cell);
    return {box_.lo[0] + (c[0] + 0.5) * h_[0], box_.lo[1] + (c[1] + 0.5) * h_[1],
            box_.lo[2] + (c[2] + 0.5) * h_[2]};
}

std::array<double, 3> CartesianGrid::cell_lower(Index cell) const {
    const auto c = cell_coords(cell);
    return {box_.lo[0] + c[0] * h_[0], box_.lo[1] + c[1] * h_[1], box_.lo[2] + c[2] * h_[2]};
}

Index CartesianGrid::interior_face_count() const {
    Index total = 0;
    for (int a = 0; a < 3; ++a) {
        std::array<Index, 3> m = {n_[0], n_[1], n_[2]};
        m[a] -= 1;
        total += m[0] * m[1] * m[2];
    }
    return total;
}

Index CartesianGrid::face_index(int axis, int ix, int iy, int iz) const {
    std::array<int, 3> m = {n_[0], n_[1], n_[2]};
    m[axis] += 1;
    if (axis < 0 || axis > 2 || ix < 0 || ix >= m[0] || iy < 0 || iy >= m[1] || iz < 0 ||
        iz >= m[2])
        throw IndexError("face coords out of range: axis " + std::to_string(axis) + " " +
                         coords_str(ix, iy, iz));
    return face_offset_[axis] + ix + static_cast<Index>(m[0]) * (iy + static_cast<Index>(m[1]) * iz);
}

int CartesianGrid::face_axis(Index face) const {
    if (face < 0 || face >= face_count())
        throw IndexError("face index out of range: " + std::to_string(face));
    for (int a = 0; a < 3; ++a)
        if (face < face_offset_[a + 1]) return a;
    return 2; // unreachable
}

std::array<int, 3> CartesianGrid::face_coords(Index face) const {
    const int a = face_axis(face);
    std::array<int, 3> m = {n_[0], n_[1], n_[2]};
    m[a] += 1;
    Index local = face - face_offset_[a];
    const int ix = static_cast<int>(local % m[0]);
    local /= m[0];
    const int iy = static_cast<int>(local % m[1]);
    const int iz = static_cast<int>(local / m[1]);
    return {ix, iy, iz};
}

bool CartesianGrid::is_boundary_face(Index face) const {
    const int a = face_axis(face);
    const auto c = face_coords(face);
    return c[a] == 0 || c[a] == n_[a];
}

Index CartesianGrid::cell_face(Index cell, int axis, int side) const {
    auto c = cell_coords(cell);
    c[axis] += side;
    return face_index(axis, c[0], c[1], c[2]);
}

std::array<Index, 6> CartesianGrid::cell_faces(Index cell) const {
    std::array<Index, 6> f{};
    for (int a = 0; a < 3; ++a)
        for (int s = 0; s < 2; ++s) f[2 * a + s] = cell_face(cell, a, s);
    return f;
}

std::array<Index, 2> CartesianGrid::face_cells(Index face) const {
    const int a = face_axis(face);
    auto c = face_coords(face);
    std::array<Index, 2> out{-1, -1};
    if (c[a] > 0) {
        auto lo = c;
        lo[a] -= 1;
        out[0] = cell_index(lo[0], lo[1], lo[2]);
    }
    if (c[a] < n_[a]) out[1] = cell_index(c[0], c[1], c[2]);
    return out;
}

std::array<double, 3> CartesianGrid::face_center(Index face) const {
    const int a = face_axis(face);
    const auto c = face_coords(face);
    std::array<double, 3> x{};
    for (int d = 0; d < 3; ++d) x[d] = box_.lo[d] + (c[d] + (d == a ? 0.0 : 0.5)) * h_[d];
    return x;
}

std::vector<Index> CartesianGrid::boundary_faces() const {
    std::vector<Index> out;
    for (Index f = 0; f < face_count(); ++f)
        if (is_boundary_face(f)) out.push_back(f);
    return out;
}

// --------------------------------------------------------------- nested pairs

NestedGridPair build_nested(std::array<int, 3> fine_counts, std::array<int, 3> coarse_counts,
                            Box box) {
    NestedGridPair pair;
    pair.fine_ = CartesianGrid(fine_counts, box);
    pair.coarse_ = CartesianGrid(coarse_counts, box);
    for (int a = 0; a < 3; ++a) {
        if (fine_counts[a] % coarse_counts[a] != 0)
            throw NestingError("fine count " + std::to_string(fine_counts[a]) +
                               " not divisible by coarse count " +
                               std::to_string(coarse_counts[a]) + " on axis " + std::to_string(a));
        pair.ratio_[a] = fine_counts[a] / coarse_counts[a];
    }
    return pair;
}

Index NestedGridPair::coarse_cell_of_fine(Index fine_cell) const {
    const auto c = fine_.cell_coords(fine_cell);
    return coarse_.cell_index(c[0] / ratio_[0], c[1] / ratio_[1], c[2] / ratio_[2]);
}

SubgridRegion NestedGridPair::coarse_cell_region(Index coarse_cell) const {
    const auto c = coarse_.cell_coords(coarse_cell);
    SubgridRegion r;
    r.owner_coarse = coarse_cell;
    for (int a = 0; a < 3; ++a) {
        r.lo[a] = c[a] * ratio_[a];
        r.hi[a] = (c[a] + 1) * ratio_[a];
    }
    return r;
}

std::vector<Index> NestedGridPair::fine_cells_of_coarse(Index coarse_cell) const {
    const auto r = coarse_cell_region(coarse_cell);
    std::vector<Index> cells;
    cells.reserve(r.cell_count());
    for (int iz = r.lo[2]; iz < r.hi[2]; ++iz)
        for (int iy = r.lo[1]; iy < r.hi[1]; ++iy)
            for (int ix = r.lo[0]; ix < r.hi[0]; ++ix)
                cells.push_back(fine_.cell_index(ix, iy, iz));
    return cells;
}

std::vector<Index> NestedGridPair::fine_faces_of_coarse_face(Index coarse_face) const {
    const int a = coarse_.face_axis(coarse_face);
    const auto c = coarse_.face_coords(coarse_face);
    const int t1 = (a + 1) % 3, t2 = (a + 2) % 3;
    // Fine lattice position of the coarse face plane along its axis.
    std::array<int, 3> base{};
    base[a] = c[a] * ratio_[a];
    std::vector<Index> faces;
    faces.reserve(static_cast<std::size_t>(ratio_[t1]) * ratio_[t2]);
    for (int j2 = 0; j2 < ratio_[t2]; ++j2)
        for (int j1 = 0; j1 < ratio_[t1]; ++j1) {
            std::array<int, 3> f = base;
            f[t1] = c[t1] * ratio_[t1] + j1;
            f[t2] = c[t2] * ratio_[t2] + j2;
            faces.push_back(fine_.face_index(a, f[0], f[1], f[2]));
        }
    std::sort(faces.begin(), faces.end());
    return faces;
}

CoarseCellEntities fine_entities_of_coarse(const NestedGridPair& pair, Index coarse_cell) {
    CoarseCellEntities out;
    out.fine_cells = pair.fine_cells_of_coarse(coarse_cell);
    const auto faces = pair.coarse().cell_faces(coarse_cell);
    for (int lf = 0; lf < 6; ++lf) out.fine_faces[lf] = pair.fine_faces_of_coarse_face(faces[lf]);
    return out;
}

SubgridRegion oversample_region(const NestedGridPair& pair, Index coarse_cell, int layers) {
    if (layers < 1)
        throw OversampleError("oversample layers must be >= 1, got " + std::to_string(layers));
    const auto c = pair.coarse().cell_coords(coarse_cell);
    SubgridRegion r;
    r.owner_coarse = coarse_cell;
    for (int a = 0; a < 3; ++a) {
        const int nc = pair.coarse().count(a);
        const int lo_c = c[a] - layers;
        const int hi_c = c[a] + layers + 1;
        r.clipped[a][0] = lo_c < 0;
        r.clipped[a][1] = hi_c > nc;
        r.lo[a] = std::max(0, lo_c) * pair.ratio()[a];
        r.hi[a] = std::min(nc, hi_c) * pair.ratio()[a];
    }
    return r;
}

bool same_grid(const CartesianGrid& a, const CartesianGrid& b) {
    for (int ax = 0; ax < 3; ++ax) {
        if (a.count(ax) != b.count(ax)) return false;
        const double tol = 1e-12 * std::max({1.0, std::abs(a.box().extent(ax)), std::abs(b.box().extent(ax))});
        if (std::abs(a.box().lo[ax] - b.box().lo[ax]) > tol) return false;
        if (std::abs(a.box().hi[ax] - b.box().hi[ax]) > tol) return false;
    }
    return true;
}

Subgrid::Subgrid(const CartesianGrid& parent, const SubgridRegion& region)
    : region_(region), parent_(&parent) {
    const auto n = region.counts();
    Box b;
    for (int a = 0; a < 3; ++a) {
        b.lo[a] = parent.box().lo[a] + region.lo[a] * parent.spacing(a);
        b.hi[a] = parent.box().lo[a] + region.hi[a] * parent.spacing(a);
    }
    grid_ = CartesianGrid(n, b);
}

Index Subgrid::parent_cell(Index local_cell) const {
    const auto c = grid_.cell_coords(local_cell);
    return parent_->cell_index(c[0] + region_.lo[0], c[1] + region_.lo[1], c[2] + region_.lo[2]);
}

} // namespace msdarcy
