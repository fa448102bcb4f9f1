#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "msdarcy/errors.hpp"

namespace msdarcy {

using Index = std::int64_t;

/// Axis-aligned domain box.
struct Box {
    std::array<double, 3> lo{0.0, 0.0, 0.0};
    std::array<double, 3> hi{1.0, 1.0, 1.0};

    double extent(int axis) const { return hi[axis] - lo[axis]; }
    double volume() const { return extent(0) * extent(1) * extent(2); }

    static Box unit_cube() { return Box{}; }
};

/// Uniform structured hexahedral grid.
///
/// Indexing is lexicographic with x fastest, then y, then z:
///   cell(ix,iy,iz) = ix + nx*(iy + ny*iz).
/// Faces are stored in three per-axis blocks (x-faces, then y-, then z-faces);
/// within a block the face lattice has n+1 planes along its own axis and is
/// numbered with the same x-fastest rule. Every face has a fixed global
/// orientation: its normal points in the positive axis direction, and all flux
/// degrees of freedom are totals through the face in that direction.
class CartesianGrid {
public:
    CartesianGrid() = default;
    CartesianGrid(std::array<int, 3> counts, Box box);

    int count(int axis) const { return n_[axis]; }
    const std::array<int, 3>& counts() const { return n_; }
    const Box& box() const { return box_; }
    double spacing(int axis) const { return h_[axis]; }

    Index cell_count() const { return static_cast<Index>(n_[0]) * n_[1] * n_[2]; }
    double cell_volume() const { return h_[0] * h_[1] * h_[2]; }
    /// Area of any face orthogonal to `axis`.
    double face_area(int axis) const { return cell_volume() / h_[axis]; }
    /// Cell diameter (used by the discrete -1/2 trace norm).
    double diameter() const;

    Index cell_index(int ix, int iy, int iz) const;
    std::array<int, 3> cell_coords(Index cell) const;
    std::array<double, 3> cell_center(Index cell) const;
    std::array<double, 3> cell_lower(Index cell) const;

    Index face_count() const { return face_offset_[3]; }
    Index interior_face_count() const;
    /// Face lattice coordinates: along `axis` the coordinate ranges 0..n+1.
    Index face_index(int axis, int ix, int iy, int iz) const;
    int face_axis(Index face) const;
    std::array<int, 3> face_coords(Index face) const;
    bool is_boundary_face(Index face) const;
    /// Faces of a cell in local order (x-lo, x-hi, y-lo, y-hi, z-lo, z-hi).
    Index cell_face(Index cell, int axis, int side) const;
    std::array<Index, 6> cell_faces(Index cell) const;
    /// Adjacent cells (lo side, hi side); -1 when the face lies on the boundary.
    std::array<Index, 2> face_cells(Index face) const;
    std::array<double, 3> face_center(Index face) const;

    /// All boundary faces, ascending.
    std::vector<Index> boundary_faces() const;

private:
    void check_cell(Index cell) const;

    std::array<int, 3> n_{0, 0, 0};
    Box box_;
    std::array<double, 3> h_{0.0, 0.0, 0.0};
    std::array<Index, 4> face_offset_{0, 0, 0, 0};
};

/// True when two grids have identical cell counts and the same box to within
/// 1e-12 of its extents.
bool same_grid(const CartesianGrid& a, const CartesianGrid& b);

/// A contiguous fine-cell index box, used for basis supports and oversampling.
/// The box is half-open: cells with coords in [lo, hi) per axis.
struct SubgridRegion {
    Index owner_coarse = -1;
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};
    /// clipped[axis][side]: the requested extension was cut at the domain boundary.
    std::array<std::array<bool, 2>, 3> clipped{{{false, false}, {false, false}, {false, false}}};

    std::array<int, 3> counts() const {
        return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
    }
    Index cell_count() const {
        return static_cast<Index>(hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
    }
    bool contains(const std::array<int, 3>& c) const {
        return c[0] >= lo[0] && c[0] < hi[0] && c[1] >= lo[1] && c[1] < hi[1] &&
               c[2] >= lo[2] && c[2] < hi[2];
    }
};

/// Nested fine/coarse grid pair with exact integer refinement ratios.
class NestedGridPair {
public:
    NestedGridPair() = default;

    const CartesianGrid& fine() const { return fine_; }
    const CartesianGrid& coarse() const { return coarse_; }
    const std::array<int, 3>& ratio() const { return ratio_; }

    Index coarse_cell_of_fine(Index fine_cell) const;
    /// Fine cells tiling a coarse cell, ascending by global fine index.
    std::vector<Index> fine_cells_of_coarse(Index coarse_cell) const;
    /// Fine faces tiling a coarse face, ascending by global fine index.
    std::vector<Index> fine_faces_of_coarse_face(Index coarse_face) const;
    /// Fine-cell index box of a coarse cell.
    SubgridRegion coarse_cell_region(Index coarse_cell) const;

    friend NestedGridPair build_nested(std::array<int, 3> fine_counts,
                                       std::array<int, 3> coarse_counts, Box box);

private:
    CartesianGrid fine_;
    CartesianGrid coarse_;
    std::array<int, 3> ratio_{1, 1, 1};
};

/// Build a nested pair; throws NestingError if the counts do not divide and
/// InvalidGrid for nonpositive counts or a degenerate box.
NestedGridPair build_nested(std::array<int, 3> fine_counts, std::array<int, 3> coarse_counts,
                            Box box = Box::unit_cube());

/// The fine cells of a coarse cell together with, per local coarse face
/// (x-lo, x-hi, y-lo, y-hi, z-lo, z-hi), the fine faces tiling that coarse face.
struct CoarseCellEntities {
    std::vector<Index> fine_cells;
    std::array<std::vector<Index>, 6> fine_faces;
};
CoarseCellEntities fine_entities_of_coarse(const NestedGridPair& pair, Index coarse_cell);

/// Oversampling region: the coarse cell extended by `layers` whole coarse cells
/// per direction, clipped at the domain boundary. layers >= 1.
SubgridRegion oversample_region(const NestedGridPair& pair, Index coarse_cell, int layers);

/// View of a fine-grid sub-box as a standalone grid with local lexicographic
/// indexing plus the map back to parent fine-cell indices.
class Subgrid {
public:
    Subgrid(const CartesianGrid& parent, const SubgridRegion& region);

    const CartesianGrid& grid() const { return grid_; }
    const SubgridRegion& region() const { return region_; }
    const CartesianGrid& parent() const { return *parent_; }
    /// Parent fine-cell index of a local cell.
    Index parent_cell(Index local_cell) const;

private:
    CartesianGrid grid_;
    SubgridRegion region_;
    const CartesianGrid* parent_ = nullptr;
};

} // namespace msdarcy
