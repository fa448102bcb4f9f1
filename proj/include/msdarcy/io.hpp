#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "msdarcy/grid.hpp"
#include "msdarcy/rt0.hpp"

namespace msdarcy {

/// Flat key=value configuration. The map is ordered so the serialized form is
/// canonical: one `key = value` line per entry, sorted by key.
using ConfigMap = std::map<std::string, std::string>;

/// Parse configuration text: `key = value` lines, `#` comments, blank lines
/// ignored. Malformed lines raise ConfigError with the line number.
ConfigMap parse_config(const std::string& text);
ConfigMap load_config(const std::string& path);
std::string serialize_config(const ConfigMap& config);
void save_config(const ConfigMap& config, const std::string& path);

/// Typed lookups; a missing key returns the fallback, a present-but-invalid
/// value raises ConfigError naming the key.
std::string config_string(const ConfigMap& c, const std::string& key, const std::string& fallback);
long config_int(const ConfigMap& c, const std::string& key, long fallback);
double config_double(const ConfigMap& c, const std::string& key, double fallback);
/// Comma-separated triple such as "24,24,24".
std::array<int, 3> config_counts(const ConfigMap& c, const std::string& key,
                                 std::array<int, 3> fallback);

/// Locale-independent scientific formatting used for all numeric output, so
/// fixed inputs give byte-identical files.
std::string format_double(double v, int precision = 9);

/// Write a CSV file with the exact column order given; every cell is written
/// verbatim (callers format numbers with format_double).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Named cell-data arrays for VTK export.
struct VtkCellData {
    std::vector<std::pair<std::string, Eigen::VectorXd>> scalars;
    std::vector<std::pair<std::string, std::vector<Vec3>>> vectors;
};

/// Legacy-format VTK STRUCTURED_POINTS file carrying CELL_DATA only.
void write_vtk_cells(const std::string& path, const CartesianGrid& grid, const VtkCellData& data);

/// Cell-center velocity vectors of a conforming face-flux field (for export).
std::vector<Vec3> cell_center_velocity(const CartesianGrid& grid,
                                       const Eigen::VectorXd& face_dofs);

} // namespace msdarcy
