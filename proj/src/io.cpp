#include "msdarcy/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "msdarcy/errors.hpp"

namespace msdarcy {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    return out;
}

} // namespace

ConfigMap parse_config(const std::string& text) {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " is not key = value: " +
                              s);
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
        cfg[key] = value;
    }
    return cfg;
}

ConfigMap load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ConfigMap& config) {
    std::string out;
    for (const auto& [k, v] : config) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

void save_config(const ConfigMap& config, const std::string& path) {
    open_out(path) << serialize_config(config);
}

std::string config_string(const ConfigMap& c, const std::string& key,
                          const std::string& fallback) {
    const auto it = c.find(key);
    return it == c.end() ? fallback : it->second;
}

long config_int(const ConfigMap& c, const std::string& key, long fallback) {
    const auto it = c.find(key);
    if (it == c.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an integer: " + it->second);
    }
}

double config_double(const ConfigMap& c, const std::string& key, double fallback) {
    const auto it = c.find(key);
    if (it == c.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not a number: " + it->second);
    }
}

std::array<int, 3> config_counts(const ConfigMap& c, const std::string& key,
                                 std::array<int, 3> fallback) {
    const auto it = c.find(key);
    if (it == c.end()) return fallback;
    std::array<int, 3> out{};
    std::istringstream in(it->second);
    std::string tok;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(in, tok, ','))
            throw ConfigError("config key '" + key + "' needs NX,NY,NZ: " + it->second);
        try {
            std::size_t pos = 0;
            out[i] = std::stoi(trim(tok), &pos);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' has a bad component: " + tok);
        }
    }
    if (std::getline(in, tok, ','))
        throw ConfigError("config key '" + key + "' has more than three components");
    return out;
}

std::string format_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*e", precision, v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    auto out = open_out(path);
    auto emit = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    emit(header);
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw ConfigError("CSV row width " + std::to_string(row.size()) +
                              " does not match header width " + std::to_string(header.size()));
        emit(row);
    }
    if (!out) throw ConfigError("failed writing CSV: " + path);
}

void write_vtk_cells(const std::string& path, const CartesianGrid& grid,
                     const VtkCellData& data) {
    const Index n = grid.cell_count();
    for (const auto& [name, values] : data.scalars)
        if (values.size() != n)
            throw ConfigError("VTK scalar '" + name + "' has the wrong size");
    for (const auto& [name, values] : data.vectors)
        if (static_cast<Index>(values.size()) != n)
            throw ConfigError("VTK vector '" + name + "' has the wrong size");

    auto out = open_out(path);
    out << "# vtk DataFile Version 3.0\n";
    out << "msdarcy cell data\n";
    out << "ASCII\n";
    out << "DATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << grid.count(0) + 1 << ' ' << grid.count(1) + 1 << ' '
        << grid.count(2) + 1 << '\n';
    out << "ORIGIN " << format_double(grid.box().lo[0]) << ' ' << format_double(grid.box().lo[1])
        << ' ' << format_double(grid.box().lo[2]) << '\n';
    out << "SPACING " << format_double(grid.spacing(0)) << ' ' << format_double(grid.spacing(1))
        << ' ' << format_double(grid.spacing(2)) << '\n';
    out << "CELL_DATA " << n << '\n';
    for (const auto& [name, values] : data.scalars) {
        out << "SCALARS " << name << " double 1\n";
        out << "LOOKUP_TABLE default\n";
        for (Index i = 0; i < n; ++i) out << format_double(values[i]) << '\n';
    }
    for (const auto& [name, values] : data.vectors) {
        out << "VECTORS " << name << " double\n";
        for (Index i = 0; i < n; ++i) {
            const Vec3& v = values[static_cast<std::size_t>(i)];
            out << format_double(v[0]) << ' ' << format_double(v[1]) << ' '
                << format_double(v[2]) << '\n';
        }
    }
    if (!out) throw ConfigError("failed writing VTK: " + path);
}

std::vector<Vec3> cell_center_velocity(const CartesianGrid& grid,
                                       const Eigen::VectorXd& face_dofs) {
    if (face_dofs.size() != grid.face_count())
        throw ConfigError("velocity export needs one dof per face");
    const RT0Element elem(grid);
    std::vector<Vec3> out(static_cast<std::size_t>(grid.cell_count()));
    const Vec3 center(0.5, 0.5, 0.5);
    for (Index c = 0; c < grid.cell_count(); ++c) {
        const auto faces = grid.cell_faces(c);
        Vec6 v;
        for (int lf = 0; lf < 6; ++lf) v[lf] = face_dofs[faces[lf]];
        out[static_cast<std::size_t>(c)] = elem.evaluate(v, center);
    }
    return out;
}

} // namespace msdarcy
