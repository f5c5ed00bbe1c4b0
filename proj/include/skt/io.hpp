#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skt/common.hpp"
#include "skt/diagnostics.hpp"
#include "skt/grid.hpp"
#include "skt/rom.hpp"
#include "skt/snapshot.hpp"

namespace skt {

namespace detail {

inline constexpr std::uint32_t kFormatVersion = 1;

inline void ensure_parent_dir(const std::filesystem::path& path) {
    const auto parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
    ensure_parent_dir(path);
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

inline void write_raw(std::ofstream& out, const void* data, std::size_t bytes) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

inline void read_raw(std::ifstream& in, void* data, std::size_t bytes, const std::string& what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (in.gcount() != static_cast<std::streamsize>(bytes)) {
        throw std::runtime_error("truncated file while reading " + what);
    }
}

inline void write_u32(std::ofstream& out, std::uint32_t v) { write_raw(out, &v, 4); }
inline void write_u64(std::ofstream& out, std::uint64_t v) { write_raw(out, &v, 8); }

inline std::uint32_t read_u32(std::ifstream& in, const std::string& what) {
    std::uint32_t v = 0;
    read_raw(in, &v, 4, what);
    return v;
}

inline std::uint64_t read_u64(std::ifstream& in, const std::string& what) {
    std::uint64_t v = 0;
    read_raw(in, &v, 8, what);
    return v;
}

/// Row-major dense block of doubles.
inline void write_matrix(std::ofstream& out, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            write_raw(out, &v, 8);
        }
    }
}

inline Mat read_matrix(std::ifstream& in, Eigen::Index rows, Eigen::Index cols,
                       const std::string& what) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            double v = 0.0;
            read_raw(in, &v, 8, what);
            m(i, j) = v;
        }
    }
    return m;
}

inline void expect_magic(std::ifstream& in, const char (&magic)[5], const std::string& path) {
    char got[4];
    read_raw(in, got, 4, "magic of " + path);
    if (std::memcmp(got, magic, 4) != 0) {
        throw std::runtime_error("bad magic in " + path);
    }
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Snapshot container: "SKTS", version, N, N_t, row-major data, then times.
inline void write_snapshots(const std::filesystem::path& path, const SnapshotMatrix& snap) {
    if (static_cast<std::size_t>(snap.data.cols()) != snap.times.size()) {
        throw std::invalid_argument("write_snapshots: column/time count mismatch");
    }
    auto out = detail::open_out(path, std::ios::binary);
    detail::write_raw(out, "SKTS", 4);
    detail::write_u32(out, detail::kFormatVersion);
    detail::write_u64(out, static_cast<std::uint64_t>(snap.data.rows()));
    detail::write_u64(out, static_cast<std::uint64_t>(snap.data.cols()));
    detail::write_matrix(out, snap.data);
    for (double t : snap.times) detail::write_raw(out, &t, 8);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline SnapshotMatrix read_snapshots(const std::filesystem::path& path) {
    auto in = detail::open_in(path, std::ios::binary);
    detail::expect_magic(in, "SKTS", path.string());
    const auto version = detail::read_u32(in, "version");
    if (version != detail::kFormatVersion) {
        throw std::runtime_error("unsupported snapshot version in " + path.string());
    }
    const auto n = static_cast<Eigen::Index>(detail::read_u64(in, "row count"));
    const auto nt = static_cast<Eigen::Index>(detail::read_u64(in, "column count"));
    SnapshotMatrix snap;
    snap.data = detail::read_matrix(in, n, nt, "snapshot data");
    snap.times.resize(static_cast<std::size_t>(nt));
    for (double& t : snap.times) detail::read_raw(in, &t, 8, "snapshot times");
    return snap;
}

/// Reduced-model container: "SKTR", version, N, k1, k2, the block-diagonal
/// linear part, the four quadratic blocks, then both bases.
inline void write_reduced_model(const std::filesystem::path& path, const ReducedModel& model) {
    auto out = detail::open_out(path, std::ios::binary);
    detail::write_raw(out, "SKTR", 4);
    detail::write_u32(out, detail::kFormatVersion);
    detail::write_u64(out, static_cast<std::uint64_t>(model.v1.rows()));
    detail::write_u64(out, static_cast<std::uint64_t>(model.ops.k1));
    detail::write_u64(out, static_cast<std::uint64_t>(model.ops.k2));
    const int k = model.ops.k1 + model.ops.k2;
    Mat lin = Mat::Zero(k, k);
    lin.topLeftCorner(model.ops.k1, model.ops.k1) = model.ops.lin1;
    lin.bottomRightCorner(model.ops.k2, model.ops.k2) = model.ops.lin2;
    detail::write_matrix(out, lin);
    detail::write_matrix(out, model.ops.w11);
    detail::write_matrix(out, model.ops.w12);
    detail::write_matrix(out, model.ops.w21);
    detail::write_matrix(out, model.ops.w22);
    detail::write_matrix(out, model.v1);
    detail::write_matrix(out, model.v2);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline ReducedModel read_reduced_model(const std::filesystem::path& path) {
    auto in = detail::open_in(path, std::ios::binary);
    detail::expect_magic(in, "SKTR", path.string());
    const auto version = detail::read_u32(in, "version");
    if (version != detail::kFormatVersion) {
        throw std::runtime_error("unsupported model version in " + path.string());
    }
    const auto n = static_cast<Eigen::Index>(detail::read_u64(in, "state size"));
    const auto k1 = static_cast<Eigen::Index>(detail::read_u64(in, "k1"));
    const auto k2 = static_cast<Eigen::Index>(detail::read_u64(in, "k2"));
    ReducedModel model;
    model.ops.k1 = static_cast<int>(k1);
    model.ops.k2 = static_cast<int>(k2);
    const Mat lin = detail::read_matrix(in, k1 + k2, k1 + k2, "linear part");
    model.ops.lin1 = lin.topLeftCorner(k1, k1);
    model.ops.lin2 = lin.bottomRightCorner(k2, k2);
    model.ops.w11 = detail::read_matrix(in, k1, k1 * k1, "w11");
    model.ops.w12 = detail::read_matrix(in, k1, k1 * k2, "w12");
    model.ops.w21 = detail::read_matrix(in, k2, k2 * k1, "w21");
    model.ops.w22 = detail::read_matrix(in, k2, k2 * k2, "w22");
    model.v1 = detail::read_matrix(in, n, k1, "basis 1");
    model.v2 = detail::read_matrix(in, n, k2, "basis 2");
    return model;
}

inline void write_diagnostics_csv(const std::filesystem::path& path,
                                  const DiagnosticsSeries& diag) {
    auto out = detail::open_out(path, std::ios::out);
    out << "t,entropy,dens_u1,dens_u2,relchg_u1,relchg_u2\n";
    for (std::size_t i = 0; i < diag.size(); ++i) {
        out << detail::format_double(diag.times[i]) << ','
            << detail::format_double(diag.entropy[i]) << ','
            << detail::format_double(diag.dens_u1[i]) << ','
            << detail::format_double(diag.dens_u2[i]) << ','
            << detail::format_double(diag.relchg_u1[i]) << ','
            << detail::format_double(diag.relchg_u2[i]) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Inspection export of a snapshot matrix: one row per stored time.
inline void write_snapshots_csv(const std::filesystem::path& path, const SnapshotMatrix& snap) {
    auto out = detail::open_out(path, std::ios::out);
    out << "t";
    for (Eigen::Index i = 0; i < snap.data.rows(); ++i) out << ",node_" << i;
    out << '\n';
    for (Eigen::Index j = 0; j < snap.data.cols(); ++j) {
        out << detail::format_double(snap.times[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < snap.data.rows(); ++i) {
            out << ',' << detail::format_double(snap.data(i, j));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// One-dimensional field dump: x, u1, u2 per node.
inline void write_field_csv(const std::filesystem::path& path, const SpatialGrid& grid,
                            const Vec& u1, const Vec& u2) {
    if (grid.dim != 1) throw std::invalid_argument("write_field_csv: 1D grids only");
    if (u1.size() != grid.num_nodes() || u2.size() != grid.num_nodes()) {
        throw std::invalid_argument("write_field_csv: field size does not match grid");
    }
    auto out = detail::open_out(path, std::ios::out);
    out << "x,u1,u2\n";
    for (int i = 0; i < grid.num_nodes(); ++i) {
        out << detail::format_double(grid.node_x(i)) << ','
            << detail::format_double(u1(i)) << ','
            << detail::format_double(u2(i)) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

struct FieldCsv {
    std::vector<double> x, u1, u2;
};

inline FieldCsv read_field_csv(const std::filesystem::path& path) {
    auto in = detail::open_in(path, std::ios::in);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty field file: " + path.string());
    FieldCsv f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double x = 0, a = 0, b = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &a, &b) != 3) {
            throw std::runtime_error("malformed field row in " + path.string());
        }
        f.x.push_back(x);
        f.u1.push_back(a);
        f.u2.push_back(b);
    }
    return f;
}

/// Two-dimensional field dump: values as an n_x by n_y grid, row per x-index.
inline void write_field_grid(const std::filesystem::path& path, const SpatialGrid& grid,
                             const Vec& u) {
    if (grid.dim != 2) throw std::invalid_argument("write_field_grid: 2D grids only");
    if (u.size() != grid.num_nodes()) {
        throw std::invalid_argument("write_field_grid: field size does not match grid");
    }
    auto out = detail::open_out(path, std::ios::out);
    for (int ix = 0; ix < grid.nx; ++ix) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            if (iy > 0) out << ',';
            out << detail::format_double(u(grid.node_index(ix, iy)));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Mat read_field_grid(const std::filesystem::path& path) {
    auto in = detail::open_in(path, std::ios::in);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        const char* p = line.c_str();
        char* end = nullptr;
        for (;;) {
            row.push_back(std::strtod(p, &end));
            if (p == end) throw std::runtime_error("malformed grid row in " + path.string());
            p = end;
            if (*p != ',') break;
            ++p;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw std::runtime_error("ragged grid rows in " + path.string());
        }
        rows.push_back(std::move(row));
    }
    Mat m(static_cast<Eigen::Index>(rows.size()),
          rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

/// Sidecar mapping grid indices to coordinates and flat node numbers.
inline void write_grid_index(const std::filesystem::path& path, const SpatialGrid& grid) {
    if (grid.dim != 2) throw std::invalid_argument("write_grid_index: 2D grids only");
    auto out = detail::open_out(path, std::ios::out);
    out << "ix,iy,x,y,node\n";
    for (int ix = 0; ix < grid.nx; ++ix) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            const int node = grid.node_index(ix, iy);
            out << ix << ',' << iy << ','
                << detail::format_double(grid.node_x(node)) << ','
                << detail::format_double(grid.node_y(node)) << ','
                << node << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

} // namespace detail

/// Header plus string cells of a comma-separated file, with numeric access.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == name) return c;
        }
        throw std::out_of_range("csv column not found: " + name);
    }

    const std::string& text(std::size_t row, const std::string& name) const {
        return rows.at(row).at(column(name));
    }

    double value(std::size_t row, const std::string& name) const {
        const std::string& cell = text(row, name);
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str()) {
            throw std::invalid_argument("csv cell is not numeric: " + cell);
        }
        return v;
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    auto in = detail::open_in(path, std::ios::in);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path.string());
    CsvTable table;
    table.header = detail::split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != table.header.size()) {
            throw std::runtime_error("ragged csv row in " + path.string());
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

} // namespace skt
