#pragma once

// Datasets: column-per-sample matrices, the synthetic S-surface generator and
// CSV ingestion (rows = samples on disk).

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ddr/error.hpp"
#include "ddr/time_grid.hpp"

namespace ddr {

/// Per-feature affine map x -> lower + (x - min) * (upper - lower) / (max - min).
struct MinMaxScaling {
  double lower = 0.0;
  double upper = 1.0;
  Eigen::VectorXd min;
  Eigen::VectorXd max;
  std::vector<bool> degenerate;  // constant features, mapped to `lower`
};

/// Centering and basis applied by pca_reduce, kept so reduced data can be
/// traced back to the original coordinates.
struct PcaProvenance {
  Eigen::VectorXd mean;   // original-space column mean
  Eigen::MatrixXd basis;  // d_original x d_target, orthonormal columns
};

struct DatasetMatrix {
  Eigen::MatrixXd values;  // d x N, one sample per column
  std::vector<std::string> feature_names;
  std::optional<MinMaxScaling> scaling;
  std::optional<PcaProvenance> pca;
  std::vector<std::string> warnings;

  DatasetMatrix() = default;
  explicit DatasetMatrix(Eigen::MatrixXd v) : values(std::move(v)) {}

  Eigen::Index dim() const noexcept { return values.rows(); }
  Eigen::Index samples() const noexcept { return values.cols(); }
};

/// Throws unless the matrix is non-empty and finite.
inline void validate(const DatasetMatrix& X) {
  if (X.values.rows() < 1 || X.values.cols() < 1) throw InvalidInput("dataset is empty");
  if (!X.values.allFinite()) throw InvalidInput("dataset contains non-finite values");
  if (!X.feature_names.empty() && static_cast<Eigen::Index>(X.feature_names.size()) != X.dim())
    throw InvalidInput("feature_names length does not match dataset dimension");
}

// ---------------------------------------------------------------------------
// S-surface generator
// ---------------------------------------------------------------------------

enum class SDataScheme {
  rk4,    // classical 4th-order, step 1e-3 (reference accuracy)
  euler,  // forward Euler on the model grid
};

namespace detail {
inline Eigen::Vector3d s_field(const Eigen::Vector3d& z) {
  return {2.0 * z[2] * z[2] * z[2], 0.0, -2.0 * z[0] * z[0] * z[0]};
}
}  // namespace detail

inline constexpr double kSDataRk4Step = 1e-3;

/// Flows z' = (2 z3^3, 0, -2 z1^3) from the planar mesh (z1, z2) in
/// [-1, 1]^2, z3 = 0, to time grid.final_time(). Sample index is
/// row * grid_pts + col with z1 = mesh[col], z2 = mesh[row]. RK4 takes
/// sub-steps of at most kSDataRk4Step inside each grid interval; Euler steps
/// on the grid itself. If `paths` is given it receives each sample's states
/// at the grid nodes (3 x (M+1)).
inline DatasetMatrix gen_sdata(int grid_pts = 20, const TimeGrid& grid = TimeGrid(),
                               SDataScheme scheme = SDataScheme::rk4,
                               std::vector<Eigen::MatrixXd>* paths = nullptr) {
  if (grid_pts < 2) throw InvalidInput("gen_sdata needs grid_pts >= 2");
  const int n = grid_pts * grid_pts;
  const int M = grid.steps();
  Eigen::MatrixXd out(3, n);
  if (paths) paths->assign(static_cast<std::size_t>(n), Eigen::MatrixXd(3, M + 1));

  const int sub = scheme == SDataScheme::rk4
                      ? std::max(1, static_cast<int>(std::ceil(grid.step() / kSDataRk4Step - 1e-9)))
                      : 1;
  const double h = grid.step() / sub;

  for (int row = 0; row < grid_pts; ++row) {
    for (int col = 0; col < grid_pts; ++col) {
      const int idx = row * grid_pts + col;
      Eigen::Vector3d z(-1.0 + 2.0 * col / (grid_pts - 1), -1.0 + 2.0 * row / (grid_pts - 1), 0.0);
      if (paths) (*paths)[static_cast<std::size_t>(idx)].col(0) = z;
      for (int m = 0; m < M; ++m) {
        for (int s = 0; s < sub; ++s) {
          if (scheme == SDataScheme::euler) {
            z += h * detail::s_field(z);
          } else {
            const Eigen::Vector3d k1 = detail::s_field(z);
            const Eigen::Vector3d k2 = detail::s_field(z + 0.5 * h * k1);
            const Eigen::Vector3d k3 = detail::s_field(z + 0.5 * h * k2);
            const Eigen::Vector3d k4 = detail::s_field(z + h * k3);
            z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
          }
        }
        if (paths) (*paths)[static_cast<std::size_t>(idx)].col(m + 1) = z;
      }
      out.col(idx) = z;
    }
  }
  DatasetMatrix X(std::move(out));
  X.feature_names = {"z1", "z2", "z3"};
  return X;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Rescales every feature to [lower, upper]. Constant features go to `lower`
/// and produce a warning.
inline void minmax_normalize(DatasetMatrix& X, double lower = 0.0, double upper = 1.0) {
  if (!(upper > lower)) throw InvalidInput("minmax needs upper > lower");
  MinMaxScaling s;
  s.lower = lower;
  s.upper = upper;
  s.min = X.values.rowwise().minCoeff();
  s.max = X.values.rowwise().maxCoeff();
  s.degenerate.assign(static_cast<std::size_t>(X.dim()), false);
  for (Eigen::Index r = 0; r < X.dim(); ++r) {
    const double range = s.max[r] - s.min[r];
    if (range == 0.0) {
      s.degenerate[static_cast<std::size_t>(r)] = true;
      X.values.row(r).setConstant(lower);
      X.warnings.push_back("feature " + std::to_string(r + 1) +
                           " is constant; min-max range is degenerate, mapped to lower bound");
      continue;
    }
    X.values.row(r) = ((X.values.row(r).array() - s.min[r]) * ((upper - lower) / range) + lower).matrix();
  }
  X.scaling = std::move(s);
}

/// Undoes minmax_normalize on an arbitrary d x N block. Degenerate features
/// return their original constant.
inline Eigen::MatrixXd minmax_invert(const MinMaxScaling& s, const Eigen::MatrixXd& scaled) {
  Eigen::MatrixXd out(scaled.rows(), scaled.cols());
  for (Eigen::Index r = 0; r < scaled.rows(); ++r) {
    if (s.degenerate[static_cast<std::size_t>(r)]) {
      out.row(r).setConstant(s.min[r]);
      continue;
    }
    const double k = (s.max[r] - s.min[r]) / (s.upper - s.lower);
    out.row(r) = ((scaled.row(r).array() - s.lower) * k + s.min[r]).matrix();
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvOptions {
  bool has_header = false;
  char delimiter = ',';
  enum class Normalize { none, minmax } normalize = Normalize::none;
  double lower = 0.0;
  double upper = 1.0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline double parse_double(std::string_view cell, std::size_t row, std::size_t col) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw ParseError(row, col, "non-numeric cell '" + std::string(cell) + "'");
  if (!std::isfinite(v)) throw ParseError(row, col, "non-finite cell '" + std::string(cell) + "'");
  return v;
}

/// Shortest decimal string that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Parses CSV text (rows = samples) into a column-per-sample dataset.
inline DatasetMatrix parse_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;

  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split(line, opt.delimiter);
    if (opt.has_header && header.empty() && rows.empty()) {
      for (auto c : cells) header.emplace_back(c);
      width = header.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw ParseError(row, 0, "ragged row: expected " + std::to_string(width) + " cells, found " +
                                   std::to_string(cells.size()));
    std::vector<double> vals(width);
    for (std::size_t c = 0; c < width; ++c) vals[c] = detail::parse_double(cells[c], row, c + 1);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError(0, 0, "CSV contains no data rows");

  DatasetMatrix X(Eigen::MatrixXd(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(rows.size())));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < width; ++c)
      X.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = rows[i][c];
  X.feature_names = std::move(header);
  if (opt.normalize == CsvOptions::Normalize::minmax) minmax_normalize(X, opt.lower, opt.upper);
  return X;
}

inline DatasetMatrix load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
  return parse_csv(in, opt);
}

inline void write_csv(std::ostream& out, const Eigen::MatrixXd& values,
                      const std::vector<std::string>& header = {}, char delim = ',') {
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? std::string(1, delim) : "") << header[c];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < values.cols(); ++i) {
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      if (r) out << delim;
      out << detail::format_double(values(r, i));
    }
    out << '\n';
  }
}

/// Writes rows = samples. A header row is emitted only when feature names exist.
inline void save_csv(const DatasetMatrix& X, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  write_csv(out, X.values, X.feature_names);
  out.flush();
  if (!out) throw InvalidInput("write to '" + path + "' failed");
}

}  // namespace ddr
