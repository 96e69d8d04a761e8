#pragma once

// Applying a trained model (encoder, time-reversed decoder), stability
// diagnostics, and checkpoint persistence.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddr/data.hpp"
#include "ddr/dynamics.hpp"
#include "ddr/error.hpp"
#include "ddr/parallel.hpp"
#include "ddr/training.hpp"

namespace ddr {

// ---------------------------------------------------------------------------
// Encoder / decoder
// ---------------------------------------------------------------------------

/// y = Q h(T) for every column of X.
inline Eigen::MatrixXd encode(const ModelParams& m, const Eigen::MatrixXd& X) {
  if (X.rows() != m.dim())
    throw InvalidInput("data has " + std::to_string(X.rows()) + " rows, model expects " + std::to_string(m.dim()));
  return m.Q * solve_forward(m.beta, m.spec, X, m.grid, m.clip).final_states();
}

struct DecodeResult {
  Eigen::MatrixXd points;       // d x N; failed columns are NaN
  std::vector<bool> failed;
  std::vector<bool> clipped;    // reverse solve hit the clamp
  std::vector<std::string> errors;

  std::size_t failures() const { return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true)); }
};

/// D(y) = h(0) where h solves the model ODE backwards from h(T) = Q^T y.
/// Divergent points are reported individually; the rest are still decoded.
inline DecodeResult decode(const ModelParams& m, const Eigen::MatrixXd& Y) {
  if (Y.rows() != m.k())
    throw InvalidInput("latent data has " + std::to_string(Y.rows()) + " rows, model expects " +
                       std::to_string(m.k()));
  const auto n = static_cast<std::size_t>(Y.cols());
  DecodeResult out;
  out.points.resize(m.dim(), Y.cols());
  out.failed.assign(n, false);
  out.clipped.assign(n, false);
  out.errors.assign(n, {});
  std::vector<char> failed(n, 0), clipped(n, 0);

  parallel_for(n, [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    try {
      bool hit = false;
      out.points.col(col) = solve_reverse(m.beta, m.spec, m.Q.transpose() * Y.col(col), m.grid, m.clip, &hit);
      clipped[i] = hit ? 1 : 0;
    } catch (const NumericalBlowup& e) {
      failed[i] = 1;
      out.errors[i] = e.what();
      out.points.col(col).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    out.failed[i] = failed[i] != 0;
    out.clipped[i] = clipped[i] != 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stability diagnostics
// ---------------------------------------------------------------------------

struct StabilityRow {
  double eta = 0.0;
  double displacement = 0.0;  // (1/N) sum_i ||E(x_i + z_i) - E(x_i)||
};

/// Re-encodes X + eta * G for each eta, G entrywise standard normal. One G
/// is drawn per repeat and shared by every eta (common random numbers), and
/// displacements are averaged over repeats.
inline std::vector<StabilityRow> stability_sweep(const ModelParams& m, const Eigen::MatrixXd& X,
                                                 const std::vector<double>& etas, std::uint64_t seed = 0,
                                                 int repeats = 1) {
  for (double eta : etas)
    if (!(eta >= 0.0)) throw InvalidInput("noise levels must be non-negative");
  if (repeats < 1) throw InvalidInput("repeats must be >= 1");
  const Eigen::MatrixXd base = encode(m, X);
  std::vector<StabilityRow> rows;
  for (double eta : etas) rows.push_back({eta, 0.0});

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int rep = 0; rep < repeats; ++rep) {
    Eigen::MatrixXd G(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < G.cols(); ++j)
      for (Eigen::Index i = 0; i < G.rows(); ++i) G(i, j) = normal(rng);
    for (auto& row : rows) {
      if (row.eta == 0.0) continue;
      const Eigen::MatrixXd moved = encode(m, X + row.eta * G) - base;
      double sum = 0.0;
      for (Eigen::Index i = 0; i < moved.cols(); ++i) sum += moved.col(i).norm();
      row.displacement += sum / static_cast<double>(X.cols()) / repeats;
    }
  }
  return rows;
}

/// Largest observed ratio ||E(x + delta) - E(x)|| / ||delta|| over random
/// samples x from X and random directions delta of norm `radius`.
inline double empirical_lipschitz(const ModelParams& m, const Eigen::MatrixXd& X, int trials = 100,
                                  double radius = 1e-3, std::uint64_t seed = 0) {
  if (trials < 1 || !(radius > 0.0)) throw InvalidInput("need trials >= 1 and radius > 0");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, X.cols() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd base(X.rows(), trials), moved(X.rows(), trials);
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd dir(X.rows());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    base.col(t) = X.col(pick(rng));
    moved.col(t) = base.col(t) + radius * dir.normalized();
  }
  const Eigen::MatrixXd a = encode(m, base), b = encode(m, moved);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) worst = std::max(worst, (b.col(t) - a.col(t)).norm() / radius);
  return worst;
}

/// Gronwall-type constants for the discrete encoder on the box that contains
/// every forward state of X (inflated by `margin`). With L bounding the
/// Lipschitz constant of beta Xi on the box, one Euler step expands distances
/// by at most (1 + dt L) and contracts them by at least (1 - dt L).
struct LipschitzBound {
  double field = 0.0;  // L
  double upper = 0.0;  // (1 + dt L)^M, bounds ||E(x1) - E(x2)|| / ||x1 - x2||
  double lower = 0.0;  // (1 - dt L)^-M, bounds ||x1 - x2|| / ||h1(T) - h2(T)||; inf if dt L >= 1
  bool clipped = false;  // the clamp was active; `lower` is then not rigorous
};

inline LipschitzBound lipschitz_bound(const ModelParams& m, const Eigen::MatrixXd& X, double margin = 0.0) {
  const TrajectoryBatch traj = solve_forward(m.beta, m.spec, X, m.grid, m.clip);
  Eigen::VectorXd radius = Eigen::VectorXd::Zero(m.dim());
  for (const auto& path : traj.h) radius = radius.cwiseMax(path.cwiseAbs().rowwise().maxCoeff());
  radius.array() += margin;
  LipschitzBound b;
  b.field = field_lipschitz_bound(m.spec, m.beta, radius);
  const double dt = m.grid.step();
  const double M = m.grid.steps();
  b.upper = std::pow(1.0 + dt * b.field, M);
  b.lower = dt * b.field < 1.0 ? std::pow(1.0 - dt * b.field, -M) : std::numeric_limits<double>::infinity();
  b.clipped = traj.any_clipped();
  return b;
}

/// Pairwise distortion of the embedding on a dataset.
struct QuasiIsometryReport {
  LipschitzBound bound;
  double max_ratio = 0.0;                                   // max ||y_i - y_j|| / ||x_i - x_j||
  double min_ratio = std::numeric_limits<double>::infinity();  // min of the same
  double max_residual_norm = 0.0;                           // max_i ||(I - Q^T Q) h_i(T)||
  long upper_violations = 0;  // ||y_i - y_j|| > C_up ||x_i - x_j||
  long lower_violations = 0;  // ||y_i - y_j|| < ||x_i - x_j|| / C_low - ||r_i|| - ||r_j||
  long pairs = 0;
};

inline QuasiIsometryReport quasi_isometry(const ModelParams& m, const Eigen::MatrixXd& X) {
  QuasiIsometryReport rep;
  rep.bound = lipschitz_bound(m, X);
  const Eigen::MatrixXd HT = solve_forward(m.beta, m.spec, X, m.grid, m.clip).final_states();
  const Eigen::MatrixXd Y = m.Q * HT;
  const Eigen::MatrixXd R = HT - m.Q.transpose() * Y;
  Eigen::VectorXd rnorm(R.cols());
  for (Eigen::Index i = 0; i < R.cols(); ++i) rnorm[i] = R.col(i).norm();
  rep.max_residual_norm = rnorm.size() ? rnorm.maxCoeff() : 0.0;
  // Relative slack absorbs rounding in the distance computations.
  const double slack = 1e-12;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < X.cols(); ++j) {
      const double dx = (X.col(i) - X.col(j)).norm();
      if (dx == 0.0) continue;
      const double dy = (Y.col(i) - Y.col(j)).norm();
      ++rep.pairs;
      rep.max_ratio = std::max(rep.max_ratio, dy / dx);
      rep.min_ratio = std::min(rep.min_ratio, dy / dx);
      if (dy > rep.bound.upper * dx * (1.0 + slack)) ++rep.upper_violations;
      if (dy < dx / rep.bound.lower - rnorm[i] - rnorm[j] - slack * dx) ++rep.lower_violations;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "ddr-checkpoint";

struct Provenance {
  std::uint64_t seed = 0;
  int epochs = 0;
  std::string data_fingerprint;
};

struct Checkpoint {
  ModelParams model;
  Provenance provenance;
  std::optional<PcaProvenance> pca;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// FNV-1a over the shape and the raw bytes of the values.
inline std::string fingerprint(const Eigen::MatrixXd& X) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int64_t shape[2] = {X.rows(), X.cols()};
  mix(shape, sizeof(shape));
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double v = X(i, j);
      mix(&v, sizeof(v));
    }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& A) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) data.push_back(A(i, j));
  return {{"rows", A.rows()}, {"cols", A.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw CheckpointError("matrix '" + name + "' has inconsistent shape and data length");
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) A(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
  return A;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  const ModelParams& m = c.model;
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["format_version"] = kCheckpointVersion;
  j["dictionary"] = {{"d", m.spec.dim()}, {"degrees", m.spec.degrees()}};
  j["beta"] = detail::matrix_to_json(m.beta);
  j["Q"] = detail::matrix_to_json(m.Q);
  j["mu"] = m.mu;
  j["T"] = m.grid.final_time();
  j["dt"] = m.grid.step();
  j["k"] = m.k();
  j["clip"] = std::isfinite(m.clip) ? nlohmann::json(m.clip) : nlohmann::json(nullptr);
  j["provenance"] = {{"seed", c.provenance.seed},
                     {"epochs", c.provenance.epochs},
                     {"data_fingerprint", c.provenance.data_fingerprint}};
  if (c.pca) j["pca"] = {{"mean", detail::matrix_to_json(c.pca->mean)}, {"basis", detail::matrix_to_json(c.pca->basis)}};
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw CheckpointError("not a DDR checkpoint");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    ModelParams& m = c.model;
    m.spec = DictionarySpec(j.at("dictionary").at("d").get<int>(), j.at("dictionary").at("degrees").get<std::vector<int>>());
    m.beta = detail::matrix_from_json(j.at("beta"), "beta");
    m.Q = detail::matrix_from_json(j.at("Q"), "Q");
    m.mu = j.at("mu").get<double>();
    m.grid = TimeGrid(j.at("T").get<double>(), j.at("dt").get<double>());
    m.clip = j.at("clip").is_null() ? kNoClip : j.at("clip").get<double>();
    if (j.at("k").get<int>() != m.Q.rows()) throw CheckpointError("k does not match the stored projection");
    if (m.beta.rows() != m.spec.dim() || m.beta.cols() != m.spec.size())
      throw CheckpointError("beta shape does not match the dictionary");
    if (m.Q.cols() != m.spec.dim()) throw CheckpointError("Q shape does not match the dictionary");
    const auto& p = j.at("provenance");
    c.provenance.seed = p.at("seed").get<std::uint64_t>();
    c.provenance.epochs = p.at("epochs").get<int>();
    c.provenance.data_fingerprint = p.at("data_fingerprint").get<std::string>();
    if (j.contains("pca")) {
      PcaProvenance pca;
      pca.mean = detail::matrix_from_json(j.at("pca").at("mean"), "pca.mean");
      pca.basis = detail::matrix_from_json(j.at("pca").at("basis"), "pca.basis");
      c.pca = std::move(pca);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    validate(c.model);
  } catch (const InvalidInput& e) {
    throw CheckpointError(std::string("checkpoint failed validation: ") + e.what());
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  validate(c.model);
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(c).dump(2) << '\n';
  out.flush();
  if (!out) throw InvalidInput("write to '" + path + "' failed");
}

inline void save(const ModelParams& m, const std::string& path) { save_checkpoint(Checkpoint{m, {}, {}}, path); }

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, 0, "checkpoint '" + path + "' is not valid JSON at byte " + std::to_string(e.byte) + ": " +
                               e.what());
  }
  return checkpoint_from_json(j);
}

inline ModelParams load(const std::string& path) { return load_checkpoint(path).model; }

}  // namespace ddr
