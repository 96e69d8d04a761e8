// Command-line front end for dynamical dimension reduction.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ddr/ddr.hpp"

namespace {

using namespace ddr;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Global {
  unsigned threads = 0;
  double clip = kDefaultClip;
  bool clip_given = false;
  bool force = false;
  bool verbose = false;
};

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

void ensure_writable(const std::string& path, const Global& g) {
  if (path.empty()) throw ConfigError("output path is empty");
  if (std::filesystem::exists(path) && !g.force)
    throw ConfigError("refusing to overwrite existing file '" + path + "' (pass --force)");
}

void check_output_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw ConfigError("directory of output '" + path + "' does not exist");
}

void prepare_output(const std::string& path, const Global& g) {
  ensure_writable(path, g);
  check_output_dir(path);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

std::string fmt(double v) { return detail::format_double(v); }

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i + 1));
  return names;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& cols, const std::vector<std::string>& header) {
  auto out = open_output(path);
  write_csv(out, cols, header);
  finish_output(out, path);
}

// Dataset input flags shared by every command that reads data.
struct DataArgs {
  std::string path;
  std::string header = "auto";
  char delimiter = ',';
  std::string normalize = "none";
  double lower = 0.0;
  double upper = 1.0;

  void add(CLI::App* cmd, const std::string& flag = "--data", bool required = true) {
    auto* opt = cmd->add_option(flag, path, "input CSV, rows = samples")->check(CLI::ExistingFile);
    if (required) opt->required();
    cmd->add_option("--header", header, "header row: auto, yes or no")
        ->check(CLI::IsMember({"auto", "yes", "no"}))
        ->capture_default_str();
    cmd->add_option("--delimiter", delimiter, "field separator")->capture_default_str();
    cmd->add_option("--normalize", normalize, "per-feature scaling: none or minmax")
        ->check(CLI::IsMember({"none", "minmax"}))
        ->capture_default_str();
    cmd->add_option("--norm-lower", lower, "minmax target lower bound")->capture_default_str();
    cmd->add_option("--norm-upper", upper, "minmax target upper bound")->capture_default_str();
  }

  DatasetMatrix load() const {
    CsvOptions opt;
    opt.delimiter = delimiter;
    opt.has_header = header == "yes" || (header == "auto" && first_row_is_header());
    if (normalize == "minmax") {
      if (!(upper > lower)) throw ConfigError("--norm-upper must exceed --norm-lower");
      opt.normalize = CsvOptions::Normalize::minmax;
      opt.lower = lower;
      opt.upper = upper;
    }
    DatasetMatrix X = load_csv(path, opt);
    validate(X);
    for (const auto& w : X.warnings) std::cerr << "warning: " << w << '\n';
    return X;
  }

 private:
  // A header is assumed when the first non-blank row has a non-numeric cell.
  bool first_row_is_header() const {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      for (auto cell : detail::split(line, delimiter)) {
        try {
          detail::parse_double(cell, 1, 1);
        } catch (const ParseError&) {
          return true;
        }
      }
      return false;
    }
    return false;
  }
};

// Training flags shared by train and lcurve.
struct TrainArgs {
  TrainConfig config;
  double T = 1.0;
  double dt = 0.01;
  std::string init = "pca-linear";

  void add(CLI::App* cmd, bool with_mu = true) {
    cmd->add_option("--k", config.k, "target dimension")->capture_default_str();
    if (with_mu) cmd->add_option("--mu", config.mu, "kinetic-energy weight")->capture_default_str();
    cmd->add_option("--degrees", config.degrees, "dictionary degrees, subset of 0123")->capture_default_str();
    cmd->add_option("--epochs", config.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch-size", config.batch_size, "samples per batch")->capture_default_str();
    cmd->add_option("--lr-start", config.lr_start, "learning rate at the first epoch")->capture_default_str();
    cmd->add_option("--lr-end", config.lr_end, "learning rate at the last epoch")->capture_default_str();
    cmd->add_option("--T", T, "final time")->capture_default_str();
    cmd->add_option("--dt", dt, "Euler step")->capture_default_str();
    cmd->add_option("--seed", config.seed, "random seed")->capture_default_str();
    cmd->add_option("--init", init, "initialization: pca-linear or random")
        ->check(CLI::IsMember({"pca-linear", "random"}))
        ->capture_default_str();
    cmd->add_option("--init-std", config.init_std, "std of random beta entries")->capture_default_str();
  }

  TrainConfig resolve(const Global& g) const {
    TrainConfig c = config;
    c.grid = TimeGrid(T, dt);
    c.init = init == "random" ? InitMode::random : InitMode::pca_linear;
    c.clip = g.clip;
    return c;
  }
};

Checkpoint read_checkpoint(const std::string& path, const Global& g) {
  Checkpoint c = load_checkpoint(path);
  // The stored clamp is used unless --clip is given.
  if (g.clip_given) c.model.clip = g.clip;
  return c;
}

// Maps data into the model's coordinates, applying the stored PCA reduction
// when the data is in the original (unreduced) space.
Eigen::MatrixXd to_model_space(const Checkpoint& c, const DatasetMatrix& X) {
  if (c.pca && X.dim() == c.pca->basis.rows() && X.dim() != c.model.dim())
    return c.pca->basis.transpose() * (X.values.colwise() - c.pca->mean);
  if (X.dim() != c.model.dim())
    throw InvalidInput("data has " + std::to_string(X.dim()) + " features, model expects " +
                       std::to_string(c.model.dim()));
  return X.values;
}

void print_report(const ObjectiveReport& r, const char* label) {
  std::cout << label << " J1 " << fmt(r.J1) << " J2 " << fmt(r.J2) << " J " << fmt(r.J) << " mu " << fmt(r.mu)
            << " N " << r.N << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct GenSdataCmd {
  std::string out;
  int grid_pts = 20;
  std::string scheme = "rk4";
  double T = 1.0;
  double dt = 0.01;
  std::string trajectories;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("gen-sdata", "generate the S-shaped surface dataset");
    c->add_option("--out", out, "output CSV")->required();
    c->add_option("--grid-pts", grid_pts, "mesh points per axis")->capture_default_str();
    c->add_option("--scheme", scheme, "generator integrator: rk4 or euler")
        ->check(CLI::IsMember({"rk4", "euler"}))
        ->capture_default_str();
    c->add_option("--T", T, "flow time")->capture_default_str();
    c->add_option("--dt", dt, "grid step (Euler step, or RK4 output spacing)")->capture_default_str();
    c->add_option("--trajectories", trajectories, "optional CSV of every path: sample,t,z1,z2,z3");
  }

  int run(const Global& g) const {
    prepare_output(out, g);
    if (!trajectories.empty()) prepare_output(trajectories, g);
    const TimeGrid grid(T, dt);
    std::vector<Eigen::MatrixXd> paths;
    const DatasetMatrix X = gen_sdata(grid_pts, grid, scheme == "euler" ? SDataScheme::euler : SDataScheme::rk4,
                                      trajectories.empty() ? nullptr : &paths);
    save_csv(X, out);
    if (!trajectories.empty()) {
      auto f = open_output(trajectories);
      f << "sample,t,z1,z2,z3\n";
      for (std::size_t i = 0; i < paths.size(); ++i)
        for (Eigen::Index m = 0; m < paths[i].cols(); ++m)
          f << i << ',' << fmt(grid.time(static_cast<int>(m))) << ',' << fmt(paths[i](0, m)) << ','
            << fmt(paths[i](1, m)) << ',' << fmt(paths[i](2, m)) << '\n';
      finish_output(f, trajectories);
    }
    std::cout << "wrote " << X.samples() << " samples x " << X.dim() << " features to " << out << '\n';
    return kExitOk;
  }
};

struct TrainCmd {
  DataArgs data;
  TrainArgs train;
  std::string out_model;
  std::string out_trace;
  int pca_reduce_to = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "train a model");
    data.add(c);
    train.add(c);
    c->add_option("--out-model", out_model, "checkpoint path (JSON)")->required();
    c->add_option("--out-trace", out_trace, "per-epoch CSV: epoch,J1,J2,J,lr");
    c->add_option("--pca-reduce", pca_reduce_to,
                  "first project centered data onto this many principal directions (stored in the checkpoint)");
  }

  int run(const Global& g) const {
    prepare_output(out_model, g);
    if (!out_trace.empty()) prepare_output(out_trace, g);
    DatasetMatrix X = data.load();
    const std::string fp = fingerprint(X.values);
    if (pca_reduce_to > 0) X = pca_reduce(X, pca_reduce_to);
    const TrainConfig cfg = train.resolve(g);

    auto on_epoch = [&](const EpochRecord& r) {
      if (g.verbose)
        std::cerr << "epoch " << r.epoch << " J1 " << r.report.J1 << " J2 " << r.report.J2 << " J " << r.report.J
                  << " lr " << r.lr << '\n';
    };
    auto write_trace = [&](const TrainTrace& t) {
      if (out_trace.empty()) return;
      auto f = open_output(out_trace);
      f << "epoch,J1,J2,J,lr\n";
      for (const auto& r : t.epochs)
        f << r.epoch << ',' << fmt(r.report.J1) << ',' << fmt(r.report.J2) << ',' << fmt(r.report.J) << ','
          << fmt(r.lr) << '\n';
      finish_output(f, out_trace);
    };
    auto make_checkpoint = [&](const ModelParams& m, int epochs) {
      Checkpoint ck{m, {cfg.seed, epochs, fp}, X.pca};
      return ck;
    };

    try {
      const TrainResult r = ddr::train(X.values, cfg, on_epoch);
      save_checkpoint(make_checkpoint(r.params, cfg.epochs), out_model);
      write_trace(r.trace);
      print_report(r.trace.initial, "initial");
      print_report(r.trace.epochs.empty() ? r.trace.initial : r.trace.epochs.back().report, "final");
    } catch (const TrainingDiverged& e) {
      const int good = e.epoch();  // epochs completed before the failure
      const std::string partial = out_model + ".partial";
      if (g.force || !std::filesystem::exists(partial)) {
        save_checkpoint(make_checkpoint(e.last_good(), good), partial);
        std::cerr << "last good parameters written to " << partial << '\n';
      }
      write_trace(e.trace());
      std::cerr << "error: " << e.what() << "; last good epoch "
                << (good > 0 ? std::to_string(good - 1) : std::string("none (initial parameters)")) << '\n';
      return kExitNumerical;
    }
    return kExitOk;
  }
};

struct EmbedCmd {
  std::string model;
  DataArgs data;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("embed", "encode data with a trained model: y = Q h(T)");
    c->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
    data.add(c);
    c->add_option("--out", out, "output CSV (columns y1..yk)")->required();
  }

  int run(const Global& g) const {
    prepare_output(out, g);
    const Checkpoint ck = read_checkpoint(model, g);
    const DatasetMatrix X = data.load();
    const Eigen::MatrixXd Y = encode(ck.model, to_model_space(ck, X));
    write_matrix_csv(out, Y, numbered("y", Y.rows()));
    std::cout << "embedded " << Y.cols() << " samples into " << Y.rows() << " dimensions\n";
    return kExitOk;
  }
};

struct DecodeCmd {
  std::string model;
  DataArgs latent;
  int mesh_pts = 0;
  DataArgs mesh_data;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("decode", "decode latent points by flowing Q^T y backwards in time");
    c->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
    c->add_option("--latent", latent.path, "latent CSV (k columns)")->check(CLI::ExistingFile);
    c->add_option("--mesh-pts", mesh_pts,
                  "instead of --latent, decode a mesh of this many points per axis over the embedding "
                  "bounding box of --data (k = 2 only)");
    c->add_option("--data", mesh_data.path, "dataset whose embedding bounds the mesh")->check(CLI::ExistingFile);
    c->add_option("--out", out, "output CSV")->required();
  }

  Eigen::MatrixXd mesh(const Checkpoint& ck) const {
    if (ck.model.k() != 2) throw ConfigError("--mesh-pts needs a model with k = 2");
    if (mesh_pts < 2) throw ConfigError("--mesh-pts must be >= 2");
    if (mesh_data.path.empty()) throw ConfigError("--mesh-pts needs --data");
    const Eigen::MatrixXd Y = encode(ck.model, to_model_space(ck, mesh_data.load()));
    const Eigen::VectorXd lo = Y.rowwise().minCoeff(), hi = Y.rowwise().maxCoeff();
    Eigen::MatrixXd grid(2, mesh_pts * mesh_pts);
    for (int r = 0; r < mesh_pts; ++r)
      for (int c = 0; c < mesh_pts; ++c) {
        const double a = static_cast<double>(c) / (mesh_pts - 1), b = static_cast<double>(r) / (mesh_pts - 1);
        grid.col(r * mesh_pts + c) << lo[0] + a * (hi[0] - lo[0]), lo[1] + b * (hi[1] - lo[1]);
      }
    return grid;
  }

  int run(const Global& g) const {
    if (latent.path.empty() == (mesh_pts == 0)) throw ConfigError("give exactly one of --latent and --mesh-pts");
    prepare_output(out, g);
    const Checkpoint ck = read_checkpoint(model, g);
    const Eigen::MatrixXd Y = mesh_pts > 0 ? mesh(ck) : latent.load().values;
    const DecodeResult r = decode(ck.model, Y);
    Eigen::MatrixXd points = r.points;
    if (ck.pca) points = (ck.pca->basis * points).colwise() + ck.pca->mean;
    write_matrix_csv(out, points, numbered("x", points.rows()));
    for (std::size_t i = 0; i < r.failed.size(); ++i)
      if (r.failed[i]) std::cerr << "warning: point " << i << " failed to decode: " << r.errors[i] << '\n';
    std::cout << "decoded " << (Y.cols() - static_cast<Eigen::Index>(r.failures())) << " of " << Y.cols()
              << " points\n";
    return r.failures() == static_cast<std::size_t>(Y.cols()) && Y.cols() > 0 ? kExitNumerical : kExitOk;
  }
};

struct PcaCmd {
  DataArgs data;
  int k = 2;
  std::string out;
  int reduce_to = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand(
        "pca", "PCA baseline. Embedding uses uncentered data (y = U_k^T x); --reduce centers first");
    data.add(c);
    c->add_option("--k", k, "embedding dimension")->capture_default_str();
    c->add_option("--out", out, "output CSV: the embedding, or the reduced data with --reduce")->required();
    c->add_option("--reduce", reduce_to, "write centered data projected onto this many directions instead");
  }

  int run(const Global& g) const {
    prepare_output(out, g);
    const DatasetMatrix X = data.load();
    if (reduce_to > 0) {
      const DatasetMatrix R = pca_reduce(X, reduce_to);
      save_csv(R, out);
      std::cout << "reduced " << X.dim() << " features to " << R.dim() << '\n';
      return kExitOk;
    }
    const PcaEmbedding e = pca_embed(X, k);
    write_matrix_csv(out, e.Y, numbered("y", e.Y.rows()));
    if (e.degenerate) std::cerr << "warning: sigma_k equals sigma_(k+1); the PCA subspace is not unique\n";
    std::cout << "residual " << fmt(e.residual) << '\n';
    return kExitOk;
  }
};

struct LcurveCmd {
  DataArgs data;
  TrainArgs train;
  std::vector<double> mus;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("lcurve", "train one model per mu and report the L-curve and its corner");
    data.add(c);
    train.add(c, false);
    c->add_option("--mus", mus, "mu values (default: the standard 12-point list)")->delimiter(',');
    c->add_option("--out", out, "output CSV: mu,J1,J2,ok")->required();
  }

  int run(const Global& g) const {
    prepare_output(out, g);
    const DatasetMatrix X = data.load();
    const auto list = mus.empty() ? default_mu_list() : mus;
    const auto pts = lcurve(X.values, train.resolve(g), list, [&](const LCurvePoint& p) {
      if (g.verbose) std::cerr << "mu " << p.mu << (p.ok ? " done" : " failed: " + p.error) << '\n';
    });
    auto f = open_output(out);
    f << "mu,J1,J2,ok\n";
    for (const auto& p : pts) f << fmt(p.mu) << ',' << fmt(p.J1) << ',' << fmt(p.J2) << ',' << (p.ok ? 1 : 0) << '\n';
    finish_output(f, out);
    for (const auto& p : pts)
      if (!p.ok) std::cerr << "warning: mu " << fmt(p.mu) << " failed: " << p.error << '\n';
    if (const auto corner = lcurve_corner(pts))
      std::cout << "corner mu " << fmt(pts[*corner].mu) << '\n';
    else
      std::cout << "corner undetermined (fewer than three successful points)\n";
    return kExitOk;
  }
};

struct GradCheckCmd {
  std::string model;
  DataArgs data;
  int d = 3, n = 5, k = 1;
  std::string degrees = "0123";
  double mu = 0.01;
  double T = 1.0;
  double dt = 0.01;
  double step = 1e-5;
  std::uint64_t seed = 0;
  double beta_std = 0.3;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand(
        "grad-check", "compare adjoint gradients against central differences of the discretized objective");
    c->add_option("--model", model, "check at a checkpoint's parameters (needs --data)")->check(CLI::ExistingFile);
    data.add(c, "--data", false);
    c->add_option("--d", d, "random instance: dimension")->capture_default_str();
    c->add_option("--n", n, "random instance: samples")->capture_default_str();
    c->add_option("--k", k, "random instance: target dimension")->capture_default_str();
    c->add_option("--degrees", degrees, "random instance: dictionary degrees")->capture_default_str();
    c->add_option("--mu", mu, "kinetic-energy weight")->capture_default_str();
    c->add_option("--T", T, "final time")->capture_default_str();
    c->add_option("--dt", dt, "Euler step")->capture_default_str();
    c->add_option("--step", step, "finite-difference step")->capture_default_str();
    c->add_option("--seed", seed, "random instance: seed")->capture_default_str();
    c->add_option("--beta-std", beta_std, "random instance: std of beta entries")->capture_default_str();
  }

  int run(const Global& g) const {
    Eigen::MatrixXd X, beta, Q;
    DictionarySpec spec;
    double mu_used = mu;
    const TimeGrid grid(T, dt);
    if (!model.empty()) {
      if (data.path.empty()) throw ConfigError("--model needs --data");
      const Checkpoint ck = read_checkpoint(model, g);
      X = to_model_space(ck, data.load());
      beta = ck.model.beta;
      Q = ck.model.Q;
      spec = ck.model.spec;
      mu_used = ck.model.mu;
    } else {
      GradCheckProblem p = make_grad_check_problem(d, n, k, degrees, seed, beta_std);
      X = std::move(p.X);
      beta = std::move(p.beta);
      Q = std::move(p.Q);
      spec = std::move(p.spec);
    }
    const GradientPair a = grad(beta, Q, spec, X, grid, mu_used, g.clip);
    const GradientPair b = fd_grad(beta, Q, spec, X, grid, mu_used, step, g.clip);
    const GradientComparison c = compare_gradients(a, b);
    std::cout << "max_entry_rel " << fmt(c.max_entry_rel) << '\n'
              << "frobenius_rel " << fmt(c.frobenius_rel) << '\n'
              << "beta_rel " << fmt(c.beta_rel) << '\n'
              << "q_rel " << fmt(c.q_rel) << '\n';
    return kExitOk;
  }
};

struct StabilityCmd {
  std::string model;
  DataArgs data;
  std::vector<double> etas{0.01, 0.05, 0.1, 0.5};
  std::uint64_t seed = 0;
  int repeats = 1;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("stability", "mean embedding displacement under Gaussian input noise");
    c->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
    data.add(c);
    c->add_option("--etas", etas, "noise standard deviations")->delimiter(',')->capture_default_str();
    c->add_option("--seed", seed, "noise seed")->capture_default_str();
    c->add_option("--repeats", repeats, "noise draws averaged per eta")->capture_default_str();
    c->add_option("--out", out, "output CSV: eta,displacement")->required();
  }

  int run(const Global& g) const {
    prepare_output(out, g);
    const Checkpoint ck = read_checkpoint(model, g);
    const Eigen::MatrixXd X = to_model_space(ck, data.load());
    const auto rows = stability_sweep(ck.model, X, etas, seed, repeats);
    auto f = open_output(out);
    f << "eta,displacement\n";
    for (const auto& r : rows) {
      f << fmt(r.eta) << ',' << fmt(r.displacement) << '\n';
      std::cout << "eta " << fmt(r.eta) << " displacement " << fmt(r.displacement) << '\n';
    }
    finish_output(f, out);
    return kExitOk;
  }
};

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("DDR_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError("DDR_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamical dimension reduction: learned ODE flows followed by an orthonormal projection"};
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--threads", g.threads, "worker threads (default: DDR_THREADS, else all cores)");
  auto* clip_opt =
      app.add_option("--clip", g.clip, "element-wise state clamp; inf disables")->capture_default_str();
  app.add_flag("--force", g.force, "overwrite existing output files");
  app.add_flag("-v,--verbose", g.verbose, "progress on stderr");

  GenSdataCmd gen;
  TrainCmd train;
  EmbedCmd embed;
  DecodeCmd decode_cmd;
  PcaCmd pca;
  LcurveCmd lc;
  GradCheckCmd gc;
  StabilityCmd stab;
  gen.add(app);
  train.add(app);
  embed.add(app);
  decode_cmd.add(app);
  pca.add(app);
  lc.add(app);
  gc.add(app);
  stab.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    g.clip_given = clip_opt->count() > 0;
    if (!(g.clip > 0.0)) throw ConfigError("--clip must be positive");
    ddr::set_thread_count(resolve_threads(g.threads));
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen-sdata") return gen.run(g);
    if (name == "train") return train.run(g);
    if (name == "embed") return embed.run(g);
    if (name == "decode") return decode_cmd.run(g);
    if (name == "pca") return pca.run(g);
    if (name == "lcurve") return lc.run(g);
    if (name == "grad-check") return gc.run(g);
    if (name == "stability") return stab.run(g);
    throw ConfigError("unknown subcommand " + name);
  } catch (const ddr::NumericalBlowup& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ddr::TrainingDiverged& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ddr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
