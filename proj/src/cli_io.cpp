#include "ydl/cli_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "ydl/dynamics.hpp"
#include "ydl/spde.hpp"
#include "ydl/transforms.hpp"

namespace ydl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::pair<Command, const char*> kCommands[] = {
    {Command::sample_static, "sample-static"},     {Command::simulate, "simulate"},
    {Command::solve_pde, "solve-pde"},             {Command::solve_spde, "solve-spde"},
    {Command::fluct_static, "fluct-static"},       {Command::fluct_dynamic, "fluct-dynamic"},
    {Command::verify_green, "verify-green"},       {Command::verify_poincare, "verify-poincare"},
    {Command::verify_rotation, "verify-rotation"}, {Command::verify_stationary, "verify-stationary"},
    {Command::report, "report"}};

}  // namespace

const char* to_string(Command c) {
  for (const auto& [k, name] : kCommands)
    if (k == c) return name;
  return "?";
}

Command parse_command(const std::string& s) {
  for (const auto& [k, name] : kCommands)
    if (s == name) return k;
  throw ConfigError("unknown command '" + s + "'");
}

void RunConfig::validate() const {
  if (N && *N < 1) throw ConfigError("N must be >= 1");
  if (M && *M < 1) throw ConfigError("M must be >= 1");
  if (t_end && !(*t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (dt && !(*dt > 0.0)) throw ConfigError("dt must be positive");
  if (du && !(*du > 0.0)) throw ConfigError("du must be positive");
  if (tolerance && *tolerance < 0.0) throw ConfigError("tolerance must be >= 0");
  if (!std::is_sorted(probes.begin(), probes.end())) throw ConfigError("probes must be sorted ascending");
  for (double u : probes) {
    if (statistics == Statistics::U && !(u > 0.0)) throw ConfigError("U probes must be positive");
    if (u < 0.0) throw ConfigError("probes must lie on the half-line");
  }
  switch (command) {
    case Command::sample_static:
    case Command::simulate:
    case Command::fluct_static:
    case Command::fluct_dynamic:
      if (!N) throw ConfigError(std::string(to_string(command)) + " needs N");
      break;
    default:
      break;
  }
  if (command == Command::fluct_dynamic && M && *M < 2) throw ConfigError("fluct-dynamic needs M >= 2");
  if (command == Command::fluct_static && M && *M < 2) throw ConfigError("fluct-static needs M >= 2");
}

json RunConfig::to_json() const {
  json j;
  j["command"] = to_string(command);
  j["stat"] = ydl::to_string(statistics);
  if (N) j["N"] = *N;
  if (M) j["M"] = *M;
  if (t_end) j["t_end"] = *t_end;
  if (dt) j["dt"] = *dt;
  if (du) j["du"] = *du;
  j["probes"] = probes;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["format"] = format == OutputFormat::csv ? "csv" : "jsonl";
  j["threads"] = threads;
  if (tolerance) j["tolerance"] = *tolerance;
  return j;
}

namespace {

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "jsonl") return OutputFormat::jsonl;
  throw ConfigError("unknown format '" + s + "' (expected csv or jsonl)");
}

}  // namespace

RunConfig config_from_json(const json& j, RunConfig c) {
  static const std::set<std::string> keys{"command", "stat", "N",          "M",      "t_end",   "dt",       "du",
                                          "probes",  "seed", "output_dir", "format", "threads", "tolerance"};
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw ConfigError("unknown config key '" + k + "'");
  try {
    if (j.contains("command")) c.command = parse_command(j["command"].get<std::string>());
    if (j.contains("stat")) c.statistics = parse_statistics(j["stat"].get<std::string>());
    if (j.contains("N")) c.N = j["N"].get<int>();
    if (j.contains("M")) c.M = j["M"].get<std::size_t>();
    if (j.contains("t_end")) c.t_end = j["t_end"].get<double>();
    if (j.contains("dt")) c.dt = j["dt"].get<double>();
    if (j.contains("du")) c.du = j["du"].get<double>();
    if (j.contains("probes")) c.probes = j["probes"].get<std::vector<double>>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("format")) c.format = parse_format(j["format"].get<std::string>());
    if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
    if (j.contains("tolerance")) c.tolerance = j["tolerance"].get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig parse_config(int argc, const char* const* argv) {
  CLI::App app{"Young-diagram dynamics lab"};
  std::string command, stat, output_dir, format, config_file;
  int N = 0;
  std::size_t M = 0;
  double t_end = 0, dt = 0, du = 0, tolerance = 0;
  std::vector<double> probes;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  app.add_option("command", command, "command to run")->required();
  app.add_option("--config", config_file, "JSON config file");
  app.add_option("--stat", stat, "u or ru");
  app.add_option("-N,--N", N, "scale parameter");
  app.add_option("-M,--M", M, "number of samples or paths");
  app.add_option("--t-end", t_end, "final time");
  app.add_option("--dt", dt, "time step");
  app.add_option("--du", du, "space step");
  app.add_option("--probes", probes, "probe points")->expected(1, -1);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--output-dir", output_dir, "output directory");
  app.add_option("--format", format, "csv or jsonl");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--tolerance", tolerance, "standard-error multiplier");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  RunConfig c;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw ConfigError("cannot open config file " + config_file);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    c = config_from_json(j, c);
  }
  if (const char* env = std::getenv("YDL_OUTPUT_DIR"); env && *env) c.output_dir = env;
  if (const char* env = std::getenv("YDL_THREADS"); env && *env) {
    int v = std::atoi(env);
    if (v < 1) throw ConfigError("YDL_THREADS must be a positive integer");
    c.threads = static_cast<unsigned>(v);
  }
  c.command = parse_command(command);
  if (app.count("--stat")) c.statistics = parse_statistics(stat);
  if (app.count("--N")) c.N = N;
  if (app.count("--M")) c.M = M;
  if (app.count("--t-end")) c.t_end = t_end;
  if (app.count("--dt")) c.dt = dt;
  if (app.count("--du")) c.du = du;
  if (app.count("--probes")) c.probes = probes;
  if (app.count("--seed")) c.seed = seed;
  if (app.count("--output-dir")) c.output_dir = output_dir;
  if (app.count("--format")) c.format = parse_format(format);
  if (app.count("--threads")) c.threads = threads;
  if (app.count("--tolerance")) c.tolerance = tolerance;
  c.validate();
  return c;
}

json RunManifest::to_json() const {
  json j;
  j["config"] = config;
  j["version"] = version;
  j["wall_seconds"] = wall_seconds;
  j["jump_count"] = jump_count;
  j["seed_derivation"] = seed_derivation;
  j["worker_seeds"] = worker_seeds;
  json files_j = json::array();
  for (const auto& f : files) files_j.push_back({{"path", f.path}, {"sha256", f.sha256}});
  j["files"] = files_j;
  return j;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

OutputWriter::OutputWriter(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir_ + ": " + ec.message());
}

void OutputWriter::write(const std::string& name, const std::string& content) {
  fs::path p = fs::path(dir_) / name;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
  out.close();
  files_.push_back({name, sha256_hex(content)});
}

void OutputWriter::write_csv(const std::string& name, const std::vector<std::string>& header,
                             const std::vector<std::vector<double>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
    os << '\n';
  }
  write(name, os.str());
}

void OutputWriter::write_jsonl(const std::string& name, const std::vector<json>& rows) {
  std::ostringstream os;
  for (const auto& r : rows) os << r.dump() << '\n';
  write(name, os.str());
}

json diagram_to_json(const YoungDiagram& p) { return json(p.columns); }

YoungDiagram diagram_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("diagram must be a JSON array of column heights");
  YoungDiagram p;
  try {
    p.columns = j.get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad diagram: ") + e.what());
  }
  for (std::size_t i = 0; i < p.columns.size(); ++i)
    if (p.columns[i] < 1 || (i > 0 && p.columns[i] > p.columns[i - 1]))
      throw ConfigError("column heights must be positive and non-increasing");
  return p;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

json to_json(const CovarianceReport& r) {
  json j;
  j["claim"] = r.claim;
  j["statistics"] = ydl::to_string(r.kind);
  j["N"] = r.N;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["t"] = r.t;
  j["probes"] = r.probes;
  j["empirical"] = matrix_json(r.empirical);
  j["theoretical"] = matrix_json(r.theoretical);
  j["standard_errors"] = matrix_json(r.standard_errors);
  if (r.oracle.size() > 0) j["oracle"] = matrix_json(r.oracle);
  j["mean"] = r.mean;
  j["mean_se"] = r.mean_se;
  j["max_z_score"] = r.max_z_score;
  j["max_excess"] = r.max_excess;
  j["pass"] = r.pass;
  j["tolerance_policy"] = r.tolerance_policy;
  return j;
}

json to_json(const ReportLine& r) {
  return {{"claim", r.claim}, {"target", r.target}, {"empirical", r.empirical}, {"tolerance", r.tolerance},
          {"pass", r.pass}};
}

std::string emit_report(const std::vector<ReportLine>& lines, int& exit_code) {
  if (lines.empty()) throw ConfigError("nothing to report");
  std::size_t w0 = 5, w1 = 6, w2 = 9, w3 = 9;
  for (const auto& l : lines) {
    w0 = std::max(w0, l.claim.size());
    w1 = std::max(w1, l.target.size());
    w2 = std::max(w2, l.empirical.size());
    w3 = std::max(w3, l.tolerance.size());
  }
  std::ostringstream os;
  auto row = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                 const std::string& e) {
    os << std::left << std::setw(static_cast<int>(w0)) << a << "  " << std::setw(static_cast<int>(w1)) << b << "  "
       << std::setw(static_cast<int>(w2)) << c << "  " << std::setw(static_cast<int>(w3)) << d << "  " << e << '\n';
  };
  row("claim", "target", "empirical", "tolerance", "verdict");
  std::size_t passed = 0;
  for (const auto& l : lines) {
    row(l.claim, l.target, l.empirical, l.tolerance, l.pass ? "PASS" : "FAIL");
    passed += l.pass;
  }
  os << "PASS " << passed << "/" << lines.size() << '\n';
  exit_code = passed == lines.size() ? 0 : 1;
  return os.str();
}

namespace {

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

}  // namespace

std::vector<StationaryResidual> verify_stationary_profiles() {
  std::vector<StationaryResidual> out;
  auto add = [&](std::string name, const std::function<double(int)>& residual) {
    StationaryResidual r;
    r.name = std::move(name);
    r.coarse = residual(1);
    r.fine = residual(2);
    r.pass = r.coarse < 1e-4 && r.fine <= 0.5 * r.coarse;
    out.push_back(r);
  };
  add("line density under Burgers", [](int refine) {
    double du = 0.05 / refine;
    PdeGrid g{UniformGrid::span(-10.0, 10.0, du), 0.4 * du * du, 1.0, Scheme::explicit_euler, 0.05};
    Profile r = stationary_profile(StationaryKind::rho_line, g.space, kAlpha, 1.0);
    return solve_burgers(r, kAlpha, g).max_deviation(r);
  });
  add("omega under the linear equation", [](int refine) {
    double du = 0.02 / refine;
    PdeGrid g{UniformGrid::span(0.0, 24.0 / kBeta, du), 0.01, 1.0, Scheme::semi_implicit, 0.05};
    Profile w = stationary_profile(StationaryKind::omega, g.space, kBeta);
    return solve_omega(w, kBeta, g).max_deviation(w);
  });
  add("U limit curve under its height equation", [](int refine) {
    double dw = 0.02 / refine;
    PdeGrid g{UniformGrid::span(1e-3, 15.0, dw, Coordinate::logarithmic), 0.0, 1.0, Scheme::explicit_euler, 0.05};
    Profile p = stationary_profile(StationaryKind::psi_u, g.space, kAlpha);
    g.dt = psi_u_stable_dt(p);
    return solve_psi_u(p, kAlpha, g).max_deviation(p);
  });
  add("RU limit curve under its height equation", [](int refine) {
    double du = 0.05 / refine;
    PdeGrid g{UniformGrid::span(0.0, 20.0, du), 0.4 * du * du, 1.0, Scheme::explicit_euler, 0.05};
    Profile p = stationary_profile(StationaryKind::psi_ru, g.space, kBeta);
    return solve_psi_ru(p, kBeta, g, RuRoute::direct).max_deviation(p);
  });
  add("U slope under its density equation", [](int refine) {
    double du = 0.01 / refine;
    PdeGrid g{UniformGrid::span(0.05, 15.0, du), 0.2 * du * du, 1.0, Scheme::explicit_euler, 0.05};
    Profile r = stationary_profile(StationaryKind::rho_u, g.space, kAlpha);
    return solve_rho_u(r, kAlpha, g).max_deviation(r, 0.1, 5.0);
  });
  return out;
}

RotationCheck verify_rotation_identity(Statistics s, int N, std::size_t diagrams, std::uint64_t seed) {
  RotationCheck c;
  c.diagrams = diagrams;
  const GrandcanonicalParams params = make_params(s, N);
  const GrandcanonicalSampler sampler(params, s);
  const double r2 = std::numbers::sqrt2;
  for (std::size_t k = 0; k < diagrams; ++k) {
    Rng rng(derive_seed(seed, k));
    YoungDiagram p = sampler.sample(rng);
    const long lo = -static_cast<long>(p.length()) - 3, hi = p.column(1) + 3;
    const RotatedCurves curves(p, lo, hi);
    for (long x = lo; x <= hi; ++x)
      if (lattice_height(p, x) != lattice_height_approx(p, x)) ++c.integer_mismatches;
    // occupied sites, in lattice units so the comparison stays in integers
    for (int i = 1; i <= p.length(); ++i) {
      long q = p.column(i) - i;
      if (lattice_height(p, q) != lattice_height_approx(p, q)) ++c.integer_mismatches;
    }
    for (long x = lo; x < hi; ++x)
      for (double f : {0.125, 0.5, 0.875}) {
        double v = (static_cast<double>(x) + f) / r2;
        double y = r2 * v;
        c.max_gap_unscaled = std::max(c.max_gap_unscaled, std::abs(curves.approx(y) - curves.exact(y)) / r2);
        // scaled frame: v / N on both axes, mapped back to lattice units
        double vs = v / N, ys = r2 * N * vs;
        c.max_gap_scaled = std::max(c.max_gap_scaled, N * std::abs(curves.approx(ys) - curves.exact(ys)) / (r2 * N));
      }
  }
  c.pass = c.integer_mismatches == 0 && c.max_gap_unscaled <= r2 + 1e-12 && c.max_gap_scaled <= r2 + 1e-9;
  return c;
}

GreenCheck verify_green_kernel(Statistics s, double du, double window_end) {
  GreenCheck c;
  const double lo = s == Statistics::U ? 0.05 : 0.0;
  c.bound = s == Statistics::U ? 0.03 : 0.02;
  UniformGrid grid = UniformGrid::span(lo, window_end, du);
  Eigen::MatrixXd G = green_kernel_solve(s, grid);
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      double target = static_covariance(s, grid.at(static_cast<std::size_t>(i)), grid.at(static_cast<std::size_t>(j)));
      c.max_relative_error = std::max(c.max_relative_error, std::abs(G(i, j) - target) / target);
    }
  // symmetry of the raw solve is enforced on return; check definiteness
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  c.min_eigenvalue = es.eigenvalues().minCoeff();
  c.asymmetry = (G - G.transpose()).cwiseAbs().maxCoeff();
  c.pass = c.max_relative_error < c.bound && c.min_eigenvalue > -1e-10 * es.eigenvalues().maxCoeff();
  return c;
}

PoincareCheck verify_poincare(Statistics s, double du, double domain_end) {
  PoincareCheck c;
  const double lo = s == Statistics::U ? 0.05 : 0.0;
  c.coarse = poincare_constant(s, UniformGrid::span(lo, domain_end, du));
  c.fine = poincare_constant(s, UniformGrid::span(lo, domain_end, du / 2));
  c.relative_change = std::abs(c.fine - c.coarse) / c.coarse;
  c.pass = c.coarse > 0.0 && c.fine > 0.0 && c.relative_change < 0.10;
  return c;
}

namespace {

std::vector<double> default_probes(const RunConfig& c) {
  if (!c.probes.empty()) return c.probes;
  if (c.statistics == Statistics::U) return {0.25, 0.5, 1.0, 2.0};
  return {0.0, 0.5, 1.0, 2.0};
}

struct Outcome {
  std::vector<ReportLine> lines;
  std::uint64_t jumps = 0;
  std::vector<std::uint64_t> seeds_used;
};

std::vector<std::uint64_t> first_seeds(std::uint64_t master, std::size_t n) {
  std::vector<std::uint64_t> s;
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 64); ++i) s.push_back(derive_seed(master, i));
  return s;
}

void write_series(OutputWriter& w, const RunConfig& c, const std::string& stem, const ProfileSeries& s) {
  if (c.format == OutputFormat::csv) {
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < s.frames.size(); ++k)
      for (std::size_t i = 0; i < s.frames[k].size(); ++i) rows.push_back({s.times[k], s.frames[k].u(i), s.frames[k].values[i]});
    w.write_csv(stem + ".csv", {"t", "u", "value"}, rows);
  } else {
    std::vector<json> rows;
    for (std::size_t k = 0; k < s.frames.size(); ++k) {
      std::vector<double> u(s.frames[k].size());
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = s.frames[k].u(i);
      rows.push_back({{"t", s.times[k]}, {"u", u}, {"value", s.frames[k].values}});
    }
    w.write_jsonl(stem + ".jsonl", rows);
  }
}

void write_covariance(OutputWriter& w, const RunConfig& c, const std::string& stem, const CovarianceReport& r) {
  const auto d = static_cast<Eigen::Index>(r.probes.size());
  std::vector<std::vector<double>> rows;
  std::vector<json> jrows;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      double oracle = r.oracle.size() ? r.oracle(i, j) : std::nan("");
      double se = r.standard_errors(i, j);
      double z = se > 0 ? (r.empirical(i, j) - r.theoretical(i, j)) / se : 0.0;
      std::vector<double> row{r.t,
                              r.probes[static_cast<std::size_t>(i)],
                              r.probes[static_cast<std::size_t>(j)],
                              r.empirical(i, j),
                              r.theoretical(i, j),
                              oracle,
                              se,
                              z};
      rows.push_back(row);
      jrows.push_back({{"t", row[0]}, {"u", row[1]}, {"v", row[2]}, {"empirical", row[3]}, {"theoretical", row[4]},
                       {"oracle", r.oracle.size() ? json(oracle) : json(nullptr)}, {"se", se}, {"z", z}});
    }
  if (c.format == OutputFormat::csv)
    w.write_csv(stem + ".csv", {"t", "u", "v", "empirical", "theoretical", "oracle", "se", "z"}, rows);
  else
    w.write_jsonl(stem + ".jsonl", jrows);
  w.write(stem + ".json", to_json(r).dump(2) + "\n");
}

ReportLine covariance_line(const CovarianceReport& r) {
  return {r.claim + (r.t > 0 ? " at t=" + fmt(r.t) : ""), "theory matrix", "max z " + fmt(r.max_z_score),
          r.tolerance_policy, r.pass};
}

Outcome run_command(const RunConfig& c, OutputWriter& w) {
  Outcome o;
  const unsigned threads = c.threads ? c.threads : default_threads();
  switch (c.command) {
    case Command::sample_static: {
      const std::size_t M = c.M.value_or(1);
      GrandcanonicalParams params = make_params(c.statistics, *c.N);
      GrandcanonicalSampler sampler(params, c.statistics);
      std::vector<std::vector<double>> rows;
      std::vector<json> jrows;
      for (std::size_t k = 0; k < M; ++k) {
        Rng rng(derive_seed(c.seed, k));
        YoungDiagram p = sampler.sample(rng);
        rows.push_back({static_cast<double>(k), static_cast<double>(p.area()), static_cast<double>(p.length()),
                        static_cast<double>(p.column(1))});
        jrows.push_back(diagram_to_json(p));
      }
      w.write_jsonl("diagrams.jsonl", jrows);
      if (c.format == OutputFormat::csv) w.write_csv("summary.csv", {"index", "area", "length", "largest"}, rows);
      o.seeds_used = first_seeds(c.seed, M);
      o.lines.push_back({"calibrated epsilon", "mean area N^2", fmt(params.epsilon, 10), "-", true});
      break;
    }
    case Command::simulate: {
      const std::size_t M = c.M.value_or(1);
      const double t_end = c.t_end.value_or(0.2);
      GrandcanonicalParams params = make_params(c.statistics, *c.N);
      GrandcanonicalSampler sampler(params, c.statistics);
      std::vector<double> times;
      for (int k = 1; k <= 10; ++k) times.push_back(t_end * k / 10.0);
      std::vector<std::vector<double>> rows;
      std::vector<json> jrows, finals;
      bool valid = true;
      for (std::size_t path = 0; path < M; ++path) {
        std::uint64_t s = derive_seed(c.seed, path);
        Rng rng(s);
        YoungDiagram start = sampler.sample(rng);
        TrajectoryRecord rec = simulate(start, c.statistics, params.epsilon, *c.N, t_end, times, s);
        o.jumps += rec.jump_count;
        for (std::size_t k = 0; k < rec.times.size(); ++k) {
          const YoungDiagram& p = rec.snapshots[k];
          valid = valid && p.valid(c.statistics);
          rows.push_back({static_cast<double>(path), rec.times[k], static_cast<double>(p.area()),
                          static_cast<double>(p.length()), static_cast<double>(p.column(1))});
          jrows.push_back({{"path", path}, {"t", rec.times[k]}, {"area", p.area()}, {"length", p.length()},
                           {"largest", p.column(1)}, {"columns", p.columns}});
        }
        finals.push_back(diagram_to_json(rec.snapshots.back()));
      }
      if (c.format == OutputFormat::csv)
        w.write_csv("trajectory.csv", {"path", "t", "area", "length", "largest"}, rows);
      else
        w.write_jsonl("trajectory.jsonl", jrows);
      w.write_jsonl("final_diagrams.jsonl", finals);
      o.seeds_used = first_seeds(c.seed, M);
      o.lines.push_back({"snapshots are valid diagrams", "all", valid ? "all" : "invalid found", "exact", valid});
      break;
    }
    case Command::solve_pde: {
      const double t_end = c.t_end.value_or(0.5);
      if (c.statistics == Statistics::RU) {
        const double du = c.du.value_or(0.02);
        PdeGrid g{UniformGrid::span(0.0, 20.0, du), c.dt.value_or(0.2 * du * du), t_end, Scheme::explicit_euler,
                  t_end / 10};
        Profile p0 = make_profile(g.space, [](double u) {
          return vershik_curve(Statistics::RU, u).psi + 0.05 * u * u * std::exp(-u);
        });
        ProfileSeries direct = solve_psi_ru(p0, kBeta, g, RuRoute::direct);
        ProfileSeries hc = solve_psi_ru(p0, kBeta, g, RuRoute::via_omega);
        double d = sup_distance(direct.final_frame(), hc.final_frame());
        write_series(w, c, "psi_ru", hc);
        o.lines.push_back({"direct vs Hopf-Cole route", "agree", fmt(d), "1e-3", d <= 1e-3});
      } else {
        const double dw = c.du.value_or(0.02);
        PdeGrid g{UniformGrid::span(1e-3, 15.0, dw, Coordinate::logarithmic), 0.0, t_end, Scheme::explicit_euler,
                  t_end / 10};
        Profile p0 = make_profile(g.space, [](double u) {
          return vershik_curve(Statistics::U, u).psi + 0.05 * u * u * std::exp(-u);
        });
        g.dt = c.dt.value_or(psi_u_stable_dt(p0));
        ProfileSeries s = solve_psi_u(p0, kAlpha, g);
        bool mono = true;
        for (const auto& f : s.frames) mono = mono && f.non_increasing(1e-12);
        write_series(w, c, "psi_u", s);
        o.lines.push_back({"height stays non-increasing", "monotone", mono ? "monotone" : "not monotone", "exact", mono});
      }
      break;
    }
    case Command::solve_spde: {
      const double du = c.du.value_or(0.05);
      const double lo = c.statistics == Statistics::U ? 0.05 : 0.0;
      const double hi = c.statistics == Statistics::U ? 10.0 : 12.0;
      UniformGrid grid = UniformGrid::span(lo, hi, du);
      const double t_end = c.t_end.value_or(1.0);
      const double dt0 = c.dt.value_or(0.01);
      const std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt0 - 1e-9));
      PdeGrid g{grid, t_end / static_cast<double>(steps), t_end, Scheme::semi_implicit, t_end / 10};
      NoiseField noise(grid, g.dt, NoiseSymmetry::plain, derive_seed(c.seed, 0));
      Profile zero = make_profile(grid, [](double) { return 0.0; });
      ProfileSeries s = c.statistics == Statistics::RU
                            ? solve_spde_ru(zero, [&] {
                                ProfileSeries r;
                                r.times = {0.0};
                                r.frames = {make_profile(grid, [](double u) { return vershik_curve(Statistics::RU, u).rho; })};
                                return r;
                              }(), kBeta, g, &noise)
                            : solve_spde_u(zero, [&] {
                                ProfileSeries r;
                                r.times = {0.0};
                                r.frames = {make_profile(grid, [](double u) { return vershik_curve(Statistics::U, u).rho; })};
                                return r;
                              }(), kAlpha, g, &noise);
      bool finite = true;
      for (const auto& f : s.frames)
        for (double v : f.values) finite = finite && std::isfinite(v);
      write_series(w, c, "spde_path", s);
      o.seeds_used = {derive_seed(c.seed, 0)};
      o.lines.push_back({"fluctuation path stays finite", "finite", finite ? "finite" : "non-finite", "exact", finite});
      break;
    }
    case Command::fluct_static: {
      StaticExperimentConfig cfg;
      cfg.kind = c.statistics;
      cfg.N = *c.N;
      cfg.M = c.M.value_or(20000);
      cfg.probes = default_probes(c);
      cfg.seed = c.seed;
      cfg.threads = threads;
      if (c.tolerance) {
        cfg.z = *c.tolerance;
        cfg.bias = 0.0;
      }
      CovarianceReport r = run_static_experiment(cfg);
      write_covariance(w, c, "static_covariance", r);
      o.seeds_used = first_seeds(c.seed, (cfg.M + 99) / 100);
      o.lines.push_back(covariance_line(r));
      break;
    }
    case Command::fluct_dynamic: {
      DynamicExperimentConfig cfg;
      cfg.kind = c.statistics;
      cfg.N = *c.N;
      cfg.M = c.M.value_or(2000);
      cfg.t_probes = {c.t_end.value_or(0.2)};
      cfg.space_probes = default_probes(c);
      cfg.seed = c.seed;
      cfg.threads = threads;
      if (c.du) cfg.du = *c.du;
      if (c.dt) cfg.dt = *c.dt;
      if (c.tolerance) {
        cfg.z = *c.tolerance;
        cfg.bias = 0.0;
      }
      DynamicReport rep = run_dynamic_experiment(cfg);
      o.jumps = rep.jumps;
      for (const auto& r : rep.per_time) {
        write_covariance(w, c, "dynamic_covariance_t" + fmt(r.t), r);
        o.lines.push_back(covariance_line(r));
      }
      const double bound = 0.6 / std::sqrt(static_cast<double>(cfg.N));
      for (std::size_t k = 0; k < rep.hydro_distance.size(); ++k)
        o.lines.push_back({"mean height vs PDE at t=" + fmt(cfg.t_probes[k]), "0", fmt(rep.hydro_distance[k]),
                           fmt(bound), rep.hydro_distance[k] <= bound});
      o.seeds_used = first_seeds(c.seed, cfg.M);
      break;
    }
    case Command::verify_green: {
      GreenCheck g = verify_green_kernel(c.statistics, c.du.value_or(0.01));
      o.lines.push_back({std::string("Green kernel vs static covariance, ") + ydl::to_string(c.statistics),
                         "closed form", fmt(g.max_relative_error), "< " + fmt(g.bound), g.pass});
      w.write("green.json", json{{"max_relative_error", g.max_relative_error},
                                 {"min_eigenvalue", g.min_eigenvalue},
                                 {"pass", g.pass}}
                                .dump(2) + "\n");
      break;
    }
    case Command::verify_poincare: {
      PoincareCheck p = verify_poincare(c.statistics, c.du.value_or(0.02));
      o.lines.push_back({std::string("Poincare constant, ") + ydl::to_string(c.statistics), "> 0, stable",
                         fmt(p.coarse) + " / " + fmt(p.fine), "change < 10%", p.pass});
      w.write("poincare.json", json{{"coarse", p.coarse}, {"fine", p.fine}, {"relative_change", p.relative_change},
                                    {"pass", p.pass}}
                                   .dump(2) + "\n");
      break;
    }
    case Command::verify_rotation: {
      RotationCheck r = verify_rotation_identity(c.statistics, c.N.value_or(10), c.M.value_or(1000), c.seed);
      o.lines.push_back({"rotation identity at integer sites", "0 mismatches", std::to_string(r.integer_mismatches),
                         "exact", r.integer_mismatches == 0});
      o.lines.push_back({"rotation gap, unscaled", "<= sqrt2", fmt(r.max_gap_unscaled), "sqrt2",
                         r.max_gap_unscaled <= std::numbers::sqrt2 + 1e-12});
      o.lines.push_back({"rotation gap, scaled (times N)", "<= sqrt2", fmt(r.max_gap_scaled), "sqrt2",
                         r.max_gap_scaled <= std::numbers::sqrt2 + 1e-9});
      o.seeds_used = first_seeds(c.seed, c.M.value_or(1000));
      break;
    }
    case Command::verify_stationary: {
      std::vector<std::vector<double>> rows;
      std::vector<json> jrows;
      for (const auto& r : verify_stationary_profiles()) {
        o.lines.push_back({r.name, "< 1e-4, halves", fmt(r.coarse) + " -> " + fmt(r.fine), "1e-4", r.pass});
        rows.push_back({r.coarse, r.fine});
        jrows.push_back({{"name", r.name}, {"coarse", r.coarse}, {"fine", r.fine}, {"pass", r.pass}});
      }
      if (c.format == OutputFormat::csv)
        w.write_csv("stationary_residuals.csv", {"coarse", "fine"}, rows);
      else
        w.write_jsonl("stationary_residuals.jsonl", jrows);
      break;
    }
    case Command::report: {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(c.output_dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() > 12 && name.ends_with(".report.json") && name != "report.report.json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      for (const auto& p : found) {
        std::ifstream in(p);
        json j;
        try {
          in >> j;
          for (const auto& l : j.at("lines"))
            o.lines.push_back({l.at("claim").get<std::string>(), l.at("target").get<std::string>(),
                               l.at("empirical").get<std::string>(), l.at("tolerance").get<std::string>(),
                               l.at("pass").get<bool>()});
        } catch (const json::exception& e) {
          throw ConfigError("unreadable report " + p.string() + ": " + e.what());
        }
      }
      break;
    }
  }
  return o;
}

}  // namespace

int execute(const RunConfig& config, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  try {
    config.validate();
    OutputWriter w(config.output_dir);
    Outcome o = run_command(config, w);
    std::string table = emit_report(o.lines, code);
    out << table;
    json lines = json::array();
    for (const auto& l : o.lines) lines.push_back(to_json(l));
    w.write(std::string(to_string(config.command)) + ".report.json",
            json{{"command", to_string(config.command)}, {"lines", lines}, {"exit_code", code}}.dump(2) + "\n");
    RunManifest m;
    m.config = config.to_json();
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.jump_count = o.jumps;
    m.seed_derivation = "stream k uses splitmix64(splitmix64(seed) ^ splitmix64(k + 0x632BE59BD9B4E019))";
    m.worker_seeds = o.seeds_used;
    m.files = w.files();
    std::ofstream mf(fs::path(config.output_dir) / "manifest.json");
    mf << m.to_json().dump(2) << '\n';
    if (!mf) throw ConfigError("cannot write manifest");
  } catch (const ConfigError& e) {
    out << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    out << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    out << "verification failed: " << e.what() << '\n';
    return 1;
  }
  return code;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  try {
    c = parse_config(argc, argv);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n"
        << "usage: ydlab <command> [--stat u|ru] [--N n] [--M m] [--t-end t] [--dt dt] [--du du]\n"
        << "             [--probes u...] [--seed s] [--output-dir dir] [--format csv|jsonl]\n"
        << "             [--threads k] [--tolerance z] [--config file.json]\n"
        << "commands: sample-static simulate solve-pde solve-spde fluct-static fluct-dynamic\n"
        << "          verify-green verify-poincare verify-rotation verify-stationary report\n";
    return 2;
  }
  return execute(c, out);
}

}  // namespace ydl
