#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ydl/core.hpp"
#include "ydl/ensembles.hpp"
#include "ydl/fluctlab.hpp"
#include "ydl/pde.hpp"

namespace ydl {

inline constexpr const char* kVersion = "0.1.0";

enum class Command {
  sample_static,
  simulate,
  solve_pde,
  solve_spde,
  fluct_static,
  fluct_dynamic,
  verify_green,
  verify_poincare,
  verify_rotation,
  verify_stationary,
  report
};
const char* to_string(Command c);
Command parse_command(const std::string& s);

enum class OutputFormat { csv, jsonl };

struct RunConfig {
  Command command = Command::report;
  Statistics statistics = Statistics::RU;
  std::optional<int> N;
  std::optional<std::size_t> M;
  std::optional<double> t_end;
  std::optional<double> dt;
  std::optional<double> du;
  std::vector<double> probes;
  std::uint64_t seed = 1;
  std::string output_dir = "ydl-out";
  OutputFormat format = OutputFormat::csv;
  unsigned threads = 0;  // 0: default_threads()
  std::optional<double> tolerance;  // z multiplier of the standard error

  void validate() const;  // ConfigError on bad values or combinations
  nlohmann::json to_json() const;
};

// Reads an optional JSON config (--config), then environment overrides
// (YDL_OUTPUT_DIR, YDL_THREADS), then command-line flags. Unknown keys and
// flags are rejected with ConfigError.
RunConfig parse_config(int argc, const char* const* argv);
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

struct ReportLine {
  std::string claim;
  std::string target;
  std::string empirical;
  std::string tolerance;
  bool pass = false;
};

struct EmittedFile {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  nlohmann::json config;
  std::string version = kVersion;
  double wall_seconds = 0.0;
  std::uint64_t jump_count = 0;
  std::string seed_derivation;
  std::vector<std::uint64_t> worker_seeds;
  std::vector<EmittedFile> files;
  nlohmann::json to_json() const;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

// 17 significant digits
std::string format_double(double x);

// Collects output files and writes them with checksums into the manifest.
class OutputWriter {
 public:
  explicit OutputWriter(std::string dir);
  void write(const std::string& name, const std::string& content);
  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);
  void write_jsonl(const std::string& name, const std::vector<nlohmann::json>& rows);
  const std::vector<EmittedFile>& files() const { return files_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<EmittedFile> files_;
};

nlohmann::json diagram_to_json(const YoungDiagram& p);
YoungDiagram diagram_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CovarianceReport& r);
nlohmann::json to_json(const ReportLine& r);

// Table of claim / target / empirical / tolerance / verdict followed by
// "PASS k/n". Refuses an empty list.
std::string emit_report(const std::vector<ReportLine>& lines, int& exit_code);

// shared verification routines
struct StationaryResidual {
  std::string name;
  double coarse = 0.0;
  double fine = 0.0;
  bool pass = false;  // coarse < 1e-4 and fine <= coarse / 2
};
std::vector<StationaryResidual> verify_stationary_profiles();

struct RotationCheck {
  std::size_t diagrams = 0;
  std::size_t integer_mismatches = 0;
  double max_gap_unscaled = 0.0;  // rotated units, bound sqrt 2
  double max_gap_scaled = 0.0;    // times N, bound sqrt 2
  bool pass = false;
};
RotationCheck verify_rotation_identity(Statistics s, int N, std::size_t diagrams, std::uint64_t seed);

struct GreenCheck {
  double max_relative_error = 0.0;
  double bound = 0.0;
  double asymmetry = 0.0;
  double min_eigenvalue = 0.0;
  bool pass = false;
};
GreenCheck verify_green_kernel(Statistics s, double du, double window_end = 6.0);

struct PoincareCheck {
  double coarse = 0.0;
  double fine = 0.0;
  double relative_change = 0.0;
  bool pass = false;
};
PoincareCheck verify_poincare(Statistics s, double du, double domain_end = 12.0);

// Runs the configured command; returns 0 pass, 1 verification failure, 2 configuration error.
int execute(const RunConfig& config, std::ostream& out);
// argv entry point with usage handling
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ydl
