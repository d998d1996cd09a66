#pragma once

// Batch front-end: run configs, presets, CSV error tables and dumps.

#include "rfm/solve.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rfm {

/// One fully typed run. Counts left at -1 take the problem preset.
struct RunConfig {
  std::string problem;
  std::uint64_t seed = 0;
  int J = -1;  // features per field, side and patch
  long Q = -1;
  int n_interface = -1;
  int n_boundary = -1;
  int n_hole = -1;
  int n_time_slices = -1;
  int n_initial = -1;
  int continuity_per_face = -1;
  PoUKind pou = PoUKind::A;
  Activation activation = Activation::Tanh;
  double R = 1.0;
  double c = 100.0;
  int refinement = 2;
  SolverKind solver = SolverKind::Auto;
  double damping = -1.0;  // -1: by system shape
  double rank_tol = 0.0;
  int threads = 1;
  double fsi_radius = 0.0;
  bool derivatives = true;
  bool dump_fields = false;
  bool dump_system = false;
  bool dump_model = false;
  std::string label;
};

/// Known keys with a one-line description, in documentation order.
const std::vector<std::pair<std::string, std::string>>& config_schema();

/// Parses "key = value" lines ('#' starts a comment). With `allow_lists`,
/// comma-separated values expand into the Cartesian product of configs.
/// Errors carry "source:line: key: message".
std::vector<RunConfig> parse_config(const std::string& text, const std::string& source,
                                    bool allow_lists = false);
std::vector<RunConfig> load_config(const std::filesystem::path& path, bool allow_lists = false);

/// Applies one "key=value" override to every config.
void apply_override(std::vector<RunConfig>& cfgs, const std::string& assignment);

/// Fills preset counts and validates ranges.
RunConfig resolve(RunConfig cfg);
/// Resolved configuration as config text that parses back to the same run.
std::string format_config(const RunConfig& cfg);

/// Preset for a catalog problem: the smallest benchmark configuration.
RunConfig preset(const std::string& problem);

struct RunResult {
  RunConfig config;
  long M = 0, N = 0;
  /// (column name, value) pairs: err_<field> and err_<field>_<axis>.
  std::vector<std::pair<std::string, double>> errors;
  double residual = 0.0;
  long rank = 0;
  double wall_time = 0.0;
  std::string path;
  /// "ok" or "error:<code>".
  std::string status = "ok";
  std::string message;
  bool ok() const { return status == "ok"; }
};

struct RunOutputs {
  /// Directory for dumps; empty disables them.
  std::filesystem::path dir;
};

/// Sizes of the system a config would assemble, without solving.
std::pair<long, long> count_system(const RunConfig& cfg);

/// Assembles, solves and evaluates one resolved config. Library errors are
/// captured into the result status.
RunResult run_config(const RunConfig& cfg, const RunOutputs& out = {});

/// Runs every config with up to `workers` concurrent rows; results keep input order.
std::vector<RunResult> run_sweep(const std::vector<RunConfig>& cfgs, int workers, const RunOutputs& out = {});

/// CSV with columns problem,seed,label,J,Q,M,N,<error columns>,residual,rank,wall_time,path,status.
/// Numbers use 17 significant digits; failed rows leave numeric fields empty.
std::string csv_table(const std::vector<RunResult>& rows);

/// Parsed CSV rows keyed by column name, for round-trip checks.
std::vector<std::map<std::string, std::string>> parse_csv(const std::string& text);

/// Writes manifest.txt naming the inputs, version and resolved configs.
void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& inputs,
                    const std::vector<RunConfig>& cfgs);

}  // namespace rfm
