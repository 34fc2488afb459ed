#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "transferlab/sparse.hpp"
#include "transferlab/statistics.hpp"

namespace transferlab {

inline constexpr const char* kToolName = "transferlab";
inline constexpr const char* kToolVersion = "0.1.0";

/// One fully-specified job. Serializable to/from JSON; re-running a job from
/// the config echoed into an output sidecar reproduces the artifacts
/// bit-exactly in sequential mode (wall-time fields aside).
struct JobConfig {
  std::string command;  ///< ulam | density | variance | rate | escape | converge

  std::string map = "double-tent";
  std::map<std::string, double> params;  ///< map parameters, e.g. a=2.1
  /// Cell count per axis. A single integer for most commands; the converge
  /// command accepts a comma list (refine_n grid) here.
  std::string cells = "1000";
  int dim = 1;

  std::string obs = "sin2pi";
  std::string obs_file;  ///< indexed CSV defining a table observable

  std::string s_grid = "0:0.01:0.8";  ///< start:step:stop, value, or comma list
  double z_max = 0.0;                 ///< 0 = module default search bounds
  double eig_tol = kDefaultEigTol;
  double opt_tol = kDefaultOptTol;
  std::string region = "0,0.5";  ///< escape interval "a,b"

  std::string kernel = "uniform";    ///< uniform | triangular
  std::string boundary = "reflect";  ///< reflect | renormalize
  /// Kernel half-width: single value perturbs the matrix before any compute
  /// command; a descending comma list selects the converge kernel_eps mode.
  std::string eps;

  std::string matrix_file;  ///< import a Matrix Market operator instead of building

  std::uint64_t seed = 0;
  int threads = 0;  ///< 0: TRANSFERLAB_THREADS if set, else 1
  bool cold_start = false;

  std::string out;     ///< artifact path; empty = stdout (and no sidecar)
  std::string format;  ///< csv | json | mtx (default depends on the command)

  std::int64_t samples_per_cell = 400;  ///< 2-D sampled assembly only
};

std::string job_config_to_json(const JobConfig& cfg);
JobConfig job_config_from_json(const std::string& text);

/// Executes one job and writes its artifacts. Throws transferlab::Error on
/// any validation or numerical failure.
void run_job(const JobConfig& cfg);

/// Full command-line entry point (arguments without the program name).
/// Returns the process exit code; on failure prints a machine-readable error
/// JSON document to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace transferlab
