#include "transferlab/cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "transferlab/errors.hpp"
#include "transferlab/io.hpp"
#include "transferlab/maps.hpp"
#include "transferlab/parallel.hpp"
#include "transferlab/perturb.hpp"
#include "transferlab/statistics.hpp"
#include "transferlab/twist.hpp"
#include "transferlab/ulam.hpp"

namespace transferlab {

namespace {

using nlohmann::json;

json config_to_json_obj(const JobConfig& c) {
  return json{{"command", c.command},
              {"map", c.map},
              {"params", c.params},
              {"cells", c.cells},
              {"dim", c.dim},
              {"obs", c.obs},
              {"obs_file", c.obs_file},
              {"s_grid", c.s_grid},
              {"z_max", c.z_max},
              {"eig_tol", c.eig_tol},
              {"opt_tol", c.opt_tol},
              {"region", c.region},
              {"kernel", c.kernel},
              {"boundary", c.boundary},
              {"eps", c.eps},
              {"matrix_file", c.matrix_file},
              {"seed", c.seed},
              {"threads", c.threads},
              {"cold_start", c.cold_start},
              {"out", c.out},
              {"format", c.format},
              {"samples_per_cell", c.samples_per_cell}};
}

JobConfig config_from_json_obj(const json& j) {
  JobConfig c;
  c.command = j.value("command", c.command);
  c.map = j.value("map", c.map);
  c.params = j.value("params", c.params);
  c.cells = j.value("cells", c.cells);
  c.dim = j.value("dim", c.dim);
  c.obs = j.value("obs", c.obs);
  c.obs_file = j.value("obs_file", c.obs_file);
  c.s_grid = j.value("s_grid", c.s_grid);
  c.z_max = j.value("z_max", c.z_max);
  c.eig_tol = j.value("eig_tol", c.eig_tol);
  c.opt_tol = j.value("opt_tol", c.opt_tol);
  c.region = j.value("region", c.region);
  c.kernel = j.value("kernel", c.kernel);
  c.boundary = j.value("boundary", c.boundary);
  c.eps = j.value("eps", c.eps);
  c.matrix_file = j.value("matrix_file", c.matrix_file);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.cold_start = j.value("cold_start", c.cold_start);
  c.out = j.value("out", c.out);
  c.format = j.value("format", c.format);
  c.samples_per_cell = j.value("samples_per_cell", c.samples_per_cell);
  return c;
}

// ---------------------------------------------------------------- parsing

double parse_number(const std::string& token, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size())
      throw Error("cli", "trailing characters in " + what + ": '" + token + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error("cli", "cannot parse " + what + " from '" + token + "'");
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = text.find(sep, pos);
    parts.push_back(text.substr(pos, next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return parts;
}

/// Grid syntax: "start:step:stop" (stop included when the step count is
/// integral within 1e-9 relative), a comma list, or a single value.
std::vector<double> parse_grid(const std::string& text,
                               const std::string& what) {
  if (text.empty()) throw Error("cli", what + " is empty");
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3)
      throw Error("cli", what + " range must be start:step:stop");
    const double start = parse_number(parts[0], what + " start");
    const double step = parse_number(parts[1], what + " step");
    const double stop = parse_number(parts[2], what + " stop");
    if (step == 0.0) {
      if (start == stop) return {start};
      throw Error("cli", what + " has zero step");
    }
    const double span = (stop - start) / step;
    if (span < -1e-9)
      throw Error("cli", what + " step points away from stop");
    const auto k = static_cast<std::int64_t>(std::llround(span));
    std::vector<double> grid;
    if (std::abs(span - static_cast<double>(k)) <=
        1e-9 * std::max(1.0, std::abs(span))) {
      if (k <= 0) return {start};
      grid.reserve(static_cast<std::size_t>(k) + 1);
      for (std::int64_t i = 0; i < k; ++i)
        grid.push_back(start + static_cast<double>(i) * step);
      grid.push_back(stop);  // inclusive endpoint, exactly
      return grid;
    }
    for (std::int64_t i = 0;; ++i) {
      const double v = start + static_cast<double>(i) * step;
      if ((step > 0.0 && v > stop + 1e-12) || (step < 0.0 && v < stop - 1e-12))
        break;
      grid.push_back(v);
      if (i > 100000000)
        throw Error("cli", what + " range produces too many points");
    }
    return grid;
  }
  std::vector<double> grid;
  for (const std::string& tok : split(text, ','))
    grid.push_back(parse_number(tok, what));
  return grid;
}

std::int64_t require_integer(double v, const std::string& what) {
  const double r = std::round(v);
  if (!(std::abs(v - r) <= 1e-9))
    throw Error("cli", what + " must be an integer, got " + fmt17(v));
  return static_cast<std::int64_t>(r);
}

std::int64_t parse_cells_single(const JobConfig& c) {
  const auto grid = parse_grid(c.cells, "--cells");
  if (grid.size() != 1)
    throw Error("cli", "this command takes a single --cells value");
  const std::int64_t n = require_integer(grid[0], "--cells");
  if (n < 1) throw Error("cli", "--cells must be positive");
  return n;
}

std::pair<double, double> parse_region(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2)
    throw Error("cli", "--region must be two numbers a,b");
  return {parse_number(parts[0], "--region a"),
          parse_number(parts[1], "--region b")};
}

// ------------------------------------------------------------- resolution

PiecewiseAffineMap1D make_map_1d(const JobConfig& c) {
  if (c.map == "double-tent") {
    double a = 2.1;
    const auto it = c.params.find("a");
    if (it != c.params.end()) a = it->second;
    return make_double_tent(a);
  }
  if (c.map == "doubling") return make_doubling_map();
  throw Error("cli", "unknown 1-D map '" + c.map +
                         "' (available: double-tent, doubling)");
}

Map2D make_map_2d(const JobConfig& c) {
  if (c.map == "product-doubling") return make_product_doubling();
  if (c.map == "identity") return make_identity_2d();
  throw Error("cli", "unknown 2-D map '" + c.map +
                         "' (available: product-doubling, identity)");
}

Observable resolve_observable(const JobConfig& c) {
  if (!c.obs_file.empty()) {
    std::ifstream probe(c.obs_file);
    if (!probe)
      throw Error("cli", "cannot open observable file '" + c.obs_file + "'");
    std::int64_t rows = 0;
    bool first = true;
    std::string line;
    while (std::getline(probe, line)) {
      if (line.empty()) continue;
      if (first) {
        first = false;
        const char c0 = line[0];
        if (!std::isdigit(static_cast<unsigned char>(c0)) && c0 != '-' &&
            c0 != '+')
          continue;  // header line
      }
      ++rows;
    }
    std::ifstream is(c.obs_file);
    return Observable::table(read_indexed_csv(is, rows));
  }
  std::string name = c.obs;
  if (name == "indicator") name = "indicator_half";
  if (name == "cos2pi") return Observable::cos2pi();
  if (name == "linear") return Observable::linear();
  if (name == "sin2pi") return Observable::sin2pi();
  if (name == "indicator_half") return Observable::indicator_half();
  throw Error("cli", "unknown observable '" + c.obs +
                         "' (available: cos2pi, linear, sin2pi, "
                         "indicator_half)");
}

KernelSpec make_kernel_base(const JobConfig& c) {
  KernelSpec k;
  if (c.kernel == "uniform")
    k.shape = KernelSpec::Shape::kUniform;
  else if (c.kernel == "triangular")
    k.shape = KernelSpec::Shape::kTriangular;
  else
    throw Error("cli", "unknown kernel '" + c.kernel +
                           "' (available: uniform, triangular)");
  if (c.boundary == "reflect")
    k.boundary = KernelSpec::Boundary::kReflect;
  else if (c.boundary == "renormalize")
    k.boundary = KernelSpec::Boundary::kRenormalize;
  else
    throw Error("cli", "unknown boundary mode '" + c.boundary +
                           "' (available: reflect, renormalize)");
  return k;
}

std::string describe_build(const JobConfig& c) {
  std::string s = std::string(kToolName) + " " + kToolVersion +
                  " map=" + c.map + " dim=" + std::to_string(c.dim) +
                  " cells=" + c.cells;
  for (const auto& [k, v] : c.params) s += " " + k + "=" + fmt17(v);
  return s;
}

TransferMatrix obtain_matrix(const JobConfig& c, int threads) {
  TransferMatrix p = [&] {
    if (!c.matrix_file.empty()) {
      SparseCsr m = read_matrix_market_file(c.matrix_file);
      PartitionDescriptor part;
      part.dim = c.dim;
      if (c.dim == 1) {
        part.cells_per_axis = m.n();
      } else if (c.dim == 2) {
        const auto root = static_cast<std::int64_t>(
            std::llround(std::sqrt(static_cast<double>(m.n()))));
        if (root * root != m.n())
          throw Error("cli", "imported matrix size is not a square grid");
        part.cells_per_axis = root;
      } else {
        throw Error("cli", "--dim must be 1 or 2");
      }
      return TransferMatrix(std::move(m), part, "imported");
    }
    const std::int64_t n = parse_cells_single(c);
    if (c.dim == 1) return build_ulam_1d(make_map_1d(c), n, threads);
    if (c.dim == 2)
      return build_ulam_2d(make_map_2d(c), n, c.samples_per_cell, c.seed, 0.0,
                           threads);
    throw Error("cli", "--dim must be 1 or 2");
  }();
  if (!c.eps.empty() && c.command != "converge") {
    KernelSpec k = make_kernel_base(c);
    const auto eps_grid = parse_grid(c.eps, "--eps");
    if (eps_grid.size() != 1)
      throw Error("cli",
                  "this command takes a single --eps value (a list selects "
                  "the converge kernel study)");
    k.eps = eps_grid[0];
    p = apply_kernel(p, k, threads);
  }
  return p;
}

// -------------------------------------------------------------- artifacts

void write_text_artifact(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw Error("cli", "cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw Error("cli", "failed writing '" + path + "'");
}

void write_sidecar(const JobConfig& c, double wall_ms,
                   const std::vector<std::string>& outputs,
                   const json& extra) {
  if (c.out.empty()) return;
  json j{{"tool", kToolName},           {"version", kToolVersion},
         {"command", c.command},        {"config", config_to_json_obj(c)},
         {"wall_ms", wall_ms},          {"outputs", outputs}};
  if (!extra.is_null()) j["details"] = extra;
  write_text_artifact(c.out + ".meta.json", j.dump(2) + "\n");
}

class Timer {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ =
      std::chrono::steady_clock::now();
};

void require_format(const JobConfig& c, const std::string& expected) {
  if (!c.format.empty() && c.format != expected)
    throw Error("cli", "command '" + c.command + "' emits " + expected +
                           "; --format " + c.format + " is not available");
}

// --------------------------------------------------------------- commands

void cmd_ulam(const JobConfig& c, int threads) {
  require_format(c, "mtx");
  const Timer t;
  const TransferMatrix p = obtain_matrix(c, threads);
  std::ostringstream os;
  write_matrix_market(os, p.csr(), describe_build(c));
  write_text_artifact(c.out, os.str());
  write_sidecar(c, t.ms(), {c.out},
                json{{"nnz", p.csr().nnz()}, {"n", p.n()}});
}

void cmd_density(const JobConfig& c, int threads) {
  require_format(c, "csv");
  const Timer t;
  const TransferMatrix p = obtain_matrix(c, threads);
  const SpectralData sd =
      leading_eigendata(p, nullptr, c.eig_tol, kDefaultEigMaxIter, threads);
  std::ostringstream os;
  write_vector_csv(os, sd.right);
  write_text_artifact(c.out, os.str());
  write_sidecar(c, t.ms(), {c.out},
                json{{"lambda", sd.lambda}, {"iterations", sd.iterations}});
}

void cmd_variance(const JobConfig& c, int threads) {
  require_format(c, "csv");
  const TransferMatrix p = obtain_matrix(c, threads);
  const Observable g = resolve_observable(c);
  const Timer t;
  const VarianceReport rep = variance(p, g, c.eig_tol, threads);
  const double wall = t.ms();
  std::string csv = "n,observable,sigma2,dlam,ddlam,wall_ms\n";
  csv += std::to_string(rep.n) + "," + rep.observable + "," +
         fmt17(rep.sigma2) + "," + fmt17(rep.dlam) + "," + fmt17(rep.ddlam) +
         "," + fmt17(wall) + "\n";
  write_text_artifact(c.out, csv);
  write_sidecar(c, wall, {c.out}, json{{"map", rep.map}});
}

void cmd_rate(const JobConfig& c, int threads) {
  require_format(c, "csv");
  const TransferMatrix p = obtain_matrix(c, threads);
  const Observable g = resolve_observable(c);
  const std::vector<double> s_grid = parse_grid(c.s_grid, "--s-grid");
  RateOptions ro;
  ro.opt_tol = c.opt_tol;
  ro.eig_tol = c.eig_tol;
  if (c.z_max > 0.0) {
    ro.z_lo = -c.z_max;
    ro.z_hi = c.z_max;
  }
  ro.cold_start = c.cold_start;
  ro.threads = threads;
  const Timer t;
  const RateFunctionResult rr = rate_function(s_grid, p, g, ro);
  const double wall = t.ms();

  std::string csv = "s,r,z_star,iters\n";
  for (std::size_t i = 0; i < rr.s_grid.size(); ++i)
    csv += fmt17(rr.s_grid[i]) + "," + fmt17(rr.r[i]) + "," +
           fmt17(rr.z_star[i]) + "," + std::to_string(rr.iterations[i]) + "\n";
  write_text_artifact(c.out, csv);

  json saturated = json::array(), failed = json::array();
  for (std::size_t i = 0; i < rr.s_grid.size(); ++i) {
    if (rr.saturated[i]) saturated.push_back(rr.s_grid[i]);
    if (rr.failed[i]) failed.push_back(rr.s_grid[i]);
  }
  write_sidecar(c, wall, {c.out},
                json{{"z_searched", {rr.z_lo, rr.z_hi}},
                     {"cold_start", rr.cold_start},
                     {"saturated_s", saturated},
                     {"failed_s", failed}});
}

void cmd_escape(const JobConfig& c, int threads) {
  require_format(c, "json");
  const TransferMatrix p = obtain_matrix(c, threads);
  if (p.partition().dim != 1)
    throw Error("cli", "escape regions are intervals; --dim must be 1");
  const auto [a, b] = parse_region(c.region);
  const Timer t;
  const EscapeReport rep =
      escape_rate(p, cells_in_interval(p.n(), a, b), c.eig_tol, threads);
  const double wall = t.ms();

  const bool infinite = std::isinf(rep.escape_rate);
  json j{{"command", c.command},
         {"map", p.map_name()},
         {"cells", p.n()},
         {"region",
          {{"a", a},
           {"b", b},
           {"first_cell", rep.region.front() + 1},
           {"last_cell", rep.region.back() + 1},
           {"count", rep.region.size()}}},
         {"lambda_sub", rep.lambda_sub},
         {"escape_rate", infinite ? json(nullptr) : json(rep.escape_rate)},
         {"infinite", infinite}};
  write_text_artifact(c.out, j.dump(2) + "\n");
  write_sidecar(c, wall, {c.out}, json());
}

std::string study_mode_name(StudyMode m) {
  return m == StudyMode::kRefineN ? "refine_n" : "kernel_eps";
}

json study_to_json(const ConvergenceStudy& st) {
  json pts = json::array();
  for (const StudyPoint& pt : st.points) {
    json jp{{"parameter", pt.parameter}, {"n", pt.n}, {"eps", pt.eps}};
    if (pt.has_error) {
      jp["error"] = pt.error;
    } else {
      jp["error"] = nullptr;
      jp["sigma2"] = pt.sigma2;
      json lam = json::object(), rate = json::object();
      for (const auto& [z, v] : pt.lambda_at_z) lam[fmt17(z)] = v;
      for (const auto& [s, v] : pt.rate_values) rate[fmt17(s)] = v;
      jp["lambda_at_z"] = lam;
      jp["rate_values"] = rate;
    }
    pts.push_back(std::move(jp));
  }
  json j{{"mode", study_mode_name(st.mode)},
         {"map", st.map},
         {"observable", st.observable},
         {"parameter_grid", st.parameter_grid},
         {"z_probe", st.z_probe},
         {"s_probe", st.s_probe},
         {"reference_index", st.reference_index},
         {"fitted_exponent", st.fitted_exponent},
         {"fit_residual", st.fit_residual},
         {"fit_points", st.fit_points},
         {"points", std::move(pts)}};
  try {
    j["sigma2_deviation"] = sigma2_deviation(st);
  } catch (const Error&) {
    j["sigma2_deviation"] = nullptr;
  }
  try {
    if (!st.s_probe.empty()) j["rate_sup_deviation"] = rate_uniform_deviation(st);
  } catch (const Error&) {
    j["rate_sup_deviation"] = nullptr;
  }
  return j;
}

std::string study_to_csv(const ConvergenceStudy& st) {
  std::string csv = "grid_value,metric_name,value,deviation\n";
  const StudyPoint& ref = st.points[st.reference_index];
  for (const StudyPoint& pt : st.points) {
    if (pt.has_error || ref.has_error) continue;
    const std::string gv = fmt17(pt.parameter);
    csv += gv + ",sigma2," + fmt17(pt.sigma2) + "," +
           fmt17(std::abs(pt.sigma2 - ref.sigma2)) + "\n";
    for (const auto& [z, v] : pt.lambda_at_z) {
      const auto it = ref.lambda_at_z.find(z);
      const double dev =
          it == ref.lambda_at_z.end() ? 0.0 : std::abs(v - it->second);
      csv += gv + ",lambda_at_z=" + fmt17(z) + "," + fmt17(v) + "," +
             fmt17(dev) + "\n";
    }
    for (const auto& [s, v] : pt.rate_values) {
      const auto it = ref.rate_values.find(s);
      const double dev =
          it == ref.rate_values.end() ? 0.0 : std::abs(v - it->second);
      csv += gv + ",rate_at_s=" + fmt17(s) + "," + fmt17(v) + "," + fmt17(dev) +
             "\n";
    }
  }
  return csv;
}

std::string csv_sibling(const std::string& out) {
  const std::string suffix = ".json";
  if (out.size() > suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
    return out.substr(0, out.size() - suffix.size()) + ".csv";
  return out + ".csv";
}

void cmd_converge(const JobConfig& c, int threads) {
  if (c.dim != 1)
    throw Error("cli", "convergence studies run on interval maps; --dim 1");
  const PiecewiseAffineMap1D map = make_map_1d(c);
  const Observable g = resolve_observable(c);

  StudyMode mode;
  std::vector<double> grid;
  StudyOptions so;
  so.kernel = make_kernel_base(c);
  so.eig_tol = c.eig_tol;
  so.opt_tol = c.opt_tol;
  so.threads = threads;
  so.samples_per_cell = c.samples_per_cell;
  if (!c.eps.empty()) {
    mode = StudyMode::kKernelEps;
    grid = parse_grid(c.eps, "--eps");
    so.fixed_n = parse_cells_single(c);
  } else {
    mode = StudyMode::kRefineN;
    grid = parse_grid(c.cells, "--cells");
    for (double v : grid) require_integer(v, "--cells entry");
  }
  const std::vector<double> s_probe =
      (c.s_grid == "none") ? std::vector<double>{}
                           : parse_grid(c.s_grid, "--s-grid");
  const std::vector<double> z_probe;  // curve probes are library-level only

  const Timer t;
  const ConvergenceStudy st =
      run_convergence_study(map, g, mode, grid, z_probe, s_probe, so);
  const double wall = t.ms();

  const std::string json_text = study_to_json(st).dump(2) + "\n";
  const std::string csv_text = study_to_csv(st);
  if (c.out.empty()) {
    write_text_artifact("", c.format == "csv" ? csv_text : json_text);
  } else {
    write_text_artifact(c.out, json_text);
    write_text_artifact(csv_sibling(c.out), csv_text);
    write_sidecar(c, wall, {c.out, csv_sibling(c.out)},
                  json{{"mode", study_mode_name(mode)}});
  }
}

}  // namespace

std::string job_config_to_json(const JobConfig& cfg) {
  return config_to_json_obj(cfg).dump(2);
}

JobConfig job_config_from_json(const std::string& text) {
  try {
    return config_from_json_obj(json::parse(text));
  } catch (const json::exception& e) {
    throw Error("cli", std::string("invalid job config JSON: ") + e.what());
  }
}

void run_job(const JobConfig& cfg) {
  const int threads = resolve_threads(cfg.threads);
  if (cfg.command == "ulam")
    cmd_ulam(cfg, threads);
  else if (cfg.command == "density")
    cmd_density(cfg, threads);
  else if (cfg.command == "variance")
    cmd_variance(cfg, threads);
  else if (cfg.command == "rate")
    cmd_rate(cfg, threads);
  else if (cfg.command == "escape")
    cmd_escape(cfg, threads);
  else if (cfg.command == "converge")
    cmd_converge(cfg, threads);
  else
    throw Error("cli", "unknown command '" + cfg.command +
                           "' (available: ulam, density, variance, rate, "
                           "escape, converge)");
}

int run_cli(const std::vector<std::string>& args) {
  JobConfig cfg;
  std::vector<std::string> param_kv;

  CLI::App app{"statistical laws of chaotic interval maps via "
               "transfer-operator discretization"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ulam", "build the transfer matrix and write it as Matrix Market"},
      {"density", "invariant density of the discretized operator (CSV)"},
      {"variance", "CLT variance of an observable (CSV)"},
      {"rate", "large-deviation rate function on an s-grid (CSV)"},
      {"escape", "escape rate from an interval region (JSON)"},
      {"converge", "grid-refinement / kernel-noise convergence study"}};
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--map", cfg.map,
                    "map name: double-tent, doubling (1-D); "
                    "product-doubling, identity (2-D)");
    sub->add_option("--param", param_kv,
                    "map parameter k=v (repeatable), e.g. --param a=2.1");
    sub->add_option("--cells", cfg.cells,
                    "cells per axis; comma list = converge refine_n grid");
    sub->add_option("--dim", cfg.dim, "partition dimension (1 or 2)");
    sub->add_option("--obs", cfg.obs,
                    "observable: cos2pi, linear, sin2pi, indicator_half");
    sub->add_option("--obs-file", cfg.obs_file,
                    "indexed CSV (index,value; 1-based) table observable");
    sub->add_option("--s-grid", cfg.s_grid,
                    "s values: start:step:stop, list, value, or 'none'");
    sub->add_option("--z-max", cfg.z_max,
                    "bound of the twist-parameter search interval");
    sub->add_option("--eig-tol", cfg.eig_tol, "power-iteration tolerance");
    sub->add_option("--opt-tol", cfg.opt_tol,
                    "rate-function optimality tolerance");
    sub->add_option("--region", cfg.region, "escape interval a,b");
    sub->add_option("--kernel", cfg.kernel,
                    "smoothing kernel shape: uniform, triangular");
    sub->add_option("--boundary", cfg.boundary,
                    "kernel boundary mode: reflect, renormalize");
    sub->add_option("--eps", cfg.eps,
                    "kernel half-width; descending list = converge "
                    "kernel_eps grid");
    sub->add_option("--matrix", cfg.matrix_file,
                    "import a Matrix Market transfer matrix instead of "
                    "building one");
    sub->add_option("--seed", cfg.seed, "RNG seed for sampled 2-D assembly");
    sub->add_option("--threads", cfg.threads,
                    "worker threads (default: TRANSFERLAB_THREADS or 1)");
    sub->add_flag("--cold-start", cfg.cold_start,
                  "optimize each s independently from z = 0");
    sub->add_option("--out", cfg.out,
                    "output path (default stdout; sidecar written only with "
                    "--out)");
    sub->add_option("--format", cfg.format, "output format: csv, json, mtx");
    sub->add_option("--samples-per-cell", cfg.samples_per_cell,
                    "sample budget per cell for 2-D assembly");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    json err{{"error", {{"module", "cli"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    cfg.command = app.get_subcommands().at(0)->get_name();
    for (const std::string& kv : param_kv) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos || eq == 0)
        throw Error("cli", "--param expects k=v, got '" + kv + "'");
      cfg.params[kv.substr(0, eq)] =
          parse_number(kv.substr(eq + 1), "--param " + kv.substr(0, eq));
    }
    run_job(cfg);
    return 0;
  } catch (const Error& e) {
    json err{{"error", {{"module", e.module()}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err{{"error", {{"module", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}

}  // namespace transferlab
