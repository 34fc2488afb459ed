#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "transferlab/cli.hpp"
#include "transferlab/errors.hpp"
#include "transferlab/io.hpp"
#include "transferlab/maps.hpp"
#include "transferlab/perturb.hpp"
#include "transferlab/sparse.hpp"
#include "transferlab/statistics.hpp"
#include "transferlab/twist.hpp"
#include "transferlab/ulam.hpp"

namespace py = pybind11;
using namespace transferlab;

namespace {

std::vector<std::tuple<std::int64_t, std::int64_t, double>> csr_triplets(
    const SparseCsr& m) {
  std::vector<std::tuple<std::int64_t, std::int64_t, double>> out;
  out.reserve(static_cast<std::size_t>(m.nnz()));
  for (std::int64_t i = 0; i < m.n(); ++i)
    for (std::int64_t k = m.row_ptr()[i]; k < m.row_ptr()[i + 1]; ++k)
      out.emplace_back(i, m.cols()[k], m.values()[k]);
  return out;
}

}  // namespace

PYBIND11_MODULE(transferlab, m) {
  m.doc() =
      "statistical laws of chaotic maps via transfer-operator "
      "discretization: invariant densities, CLT variances, large-deviation "
      "rate functions, escape rates, and perturbation studies";
  m.attr("__version__") = kToolVersion;

  py::register_exception<Error>(m, "TransferlabError");

  // ------------------------------------------------------------- maps
  py::class_<AffineBranch>(m, "AffineBranch")
      .def(py::init<double, double, double, double>(), py::arg("lo"),
           py::arg("hi"), py::arg("slope"), py::arg("intercept"))
      .def_readonly("lo", &AffineBranch::lo)
      .def_readonly("hi", &AffineBranch::hi)
      .def_readonly("slope", &AffineBranch::slope)
      .def_readonly("intercept", &AffineBranch::intercept)
      .def("__call__", &AffineBranch::operator());

  py::class_<PiecewiseAffineMap1D>(m, "PiecewiseAffineMap1D")
      .def(py::init<std::string, std::vector<AffineBranch>>(),
           py::arg("name"), py::arg("branches"))
      .def("__call__", &PiecewiseAffineMap1D::operator())
      .def_property_readonly("name", &PiecewiseAffineMap1D::name)
      .def_property_readonly("branches", &PiecewiseAffineMap1D::branches)
      .def_property_readonly("min_expansion",
                             &PiecewiseAffineMap1D::min_expansion);

  m.def("make_double_tent", &make_double_tent, py::arg("a"),
        "two back-to-back tents on [0,1] with slope magnitude a (1 < a <= 4)");
  m.def("make_doubling_map", &make_doubling_map, "x -> 2x mod 1");

  py::class_<Map2D>(m, "Map2D")
      .def("__call__",
           [](const Map2D& f, double x, double y) { return f(x, y); })
      .def_property_readonly("name", &Map2D::name)
      .def_property_readonly("piecewise_affine", &Map2D::piecewise_affine);
  m.def("make_product_doubling", &make_product_doubling,
        "(x, y) -> (2x mod 1, 2y mod 1)");
  m.def("make_identity_2d", &make_identity_2d);

  py::class_<Observable>(m, "Observable")
      .def_static("cos2pi", &Observable::cos2pi)
      .def_static("linear", &Observable::linear)
      .def_static("sin2pi", &Observable::sin2pi)
      .def_static("indicator_half", &Observable::indicator_half)
      .def_static("table", &Observable::table, py::arg("values"),
                  "piecewise-constant observable from equal-width cell values")
      .def_static(
          "custom",
          [](const std::string& name, std::function<double(double)> fn) {
            return Observable::custom(name, std::move(fn));
          },
          py::arg("name"), py::arg("fn"))
      .def("__call__", &Observable::operator())
      .def_property_readonly("name", &Observable::name);

  // --------------------------------------------------------- partitions
  py::class_<PartitionDescriptor>(m, "PartitionDescriptor")
      .def(py::init([](int dim, std::int64_t cells_per_axis) {
             PartitionDescriptor p;
             p.dim = dim;
             p.cells_per_axis = cells_per_axis;
             return p;
           }),
           py::arg("dim"), py::arg("cells_per_axis"))
      .def_readonly("dim", &PartitionDescriptor::dim)
      .def_readonly("cells_per_axis", &PartitionDescriptor::cells_per_axis)
      .def("total_cells", &PartitionDescriptor::total_cells)
      .def("cell_measure", &PartitionDescriptor::cell_measure)
      .def("midpoint", &PartitionDescriptor::midpoint);

  py::class_<SparseCsr>(m, "SparseCsr")
      .def_property_readonly("n", &SparseCsr::n)
      .def_property_readonly("nnz", &SparseCsr::nnz)
      .def("entry", &SparseCsr::entry)
      .def("row_sums", &SparseCsr::row_sums)
      .def("triplets", &csr_triplets)
      .def("apply",
           [](const SparseCsr& m_, const std::vector<double>& x) {
             std::vector<double> y(x.size());
             m_.apply(x, y, 1);
             return y;
           })
      .def("apply_transpose",
           [](const SparseCsr& m_, const std::vector<double>& x) {
             std::vector<double> y(x.size());
             m_.apply_transpose(x, y, 1);
             return y;
           });

  py::class_<TransferMatrix>(m, "TransferMatrix")
      .def(py::init<SparseCsr, PartitionDescriptor, std::string>(),
           py::arg("csr"), py::arg("partition"), py::arg("map_name"))
      .def_property_readonly("n", &TransferMatrix::n)
      .def_property_readonly("map_name", &TransferMatrix::map_name)
      .def_property_readonly("partition", &TransferMatrix::partition)
      .def_property_readonly(
          "csr", [](const TransferMatrix& p) { return p.csr(); })
      .def("entry",
           [](const TransferMatrix& p, std::int64_t i, std::int64_t j) {
             return p.csr().entry(i, j);
           })
      .def("row_sums",
           [](const TransferMatrix& p) { return p.csr().row_sums(); });

  m.def("build_ulam_1d", &build_ulam_1d, py::arg("map"), py::arg("cells"),
        py::arg("threads") = 1,
        "exact cell-to-cell transition fractions of a piecewise-affine map");
  m.def("build_ulam_2d", &build_ulam_2d, py::arg("map"),
        py::arg("cells_per_axis"), py::arg("samples_per_cell"),
        py::arg("seed") = 0, py::arg("jitter") = 0.0, py::arg("threads") = 1,
        "stratified-sampling transition fractions on a square grid");

  py::class_<DiscretizedObservable>(m, "DiscretizedObservable")
      .def_readonly("values", &DiscretizedObservable::values)
      .def_readonly("observable_name",
                    &DiscretizedObservable::observable_name)
      .def_readonly("centered", &DiscretizedObservable::centered)
      .def_readonly("mean_shift", &DiscretizedObservable::mean_shift);
  m.def("discretize_observable", &discretize_observable, py::arg("observable"),
        py::arg("cells"));
  m.def("center_against", &center_against, py::arg("observable"),
        py::arg("density"));

  // ----------------------------------------------------------- spectra
  py::class_<SpectralData>(m, "SpectralData")
      .def_readonly("lambda_", &SpectralData::lambda)
      .def_readonly("log_lambda", &SpectralData::log_lambda)
      .def_readonly("right", &SpectralData::right)
      .def_readonly("left", &SpectralData::left)
      .def_readonly("iterations", &SpectralData::iterations)
      .def_readonly("residual", &SpectralData::residual);

  m.def(
      "leading_eigendata",
      [](const TransferMatrix& p, double tol, int threads) {
        return leading_eigendata(p, nullptr, tol, kDefaultEigMaxIter, threads);
      },
      py::arg("p"), py::arg("tol") = kDefaultEigTol, py::arg("threads") = 1,
      "leading eigenvalue with paired right (density, mean 1) and left "
      "vectors");
  m.def(
      "invariant_density",
      [](const TransferMatrix& p, double tol, int threads) {
        return leading_eigendata(p, nullptr, tol, kDefaultEigMaxIter, threads)
            .right;
      },
      py::arg("p"), py::arg("tol") = kDefaultEigTol, py::arg("threads") = 1,
      "cell values of the invariant density, normalized to mean 1");
  m.def("spectral_gap_probe", &spectral_gap_probe, py::arg("p"),
        py::arg("tol") = 1e-8, py::arg("max_iter") = kDefaultEigMaxIter,
        py::arg("threads") = 1,
        "modulus of the second eigenvalue, estimated by deflated iteration");

  // ------------------------------------------------------------- twist
  py::class_<TwistedMatrix>(m, "TwistedMatrix")
      .def_property_readonly("n", &TwistedMatrix::n)
      .def_property_readonly("z", &TwistedMatrix::z)
      .def_property_readonly("log_scale", &TwistedMatrix::log_scale)
      .def("entry", &TwistedMatrix::entry);
  m.def("twist", &twist, py::arg("base"), py::arg("g"), py::arg("z"),
        py::arg("z_max") = kDefaultZMax,
        "reweight source-cell mass by exp(z * g)");
  m.def(
      "twisted_eigendata",
      [](const TwistedMatrix& t, double tol, int threads) {
        return leading_eigendata(t, nullptr, tol, kDefaultEigMaxIter, threads);
      },
      py::arg("twisted"), py::arg("tol") = kDefaultEigTol,
      py::arg("threads") = 1);
  m.def("lambda_prime", &lambda_prime, py::arg("twisted"),
        py::arg("eigendata"),
        "d lambda / dz from the left/right eigenvector pairing");
  m.def("lambda_second", &lambda_second_general, py::arg("twisted"),
        py::arg("eigendata"),
        "d^2 lambda / dz^2 via a reduced-resolvent solve");

  py::class_<TwistSpectralCurve>(m, "TwistSpectralCurve")
      .def_readonly("z_values", &TwistSpectralCurve::z_values)
      .def_readonly("lambda_", &TwistSpectralCurve::lambda)
      .def_readonly("log_lambda", &TwistSpectralCurve::log_lambda)
      .def_readonly("lambda_prime", &TwistSpectralCurve::lambda_prime)
      .def_readonly("lambda_second", &TwistSpectralCurve::lambda_second);
  m.def("twist_curve", &twist_curve, py::arg("base"), py::arg("g"),
        py::arg("z_values"), py::arg("tol") = kDefaultEigTol,
        py::arg("z_max") = kDefaultZMax, py::arg("keep_eigendata") = false,
        py::arg("threads") = 1);

  // -------------------------------------------------------- statistics
  py::class_<VarianceReport>(m, "VarianceReport")
      .def_readonly("sigma2", &VarianceReport::sigma2)
      .def_readonly("ddlam", &VarianceReport::ddlam)
      .def_readonly("dlam", &VarianceReport::dlam)
      .def_readonly("n", &VarianceReport::n)
      .def_readonly("observable", &VarianceReport::observable)
      .def_readonly("map", &VarianceReport::map);
  m.def("variance", &variance, py::arg("p"), py::arg("observable"),
        py::arg("eig_tol") = kDefaultEigTol, py::arg("threads") = 1,
        "CLT variance of the centered observable under the discretized map");
  m.def("variance_via_second_derivative", &variance_via_second_derivative,
        py::arg("p"), py::arg("observable"),
        py::arg("eig_tol") = kDefaultEigTol, py::arg("threads") = 1,
        "same quantity through the twisted-eigenvalue curvature at z = 0");

  py::class_<RateOptions>(m, "RateOptions")
      .def(py::init<>())
      .def_readwrite("opt_tol", &RateOptions::opt_tol)
      .def_readwrite("eig_tol", &RateOptions::eig_tol)
      .def_readwrite("z_lo", &RateOptions::z_lo)
      .def_readwrite("z_hi", &RateOptions::z_hi)
      .def_readwrite("max_evals", &RateOptions::max_evals)
      .def_readwrite("cold_start", &RateOptions::cold_start)
      .def_readwrite("threads", &RateOptions::threads);
  py::class_<RateFunctionResult>(m, "RateFunctionResult")
      .def_readonly("s_grid", &RateFunctionResult::s_grid)
      .def_readonly("r", &RateFunctionResult::r)
      .def_readonly("z_star", &RateFunctionResult::z_star)
      .def_readonly("z_lo", &RateFunctionResult::z_lo)
      .def_readonly("z_hi", &RateFunctionResult::z_hi)
      .def_readonly("iterations", &RateFunctionResult::iterations)
      .def_readonly("saturated", &RateFunctionResult::saturated)
      .def_readonly("failed", &RateFunctionResult::failed)
      .def_readonly("cold_start", &RateFunctionResult::cold_start);
  m.def(
      "rate_function",
      [](const std::vector<double>& s_grid, const TransferMatrix& p,
         const Observable& g, const RateOptions& options) {
        return rate_function(s_grid, p, g, options);
      },
      py::arg("s_grid"), py::arg("p"), py::arg("observable"),
      py::arg("options") = RateOptions{},
      "Legendre transform of the twisted-eigenvalue log curve on an s-grid");

  py::class_<EscapeReport>(m, "EscapeReport")
      .def_readonly("region", &EscapeReport::region)
      .def_readonly("lambda_sub", &EscapeReport::lambda_sub)
      .def_readonly("escape_rate", &EscapeReport::escape_rate);
  m.def("escape_rate", &escape_rate, py::arg("p"), py::arg("region"),
        py::arg("eig_tol") = kDefaultEigTol, py::arg("threads") = 1,
        "-log of the leading eigenvalue of the region-restricted submatrix");
  m.def("cells_in_interval", &cells_in_interval, py::arg("n"), py::arg("a"),
        py::arg("b"), "0-based cells whose interval lies inside [a, b]");
  m.def("consistency_check_rate_vs_escape", &consistency_check_rate_vs_escape,
        py::arg("p"), py::arg("n"),
        "|rate(1) - escape([0,1/2])| for the indicator observable");

  // ----------------------------------------------------- perturbations
  py::enum_<KernelSpec::Shape>(m, "KernelShape")
      .value("uniform", KernelSpec::Shape::kUniform)
      .value("triangular", KernelSpec::Shape::kTriangular);
  py::enum_<KernelSpec::Boundary>(m, "KernelBoundary")
      .value("reflect", KernelSpec::Boundary::kReflect)
      .value("renormalize", KernelSpec::Boundary::kRenormalize);
  py::class_<KernelSpec>(m, "KernelSpec")
      .def(py::init([](KernelSpec::Shape shape, double eps,
                       KernelSpec::Boundary boundary) {
             KernelSpec k;
             k.shape = shape;
             k.eps = eps;
             k.boundary = boundary;
             return k;
           }),
           py::arg("shape") = KernelSpec::Shape::kUniform,
           py::arg("eps") = 0.0,
           py::arg("boundary") = KernelSpec::Boundary::kReflect)
      .def_readwrite("shape", &KernelSpec::shape)
      .def_readwrite("eps", &KernelSpec::eps)
      .def_readwrite("boundary", &KernelSpec::boundary);
  m.def("apply_kernel", &apply_kernel, py::arg("p"), py::arg("kernel"),
        py::arg("threads") = 1,
        "compose the transfer matrix with a local smoothing kernel");
  m.def("kernel_matrix", &kernel_matrix, py::arg("n"), py::arg("kernel"),
        "row-stochastic matrix of the kernel alone");

  py::enum_<StudyMode>(m, "StudyMode")
      .value("refine_n", StudyMode::kRefineN)
      .value("kernel_eps", StudyMode::kKernelEps);
  py::class_<StudyPoint>(m, "StudyPoint")
      .def_readonly("parameter", &StudyPoint::parameter)
      .def_readonly("n", &StudyPoint::n)
      .def_readonly("eps", &StudyPoint::eps)
      .def_readonly("lambda_at_z", &StudyPoint::lambda_at_z)
      .def_readonly("sigma2", &StudyPoint::sigma2)
      .def_readonly("rate_values", &StudyPoint::rate_values)
      .def_readonly("has_error", &StudyPoint::has_error)
      .def_readonly("error", &StudyPoint::error);
  py::class_<ConvergenceStudy>(m, "ConvergenceStudy")
      .def_readonly("mode", &ConvergenceStudy::mode)
      .def_readonly("map", &ConvergenceStudy::map)
      .def_readonly("observable", &ConvergenceStudy::observable)
      .def_readonly("parameter_grid", &ConvergenceStudy::parameter_grid)
      .def_readonly("z_probe", &ConvergenceStudy::z_probe)
      .def_readonly("s_probe", &ConvergenceStudy::s_probe)
      .def_readonly("points", &ConvergenceStudy::points)
      .def_readonly("reference_index", &ConvergenceStudy::reference_index)
      .def_readonly("fitted_exponent", &ConvergenceStudy::fitted_exponent)
      .def_readonly("fit_residual", &ConvergenceStudy::fit_residual)
      .def_readonly("fit_points", &ConvergenceStudy::fit_points);
  py::class_<StudyOptions>(m, "StudyOptions")
      .def(py::init<>())
      .def_readwrite("fixed_n", &StudyOptions::fixed_n)
      .def_readwrite("kernel", &StudyOptions::kernel)
      .def_readwrite("eig_tol", &StudyOptions::eig_tol)
      .def_readwrite("opt_tol", &StudyOptions::opt_tol)
      .def_readwrite("samples_per_cell", &StudyOptions::samples_per_cell)
      .def_readwrite("threads", &StudyOptions::threads);
  m.def("run_convergence_study", &run_convergence_study, py::arg("map"),
        py::arg("observable"), py::arg("mode"), py::arg("grid"),
        py::arg("z_probe") = std::vector<double>{},
        py::arg("s_probe") = std::vector<double>{},
        py::arg("options") = StudyOptions{},
        "track spectral statistics toward the unperturbed / continuum limit");
  m.def("rate_uniform_deviation", &rate_uniform_deviation, py::arg("study"),
        "per-point sup over s of |r - r_reference|");
  m.def("sigma2_deviation", &sigma2_deviation, py::arg("study"));

  // ----------------------------------------------------------------- io
  m.def("write_matrix_market", &write_matrix_market_file, py::arg("path"),
        py::arg("matrix"), py::arg("comment") = std::string{});
  m.def("read_matrix_market", &read_matrix_market_file, py::arg("path"));
  m.def(
      "run_job",
      [](const std::string& config_json) {
        run_job(job_config_from_json(config_json));
      },
      py::arg("config_json"),
      "execute one CLI job described by its JSON configuration");
}
