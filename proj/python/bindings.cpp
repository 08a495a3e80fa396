#include "ksmooth/bandwidth.hpp"
#include "ksmooth/cv.hpp"
#include "ksmooth/estimators.hpp"
#include "ksmooth/kernel.hpp"
#include "ksmooth/run.hpp"
#include "ksmooth/simulation.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ksmooth;

namespace {

// Dataset from a value matrix with the listed response columns; names x1.. and y.. by role.
Dataset make_dataset(const Eigen::MatrixXd& values, const std::vector<std::size_t>& responses) {
  std::vector<std::string> names;
  std::vector<std::size_t> predictors;
  std::size_t nx = 0, ny = 0;
  for (std::size_t j = 0; j < static_cast<std::size_t>(values.cols()); ++j) {
    const bool is_response = std::find(responses.begin(), responses.end(), j) != responses.end();
    names.push_back(is_response ? "y" + std::to_string(++ny) : "x" + std::to_string(++nx));
    if (!is_response) predictors.push_back(j);
  }
  return Dataset(values, names, responses, predictors);
}

// Joint matrix (y, x...) for regression and conditional density inputs.
Dataset regression_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "x and y have different row counts");
  Eigen::MatrixXd v(x.rows(), x.cols() + 1);
  v << y, x;
  return Dataset::with_response(std::move(v), 0);
}

BandwidthMatrix to_bandwidth(const py::object& h, std::size_t d) {
  if (py::isinstance<BandwidthMatrix>(h)) return h.cast<BandwidthMatrix>();
  if (py::isinstance<py::float_>(h) || py::isinstance<py::int_>(h)) return BandwidthMatrix::scalar(h.cast<double>(), d);
  const auto m = h.cast<Eigen::MatrixXd>();
  if (m.cols() == 1 && static_cast<std::size_t>(m.rows()) == d && d > 1) {
    const std::vector<double> diag(m.data(), m.data() + m.size());
    return BandwidthMatrix::diagonal(diag);
  }
  return BandwidthMatrix::from_matrix(m);
}

py::dict result_dict(const std::vector<EstimateResult>& r) {
  Eigen::VectorXd value(static_cast<Eigen::Index>(r.size())), den(value.size());
  std::vector<bool> degenerate(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    value[static_cast<Eigen::Index>(i)] = r[i].value;
    den[static_cast<Eigen::Index>(i)] = r[i].denominator;
    degenerate[i] = r[i].degenerate;
  }
  py::dict out;
  out["value"] = value;
  out["denominator"] = den;
  out["degenerate"] = degenerate;
  return out;
}

// nlohmann::json -> Python objects through the json module.
py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

OptimizerConfig optimizer_from(const py::object& config) {
  OptimizerConfig c;
  if (config.is_none()) return c;
  const std::string text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
  from_json(nlohmann::json::parse(text), c);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Kernel density, regression and conditional density estimation with bandwidth matrices";

  static py::exception<Error> error(m, "KsmoothError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::tuple args = py::make_tuple(std::string(error_code_name(e.code())), std::string(e.what()));
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  py::class_<BandwidthMatrix>(m, "BandwidthMatrix")
      .def_static("scalar", &BandwidthMatrix::scalar, py::arg("h"), py::arg("d"))
      .def_static("diagonal", [](const std::vector<double>& h) { return BandwidthMatrix::diagonal(h); })
      .def_static(
          "from_matrix",
          [](const Eigen::MatrixXd& entries, const std::string& form) {
            return BandwidthMatrix::from_matrix(entries, parse_form(form));
          },
          py::arg("entries"), py::arg("form") = "general")
      .def_property_readonly("entries", &BandwidthMatrix::entries)
      .def_property_readonly("form", [](const BandwidthMatrix& h) { return std::string(form_name(h.form())); })
      .def_property_readonly("dim", &BandwidthMatrix::dim)
      .def("abs_determinant", &BandwidthMatrix::abs_determinant)
      .def("inverse", &BandwidthMatrix::inverse)
      .def("__repr__", [](const BandwidthMatrix& h) { return "BandwidthMatrix(" + nlohmann::json(h).dump() + ")"; });

  m.def(
      "kde",
      [](const Eigen::MatrixXd& data, const py::object& h, const Eigen::MatrixXd& queries, const std::string& kernel) {
        const auto d = static_cast<std::size_t>(data.cols());
        return result_dict(kde_batch(Dataset::unlabelled(data), Kernel(parse_kernel(kernel), d), to_bandwidth(h, d), queries));
      },
      py::arg("data"), py::arg("h"), py::arg("queries"), py::arg("kernel") = "gaussian");

  m.def(
      "nw_regression",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const py::object& h, const Eigen::MatrixXd& queries,
         const std::string& kernel) {
        const auto d = static_cast<std::size_t>(x.cols());
        return result_dict(
            nw_regression_batch(regression_dataset(x, y), Kernel(parse_kernel(kernel), d), to_bandwidth(h, d), queries));
      },
      py::arg("x"), py::arg("y"), py::arg("h"), py::arg("queries"), py::arg("kernel") = "gaussian");

  m.def(
      "conditional_density",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const py::object& h, const Eigen::MatrixXd& queries,
         const std::string& kernel) {
        const Dataset data = regression_dataset(x, y);
        const auto d = data.d();
        return result_dict(conditional_density_batch(data, response_predictor_split(data), Kernel(parse_kernel(kernel), d),
                                                     to_bandwidth(h, d), queries));
      },
      py::arg("x"), py::arg("y"), py::arg("h"), py::arg("queries"), py::arg("kernel") = "gaussian",
      "Queries are rows (y, x...).");

  m.def(
      "lscv_regression",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const py::object& h, const std::string& kernel) {
        const auto d = static_cast<std::size_t>(x.cols());
        const auto v = lscv_regression_detail(regression_dataset(x, y), Kernel(parse_kernel(kernel), d), to_bandwidth(h, d));
        return py::make_tuple(v.value, v.excluded);
      },
      py::arg("x"), py::arg("y"), py::arg("h"), py::arg("kernel") = "gaussian");

  m.def(
      "select_bandwidth",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& form, const std::string& task,
         const std::string& criterion, const std::string& kernel, const py::object& optimizer,
         double divergence_factor) {
        const Dataset data = regression_dataset(x, y);
        const Task t = parse_task(task);
        const std::size_t d = t == Task::Regression ? data.predictor_dim() : data.d();
        const CVSelection s = select_bandwidth(data, t, parse_criterion(criterion), parse_form(form),
                                               Kernel(parse_kernel(kernel), d), optimizer_from(optimizer),
                                               divergence_factor);
        py::dict out = to_python(nlohmann::json(s));
        out["bandwidth"] = s.bandwidth;
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("form") = "diagonal", py::arg("task") = "regression",
      py::arg("criterion") = "lscv", py::arg("kernel") = "gaussian", py::arg("optimizer") = py::none(),
      py::arg("divergence_factor") = 1000.0);

  m.def(
      "generate",
      [](int case_id, std::size_t n, std::uint64_t seed) {
        const Dataset data = generate(SimulationCase::from_number(case_id), n, seed);
        return py::make_tuple(Eigen::MatrixXd(data.predictors()), Eigen::VectorXd(data.response()));
      },
      py::arg("case_id"), py::arg("n"), py::arg("seed"), "Returns (x, y) for simulation case 1, 2 or 3.");

  m.def(
      "true_regression",
      [](int case_id, const Eigen::MatrixXd& x) {
        const SimulationCase c = SimulationCase::from_number(case_id);
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          const Eigen::VectorXd row = x.row(i).transpose();
          out[i] = true_regression(c, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
        }
        return out;
      },
      py::arg("case_id"), py::arg("x"));

  m.def(
      "estimate_mise",
      [](int case_id, const std::string& form, std::size_t n, std::size_t replications, std::size_t test_points,
         std::uint64_t seed, const py::object& optimizer) {
        return to_python(nlohmann::json(estimate_mise(SimulationCase::from_number(case_id), parse_form(form), n,
                                                      replications, test_points, seed, optimizer_from(optimizer))));
      },
      py::arg("case_id"), py::arg("form"), py::arg("n"), py::arg("replications"), py::arg("test_points") = 1000,
      py::arg("seed") = 0, py::arg("optimizer") = py::none());

  m.def(
      "fit_rate",
      [](const std::vector<std::size_t>& n, const std::vector<double>& mise) {
        return to_python(nlohmann::json(fit_rate(n, mise)));
      },
      py::arg("n"), py::arg("mise"));

  m.def(
      "run",
      [](const py::dict& config) {
        const std::string text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
        RunConfig c = nlohmann::json::parse(text).get<RunConfig>();
        const RunOutcome out = run(c);
        std::vector<std::string> outputs;
        for (const auto& p : out.outputs) outputs.push_back(p.string());
        return py::make_tuple(out.exit_code, to_python(out.summary), outputs);
      },
      py::arg("config"), "Runs a command from a config dict; returns (exit_code, summary, output paths).");

  m.attr("__version__") = kVersion;
}
