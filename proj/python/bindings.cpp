#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "percamp/disorder.hpp"
#include "percamp/error.hpp"
#include "percamp/pipeline.hpp"
#include "percamp/special.hpp"

namespace py = pybind11;
using namespace percamp;

namespace {

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_py(const py::object& o) {
    return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Parisi PDE, state evolution, incremental AMP and rounding for the spherical perceptron";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("mills", &mills, py::arg("x"));
    m.def("log_gauss_tail", &log_gauss_tail, py::arg("x"));
    m.def("mills_jet", [](double x) {
        const MillsJet j = mills_jet(x);
        return py::make_tuple(j.a, j.d1, j.d2, j.d3);
    }, py::arg("x"));
    m.def("rs_capacity", &rs_capacity, py::arg("kappa"));
    m.def("rs_second_moment", &rs_second_moment, py::arg("kappa"));
    m.def("gardner_rs", [](double alpha, double kappa) {
        const GardnerResult g = gardner_rs(alpha, kappa);
        return py::dict(py::arg("value") = g.value, py::arg("q_star") = g.q_star,
                        py::arg("minus_infinity") = g.minus_infinity);
    }, py::arg("alpha"), py::arg("kappa"));

    py::class_<Fop>(m, "Fop")
        .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("breakpoints"), py::arg("levels"))
        .def_static("step", &Fop::step, py::arg("q"))
        .def_property_readonly("breakpoints", &Fop::breakpoints)
        .def_property_readonly("levels", &Fop::levels)
        .def_property_readonly("q_under", &Fop::q_under)
        .def_property_readonly("q_bar", &Fop::q_bar)
        .def("__call__", &Fop::gamma, py::arg("t"))
        .def("lambda_of", &Fop::lambda, py::arg("q"))
        .def("to_dict", [](const Fop& g) { return to_py(fop_to_json(g)); })
        .def_static("from_dict", [](const py::object& o) { return fop_from_json(from_py(o)); });

    m.def("parisi_value", [](const Fop& g, double kappa, double alpha, int nx) {
        return parisi_value(g, kappa, alpha, nx);
    }, py::arg("gamma"), py::arg("kappa"), py::arg("alpha"), py::arg("nx") = 2049);
    m.def("minimize", [](double alpha, double kappa, int pieces, int budget, std::uint64_t seed) {
        MinimizeOptions o;
        o.pieces = pieces;
        o.budget = budget;
        o.seed = seed;
        py::gil_scoped_release nogil;
        const VariationalResult r = minimize(alpha, kappa, o);
        py::gil_scoped_acquire gil;
        return to_py(to_json(r));
    }, py::arg("alpha"), py::arg("kappa"), py::arg("pieces") = 2, py::arg("budget") = 400, py::arg("seed") = 0);

    m.def("project_polytope_dense", [](const std::vector<double>& a, std::size_t rows, std::size_t cols,
                                       const std::vector<double>& u, double kappa, double tol) {
        RoundingOptions o;
        o.tol = tol;
        const RoundedSolution r = project_polytope_dense(a, rows, cols, u, kappa, o);
        py::dict d = to_py(to_json(r));
        d["sigma_star"] = r.sigma_star;
        d["multipliers"] = r.multipliers;
        return d;
    }, py::arg("a"), py::arg("m"), py::arg("n"), py::arg("u"), py::arg("kappa"), py::arg("tol") = 1e-8);
    m.def("smin_check", [](std::size_t n, double alpha, std::uint64_t seed) {
        const Disorder d = generate_disorder(n, alpha, seed);
        return to_py(to_json(smin_check(d)));
    }, py::arg("n"), py::arg("alpha"), py::arg("seed") = 0);
    m.def("disorder_rows", [](std::size_t n, double alpha, std::uint64_t seed, std::vector<std::size_t> rows) {
        return generate_disorder(n, alpha, seed, {Storage::stream}).rows_of_a(rows);
    }, py::arg("n"), py::arg("alpha"), py::arg("seed"), py::arg("rows"));

    m.def("rs_scan_csv", [](const std::vector<double>& kappas, const std::vector<double>& fractions) {
        return scan_csv(rs_capacity_scan(kappas, fractions), fractions);
    }, py::arg("kappas"), py::arg("fractions") = std::vector<double>{0.25, 0.5, 0.75, 0.9});

    m.def("default_config", []() { return to_py(to_json(ModelParams{})); });
    m.def("validate_config", [](const py::object& o) { return to_py(to_json(params_from_json(from_py(o)))); },
          py::arg("config"));
    m.def("run_pipeline", [](const py::object& config, const std::string& run_dir) {
        const ModelParams p = params_from_json(from_py(config));
        PipelineReport r;
        {
            py::gil_scoped_release nogil;
            r = run_pipeline(p, run_dir);
        }
        return to_py(r.json);
    }, py::arg("config"), py::arg("run_dir"));

    m.attr("__version__") = code_version;
}
