#include "tufw/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace tufw;

namespace {

py::dict record_dict(const IterationRecord& r) {
  py::dict d;
  d["k"] = r.k;
  d["F"] = r.objective;
  d["gap"] = r.gap ? py::object(py::float_(*r.gap)) : py::object(py::none());
  d["gamma"] = r.gamma;
  d["batch"] = r.batch;
  d["flops"] = r.flops;
  d["lmo_calls"] = r.lmo_calls;
  d["metrics_flops"] = r.metrics_flops;
  d["wall_ms"] = r.wall_ms;
  return d;
}

py::dict result_dict(const RunResult& run) {
  py::list records;
  for (const auto& r : run.trace.records) records.append(record_dict(r));
  py::dict d;
  d["records"] = records;
  d["last_iterate"] = run.trace.last_iterate;
  d["solution"] = run.trace.solution;
  d["solution_k"] = run.trace.solution_k;
  d["exact_gradient_flops"] = run.trace.exact_gradient_flops;
  if (!run.iterates.empty()) d["iterates"] = run.iterates;
  return d;
}

RunOptions make_options(long iterations, std::optional<Vector> x0, const std::string& hmode,
                        long gap_every, std::optional<double> gap_tolerance, bool keep_iterates,
                        const std::string& return_policy, std::uint64_t return_seed) {
  RunOptions o;
  o.iterations = iterations;
  o.x0 = std::move(x0);
  o.hessian_mode = parse_hessian_mode(hmode);
  o.gap_every = gap_every;
  o.gap_tolerance = gap_tolerance;
  o.keep_iterates = keep_iterates;
  o.return_policy = parse_return_policy(return_policy);
  o.return_seed = return_seed;
  return o;
}

StepSizeRule make_steps(const std::string& steps, const std::string& base,
                        std::optional<long> horizon) {
  return StepSizeRule{parse_step_kind(steps), parse_step_kind(base), horizon};
}

Json to_json_value(const py::handle& h) {
  return Json::parse(py::module_::import("json").attr("dumps")(h).cast<std::string>());
}

py::object from_json(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Taylor-point updating Frank-Wolfe solvers";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  // losses
  auto family = [](const std::string& s) { return parse_loss_kind(s); };
  m.def("loss_value", [=](const std::string& f, double y, double v) { return loss_value(family(f), y, v); },
        py::arg("family"), py::arg("y"), py::arg("v"));
  m.def("loss_d1", [=](const std::string& f, double y, double v) { return loss_d1(family(f), y, v); },
        py::arg("family"), py::arg("y"), py::arg("v"));
  m.def("loss_d2", [=](const std::string& f, double y, double v) { return loss_d2(family(f), y, v); },
        py::arg("family"), py::arg("y"), py::arg("v"));
  m.def("lipschitz_constants", [=](const std::string& f) {
    const auto c = lipschitz_constants(family(f));
    return py::make_tuple(c.L, c.L_hat);
  });

  // geometry
  py::class_<FeasibleSet>(m, "FeasibleSet")
      .def(py::init([](const std::string& kind, double radius) {
             return FeasibleSet(parse_set_kind(kind), radius);
           }),
           py::arg("kind") = "l1", py::arg("radius") = 1.0)
      .def_property_readonly("radius", &FeasibleSet::radius)
      .def_property_readonly("kind", [](const FeasibleSet& s) { return std::string(to_string(s.kind())); })
      .def("lmo", &FeasibleSet::lmo, py::arg("g"))
      .def("diameter", [](const FeasibleSet& s, const std::string& norm, Index p) {
        return s.diameter(parse_norm(norm), p);
      })
      .def("range_diameter", [](const FeasibleSet& s, const SparseMatrix& W, const std::string& q) {
        return s.range_diameter(W, parse_norm(q));
      })
      .def("contains", &FeasibleSet::contains, py::arg("x"), py::arg("rel_tol") = 1e-12);

  // dataset
  py::class_<Problem>(m, "Problem")
      .def(py::init([](const SparseMatrix& W, const Vector& y, const std::string& f,
                       const std::string& norm) {
             return Problem(LabeledData{W, y}, parse_loss_kind(f), parse_primal_norm(norm));
           }),
           py::arg("W"), py::arg("y"), py::arg("family"), py::arg("norm") = "l1")
      .def_property_readonly("W", &Problem::W)
      .def_property_readonly("y", &Problem::y)
      .def_property_readonly("n", &Problem::n)
      .def_property_readonly("p", &Problem::p)
      .def_property_readonly("M", &Problem::M)
      .def_property_readonly("L_eff", &Problem::L_eff)
      .def_property_readonly("Lhat_eff", &Problem::Lhat_eff)
      .def_property_readonly("family", [](const Problem& p) { return std::string(to_string(p.family())); })
      .def_property_readonly("labels_remapped", &Problem::labels_remapped)
      .def_property_readonly("fingerprint", &Problem::fingerprint)
      .def("objective", [](const Problem& p, const Vector& x) { return objective(p, x); })
      .def("gradient", [](const Problem& p, const Vector& x) { return exact_gradient(p, x); });

  m.def("synth_problem",
        [](Index n, Index p, const std::string& f, std::uint64_t seed, const std::string& norm) {
          return synth_problem(n, p, parse_loss_kind(f), seed, parse_primal_norm(norm));
        },
        py::arg("n"), py::arg("p"), py::arg("family") = "logistic", py::arg("seed") = 0,
        py::arg("norm") = "l1");
  m.def("load_libsvm",
        [](const std::string& path, const std::string& f, std::optional<Index> dims,
           const std::string& norm) {
          return Problem(load_libsvm(path, dims), parse_loss_kind(f), parse_primal_norm(norm));
        },
        py::arg("path"), py::arg("family") = "logistic", py::arg("dims") = py::none(),
        py::arg("norm") = "l1");
  m.def("fw_gap", [](const Problem& p, const FeasibleSet& s, const Vector& x) { return fw_gap(p, s, x); });

  // taylor model
  py::class_<TaylorModel>(m, "TaylorModel")
      .def(py::init([](const Problem& p, const Vector& x0, const std::string& mode) {
             return TaylorModel(p, x0, parse_hessian_mode(mode));
           }),
           py::arg("problem"), py::arg("x0"), py::arg("mode") = "dense", py::keep_alive<1, 2>())
      .def("update_batch",
           [](TaylorModel& t, const std::vector<Index>& batch, const Vector& x, long k) {
             t.update_batch(batch, x, k);
           })
      .def("gradient_estimate", py::overload_cast<const Eigen::Ref<const Vector>&>(&TaylorModel::gradient_estimate))
      .def("curvature", &TaylorModel::curvature)
      .def("error_bound", [](const TaylorModel& t, const std::vector<double>& steps, double D) {
        return t.error_bound(steps, D);
      })
      .def_property_readonly("theta", &TaylorModel::theta)
      .def_property_readonly("q", &TaylorModel::q)
      .def_property_readonly("hessian", &TaylorModel::hessian)
      .def_property_readonly("last_update", &TaylorModel::last_update)
      .def_property_readonly("update_flops", &TaylorModel::update_flops);

  // rules
  py::class_<BatchRule>(m, "BatchRule")
      .def(py::init([](const std::string& kind, std::optional<long> horizon,
                       const std::string& sampling, std::uint64_t seed) {
             return BatchRule(RuleSpec{parse_rule_kind(kind), horizon, parse_sampling(sampling), seed});
           }),
           py::arg("kind") = "dbd-sqrt", py::arg("horizon") = py::none(),
           py::arg("sampling") = "cyclic", py::arg("seed") = 0)
      .def("indices", &BatchRule::indices, py::arg("k"), py::arg("n"))
      .def("expected_size", &BatchRule::expected_size, py::arg("k"), py::arg("n"));

  // solvers
  m.def("step_size",
        [](const std::string& steps, long k, std::optional<long> horizon, double gk_dot_xs,
           double curvature, const std::string& base) {
          return step_size(make_steps(steps, base, horizon), k, gk_dot_xs, curvature);
        },
        py::arg("steps"), py::arg("k"), py::arg("horizon") = py::none(), py::arg("gk_dot_xs") = 0.0,
        py::arg("curvature") = 0.0, py::arg("base") = "harmonic");

  m.def("tufw_run",
        [](const Problem& p, const FeasibleSet& s, const BatchRule& rule, long iterations,
           const std::string& steps, const std::string& base, std::optional<long> horizon,
           std::optional<Vector> x0, const std::string& hmode, long gap_every,
           std::optional<double> gap_tolerance, bool keep_iterates, const std::string& ret,
           std::uint64_t return_seed) {
          const auto o = make_options(iterations, std::move(x0), hmode, gap_every, gap_tolerance,
                                      keep_iterates, ret, return_seed);
          RunResult run;
          {
            py::gil_scoped_release release;
            run = tufw_run(p, s, rule, make_steps(steps, base, horizon), o);
          }
          return result_dict(run);
        },
        py::arg("problem"), py::arg("set"), py::arg("rule"), py::arg("iterations") = 100,
        py::arg("steps") = "harmonic", py::arg("base") = "harmonic", py::arg("horizon") = py::none(),
        py::arg("x0") = py::none(), py::arg("hmode") = "dense", py::arg("gap_every") = 0,
        py::arg("gap_tolerance") = py::none(), py::arg("keep_iterates") = false,
        py::arg("return_policy") = "last", py::arg("return_seed") = 0);

  m.def("standard_fw_run",
        [](const Problem& p, const FeasibleSet& s, long iterations, const std::string& steps,
           std::optional<long> horizon, std::optional<Vector> x0, long gap_every,
           std::optional<double> gap_tolerance, bool keep_iterates) {
          const auto o = make_options(iterations, std::move(x0), "dense", gap_every, gap_tolerance,
                                      keep_iterates, "last", 0);
          RunResult run;
          {
            py::gil_scoped_release release;
            run = standard_fw_run(p, s, make_steps(steps, "harmonic", horizon), o);
          }
          return result_dict(run);
        },
        py::arg("problem"), py::arg("set"), py::arg("iterations") = 100,
        py::arg("steps") = "harmonic", py::arg("horizon") = py::none(), py::arg("x0") = py::none(),
        py::arg("gap_every") = 0, py::arg("gap_tolerance") = py::none(),
        py::arg("keep_iterates") = false);

  m.def("fw_ada_run",
        [](const Problem& p, const FeasibleSet& s, long iterations, std::optional<Vector> x0,
           long gap_every, bool keep_iterates) {
          const auto o = make_options(iterations, std::move(x0), "dense", gap_every, std::nullopt,
                                      keep_iterates, "last", 0);
          RunResult run;
          {
            py::gil_scoped_release release;
            run = fw_ada_run(p, s, o);
          }
          return result_dict(run);
        },
        py::arg("problem"), py::arg("set"), py::arg("iterations") = 100, py::arg("x0") = py::none(),
        py::arg("gap_every") = 0, py::arg("keep_iterates") = false);

  // harness
  m.def("compute_reference",
        [](const Problem& p, const FeasibleSet& s, long iterations) {
          ReferenceSolution ref;
          {
            py::gil_scoped_release release;
            ref = compute_reference(p, s, iterations);
          }
          py::dict d;
          d["f_star"] = ref.f_star;
          d["x_star"] = ref.x_star;
          d["iterations"] = ref.iterations;
          d["fingerprint"] = fingerprint_hex(ref.fingerprint);
          return d;
        },
        py::arg("problem"), py::arg("set"), py::arg("iterations") = 1'000'000);

  m.def("problem_constants", [](const Problem& p, const FeasibleSet& s) {
    return from_json(to_json(compute_constants(p, s)));
  });

  m.def("bound_rhs",
        [](const std::string& kind, const py::dict& constants, long k, double initial_gap) {
          return bound_rhs(parse_bound_kind(kind), constants_from_json(to_json_value(constants)), k,
                           initial_gap);
        },
        py::arg("kind"), py::arg("constants"), py::arg("k"), py::arg("initial_gap") = 0.0);

  m.def("load_trace", [](const std::filesystem::path& path) {
    const TraceFile t = load_trace(path);
    py::list records;
    for (const auto& r : t.records) records.append(record_dict(r));
    py::dict d;
    d["header"] = from_json(t.header);
    d["records"] = records;
    return d;
  });

  m.def("summarize_traces",
        [](const std::vector<std::filesystem::path>& paths, const std::vector<double>& eps) {
          std::vector<TraceFile> traces;
          for (const auto& p : paths) traces.push_back(load_trace(p));
          return from_json(summarize(traces, eps));
        },
        py::arg("paths"), py::arg("eps") = std::vector<double>{1e-1, 1e-3, 1e-5});
}
