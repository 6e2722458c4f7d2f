#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "regimescan/baselines.hpp"
#include "regimescan/oracle.hpp"
#include "regimescan/pipeline.hpp"
#include "regimescan/refine.hpp"
#include "regimescan/screen.hpp"
#include "regimescan/simulate.hpp"

namespace py = pybind11;
using namespace regimescan;

namespace {

RegimeSchedule make_schedule(double t0, double T, const std::vector<double>& breakpoints,
                             const std::vector<Vec>& regimes) {
  RegimeSchedule s;
  s.t0 = t0;
  s.T = T;
  s.breakpoints = breakpoints;
  s.regimes = regimes;
  return s;
}

py::dict cert_dict(const FloorCertificate& c) {
  py::dict d;
  d["a"] = c.a;
  d["b"] = c.b;
  d["crossing"] = c.crossing;
  d["tau"] = c.tau;
  d["floor"] = c.floor;
  d["bound"] = c.bound;
  d["simplified_bound"] = c.simplified_bound;
  d["alpha"] = c.alpha;
  d["len_minus"] = c.len_minus;
  d["len_plus"] = c.len_plus;
  d["delta_theta_norm"] = c.delta_theta_norm;
  d["margin"] = c.margin;
  d["pass"] = c.pass;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Change-point detection and parameter estimation for regime-switching ODEs";

  py::class_<SystemSpec>(m, "SystemSpec")
      .def_readonly("name", &SystemSpec::name)
      .def_readonly("state_dim", &SystemSpec::state_dim)
      .def_readonly("param_dim", &SystemSpec::param_dim)
      .def("__repr__", [](const SystemSpec& s) {
        return "<SystemSpec " + s.name + " (" + std::to_string(s.state_dim) + ", " +
               std::to_string(s.param_dim) + ")>";
      });

  py::class_<RegimeSchedule>(m, "RegimeSchedule")
      .def(py::init(&make_schedule), py::arg("t0"), py::arg("T"), py::arg("breakpoints"),
           py::arg("regimes"))
      .def_readonly("t0", &RegimeSchedule::t0)
      .def_readonly("T", &RegimeSchedule::T)
      .def_readonly("breakpoints", &RegimeSchedule::breakpoints)
      .def_readonly("regimes", &RegimeSchedule::regimes)
      .def("theta_at", [](const RegimeSchedule& s, double t) { return theta_at(s, t); },
           py::arg("t"));

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("times", &Trajectory::times)
      .def_readonly("states", &Trajectory::states)
      .def_readonly("dt", &Trajectory::dt)
      .def_readonly("schedule", &Trajectory::schedule)
      .def("node_index", &Trajectory::node_index, py::arg("t"),
           py::arg("tol_scale") = 1e-6);

  m.def("systems", [] { return all_systems(); });
  m.def("system", &system_by_name, py::arg("name"));

  m.def(
      "simulate",
      [](const std::string& system, const RegimeSchedule& schedule, const Vec& x0,
         double dt) { return integrate(system_by_name(system), schedule, x0, dt); },
      py::arg("system"), py::arg("schedule"), py::arg("x0"), py::arg("dt") = 0.01);

  m.def(
      "observe",
      [](const Trajectory& traj, double dt_obs, double noise_sigma, std::uint64_t seed) {
        const TrajectoryDataset ds = sample_observations(traj, dt_obs, noise_sigma, seed);
        return py::make_tuple(ds.obs_times, ds.obs_states);
      },
      py::arg("trajectory"), py::arg("dt_obs"), py::arg("noise_sigma") = 0.0,
      py::arg("seed") = 1);

  m.def(
      "field",
      [](const std::string& system, double t, const Vec& x, const Vec& theta) {
        return eval_field(system_by_name(system), t, x, theta);
      },
      py::arg("system"), py::arg("t"), py::arg("x"), py::arg("theta"));

  m.def(
      "affine_parts",
      [](const std::string& system, double t, const Vec& x) {
        const AffineParts p = eval_affine_parts(system_by_name(system), t, x);
        return py::make_tuple(p.G, p.b);
      },
      py::arg("system"), py::arg("t"), py::arg("x"));

  m.def(
      "information_matrix",
      [](const Trajectory& traj, double a, double b) {
        return information_matrix(system_spec(traj.system), traj, a, b).M;
      },
      py::arg("trajectory"), py::arg("a"), py::arg("b"));

  m.def(
      "residual_floor",
      [](const Trajectory& traj, double a, double b) {
        return residual_floor(a, b, traj, system_spec(traj.system));
      },
      py::arg("trajectory"), py::arg("a"), py::arg("b"));

  m.def(
      "certify_window",
      [](const Trajectory& traj, double a, double b) {
        return cert_dict(certify_window(a, b, traj, system_spec(traj.system)));
      },
      py::arg("trajectory"), py::arg("a"), py::arg("b"));

  m.def(
      "oracle_floors",
      [](const Trajectory& traj, double window_len, double step) {
        const WindowPlan plan =
            build_windows(traj.t0(), traj.t_end(), window_len, step);
        return py::make_tuple(plan.windows,
                              oracle_screen(traj, system_spec(traj.system), plan));
      },
      py::arg("trajectory"), py::arg("window_len"), py::arg("step"));

  m.def(
      "build_windows",
      [](double t0, double T, double window_len, double step) {
        return build_windows(t0, T, window_len, step).windows;
      },
      py::arg("t0"), py::arg("T"), py::arg("window_len"), py::arg("step"));

  m.def("mad_normalize", &mad_normalize, py::arg("scores"), py::arg("epsilon") = 1e-12);

  m.def(
      "pelt",
      [](const std::vector<Vec>& series, double psi) {
        const SegmentationResult r = pelt_segment(series, psi);
        py::dict d;
        d["breakpoints"] = r.breakpoints;
        d["segment_means"] = r.segment_means;
        d["total_cost"] = r.total_cost;
        return d;
      },
      py::arg("series"), py::arg("psi"));
  m.def("default_pelt_penalty", &default_pelt_penalty, py::arg("series"));

  m.def(
      "gmm_em",
      [](const std::vector<double>& values, int components, int iters, std::uint64_t seed) {
        const Gmm1d g = gmm_em_1d(values, components, iters, seed);
        py::dict d;
        d["weights"] = g.weights;
        d["means"] = g.means;
        d["variances"] = g.variances;
        d["posteriors"] = g.posteriors;
        d["loglik_trace"] = g.loglik_trace;
        d["variance_floored"] = g.variance_floored;
        return d;
      },
      py::arg("values"), py::arg("components") = 2, py::arg("iters") = 200,
      py::arg("seed") = 1);

  m.def("tau_of_eta", &tau_of_eta, py::arg("eta"), py::arg("t_lo"), py::arg("t_hi"));
  m.def("gate", &gate, py::arg("t"), py::arg("tau"), py::arg("kappa"));

  m.def("preset_names", [] { return preset_names(); });
  m.def(
      "preset_config",
      [](const std::string& name) { return serialize_config(preset(name)); },
      py::arg("name"));
  m.def(
      "run",
      [](const std::string& config_text, const std::string& out_dir) {
        RunConfig config = parse_config_text(config_text);
        if (!out_dir.empty()) config.out_dir = out_dir;
        return run_pipeline(config).report.dump(2);
      },
      py::arg("config_text"), py::arg("out_dir") = std::string(),
      "Run the full pipeline from flat config text; returns the JSON report.");
}
