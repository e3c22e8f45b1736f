#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sktlab/duality.hpp"
#include "sktlab/errors.hpp"
#include "sktlab/experiments.hpp"
#include "sktlab/grid_ops.hpp"
#include "sktlab/reconstruct.hpp"
#include "sktlab/semidiscrete.hpp"
#include "sktlab/walkers.hpp"

namespace py = pybind11;
using namespace sktlab;

namespace {

using Vec = std::vector<double>;

GridVector gv(const Vec& v) { return GridVector(v); }
Vec vec(const GridVector& g) { return g.vector(); }

std::vector<Vec> vecs(const std::vector<GridVector>& gs) {
    std::vector<Vec> out;
    out.reserve(gs.size());
    for (const auto& g : gs) out.push_back(g.vector());
    return out;
}

py::dict trajectory_dict(const OdeTrajectory& t) {
    py::dict d;
    d["times"] = t.times;
    d["u"] = vecs(t.u);
    d["v"] = vecs(t.v);
    d["steps"] = t.steps;
    d["negative_steps"] = t.negative_steps;
    d["min_value"] = t.min_value;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Lattice operators, repulsive random walks and duality certificates for cross-diffusion";

    auto base = py::register_exception<SktError>(m, "SktError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<CertificationError>(m, "CertificationError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<NonZeroMean>(m, "NonZeroMean", base.ptr());
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
    py::register_exception<NegativeDensity>(m, "NegativeDensity", base.ptr());
    py::register_exception<SmallnessViolation>(m, "SmallnessViolation", base.ptr());
    py::register_exception<FrozenState>(m, "FrozenState", base.ptr());

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init<>())
        .def(py::init([](double d1, double d2, double a12, double a21, int M, std::int64_t N, double T) {
                 return ModelParams{d1, d2, a12, a21, M, N, T};
             }),
             py::arg("d1") = 1.0, py::arg("d2") = 1.0, py::arg("a12") = 0.0, py::arg("a21") = 0.0, py::arg("M") = 8,
             py::arg("N") = 100, py::arg("T") = 0.1)
        .def_readwrite("d1", &ModelParams::d1)
        .def_readwrite("d2", &ModelParams::d2)
        .def_readwrite("a12", &ModelParams::a12)
        .def_readwrite("a21", &ModelParams::a21)
        .def_readwrite("M", &ModelParams::M)
        .def_readwrite("N", &ModelParams::N)
        .def_readwrite("T", &ModelParams::T)
        .def("smallness_bound", &ModelParams::smallness_bound)
        .def("smallness_margin", &ModelParams::smallness_margin, py::arg("sup_u"), py::arg("sup_v"));

    // grid operators
    m.def("laplacian_apply", [](const Vec& u) { return vec(PeriodicLaplacian(static_cast<int>(u.size())).apply(gv(u))); });
    m.def("laplacian_eigenvalues", [](int M) {
        const PeriodicLaplacian lap(M);
        return Vec(lap.eigenvalues().begin(), lap.eigenvalues().end());
    });
    m.def("solve_poisson",
          [](const Vec& w) { return vec(PeriodicLaplacian(static_cast<int>(w.size())).solve_poisson(gv(w))); });
    m.def("neg_sobolev_norm",
          [](const Vec& u) { return PeriodicLaplacian(static_cast<int>(u.size())).neg_sobolev_norm(gv(u)); });
    m.def("lp_norm", [](const Vec& u, double p) { return lp_norm(gv(u), p); }, py::arg("u"), py::arg("p") = 2.0);
    m.def("mean", [](const Vec& u) { return mean_of(gv(u)); });
    m.def("tilde", [](const Vec& u) { return vec(tilde(gv(u))); });
    m.def("apply_mass_matrix", [](const Vec& u) { return vec(apply_mass_matrix(gv(u))); });

    // reconstructions
    m.def("linear_lp_norm", [](const Vec& u, double p) { return linear_lp_norm(PiecewiseLinear{gv(u)}, p); });
    m.def("interpolate_nodal", [](const ScalarField& f, int M) { return vec(interpolate_nodal(f, M)); });
    m.def(
        "interpolation_errors",
        [](const ScalarField& f, const ScalarField& fp, int M, int M_ref) {
            const InterpolationErrors e = interpolation_errors(f, fp, M, M_ref);
            return py::dict(py::arg("l2") = e.l2, py::arg("hdot_minus1") = e.hdot_minus1, py::arg("hdot1") = e.hdot1);
        },
        py::arg("f"), py::arg("fprime"), py::arg("M"), py::arg("M_ref") = kDefaultFineResolution);
    m.def("trip_norm_discrete", [](const Vec& times, const std::vector<Vec>& path) {
        std::vector<GridVector> gs;
        for (const auto& p : path) gs.push_back(gv(p));
        return trip_norm_discrete(std::span<const double>(times), std::span<const GridVector>(gs));
    });

    // semi-discrete system
    m.def(
        "integrate",
        [](const Vec& u0, const Vec& v0, const ModelParams& p, double T, int snapshot_count, double step_safety) {
            IntegratorConfig cfg;
            cfg.snapshot_count = snapshot_count;
            cfg.step_safety = step_safety;
            return trajectory_dict(integrate({gv(u0), gv(v0), 0.0}, p, T, cfg));
        },
        py::arg("u0"), py::arg("v0"), py::arg("params"), py::arg("T"), py::arg("snapshot_count") = 65,
        py::arg("step_safety") = 0.5);

    // walkers
    m.def(
        "simulate",
        [](const Vec& u0, const Vec& v0, const ModelParams& p, const Vec& schedule, std::uint64_t seed,
           std::uint64_t replica) {
            const CountsState s0 = init_from_density(gv(u0), gv(v0), p.N);
            SimulationOptions opt;
            opt.seed = seed;
            opt.replica = replica;
            const PathRecord path = simulate_path(s0, p, std::span<const double>(schedule), opt);
            std::vector<std::vector<std::int64_t>> nu, nv;
            for (const auto& st : path.states) {
                nu.push_back(st.n_u);
                nv.push_back(st.n_v);
            }
            const MartingalePath mp = extract_martingale(path);
            py::dict d;
            d["times"] = path.times;
            d["n_u"] = nu;
            d["n_v"] = nv;
            d["events"] = path.events;
            d["martingale_u"] = vecs(mp.u);
            d["martingale_v"] = vecs(mp.v);
            d["predicted_qv_u"] = vec(predicted_qv(path, 1, path.size() - 1));
            d["predicted_qv_v"] = vec(predicted_qv(path, 2, path.size() - 1));
            return d;
        },
        py::arg("u0"), py::arg("v0"), py::arg("params"), py::arg("schedule"), py::arg("seed") = 0,
        py::arg("replica") = 0);

    // duality
    m.def(
        "verify_duality",
        [](const Vec& z0, const std::function<Vec(double)>& mu, double alpha, const std::function<Vec(double)>& f,
           const std::function<Vec(double)>& r, double T, double a) {
            EnvCoefficient env{[mu](double t) { return gv(mu(t)); }, alpha};
            TimeField ff, rr;
            if (f) ff = [f](double t) { return gv(f(t)); };
            if (r) rr = [r](double t) { return gv(r(t)); };
            const KolmogorovSolution sol = solve_kolmogorov(gv(z0), env, ff, rr, T);
            return verify_duality(sol, env, ff, rr, a).to_json();
        },
        py::arg("z0"), py::arg("mu"), py::arg("alpha"), py::arg("f") = nullptr, py::arg("r") = nullptr,
        py::arg("T") = 0.1, py::arg("a") = 1.0,
        "Solves the lattice Kolmogorov equation and returns the duality report as JSON text.");

    // studies
    py::class_<StudyConfig>(m, "StudyConfig")
        .def_readwrite("params", &StudyConfig::params)
        .def_readwrite("M_grid", &StudyConfig::M_grid)
        .def_readwrite("N_grid", &StudyConfig::N_grid)
        .def_readwrite("replicas", &StudyConfig::replicas)
        .def_readwrite("T", &StudyConfig::T)
        .def_readwrite("snapshot_count", &StudyConfig::snapshot_count)
        .def_readwrite("seed", &StudyConfig::seed)
        .def_readwrite("M_ref", &StudyConfig::M_ref)
        .def_readwrite("threads", &StudyConfig::threads)
        .def_readwrite("c1", &StudyConfig::c1)
        .def_readwrite("c2", &StudyConfig::c2)
        .def_readwrite("amplitude", &StudyConfig::amplitude)
        .def_readwrite("eps_grid", &StudyConfig::eps_grid)
        .def_readwrite("regular_instances", &StudyConfig::regular_instances)
        .def_readwrite("singular_instances", &StudyConfig::singular_instances)
        .def_readwrite("combined_instances", &StudyConfig::combined_instances)
        .def_readwrite("a_grid", &StudyConfig::a_grid)
        .def_property_readonly("study", [](const StudyConfig& c) { return study_name(c.kind); });

    m.def("default_config", [](const std::string& name) { return default_config(study_from_name(name)); });
    m.def("parse_config", &parse_config);
    m.def("load_config", &load_config);
    m.def(
        "run_study",
        [](const StudyConfig& c, const std::string& format) {
            StudyResult r;
            {
                py::gil_scoped_release release;
                r = run_study(c);
            }
            return format == "json" ? to_json(r) : to_csv(r);
        },
        py::arg("config"), py::arg("format") = "json", "Runs a study and returns its CSV or JSON serialization.");
    m.def("fit_loglog", [](const Vec& x, const Vec& y, const Vec& e) {
        const LogLogFit f = fit_loglog(x, y, e);
        return py::make_tuple(f.slope, f.intercept, f.slope_err);
    }, py::arg("x"), py::arg("y"), py::arg("y_err") = Vec{});
}
