// Python bindings for the lattice coagulation-fragmentation toolkit.
// Composite results cross as plain dicts/lists so downstream analysis can
// feed them straight into numpy without wrapper types.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "peaklab/errors.hpp"
#include "peaklab/fundsol.hpp"
#include "peaklab/kernels.hpp"
#include "peaklab/lattice.hpp"
#include "peaklab/linear.hpp"
#include "peaklab/measures.hpp"
#include "peaklab/peaks.hpp"
#include "peaklab/stationary.hpp"

#include <utility>
#include <vector>

namespace py = pybind11;
using namespace peaklab;

namespace {

using WinPair = std::pair<int, int>;

Window to_win(const WinPair& w) { return Window{w.first, w.second}; }
WinPair from_win(const Window& w) { return {w.lo, w.hi}; }

LatticeSeq to_seq(const WinPair& w, const std::vector<double>& v) {
    const Window win = to_win(w);
    if (int(v.size()) != win.size())
        throw validation_error("value list does not match the window size");
    return LatticeSeq(win, v);
}

py::dict profile_dict(const PeakProfile& p) {
    std::vector<int> ns;
    for (int n = p.win.lo; n <= p.win.hi; ++n) ns.push_back(n);
    py::dict d;
    d["n"] = ns;
    d["a"] = p.a;
    d["log_a"] = p.log_a;
    d["alpha"] = p.alpha_seq;
    d["A"] = p.A;
    d["rho"] = p.rho;
    d["mass"] = p.mass;
    d["window"] = from_win(p.win);
    d["recurrence_residual"] = p.max_recurrence_residual();
    d["ratio_residual"] = p.max_ratio_residual();
    return d;
}

py::dict measure_dict(const measures::GridMeasure& g) {
    py::dict d;
    d["x"] = g.grid;
    d["weight"] = g.weights;
    d["kind"] = g.kind == measures::MeasureKind::atomic ? "atomic" : "cell_averaged";
    return d;
}

} // namespace

PYBIND11_MODULE(_peaklab, m) {
    m.doc() = "stationary peak profiles, linearized and nonlinear lattice dynamics, "
              "fundamental solutions, and measure-valued mild evolution";

    py::register_exception<peaklab::error>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception<peaklab::validation_error>(m, "ValidationError", PyExc_ValueError);

    py::class_<KernelModel>(m, "KernelModel")
        .def(py::init([](double alpha, double beta, double k0, double gamma0, double rho) {
                 KernelModel km{alpha, beta, k0, gamma0, rho};
                 km.validate();
                 return km;
             }),
             py::arg("alpha") = 0.5, py::arg("beta") = 1.5, py::arg("k0") = 1.0,
             py::arg("gamma0") = 1.0, py::arg("rho") = 0.0)
        .def_readwrite("alpha", &KernelModel::alpha)
        .def_readwrite("beta", &KernelModel::beta)
        .def_readwrite("k0", &KernelModel::k0)
        .def_readwrite("gamma0", &KernelModel::gamma0)
        .def_readwrite("rho", &KernelModel::rho)
        .def("validate", &KernelModel::validate)
        .def("k_rate", &KernelModel::k_rate, py::arg("xi"))
        .def("gamma_rate", &KernelModel::gamma_rate, py::arg("xi"))
        .def("K_coag", &KernelModel::K_coag, py::arg("xi"), py::arg("eta"))
        .def("xi_node", &KernelModel::xi_node, py::arg("n"))
        .def("__repr__", [](const KernelModel& km) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "KernelModel(alpha=%g, beta=%g, k0=%g, gamma0=%g, rho=%g)", km.alpha,
                          km.beta, km.k0, km.gamma0, km.rho);
            return std::string(buf);
        });

    // ---- stationary profiles
    m.def("solve_A_for_mass", &solve_A_for_mass, py::arg("kernel"), py::arg("M"),
          py::arg("rho") = 0.0, py::arg("tol") = 1e-12,
          "tail parameter A whose stationary profile carries total mass M");
    m.def("mass_of", &mass_of, py::arg("kernel"), py::arg("A"), py::arg("rho") = 0.0);
    m.def(
        "auto_window",
        [](const KernelModel& km, double A, double rho) { return from_win(auto_window(km, A, rho)); },
        py::arg("kernel"), py::arg("A"), py::arg("rho") = 0.0,
        "window whose mass truncation is below 1e-10 relative");
    m.def(
        "profile",
        [](const KernelModel& km, double A, double rho, py::object window) {
            const Window win = window.is_none() ? auto_window(km, A, rho)
                                                : to_win(window.cast<WinPair>());
            return profile_dict(profile_from_A(km, A, rho, win));
        },
        py::arg("kernel"), py::arg("A"), py::arg("rho") = 0.0, py::arg("window") = py::none(),
        "stationary amplitudes a_n on the window, with residual diagnostics");
    m.def("a_minus_inf", &a_minus_inf, py::arg("kernel"), py::arg("rho") = 0.0);
    m.def("a_inf", &a_inf, py::arg("kernel"), py::arg("rho") = 0.0);
    m.def(
        "norm_theta",
        [](const std::vector<double>& v, const WinPair& w, double theta) {
            return norm_theta(to_seq(w, v), theta);
        },
        py::arg("values"), py::arg("window"), py::arg("theta"));

    // ---- linearized dynamics
    m.def(
        "linear_evolve",
        [](const KernelModel& km, double A_M, const WinPair& w, const std::vector<double>& y0,
           const std::vector<double>& t_grid, double tol, double rho) {
            const linear::Operator op = linear::build_operator(km, to_win(w), A_M, rho);
            const Trajectory tr = linear::evolve(op, to_seq(w, y0), t_grid, tol);
            py::dict d;
            d["times"] = tr.times;
            std::vector<std::vector<double>> states;
            for (const LatticeSeq& s : tr.states) states.push_back(s.v);
            d["states"] = states;
            d["wmean"] = tr.wmean;
            d["norm0"] = tr.norm0;
            d["s_limit"] = tr.s_limit;
            return d;
        },
        py::arg("kernel"), py::arg("A_M"), py::arg("window"), py::arg("y0"), py::arg("t_grid"),
        py::arg("tol") = 1e-9, py::arg("rho") = 0.0,
        "evolve dy/dt = L y around the stationary profile; conserves the weighted mean");

    // ---- nonlinear peak dynamics
    m.def(
        "peaks_evolve",
        [](const KernelModel& km, const WinPair& w, double rho, const std::vector<double>& b0,
           const std::vector<double>& t_grid, double tol) {
            const peaks::PeakState s0 = peaks::PeakState::make(km, to_win(w), rho, b0);
            const peaks::PeakTrajectory tr = peaks::evolve_b_grid(km, s0, t_grid, tol);
            py::dict d;
            d["times"] = tr.times;
            std::vector<std::vector<double>> states;
            for (const peaks::PeakState& s : tr.states) states.push_back(s.b);
            d["states"] = states;
            d["mass"] = tr.mass;
            return d;
        },
        py::arg("kernel"), py::arg("window"), py::arg("rho"), py::arg("b0"), py::arg("t_grid"),
        py::arg("tol") = 1e-8, "mass-conserving amplitude dynamics on the window");
    m.def(
        "peaks_decompose",
        [](const KernelModel& km, const WinPair& w, double rho, const std::vector<double>& b) {
            const peaks::Decomposition dec =
                peaks::decompose(km, peaks::PeakState::make(km, to_win(w), rho, b));
            py::dict d;
            d["A"] = dec.A;
            d["eps"] = dec.eps.v;
            d["y"] = dec.y.v;
            d["residual"] = dec.residual;
            return d;
        },
        py::arg("kernel"), py::arg("window"), py::arg("rho"), py::arg("b"),
        "split amplitudes into a dilation parameter A and a perturbation");
    m.def(
        "main_theorem_report",
        [](const KernelModel& km, const WinPair& w, double rho, const std::vector<double>& b0,
           double T, double tol) {
            const peaks::MainTheoremReport r =
                peaks::verify_main_theorem(km, peaks::PeakState::make(km, to_win(w), rho, b0), T, tol);
            py::dict d;
            d["M"] = r.M;
            d["A_M"] = r.A_M;
            d["nu_hat"] = r.nu_hat;
            d["terminal_A_gap"] = r.terminal_A_gap;
            d["mass_drift"] = r.mass_drift;
            d["times"] = r.times;
            d["envelope"] = r.envelope;
            d["A_path"] = r.A_path;
            d["mass"] = r.mass;
            return d;
        },
        py::arg("kernel"), py::arg("window"), py::arg("rho"), py::arg("b0"), py::arg("T"),
        py::arg("tol") = 1e-8,
        "direct-integration relaxation report: envelope decay, terminal A gap, mass drift");
    m.def("picard_time_grid", &peaks::picard_time_grid, py::arg("T"));
    m.def(
        "picard_fixed_point",
        [](const KernelModel& km, const WinPair& w, const std::vector<double>& y0, double A0,
           double M, double T, int max_sweeps, double delta0, int jobs) {
            const std::vector<double> tg = peaks::picard_time_grid(T);
            const peaks::FixedPointState f =
                peaks::picard_fixed_point(km, to_seq(w, y0), A0, M, tg, max_sweeps, delta0, jobs);
            py::dict d;
            d["t_grid"] = f.t_grid;
            std::vector<std::vector<double>> states;
            for (const LatticeSeq& s : f.y_path.states) states.push_back(s.v);
            d["y_states"] = states;
            d["Lambda_path"] = f.Lambda_path;
            d["A_path"] = f.A_path;
            d["sweep_diffs"] = f.sweep_diffs;
            d["contraction_factors"] = f.contraction_factors;
            d["A_M"] = f.A_M;
            d["nu_fit"] = f.nu_fit;
            d["sweeps"] = f.sweeps;
            return d;
        },
        py::arg("kernel"), py::arg("window"), py::arg("y0"), py::arg("A0"), py::arg("M"),
        py::arg("T"), py::arg("max_sweeps") = 10, py::arg("delta0") = 1e-2, py::arg("jobs") = 0,
        "contraction sweeps of the mild fixed-point map for (y, Lambda)");

    // ---- fundamental solutions
    m.def("fundsol_check_n0", &fundsol::check_n0, py::arg("kernel"), py::arg("range") = 60);
    m.def("fundsol_psi", &fundsol::psi, py::arg("kernel"), py::arg("n"), py::arg("ell"),
          py::arg("t"), "residue form of the fundamental solution");
    m.def("fundsol_psi_ode", &fundsol::psi_by_ode, py::arg("kernel"), py::arg("n"), py::arg("ell"),
          py::arg("t"), py::arg("tol") = 1e-10, "the same value by direct stiff integration");
    m.def("fundsol_psi_integral_check", &fundsol::psi_integral_check, py::arg("kernel"),
          py::arg("n"), py::arg("ell"), "normalization integral; contract: equals 1 to 1e-8");
    m.def("fundsol_psi_inf", &fundsol::psi_inf, py::arg("kernel"), py::arg("ell"), py::arg("t"));
    m.def("fundsol_dbeta_psi", &fundsol::dbeta_psi, py::arg("kernel"), py::arg("ell"),
          py::arg("t"));

    // ---- measures layer
    m.def("test_bank_names", [] {
        std::vector<std::string> names;
        for (const measures::TestFunction& f : measures::test_bank()) names.push_back(f.name);
        return names;
    });
    m.def(
        "weak_residual",
        [](const KernelModel& km, const std::vector<double>& grid,
           const std::vector<double>& weights, const std::function<double(double)>& phi) {
            const measures::GridMeasure g = measures::GridMeasure::make(grid, weights);
            const measures::WeakResidual r = measures::weak_residual(km, g, {"custom", phi});
            py::dict d;
            d["value"] = r.value;
            d["scale"] = r.scale;
            d["relative"] = r.relative();
            return d;
        },
        py::arg("kernel"), py::arg("grid"), py::arg("weights"), py::arg("phi"),
        "coagulation-minus-fragmentation weak form against one test function");
    m.def(
        "weak_residual_bank",
        [](const KernelModel& km, const std::vector<double>& grid,
           const std::vector<double>& weights) {
            const measures::GridMeasure g = measures::GridMeasure::make(grid, weights);
            py::dict d;
            for (const measures::TestFunction& phi : measures::test_bank())
                d[phi.name.c_str()] = measures::weak_residual(km, g, phi).relative();
            return d;
        },
        py::arg("kernel"), py::arg("grid"), py::arg("weights"),
        "relative weak residual for every bank function");
    m.def(
        "mild_evolve",
        [](const KernelModel& km, const std::vector<double>& grid,
           const std::vector<double>& weights, double R, double T, double tol, double theta) {
            const measures::GridMeasure g0 = measures::GridMeasure::make(grid, weights);
            const measures::MeasureTrajectory tr =
                measures::mild_picard_step(km, g0, R, T, tol, theta);
            py::dict d;
            d["times"] = tr.times;
            d["mass"] = tr.mass;
            d["norms"] = tr.norms;
            py::list states;
            for (const measures::GridMeasure& g : tr.states) states.append(measure_dict(g));
            d["states"] = states;
            return d;
        },
        py::arg("kernel"), py::arg("grid"), py::arg("weights"), py::arg("R"), py::arg("T"),
        py::arg("tol") = 1e-8, py::arg("theta") = 3.0,
        "mild Picard evolution of an atomic measure with cutoff radius R");
}
