#pragma once
// Logarithmic-grid measures: the norm and moments, weak-form coagulation and
// fragmentation functionals, truncated operators with the cutoff psi_R, and
// the mild (exponential-weight) Picard solver.
//
// Representation. A GridMeasure holds atoms (or cell masses) at strictly
// increasing log2-mass positions x_i with nonnegative weights w_i.  The
// convention throughout is the log-coordinate one: an atom of mass m at
// xi in the mass coordinate corresponds to weight m/ln2 at x = log2 xi.
// Stationary peak profiles enter natively with weight a_n at x = n + rho,
// so moment(profile, 1) equals the profile mass exactly.

#include "peaklab/kernels.hpp"
#include "peaklab/peaks.hpp"

#include <functional>
#include <string>
#include <vector>

namespace peaklab {
namespace measures {

enum class MeasureKind { atomic, cell_averaged };

struct GridMeasure {
    std::vector<double> grid;    // strictly increasing positions
    std::vector<double> weights; // nonnegative
    MeasureKind kind = MeasureKind::atomic;

    static GridMeasure make(std::vector<double> grid, std::vector<double> weights,
                            MeasureKind kind = MeasureKind::atomic);
    size_t size() const { return grid.size(); }
};

// change of variables xi = 2^x between mass-coordinate atom masses and
// log-coordinate weights (weight = mass / ln2); inverse pair
GridMeasure to_log(const GridMeasure& f);
GridMeasure from_log(const GridMeasure& g);

// lattice amplitudes as a measure: weight b_n at x = n + rho
GridMeasure measure_from_peaks(const peaks::PeakState& s);

// sup_{n<0} 2^{-n} (weight in [n,n+1)) + total weight in [0,inf)
double norm_g(const GridMeasure& g);

// sum_i 2^{r x_i} w_i
double moment(const GridMeasure& g, double r);

struct TestFunction {
    std::string name;
    std::function<double(double)> f;
};

// the standard admissible test functions: mass (2^x), constants, compactly
// supported C^2 bumps, saturating ramps
std::vector<TestFunction> test_bank();

// B_c[g,g;phi] - B_f[g;phi]; zero for every admissible phi characterizes
// stationarity.  scale is the largest single |term| entering either sum,
// the natural normalizer for a relative residual.
struct WeakResidual {
    double value;
    double scale;
    double relative() const { return scale > 0.0 ? std::abs(value) / scale : 0.0; }
};
WeakResidual weak_residual(const KernelModel& km, const GridMeasure& g,
                           const TestFunction& phi);

// cutoff: 1 on [0,R-1], cubic smoothstep down to 0 at R
double psi_R(double xi, double R);

// A_R field at the atom positions and the gain measure B_R
struct TruncatedOps {
    std::vector<double> A_field; // aligned with g.grid
    GridMeasure B_measure;
};
TruncatedOps truncated_operators(const KernelModel& km, const GridMeasure& g, double R);

struct MeasureTrajectory {
    std::vector<double> times;
    std::vector<GridMeasure> states;
    std::vector<double> mass;   // moment(., 1)
    std::vector<double> norms;  // norm_g
};

// mild Picard solver: iterates the exponential-weight integral map on
// successive subintervals, shrinking the interval when the iteration fails
// to contract; atoms are spawned lazily along coagulation targets and the
// fragmentation shift and merged when positions coincide to 1e-9
MeasureTrajectory mild_picard_step(const KernelModel& km, const GridMeasure& g0, double R,
                                   double T, double tol, double theta = 3.0);

struct MomentBoundReport {
    double sup_norm;
    double sup_moment_theta;
    double sup_moment_1;
    double theta;
};
MomentBoundReport moment_bound_report(const MeasureTrajectory& tr, double theta);

} // namespace measures
} // namespace peaklab
