#pragma once

#include <cstddef>
#include <vector>

namespace peaklab {

// Closed integer index range [lo, hi] of lattice sites.
struct Window {
    int lo = 0;
    int hi = 0;
    int size() const { return hi - lo + 1; }
    bool contains(int n) const { return n >= lo && n <= hi; }
    bool operator==(const Window&) const = default;
};

// Finite real sequence indexed by the lattice site n in [win.lo, win.hi].
struct LatticeSeq {
    Window win;
    std::vector<double> v;

    LatticeSeq() = default;
    explicit LatticeSeq(Window w) : win(w), v(size_t(w.size()), 0.0) {}
    LatticeSeq(Window w, std::vector<double> vals);

    double& at(int n) { return v[size_t(n - win.lo)]; }
    double at(int n) const { return v[size_t(n - win.lo)]; }
    int size() const { return win.size(); }

    // throws validation_error if any stored value is NaN/inf
    void check_finite() const;
};

// ||y||_theta = sup_{n<=0} 2^n |y_n| + sup_{n>0} 2^{theta n} |y_n|,
// evaluated over the stored window.
double norm_theta(const LatticeSeq& y, double theta);

// forward difference (D+ y)_n = y_{n+1} - y_n on [lo, hi-1], zero at hi
LatticeSeq d_plus(const LatticeSeq& y);

// Time-stamped states sharing one window, with per-time diagnostics filled
// in by the producing solver (NaN where a diagnostic was not computed).
struct Trajectory {
    std::vector<double> times;
    std::vector<LatticeSeq> states;
    std::vector<double> wmean;   // conserved weighted mean, if applicable
    std::vector<double> norm0;   // ||.||_0 of the state
    std::vector<double> s_limit; // extrapolated right-tail limit
};

} // namespace peaklab
