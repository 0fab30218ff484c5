#include "peaklab/lattice.hpp"
#include "peaklab/errors.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace peaklab {

LatticeSeq::LatticeSeq(Window w, std::vector<double> vals) : win(w), v(std::move(vals)) {
    if (v.size() != size_t(w.size()))
        throw validation_error("LatticeSeq: " + std::to_string(v.size()) + " values for a window of " +
                               std::to_string(w.size()) + " sites");
}

void LatticeSeq::check_finite() const {
    for (size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw validation_error("LatticeSeq: non-finite value at site " +
                                   std::to_string(win.lo + int(i)));
}

double norm_theta(const LatticeSeq& y, double theta) {
    // supported weight range is theta > -1; the beta-dependent upper bound
    // is enforced where a kernel model is in scope
    if (!(theta > -1.0) || !std::isfinite(theta))
        throw validation_error("norm_theta: theta must be finite and > -1");
    double left = 0.0, right = 0.0;
    for (int n = y.win.lo; n <= y.win.hi; ++n) {
        const double a = std::abs(y.at(n));
        if (n <= 0)
            left = std::max(left, std::exp2(double(n)) * a);
        else
            right = std::max(right, std::exp2(theta * double(n)) * a);
    }
    return left + right;
}

LatticeSeq d_plus(const LatticeSeq& y) {
    LatticeSeq d(y.win);
    for (int n = y.win.lo; n < y.win.hi; ++n) d.at(n) = y.at(n + 1) - y.at(n);
    return d;
}

} // namespace peaklab
