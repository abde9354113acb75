#pragma once

#include <cmath>
#include <limits>
#include <span>

#include <boost/math/distributions/students_t.hpp>

#include "divlex/error.hpp"

namespace divlex::stats {

struct PairedTTest {
    double mean_diff = 0.0;  ///< mean of a - b
    double t = 0.0;
    double df = 0.0;
    double p_two_sided = 1.0;
};

/// Paired two-sided t-test on per-query scores. Zero variance gives
/// p = 1 for a zero mean difference and p = 0 otherwise.
inline PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("paired samples differ in length");
    if (a.size() < 2) throw InvalidArgument("paired t-test needs at least two pairs");
    const double n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    PairedTTest r;
    r.mean_diff = mean;
    r.df = n - 1.0;
    const double se = std::sqrt(ss / (n - 1.0) / n);
    if (se == 0.0) {
        r.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
        r.p_two_sided = mean == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.t = mean / se;
    boost::math::students_t dist(r.df);
    r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
    return r;
}

}  // namespace divlex::stats
