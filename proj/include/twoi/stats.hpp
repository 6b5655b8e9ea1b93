// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Histograms and the comparison measures used to judge simulated
// distributions against reference curves.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "twoi/error.hpp"

namespace twoi {

class Histogram {
  public:
    Histogram() = default;

    Histogram(double lo, double hi, std::size_t bins) : lo_(lo), hi_(hi), counts_(bins, 0)
    {
        require(hi > lo, Errc::InvalidArgument, "histogram requires hi > lo");
        require(bins >= 1, Errc::InvalidArgument, "histogram requires at least one bin");
    }

    void add(double x, std::uint64_t weight = 1)
    {
        require(!std::isnan(x), Errc::InvalidArgument, "cannot histogram NaN");
        if (x < lo_) {
            underflow_ += weight;
        } else if (x >= hi_) {
            overflow_ += weight;
        } else {
            auto i = static_cast<std::size_t>((x - lo_) / bin_width());
            counts_[std::min(i, counts_.size() - 1)] += weight;
        }
    }

    /// Elementwise sum; both histograms must share the same binning.
    void merge(const Histogram& other)
    {
        require(same_binning(other), Errc::InvalidArgument, "merging histograms with different binning");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
        underflow_ += other.underflow_;
        overflow_ += other.overflow_;
    }

    bool same_binning(const Histogram& o) const { return lo_ == o.lo_ && hi_ == o.hi_ && counts_.size() == o.counts_.size(); }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    std::size_t bins() const { return counts_.size(); }
    double bin_width() const { return (hi_ - lo_) / static_cast<double>(counts_.size()); }
    double bin_center(std::size_t i) const { return lo_ + (static_cast<double>(i) + 0.5) * bin_width(); }
    double bin_lo(std::size_t i) const { return lo_ + static_cast<double>(i) * bin_width(); }

    std::span<const std::uint64_t> counts() const { return counts_; }
    std::uint64_t count(std::size_t i) const { return counts_[i]; }
    std::uint64_t underflow() const { return underflow_; }
    std::uint64_t overflow() const { return overflow_; }

    std::uint64_t in_range() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }
    std::uint64_t total() const { return in_range() + underflow_ + overflow_; }

    std::vector<double> as_doubles() const { return {counts_.begin(), counts_.end()}; }

    friend bool operator==(const Histogram&, const Histogram&) = default;

  private:
    double lo_ = 0.0;
    double hi_ = 1.0;
    std::vector<std::uint64_t> counts_;
    std::uint64_t underflow_ = 0;
    std::uint64_t overflow_ = 0;
};

/// Coordinate interval used to restrict a comparison.
struct Window {
    double lo;
    double hi;
};

inline Window central_window(const Histogram& h, double fraction = 0.5)
{
    const double mid = 0.5 * (h.lo() + h.hi());
    const double half = 0.5 * fraction * (h.hi() - h.lo());
    return {mid - half, mid + half};
}

struct ScaledCurve {
    double scale = 0.0;
    std::vector<double> curve;
};

/// Least-squares scale s* = sum h_i I_i / sum I_i^2 minimising sum (h_i - s I_i)^2.
inline ScaledCurve scale_to_match(const Histogram& hist, std::span<const double> curve)
{
    require(curve.size() == hist.bins(), Errc::InvalidArgument, "curve and histogram bin counts differ");
    double hi = 0.0;
    double ii = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        hi += static_cast<double>(hist.count(i)) * curve[i];
        ii += curve[i] * curve[i];
    }
    require(ii > 0.0, Errc::DegenerateCurve, "reference curve is identically zero");
    ScaledCurve out;
    out.scale = hi / ii;
    out.curve.reserve(curve.size());
    for (double c : curve) out.curve.push_back(out.scale * c);
    return out;
}

/// Pearson correlation between bin counts and a per-bin curve.
inline double pearson(const Histogram& hist, std::span<const double> curve)
{
    require(curve.size() == hist.bins(), Errc::InvalidArgument, "curve and histogram bin counts differ");
    require(hist.in_range() > 0, Errc::EmptyHistogram, "histogram has no in-range samples");
    const auto n = static_cast<double>(curve.size());
    double mh = 0.0, mc = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        mh += static_cast<double>(hist.count(i));
        mc += curve[i];
    }
    mh /= n;
    mc /= n;
    double shc = 0.0, shh = 0.0, scc = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double dh = static_cast<double>(hist.count(i)) - mh;
        const double dc = curve[i] - mc;
        shc += dh * dc;
        shh += dh * dh;
        scc += dc * dc;
    }
    require(shh > 0.0 && scc > 0.0, Errc::DegenerateCurve, "correlation undefined for a constant sequence");
    return shc / std::sqrt(shh * scc);
}

/// Total-variation distance between the normalised in-range histogram and a
/// normalised per-bin density: 0.5 sum |p_i - q_i|.
inline double total_variation(const Histogram& hist, std::span<const double> density)
{
    require(density.size() == hist.bins(), Errc::InvalidArgument, "density and histogram bin counts differ");
    const auto n = static_cast<double>(hist.in_range());
    require(n > 0.0, Errc::EmptyHistogram, "histogram has no in-range samples");
    const double mass = std::accumulate(density.begin(), density.end(), 0.0);
    require(mass > 0.0, Errc::DegenerateCurve, "density has no mass");
    double d = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i)
        d += std::abs(static_cast<double>(hist.count(i)) / n - density[i] / mass);
    return 0.5 * d;
}

/// Three-bin moving average; end bins average over the neighbours present.
inline std::vector<double> smooth3(std::span<const double> v)
{
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double s = v[i];
        int n = 1;
        if (i > 0) s += v[i - 1], ++n;
        if (i + 1 < v.size()) s += v[i + 1], ++n;
        out[i] = s / n;
    }
    return out;
}

/// Fringe visibility (max - min)/(max + min) of the smoothed counts whose
/// bin centres lie in the window.
inline double visibility(const Histogram& hist, Window window)
{
    require(hist.in_range() > 0, Errc::EmptyHistogram, "histogram has no in-range samples");
    const auto raw = hist.as_doubles();
    const auto sm = smooth3(raw);
    double mx = -1.0, mn = 1e300;
    for (std::size_t i = 0; i < sm.size(); ++i) {
        const double c = hist.bin_center(i);
        if (c < window.lo || c > window.hi) continue;
        mx = std::max(mx, sm[i]);
        mn = std::min(mn, sm[i]);
    }
    require(mx >= 0.0, Errc::InvalidArgument, "visibility window contains no bins");
    if (mx + mn <= 0.0) return 0.0;
    return (mx - mn) / (mx + mn);
}

inline double visibility(const Histogram& hist) { return visibility(hist, central_window(hist)); }

/// Number of local maxima of `values` (sampled at `x`) inside the window
/// whose topographic prominence is at least `min_prominence` times the
/// largest value in the window. The window edges bound the prominence walk.
inline int count_fringes(std::span<const double> x, std::span<const double> values, Window window,
                         double min_prominence = 0.05)
{
    require(x.size() == values.size(), Errc::InvalidArgument, "fringe count needs matching x and values");
    std::vector<double> v;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] >= window.lo && x[i] <= window.hi) v.push_back(values[i]);
    if (v.size() < 3) return 0;
    const double top = *std::max_element(v.begin(), v.end());
    if (top <= 0.0) return 0;
    int fringes = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool left_ok = i == 0 || v[i] > v[i - 1];
        const bool right_ok = i + 1 == v.size() || v[i] >= v[i + 1];
        if (!left_ok || !right_ok) continue;
        double left_min = v[i];
        for (std::size_t j = i; j-- > 0;) {
            if (v[j] > v[i]) break;
            left_min = std::min(left_min, v[j]);
        }
        double right_min = v[i];
        for (std::size_t j = i + 1; j < v.size(); ++j) {
            if (v[j] > v[i]) break;
            right_min = std::min(right_min, v[j]);
        }
        const double prominence = v[i] - std::max(left_min, right_min);
        if (prominence >= min_prominence * top) ++fringes;
    }
    return fringes;
}

/// Weighted mean position of a histogram's in-range counts.
inline double center_of_mass(const Histogram& hist)
{
    require(hist.in_range() > 0, Errc::EmptyHistogram, "histogram has no in-range samples");
    double s = 0.0;
    for (std::size_t i = 0; i < hist.bins(); ++i) s += hist.bin_center(i) * static_cast<double>(hist.count(i));
    return s / static_cast<double>(hist.in_range());
}

inline double center_of_mass(std::span<const double> x, std::span<const double> w)
{
    require(x.size() == w.size(), Errc::InvalidArgument, "center of mass needs matching x and weights");
    double s = 0.0, m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * w[i];
        m += w[i];
    }
    require(m > 0.0, Errc::DegenerateCurve, "weights have no mass");
    return s / m;
}

/// Kolmogorov-Smirnov statistic of samples against U(lo, hi).
inline double ks_uniform(std::vector<double> samples, double lo, double hi)
{
    require(!samples.empty(), Errc::EmptyHistogram, "no samples for KS test");
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = std::clamp((samples[i] - lo) / (hi - lo), 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic one-sample KS critical value at the 1% level.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

} // namespace twoi
