// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar monochromatic fields in the (y, z) plane together with the ray
// velocity u = A Im(grad Psi / Psi), its Jacobian and the ordering rate F.
//
// Every field returns the value, gradient and Hessian at a point. Diffracted
// fields are aperture line integrals of the incident point-source wave times
// a free outgoing kernel, evaluated by composite Gauss-Legendre quadrature
// with the kernel differentiated analytically under the integral.
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "twoi/error.hpp"
#include "twoi/quadrature.hpp"
#include "twoi/simd_math.hpp"
#include "twoi/types.hpp"

namespace twoi {

struct FieldSample {
    complex psi{};
    CVec2 grad{};
    CSymMat2 hessian{};
};

/// e^{ikr}/r, or the far-field cylindrical wave r^{-1/2} e^{i(kr - pi/4)}.
enum class KernelKind { Kernel2DAsymptotic, Kernel3D };

enum class Propagation { PlusZ, MinusZ };

enum class Obliquity { None, Cosine };

/// Ratio |psi|^2 / I_ref below which the ray velocity is undefined.
inline constexpr double kNodalThreshold = 1e-12;

/// Minimum source distance for point-source evaluation.
inline constexpr double kSingularRadius = 1e-9;

/// Minimum distance from the aperture openings for diffracted evaluation.
inline constexpr double kApertureClearance = 0.1;

template <class F>
concept ScalarField = requires(const F& f, Vec2 p) {
    { f.sample(p) } -> std::same_as<FieldSample>;
};

namespace detail {

// Accumulates c * f(r) with f(r) = r^{-p} e^{ikr} (p = 1/2 or 1) and its
// first and second derivatives into (psi, grad, hessian). Real arithmetic
// keeps the loop free of library complex-multiply calls.
struct Accumulator {
    double pr = 0, pi = 0;
    double gyr = 0, gyi = 0, gzr = 0, gzi = 0;
    double hyyr = 0, hyyi = 0, hyzr = 0, hyzi = 0, hzzr = 0, hzzi = 0;

    FieldSample result() const
    {
        FieldSample s;
        s.psi = {pr, pi};
        s.grad = {{gyr, gyi}, {gzr, gzi}};
        s.hessian = {{hyyr, hyyi}, {hyzr, hyzi}, {hzzr, hzzi}};
        return s;
    }
};

template <KernelKind Kind>
inline void accumulate_radial(Accumulator& acc, double dy, double dz, double cr, double ci)
{
    constexpr double k = kWavenumber;
    constexpr double p = (Kind == KernelKind::Kernel3D) ? 1.0 : 0.5;
    const double r2 = dy * dy + dz * dz;
    const double r = std::sqrt(r2);
    const double ir = 1.0 / r;
    const double amp = (Kind == KernelKind::Kernel3D) ? ir : std::sqrt(ir);
    const double phase = k * r;
    const double cs = std::cos(phase);
    const double sn = std::sin(phase);

    // f = c * amp * e^{ikr}
    const double fr = amp * (cr * cs - ci * sn);
    const double fi = amp * (cr * sn + ci * cs);
    // f' = (ik - p/r) f
    const double ar = -p * ir;
    const double f1r = ar * fr - k * fi;
    const double f1i = ar * fi + k * fr;
    // f'' = ((ik - p/r)^2 + p/r^2) f
    const double g2r = ar * ar - k * k + p * ir * ir;
    const double g2i = 2.0 * ar * k;
    const double f2r = g2r * fr - g2i * fi;
    const double f2i = g2r * fi + g2i * fr;

    const double ny = dy * ir;
    const double nz = dz * ir;
    const double tr = f1r * ir;
    const double ti = f1i * ir;

    acc.pr += fr;
    acc.pi += fi;
    acc.gyr += f1r * ny;
    acc.gyi += f1i * ny;
    acc.gzr += f1r * nz;
    acc.gzi += f1i * nz;
    const double nyy = ny * ny;
    const double nzz = nz * nz;
    const double nyz = ny * nz;
    acc.hyyr += f2r * nyy + tr * (1.0 - nyy);
    acc.hyyi += f2i * nyy + ti * (1.0 - nyy);
    acc.hyzr += (f2r - tr) * nyz;
    acc.hyzi += (f2i - ti) * nyz;
    acc.hzzr += f2r * nzz + tr * (1.0 - nzz);
    acc.hzzi += f2i * nzz + ti * (1.0 - nzz);
}

// Product of the radial kernel with the obliquity factor dz / r.
template <KernelKind Kind>
inline void accumulate_oblique(Accumulator& acc, double dy, double dz, double cr, double ci)
{
    Accumulator radial;
    accumulate_radial<Kind>(radial, dy, dz, cr, ci);
    const FieldSample f = radial.result();

    const double r2 = dy * dy + dz * dz;
    const double r = std::sqrt(r2);
    const double ir = 1.0 / r;
    const double ir3 = ir * ir * ir;
    const double ir5 = ir3 * ir * ir;
    const double g = dz * ir;
    const double gy = -dz * dy * ir3;
    const double gz = dy * dy * ir3;
    const double gyy = -dz * ir3 + 3.0 * dz * dy * dy * ir5;
    const double gyz = -dy * ir3 + 3.0 * dy * dz * dz * ir5;
    const double gzz = -3.0 * dz * ir3 + 3.0 * dz * dz * dz * ir5;

    const complex psi = f.psi * g;
    const complex gry = f.grad.y * g + f.psi * gy;
    const complex grz = f.grad.z * g + f.psi * gz;
    const complex hyy = f.hessian.yy * g + 2.0 * f.grad.y * gy + f.psi * gyy;
    const complex hyz = f.hessian.yz * g + f.grad.y * gz + f.grad.z * gy + f.psi * gyz;
    const complex hzz = f.hessian.zz * g + 2.0 * f.grad.z * gz + f.psi * gzz;

    acc.pr += psi.real();
    acc.pi += psi.imag();
    acc.gyr += gry.real();
    acc.gyi += gry.imag();
    acc.gzr += grz.real();
    acc.gzi += grz.imag();
    acc.hyyr += hyy.real();
    acc.hyyi += hyy.imag();
    acc.hyzr += hyz.real();
    acc.hyzi += hyz.imag();
    acc.hzzr += hzz.real();
    acc.hzzi += hzz.imag();
}

inline complex kernel2d_phase() { return std::polar(1.0, -0.25 * kPi); }

} // namespace detail

//---------------------------------------------------------------------------//
// Point sources
//---------------------------------------------------------------------------//

struct PointSourceField {
    Vec2 origin{};
    KernelKind kernel = KernelKind::Kernel2DAsymptotic;
    Propagation sense = Propagation::PlusZ;
    complex amplitude{1.0, 0.0};

    FieldSample sample(Vec2 pos) const;

    /// Unit propagation direction along the optical axis.
    Vec2 axis() const { return sense == Propagation::PlusZ ? Vec2{0.0, 1.0} : Vec2{0.0, -1.0}; }
};

/// Closed-form outgoing wave and its analytic derivatives at `pos`.
inline FieldSample eval_point_source(const PointSourceField& field, Vec2 pos)
{
    const double dy = pos.y - field.origin.y;
    const double dz = pos.z - field.origin.z;
    require(std::hypot(dy, dz) > kSingularRadius, Errc::SingularPoint,
            "point-source field evaluated at its origin");
    complex c = field.amplitude;
    if (field.kernel == KernelKind::Kernel2DAsymptotic) c *= detail::kernel2d_phase();
    detail::Accumulator acc;
    if (field.kernel == KernelKind::Kernel3D)
        detail::accumulate_radial<KernelKind::Kernel3D>(acc, dy, dz, c.real(), c.imag());
    else
        detail::accumulate_radial<KernelKind::Kernel2DAsymptotic>(acc, dy, dz, c.real(), c.imag());
    return acc.result();
}

inline FieldSample PointSourceField::sample(Vec2 pos) const { return eval_point_source(*this, pos); }

//---------------------------------------------------------------------------//
// Plane waves
//---------------------------------------------------------------------------//

/// Superposition of plane waves a_m exp(i K_m . x). Used for analytic checks
/// and for constant-u fields.
struct PlaneWaveSum {
    struct Component {
        complex amplitude{1.0, 0.0};
        Vec2 wavevector{0.0, kWavenumber};
    };
    std::vector<Component> components;

    FieldSample sample(Vec2 pos) const
    {
        FieldSample s;
        for (const auto& c : components) {
            const complex e = c.amplitude * std::polar(1.0, dot(c.wavevector, pos));
            const complex iky = complex{0.0, c.wavevector.y};
            const complex ikz = complex{0.0, c.wavevector.z};
            s.psi += e;
            s.grad.y += iky * e;
            s.grad.z += ikz * e;
            s.hessian.yy += iky * iky * e;
            s.hessian.yz += iky * ikz * e;
            s.hessian.zz += ikz * ikz * e;
        }
        return s;
    }

    static PlaneWaveSum single(Vec2 wavevector, complex amplitude = {1.0, 0.0})
    {
        return PlaneWaveSum{{Component{amplitude, wavevector}}};
    }
};

//---------------------------------------------------------------------------//
// Slit masks and diffracted fields
//---------------------------------------------------------------------------//

struct SlitMask {
    std::vector<double> slit_centers;
    double slit_width = 1.0;
    double plane_z = 0.0;

    void validate() const
    {
        require(slit_width > 0.0, Errc::InvalidArgument, "slit width must be positive");
        require(!slit_centers.empty(), Errc::InvalidArgument, "mask has no slits");
        std::vector<double> c = slit_centers;
        std::sort(c.begin(), c.end());
        for (std::size_t i = 1; i < c.size(); ++i)
            require(c[i] - c[i - 1] >= slit_width, Errc::InvalidArgument, "slits overlap");
    }

    /// True when y lies inside an opening (edges count as open).
    bool transmits(double y) const
    {
        return std::any_of(slit_centers.begin(), slit_centers.end(),
                           [&](double c) { return std::abs(y - c) <= 0.5 * slit_width; });
    }

    double lowest_edge() const { return *std::min_element(slit_centers.begin(), slit_centers.end()) - 0.5 * slit_width; }
    double highest_edge() const { return *std::max_element(slit_centers.begin(), slit_centers.end()) + 0.5 * slit_width; }
    double extent() const { return highest_edge() - lowest_edge(); }

    /// N slits of the given width, centre-to-centre `separation`, centred on 0.
    static SlitMask uniform(int count, double width, double separation, double plane_z = 0.0)
    {
        SlitMask m;
        m.slit_width = width;
        m.plane_z = plane_z;
        for (int i = 0; i < count; ++i) m.slit_centers.push_back((i - 0.5 * (count - 1)) * separation);
        return m;
    }
};

struct DiffractionOptions {
    int points_per_wavelength = 16;
    Obliquity obliquity = Obliquity::None;
};

/// Field behind a slit mask illuminated by a point source.
///
/// psi(P) = sum over openings of  int psi_inc(y') K(|P - (y', z_mask)|) dy'
///
/// with K the 2-D kernel sqrt(k / 2 pi r) e^{i(kr - pi/4)} (or the 3-D
/// kernel (k / 2 pi i) e^{ikr}/r), optionally weighted by the obliquity
/// cos(theta) = dz / r. Panels close to the probe are bisected until their
/// width does not exceed the probe distance, which keeps near-field
/// evaluation accurate.
class DiffractedField {
  public:
    static constexpr int kPanelOrder = 8;
    static constexpr int kMaxRefineDepth = 24;

    DiffractedField(PointSourceField source, SlitMask mask, DiffractionOptions options = {})
        : source_(std::move(source)), mask_(std::move(mask)), options_(options)
    {
        mask_.validate();
        require(options_.points_per_wavelength >= 1, Errc::InvalidArgument, "quadrature density must be positive");
        require(source_.origin.z < mask_.plane_z, Errc::InvalidArgument, "source must lie before the mask");
        build_nodes();
    }

    const PointSourceField& source() const { return source_; }
    const SlitMask& mask() const { return mask_; }
    const DiffractionOptions& options() const { return options_; }
    std::size_t node_count() const { return node_y_.size(); }

    /// |psi_inc|^2 at the centre of the mask plane.
    double reference_intensity() const
    {
        return std::norm(eval_point_source(source_, {0.0, mask_.plane_z}).psi);
    }

    FieldSample sample(Vec2 pos) const
    {
        const double offset = pos.z - mask_.plane_z;
        require(offset > 0.0, Errc::WrongSide, "diffracted field evaluated on the source side of the mask");
        double gap = 1e300;
        for (const auto& p : panels_) gap = std::min(gap, std::max(0.0, std::max(p.lo - pos.y, pos.y - p.hi)));
        const double nearest = std::sqrt(gap * gap + offset * offset);
        require(nearest >= kApertureClearance, Errc::SingularPoint,
                "diffracted field evaluated within 0.1 wavelength of the aperture");

        detail::Accumulator acc;
        if (options_.obliquity == Obliquity::None) {
            if (source_.kernel == KernelKind::Kernel3D)
                accumulate<KernelKind::Kernel3D, false>(acc, pos, nearest);
            else
                accumulate<KernelKind::Kernel2DAsymptotic, false>(acc, pos, nearest);
        } else {
            if (source_.kernel == KernelKind::Kernel3D)
                accumulate<KernelKind::Kernel3D, true>(acc, pos, nearest);
            else
                accumulate<KernelKind::Kernel2DAsymptotic, true>(acc, pos, nearest);
        }
        return acc.result();
    }

  private:
    struct Panel {
        double lo;
        double hi;
        std::size_t first;  // index of the panel's first node
    };

    static const GaussRule& rule()
    {
        static const GaussRule r = gauss_legendre(kPanelOrder);
        return r;
    }

    double panel_distance(double lo, double hi, Vec2 pos) const
    {
        const double dy = std::max(0.0, std::max(lo - pos.y, pos.y - hi));
        const double dz = pos.z - mask_.plane_z;
        return std::sqrt(dy * dy + dz * dz);
    }

    complex kernel_scale() const
    {
        if (source_.kernel == KernelKind::Kernel3D) return complex{0.0, -kWavenumber / (2.0 * kPi)};
        return std::sqrt(kWavenumber / (2.0 * kPi)) * detail::kernel2d_phase();
    }

    void build_nodes()
    {
        const auto& gl = rule();
        const double panel_len = static_cast<double>(kPanelOrder) / options_.points_per_wavelength;
        const complex scale = kernel_scale();
        std::vector<double> centers = mask_.slit_centers;
        std::sort(centers.begin(), centers.end());
        for (double c : centers) {
            const double a = c - 0.5 * mask_.slit_width;
            const int n = std::max(1, static_cast<int>(std::ceil(mask_.slit_width / panel_len - 1e-12)));
            const double w = mask_.slit_width / n;
            for (int i = 0; i < n; ++i) {
                const double lo = a + i * w;
                const double hi = lo + w;
                panels_.push_back({lo, hi, node_y_.size()});
                for (int q = 0; q < kPanelOrder; ++q) {
                    const double y = 0.5 * (lo + hi) + 0.5 * w * gl.nodes[q];
                    const complex inc = eval_point_source(source_, {y, mask_.plane_z}).psi;
                    const complex coef = scale * inc * (0.5 * w * gl.weights[q]);
                    node_y_.push_back(y);
                    coef_re_.push_back(coef.real());
                    coef_im_.push_back(coef.imag());
                }
            }
        }
    }

    template <KernelKind Kind, bool Oblique>
    static void add_node(detail::Accumulator& acc, double dy, double dz, double cr, double ci)
    {
        if constexpr (Oblique)
            detail::accumulate_oblique<Kind>(acc, dy, dz, cr, ci);
        else
            detail::accumulate_radial<Kind>(acc, dy, dz, cr, ci);
    }

    template <KernelKind Kind, bool Oblique>
    void accumulate(detail::Accumulator& acc, Vec2 pos, double nearest) const
    {
        const double dz = pos.z - mask_.plane_z;
        if constexpr (!Oblique) {
            // All panels share one width; when none needs refinement the
            // whole node set goes through the vectorised loop.
            if (panels_.front().hi - panels_.front().lo <= nearest) {
                accumulate_batch<Kind>(acc, pos);
                return;
            }
        }
        for (const auto& p : panels_) {
            if (p.hi - p.lo <= panel_distance(p.lo, p.hi, pos)) {
                for (std::size_t j = p.first; j < p.first + kPanelOrder; ++j)
                    add_node<Kind, Oblique>(acc, pos.y - node_y_[j], dz, coef_re_[j], coef_im_[j]);
            } else {
                refine<Kind, Oblique>(acc, pos, p.lo, p.hi, 0);
            }
        }
    }

    // Same arithmetic as detail::accumulate_radial, written as a flat
    // reduction over the node arrays so it vectorises.
    template <KernelKind Kind>
    void accumulate_batch(detail::Accumulator& acc, Vec2 pos) const
    {
        constexpr double k = kWavenumber;
        constexpr double p = (Kind == KernelKind::Kernel3D) ? 1.0 : 0.5;
        const double dz = pos.z - mask_.plane_z;
        const double dz2 = dz * dz;
        const double py = pos.y;
        const double* ys = node_y_.data();
        const double* cre = coef_re_.data();
        const double* cim = coef_im_.data();
        const std::size_t n = node_y_.size();
        double pr = 0, pi = 0, gyr = 0, gyi = 0, gzr = 0, gzi = 0;
        double hyyr = 0, hyyi = 0, hyzr = 0, hyzi = 0, hzzr = 0, hzzi = 0;
        TWOI_SIMD_REDUCTION(pr, pi, gyr, gyi, gzr, gzi, hyyr, hyyi, hyzr, hyzi, hzzr, hzzi)
        for (std::size_t j = 0; j < n; ++j) {
            const double dy = py - ys[j];
            const double r = std::sqrt(dy * dy + dz2);
            const double ir = 1.0 / r;
            const double amp = (Kind == KernelKind::Kernel3D) ? ir : std::sqrt(ir);
            const double cs = cos(k * r);
            const double sn = sin(k * r);
            const double fr = amp * (cre[j] * cs - cim[j] * sn);
            const double fi = amp * (cre[j] * sn + cim[j] * cs);
            const double ar = -p * ir;
            const double f1r = ar * fr - k * fi;
            const double f1i = ar * fi + k * fr;
            const double g2r = ar * ar - k * k + p * ir * ir;
            const double g2i = 2.0 * ar * k;
            const double f2r = g2r * fr - g2i * fi;
            const double f2i = g2r * fi + g2i * fr;
            const double ny = dy * ir;
            const double nz = dz * ir;
            const double tr = f1r * ir;
            const double ti = f1i * ir;
            const double nyy = ny * ny;
            const double nzz = nz * nz;
            const double nyz = ny * nz;
            pr += fr;
            pi += fi;
            gyr += f1r * ny;
            gyi += f1i * ny;
            gzr += f1r * nz;
            gzi += f1i * nz;
            hyyr += f2r * nyy + tr * (1.0 - nyy);
            hyyi += f2i * nyy + ti * (1.0 - nyy);
            hyzr += (f2r - tr) * nyz;
            hyzi += (f2i - ti) * nyz;
            hzzr += f2r * nzz + tr * (1.0 - nzz);
            hzzi += f2i * nzz + ti * (1.0 - nzz);
        }
        acc.pr += pr;
        acc.pi += pi;
        acc.gyr += gyr;
        acc.gyi += gyi;
        acc.gzr += gzr;
        acc.gzi += gzi;
        acc.hyyr += hyyr;
        acc.hyyi += hyyi;
        acc.hyzr += hyzr;
        acc.hyzi += hyzi;
        acc.hzzr += hzzr;
        acc.hzzi += hzzi;
    }

    // Bisect [lo, hi] until each piece is no wider than its distance to pos;
    // incident values on sub-panels are evaluated on the fly.
    template <KernelKind Kind, bool Oblique>
    void refine(detail::Accumulator& acc, Vec2 pos, double lo, double hi, int depth) const
    {
        const double w = hi - lo;
        if (w > panel_distance(lo, hi, pos) && depth < kMaxRefineDepth) {
            const double mid = 0.5 * (lo + hi);
            refine<Kind, Oblique>(acc, pos, lo, mid, depth + 1);
            refine<Kind, Oblique>(acc, pos, mid, hi, depth + 1);
            return;
        }
        const auto& gl = rule();
        const complex scale = kernel_scale();
        const double dz = pos.z - mask_.plane_z;
        for (int q = 0; q < kPanelOrder; ++q) {
            const double y = 0.5 * (lo + hi) + 0.5 * w * gl.nodes[q];
            const complex coef = scale * eval_point_source(source_, {y, mask_.plane_z}).psi * (0.5 * w * gl.weights[q]);
            add_node<Kind, Oblique>(acc, pos.y - y, dz, coef.real(), coef.imag());
        }
    }

    PointSourceField source_;
    SlitMask mask_;
    DiffractionOptions options_;
    std::vector<Panel> panels_;
    std::vector<double> node_y_;
    std::vector<double> coef_re_;
    std::vector<double> coef_im_;
};

inline FieldSample eval_diffracted(const DiffractedField& field, Vec2 pos) { return field.sample(pos); }

//---------------------------------------------------------------------------//
// Ray velocity and ordering rate
//---------------------------------------------------------------------------//

inline void check_not_nodal(const FieldSample& s, double intensity_ref)
{
    if (!(std::norm(s.psi) >= kNodalThreshold * intensity_ref))
        throw Error(Errc::NodalPoint, "field intensity below the nodal threshold");
}

/// u = -i (A/2)(psi* grad psi - grad psi* psi) / |psi|^2 = A Im(psi* grad psi) / |psi|^2.
inline Vec2 ray_velocity(const FieldSample& s, double amplitude_A = kRayAmplitude, double intensity_ref = 1.0)
{
    check_not_nodal(s, intensity_ref);
    const double rho = std::norm(s.psi);
    const complex cj = std::conj(s.psi);
    return {amplitude_A * (cj * s.grad.y).imag() / rho, amplitude_A * (cj * s.grad.z).imag() / rho};
}

/// d u_i / d x_j = A Im(H_ij / psi - g_i g_j / psi^2); symmetric because u
/// is A times the phase gradient.
inline Mat2 ray_velocity_jacobian(const FieldSample& s, double amplitude_A = kRayAmplitude,
                                  double intensity_ref = 1.0)
{
    check_not_nodal(s, intensity_ref);
    const complex w = 1.0 / s.psi;
    const complex w2 = w * w;
    Mat2 j;
    j(0, 0) = amplitude_A * (s.hessian.yy * w - s.grad.y * s.grad.y * w2).imag();
    j(1, 1) = amplitude_A * (s.hessian.zz * w - s.grad.z * s.grad.z * w2).imag();
    j(0, 1) = amplitude_A * (s.hessian.yz * w - s.grad.y * s.grad.z * w2).imag();
    j(1, 0) = j(0, 1);
    return j;
}

/// F = gamma |psi|^2 / I_ref.
inline double ordering_rate(const FieldSample& s, double gain_gamma, double intensity_ref)
{
    require(intensity_ref > 0.0, Errc::InvalidArgument, "reference intensity must be positive");
    require(gain_gamma >= 0.0, Errc::InvalidArgument, "ordering gain must be non-negative");
    return gain_gamma * std::norm(s.psi) / intensity_ref;
}

} // namespace twoi
