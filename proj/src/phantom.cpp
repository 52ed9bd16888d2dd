#include "elasto/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "elasto/interp.hpp"

namespace elasto::phantom {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Hand-rolled samplers on top of mt19937_64 keep generation bit-reproducible
// across standard library implementations.
double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

std::uint64_t poisson_count(std::mt19937_64& gen, double lambda) {
  std::uint64_t k = 0;
  double t = -std::log1p(-uniform01(gen));
  while (t < lambda) {
    ++k;
    t += -std::log1p(-uniform01(gen));
  }
  return k;
}

double normal01(std::mt19937_64& gen) {
  double u1 = 0.0;
  do {
    u1 = uniform01(gen);
  } while (u1 <= 0.0);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

void validate_spec(const PhantomSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2)
    throw SpecError("PhantomSpec: grid must be at least 2x2");
  if (spec.scatterer_density < 0.0)
    throw SpecError("PhantomSpec: scatterer_density must be >= 0");
  if (spec.pulse.wavelength < 2.0)
    throw SpecError("PhantomSpec: pulse wavelength must cover >= 2 samples");
  if (spec.pulse.sigma_axial <= 0.0 || spec.pulse.sigma_lateral <= 0.0)
    throw SpecError("PhantomSpec: pulse widths must be positive");
  if (spec.amplitude_rms <= 0.0)
    throw SpecError("PhantomSpec: amplitude_rms must be positive");
}

void validate_deformation(const DeformationSpec& spec) {
  if (std::fabs(spec.applied_strain) > 0.1)
    throw SpecError("DeformationSpec: |applied_strain| must be <= 0.1");
  if (spec.background_nu < 0.0 || spec.background_nu > 0.5)
    throw SpecError("DeformationSpec: background_nu outside [0, 0.5]");
  const bool needs_inclusion = spec.kind == DeformationKind::inclusion ||
                               spec.kind == DeformationKind::different_pr;
  if (needs_inclusion) {
    if (spec.inclusion.radius <= 0.0)
      throw SpecError("DeformationSpec: inclusion radius must be positive");
    if (spec.inclusion.transition_width <= 0.0)
      throw SpecError("DeformationSpec: transition width must be positive");
    if (spec.kind == DeformationKind::inclusion && spec.inclusion.contrast <= 0.0)
      throw SpecError("DeformationSpec: strain contrast must be positive");
    if (spec.kind == DeformationKind::different_pr &&
        (spec.inclusion.nu < 0.0 || spec.inclusion.nu > 0.5))
      throw SpecError("DeformationSpec: inclusion nu outside [0, 0.5]");
  }
}

// Raised-cosine radial blend: 1 deep inside the inclusion, 0 outside,
// C1 across the transition band.
double radial_blend(double r, double radius, double width) {
  const double inner = radius - 0.5 * width;
  const double outer = radius + 0.5 * width;
  if (r <= inner) return 1.0;
  if (r >= outer) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (r - inner) / width));
}

// Composite Simpson over one unit step, 8 subintervals.
template <class F>
double simpson_unit(F&& f, double t0, double t1) {
  const double h = (t1 - t0) / 8.0;
  double sum = f(t0) + f(t1);
  for (int k = 1; k < 8; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(t0 + h * k);
  return sum * h / 3.0;
}

// Cumulative integral of f from 0 to each integer 0..count-1, plus the value
// at an arbitrary fractional origin for re-basing.
template <class F>
Vector cumulative_integral(F&& f, Index count) {
  Vector out(count);
  out(0) = 0.0;
  for (Index k = 1; k < count; ++k)
    out(k) = out(k - 1) + simpson_unit(f, static_cast<double>(k - 1), static_cast<double>(k));
  return out;
}

template <class F>
double integral_to(F&& f, const Vector& cumulative, double t) {
  const double fl = std::floor(t);
  const Index base = static_cast<Index>(fl);
  double v = cumulative(base);
  if (t > fl) v += simpson_unit(f, fl, t);
  return v;
}

double bilerp(const Matrix& f, double y, double x) {
  const Index m = f.rows();
  const Index n = f.cols();
  double cy = std::clamp(y, 0.0, static_cast<double>(m - 1));
  double cx = std::clamp(x, 0.0, static_cast<double>(n - 1));
  Index i0 = std::min(static_cast<Index>(std::floor(cy)), m - 2 >= 0 ? m - 2 : 0);
  Index j0 = std::min(static_cast<Index>(std::floor(cx)), n - 2 >= 0 ? n - 2 : 0);
  const double ty = cy - static_cast<double>(i0);
  const double tx = cx - static_cast<double>(j0);
  return (1 - ty) * ((1 - tx) * f(i0, j0) + tx * f(i0, j0 + 1)) +
         ty * ((1 - tx) * f(i0 + 1, j0) + tx * f(i0 + 1, j0 + 1));
}

}  // namespace

RfFrame generate_speckle(const PhantomSpec& spec) {
  validate_spec(spec);
  const Index m = spec.rows;
  const Index n = spec.cols;

  RfFrame frame;
  frame.samples = Matrix::Zero(m, n);
  frame.axial_spacing_mm = spec.axial_spacing_mm;
  frame.lateral_pitch_mm = spec.lateral_pitch_mm;
  frame.center_frequency_mhz = spec.center_frequency_mhz;
  frame.sampling_frequency_mhz = spec.sampling_frequency_mhz;

  std::mt19937_64 gen(spec.rng_seed);
  const double lambda = spec.scatterer_density * static_cast<double>(m) * static_cast<double>(n);
  const std::uint64_t count = poisson_count(gen, lambda);

  const double sa = spec.pulse.sigma_axial;
  const double sl = spec.pulse.sigma_lateral;
  const double omega = 2.0 * kPi / spec.pulse.wavelength;
  const double reach_a = 4.0 * sa;
  const double reach_l = 4.0 * sl;

  for (std::uint64_t s = 0; s < count; ++s) {
    const double y = uniform01(gen) * static_cast<double>(m - 1);
    const double x = uniform01(gen) * static_cast<double>(n - 1);
    const double amp = 2.0 * uniform01(gen) - 1.0;

    const Index i0 = std::max<Index>(0, static_cast<Index>(std::ceil(y - reach_a)));
    const Index i1 = std::min<Index>(m - 1, static_cast<Index>(std::floor(y + reach_a)));
    const Index j0 = std::max<Index>(0, static_cast<Index>(std::ceil(x - reach_l)));
    const Index j1 = std::min<Index>(n - 1, static_cast<Index>(std::floor(x + reach_l)));

    for (Index j = j0; j <= j1; ++j) {
      const double dl = static_cast<double>(j) - x;
      const double wl = std::exp(-dl * dl / (2.0 * sl * sl));
      for (Index i = i0; i <= i1; ++i) {
        const double da = static_cast<double>(i) - y;
        frame.samples(i, j) +=
            amp * wl * std::cos(omega * da) * std::exp(-da * da / (2.0 * sa * sa));
      }
    }
  }

  frame.samples.array() -= frame.samples.mean();
  const double rms = std::sqrt(frame.samples.array().square().mean());
  if (rms > 0.0) frame.samples *= spec.amplitude_rms / rms;

  if (spec.noise_snr_db)
    return add_noise(frame, *spec.noise_snr_db, spec.rng_seed + 0x9e3779b97f4a7c15ull);
  return frame;
}

RfFrame add_noise(const RfFrame& frame, double snr_db, std::uint64_t seed) {
  validate_frame(frame);
  RfFrame out = frame;
  const double rms = std::sqrt(frame.samples.array().square().mean());
  const double sigma = rms * std::pow(10.0, -snr_db / 20.0);
  std::mt19937_64 gen(seed);
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j)
      out.samples(i, j) += sigma * normal01(gen);
  return out;
}

GroundTruth analytic_displacement(const DeformationSpec& spec, Index rows, Index cols) {
  validate_deformation(spec);
  if (rows < 2 || cols < 2)
    throw SpecError("analytic_displacement: grid must be at least 2x2");

  const Index m = rows;
  const Index n = cols;
  const double eps = spec.applied_strain;
  const double jc = 0.5 * static_cast<double>(n - 1);

  GroundTruth gt;
  gt.displacement.axial.resize(m, n);
  gt.displacement.lateral.resize(m, n);
  gt.strain.syy.resize(m, n);
  gt.strain.sxx.resize(m, n);
  gt.epr.nu.resize(m, n);

  switch (spec.kind) {
    case DeformationKind::uniform_compression: {
      const double nu = spec.background_nu;
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) {
          gt.displacement.axial(i, j) = -eps * static_cast<double>(i);
          gt.displacement.lateral(i, j) = nu * eps * (static_cast<double>(j) - jc);
          gt.strain.syy(i, j) = -eps;
          gt.strain.sxx(i, j) = nu * eps;
          gt.epr.nu(i, j) = nu;
        }
      break;
    }
    case DeformationKind::inclusion: {
      const double nu = spec.background_nu;
      const double ci = spec.inclusion.center_row;
      const double cj = spec.inclusion.center_col;
      auto syy_profile = [&](double i, double j) {
        const double r = std::hypot(i - ci, j - cj);
        const double b = radial_blend(r, spec.inclusion.radius, spec.inclusion.transition_width);
        return -eps * (1.0 + (1.0 / spec.inclusion.contrast - 1.0) * b);
      };
      for (Index j = 0; j < n; ++j) {
        auto f = [&](double t) { return syy_profile(t, static_cast<double>(j)); };
        Vector cum = cumulative_integral(f, m);
        for (Index i = 0; i < m; ++i) {
          gt.displacement.axial(i, j) = cum(i);
          gt.strain.syy(i, j) = syy_profile(static_cast<double>(i), static_cast<double>(j));
          gt.strain.sxx(i, j) = -nu * gt.strain.syy(i, j);
          gt.epr.nu(i, j) = nu;
        }
      }
      for (Index i = 0; i < m; ++i) {
        auto f = [&](double t) { return -nu * syy_profile(static_cast<double>(i), t); };
        Vector cum = cumulative_integral(f, n);
        const double at_center = integral_to(f, cum, jc);
        for (Index j = 0; j < n; ++j)
          gt.displacement.lateral(i, j) = cum(j) - at_center;
      }
      break;
    }
    case DeformationKind::different_pr: {
      const double ci = spec.inclusion.center_row;
      const double cj = spec.inclusion.center_col;
      auto nu_profile = [&](double i, double j) {
        const double r = std::hypot(i - ci, j - cj);
        const double b = radial_blend(r, spec.inclusion.radius, spec.inclusion.transition_width);
        return spec.background_nu + (spec.inclusion.nu - spec.background_nu) * b;
      };
      for (Index i = 0; i < m; ++i) {
        auto f = [&](double t) { return nu_profile(static_cast<double>(i), t) * eps; };
        Vector cum = cumulative_integral(f, n);
        const double at_center = integral_to(f, cum, jc);
        for (Index j = 0; j < n; ++j) {
          gt.displacement.axial(i, j) = -eps * static_cast<double>(i);
          gt.displacement.lateral(i, j) = cum(j) - at_center;
          gt.strain.syy(i, j) = -eps;
          gt.strain.sxx(i, j) = nu_profile(static_cast<double>(i), static_cast<double>(j)) * eps;
          gt.epr.nu(i, j) = nu_profile(static_cast<double>(i), static_cast<double>(j));
        }
      }
      break;
    }
    case DeformationKind::lateral_boundary: {
      const double nu = spec.background_nu;
      const double width = spec.taper_width > 0.0 ? spec.taper_width
                                                  : static_cast<double>(n) / 4.0;
      auto taper = [&](double j, double& dt) {
        const double u = std::clamp(j / width, 0.0, 1.0);
        dt = (u > 0.0 && u < 1.0) ? 6.0 * u * (1.0 - u) / width : 0.0;
        return u * u * (3.0 - 2.0 * u);
      };
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) {
          double dt = 0.0;
          const double t = taper(static_cast<double>(j), dt);
          const double off = static_cast<double>(j) - jc;
          gt.displacement.axial(i, j) = -eps * static_cast<double>(i);
          gt.displacement.lateral(i, j) = nu * eps * off * t;
          gt.strain.syy(i, j) = -eps;
          gt.strain.sxx(i, j) = nu * eps * (t + off * dt);
          gt.epr.nu(i, j) = std::clamp(-gt.strain.sxx(i, j) / gt.strain.syy(i, j), 0.0, 0.5);
        }
      break;
    }
  }
  return gt;
}

WarpResult warp_frame(const RfFrame& pre, const DisplacementField& truth,
                      int fixed_point_iters) {
  validate_frame(pre);
  validate_displacement(truth);
  if (truth.rows() != pre.rows() || truth.cols() != pre.cols())
    throw SpecError("warp_frame: displacement shape differs from frame");
  if (fixed_point_iters < 1)
    throw SpecError("warp_frame: need at least one fixed-point iteration");

  const Index m = pre.rows();
  const Index n = pre.cols();
  WarpResult out;
  out.frame = pre;
  out.frame.samples.setZero();
  out.valid = BoolGrid::Constant(m, n, false);

  for (Index p = 0; p < m; ++p) {
    for (Index q = 0; q < n; ++q) {
      double y = static_cast<double>(p);
      double x = static_cast<double>(q);
      for (int it = 0; it < fixed_point_iters; ++it) {
        y = static_cast<double>(p) - bilerp(truth.axial, y, x);
        x = static_cast<double>(q) - bilerp(truth.lateral, y, x);
      }
      const double ry = static_cast<double>(p) - bilerp(truth.axial, y, x);
      const double rx = static_cast<double>(q) - bilerp(truth.lateral, y, x);
      const double update = std::max(std::fabs(ry - y), std::fabs(rx - x));
      if (update > 0.5) {
        std::ostringstream msg;
        msg << "warp_frame: inversion still moving " << update << " samples at (" << p
            << ", " << q << ")";
        throw NumericalError(msg.str());
      }
      out.valid(p, q) = y >= 0.0 && y <= static_cast<double>(m - 1) &&
                        x >= 0.0 && x <= static_cast<double>(n - 1);
      out.frame.samples(p, q) = sample_cubic_value(pre.samples, y, x);
    }
  }
  return out;
}

}  // namespace elasto::phantom
