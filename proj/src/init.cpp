#include "elasto/init.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "elasto/filters.hpp"
#include "elasto/interp.hpp"

namespace elasto::init {

namespace {

constexpr double kBig = std::numeric_limits<double>::max() / 4;

// L1 min-convolution in place: g[k] = min_k' f[k'] + w*|k - k'|.
void minconv_l1(std::vector<double>& f, double w, int stride, int count, int offset) {
  for (int k = 1; k < count; ++k) {
    double c = f[offset + (k - 1) * stride] + w;
    if (c < f[offset + k * stride]) f[offset + k * stride] = c;
  }
  for (int k = count - 2; k >= 0; --k) {
    double c = f[offset + (k + 1) * stride] + w;
    if (c < f[offset + k * stride]) f[offset + k * stride] = c;
  }
}

}  // namespace

DisplacementField dp_initialize(const RfFrame& pre, const RfFrame& post,
                                const DpParams& params) {
  validate_frame(pre);
  validate_frame(post);
  if (pre.rows() != post.rows() || pre.cols() != post.cols())
    throw SpecError("dp_initialize: frame shapes differ");
  if (params.axial_search < 0 || params.lateral_search < 0)
    throw SpecError("dp_initialize: negative search range");
  if (params.patch_half_width < 0)
    throw SpecError("dp_initialize: negative patch half width");
  if (params.transition_weight < 0.0)
    throw SpecError("dp_initialize: negative transition weight");

  const Index m = pre.rows();
  const Index n = pre.cols();
  const int A = params.axial_search;
  const int L = params.lateral_search;
  const int h = params.patch_half_width;
  if (2 * A + 1 + 2 * h > m || 2 * L + 1 + 2 * h > n)
    throw SpecError("dp_initialize: search range plus patch margin exceeds the frame");

  const int na = 2 * A + 1;
  const int nl = 2 * L + 1;
  const int ns = na * nl;
  double var = (pre.samples.array() - pre.samples.mean()).square().mean();
  if (var <= 0.0) var = 1.0;

  // Mean squared patch difference over the taps that fall inside both
  // frames, in units of the frame variance. States whose whole patch leaves
  // a frame carry no evidence and cost nothing; the transition penalty alone
  // decides between them.
  auto node_cost = [&](Index i, Index j, int da, int dl) {
    double ss = 0.0;
    int used = 0;
    for (int u = -h; u <= h; ++u) {
      const Index pi = i + u;
      const Index qi = i + da + u;
      if (pi < 0 || pi >= m || qi < 0 || qi >= m) continue;
      for (int v = -h; v <= h; ++v) {
        const Index pj = j + v;
        const Index qj = j + dl + v;
        if (pj < 0 || pj >= n || qj < 0 || qj >= n) continue;
        const double d = pre.samples(pi, pj) - post.samples(qi, qj);
        ss += d * d;
        ++used;
      }
    }
    return used == 0 ? 0.0 : ss / (static_cast<double>(used) * var);
  };

  DisplacementField out;
  out.axial.resize(m, n);
  out.lateral.resize(m, n);

  std::vector<double> cost(static_cast<std::size_t>(m) * ns);
  std::vector<double> carry(static_cast<std::size_t>(ns));
  const double tw = params.transition_weight;
  auto sidx = [&](int a, int l) { return a * nl + l; };

  for (Index j = 0; j < n; ++j) {
    for (int a = 0; a < na; ++a)
      for (int l = 0; l < nl; ++l)
        cost[static_cast<std::size_t>(sidx(a, l))] = node_cost(0, j, a - A, l - L);

    for (Index i = 1; i < m; ++i) {
      std::copy_n(cost.begin() + (i - 1) * ns, ns, carry.begin());
      // Separable L1 min-convolution: axial sweep per lateral state, then
      // lateral sweep per axial state.
      for (int l = 0; l < nl; ++l) minconv_l1(carry, tw, nl, na, l);
      for (int a = 0; a < na; ++a) minconv_l1(carry, tw, 1, nl, a * nl);
      for (int a = 0; a < na; ++a)
        for (int l = 0; l < nl; ++l) {
          const int s = sidx(a, l);
          cost[static_cast<std::size_t>(i * ns + s)] =
              carry[static_cast<std::size_t>(s)] + node_cost(i, j, a - A, l - L);
        }
    }

    // Backtrack. The predecessor is recomputed directly from the stored
    // stage costs; first minimum wins so ties are deterministic.
    int best = 0;
    for (int s = 1; s < ns; ++s)
      if (cost[static_cast<std::size_t>((m - 1) * ns + s)] <
          cost[static_cast<std::size_t>((m - 1) * ns + best)])
        best = s;
    for (Index i = m - 1; i >= 0; --i) {
      const int ba = best / nl;
      const int bl = best % nl;
      out.axial(i, j) = ba - A;
      out.lateral(i, j) = bl - L;
      if (i == 0) break;
      int arg = 0;
      double bestc = kBig;
      for (int a = 0; a < na; ++a)
        for (int l = 0; l < nl; ++l) {
          const double c = cost[static_cast<std::size_t>((i - 1) * ns + sidx(a, l))] +
                           tw * (std::abs(a - ba) + std::abs(l - bl));
          if (c < bestc) {
            bestc = c;
            arg = sidx(a, l);
          }
        }
      best = arg;
    }
  }

  out.axial = median_filter(out.axial, 1);
  out.lateral = median_filter(out.lateral, 1);

  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      const double a = out.axial(i, j);
      const double l = out.lateral(i, j);
      if (a != std::floor(a) || l != std::floor(l) || std::fabs(a) > A || std::fabs(l) > L)
        throw NumericalError("dp_initialize: non-integer or out-of-range output");
    }
  return out;
}

DisplacementField ncc_track(const RfFrame& pre, const RfFrame& post,
                            const NccParams& params) {
  validate_frame(pre);
  validate_frame(post);
  if (pre.rows() != post.rows() || pre.cols() != post.cols())
    throw SpecError("ncc_track: frame shapes differ");
  if (params.upsample_factor < 1)
    throw SpecError("ncc_track: upsample_factor must be >= 1");
  if (params.window_axial < 2 || params.window_lateral < 2)
    throw SpecError("ncc_track: windows must span at least 2 samples");
  if (params.overlap_fraction < 0.0 || params.overlap_fraction >= 1.0)
    throw SpecError("ncc_track: overlap_fraction must lie in [0, 1)");
  if (params.search_axial < 0 || params.search_lateral < 0)
    throw SpecError("ncc_track: negative search range");

  const Index m = pre.rows();
  const Index n = pre.cols();
  const int U = params.upsample_factor;
  const Matrix up_pre = upsample_cubic(pre.samples, U);
  const Matrix up_post = upsample_cubic(post.samples, U);
  const Index M = up_pre.rows();
  const Index N = up_pre.cols();

  const Index Wa = static_cast<Index>(params.window_axial) * U;
  const Index Wl = static_cast<Index>(params.window_lateral) * U;
  if (Wa > M || Wl > N)
    throw SpecError("ncc_track: window larger than the upsampled frame");
  const Index Sa = static_cast<Index>(params.search_axial) * U;
  const Index Sl = static_cast<Index>(params.search_lateral) * U;

  const Index stride_a = std::max<Index>(1, static_cast<Index>(std::llround(
                                                static_cast<double>(Wa) *
                                                (1.0 - params.overlap_fraction))));
  const Index stride_l = std::max<Index>(1, static_cast<Index>(std::llround(
                                                static_cast<double>(Wl) *
                                                (1.0 - params.overlap_fraction))));

  std::vector<Index> row_starts, col_starts;
  for (Index r = 0; r + Wa <= M; r += stride_a) row_starts.push_back(r);
  for (Index c = 0; c + Wl <= N; c += stride_l) col_starts.push_back(c);
  const Index gr = static_cast<Index>(row_starts.size());
  const Index gc = static_cast<Index>(col_starts.size());

  Matrix est_a(gr, gc), est_l(gr, gc);
  BoolGrid ok = BoolGrid::Constant(gr, gc, false);

  Matrix surface(2 * Sa + 1, 2 * Sl + 1);
  for (Index wi = 0; wi < gr; ++wi) {
    for (Index wj = 0; wj < gc; ++wj) {
      const Index r = row_starts[static_cast<std::size_t>(wi)];
      const Index c = col_starts[static_cast<std::size_t>(wj)];
      auto P = up_pre.block(r, c, Wa, Wl);
      const double pmean = P.mean();
      const double pden = (P.array() - pmean).square().sum();
      if (pden <= 0.0) continue;  // degenerate, infilled later

      surface.setConstant(-2.0);
      double best = -2.0;
      Index bu = 0, bv = 0;
      for (Index u = -Sa; u <= Sa; ++u) {
        if (r + u < 0 || r + u + Wa > M) continue;
        for (Index v = -Sl; v <= Sl; ++v) {
          if (c + v < 0 || c + v + Wl > N) continue;
          auto Q = up_post.block(r + u, c + v, Wa, Wl);
          const double qmean = Q.mean();
          const double qden = (Q.array() - qmean).square().sum();
          if (qden <= 0.0) continue;
          const double cross = ((P.array() - pmean) * (Q.array() - qmean)).sum();
          const double ncc = cross / std::sqrt(pden * qden);
          surface(u + Sa, v + Sl) = ncc;
          if (ncc > best) {
            best = ncc;
            bu = u;
            bv = v;
          }
        }
      }
      if (best <= -2.0) continue;

      double du = 0.0, dv = 0.0;
      // A perfect match cannot be improved: correlation is bounded by one,
      // so a vertex fit around such a peak only amplifies shoulder
      // asymmetry (e.g. next to a flat region) into a spurious offset.
      if (params.subsample_fit && best < 1.0 - 1e-9) {
        auto parabolic = [](double cm, double c0, double cp) {
          const double den = cm - 2.0 * c0 + cp;
          // Correlations are dimensionless, so curvature below 1e-6 is a
          // numerical-noise plateau where a vertex fit would be meaningless.
          if (den >= -1e-6 || !std::isfinite(den)) return 0.0;
          return std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
        };
        if (bu > -Sa && bu < Sa && surface(bu + Sa - 1, bv + Sl) > -2.0 &&
            surface(bu + Sa + 1, bv + Sl) > -2.0)
          du = parabolic(surface(bu + Sa - 1, bv + Sl), surface(bu + Sa, bv + Sl),
                         surface(bu + Sa + 1, bv + Sl));
        if (bv > -Sl && bv < Sl && surface(bu + Sa, bv + Sl - 1) > -2.0 &&
            surface(bu + Sa, bv + Sl + 1) > -2.0)
          dv = parabolic(surface(bu + Sa, bv + Sl - 1), surface(bu + Sa, bv + Sl),
                         surface(bu + Sa, bv + Sl + 1));
      }
      est_a(wi, wj) = (static_cast<double>(bu) + du) / U;
      est_l(wi, wj) = (static_cast<double>(bv) + dv) / U;
      ok(wi, wj) = true;
    }
  }

  // Neighbor-median infill for degenerate windows.
  for (int pass = 0; pass < 8; ++pass) {
    bool missing = false;
    for (Index wi = 0; wi < gr; ++wi)
      for (Index wj = 0; wj < gc; ++wj) {
        if (ok(wi, wj)) continue;
        std::vector<double> va, vl;
        for (Index a = std::max<Index>(0, wi - 1); a <= std::min(gr - 1, wi + 1); ++a)
          for (Index b = std::max<Index>(0, wj - 1); b <= std::min(gc - 1, wj + 1); ++b)
            if (ok(a, b)) {
              va.push_back(est_a(a, b));
              vl.push_back(est_l(a, b));
            }
        if (va.empty()) {
          missing = true;
          continue;
        }
        auto median_of = [](std::vector<double> v) {
          auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
          std::nth_element(v.begin(), mid, v.end());
          return *mid;
        };
        est_a(wi, wj) = median_of(va);
        est_l(wi, wj) = median_of(vl);
        ok(wi, wj) = true;
      }
    if (!missing) break;
  }
  for (Index wi = 0; wi < gr; ++wi)
    for (Index wj = 0; wj < gc; ++wj)
      if (!ok(wi, wj)) {
        est_a(wi, wj) = 0.0;
        est_l(wi, wj) = 0.0;
      }

  // Window centers in original sample coordinates.
  std::vector<double> center_r(static_cast<std::size_t>(gr));
  std::vector<double> center_c(static_cast<std::size_t>(gc));
  for (Index wi = 0; wi < gr; ++wi)
    center_r[static_cast<std::size_t>(wi)] =
        (static_cast<double>(row_starts[static_cast<std::size_t>(wi)]) +
         0.5 * static_cast<double>(Wa - 1)) / U;
  for (Index wj = 0; wj < gc; ++wj)
    center_c[static_cast<std::size_t>(wj)] =
        (static_cast<double>(col_starts[static_cast<std::size_t>(wj)]) +
         0.5 * static_cast<double>(Wl - 1)) / U;

  auto bracket = [](const std::vector<double>& centers, double t, Index& k, double& w) {
    const Index count = static_cast<Index>(centers.size());
    if (count == 1 || t <= centers.front()) {
      k = 0;
      w = 0.0;
      return;
    }
    if (t >= centers.back()) {
      k = count - 2 >= 0 ? count - 2 : 0;
      w = count > 1 ? 1.0 : 0.0;
      return;
    }
    Index lo = 0;
    while (lo + 1 < count && centers[static_cast<std::size_t>(lo + 1)] <= t) ++lo;
    k = lo;
    const double span = centers[static_cast<std::size_t>(lo + 1)] -
                        centers[static_cast<std::size_t>(lo)];
    w = span > 0.0 ? (t - centers[static_cast<std::size_t>(lo)]) / span : 0.0;
  };

  DisplacementField out;
  out.axial.resize(m, n);
  out.lateral.resize(m, n);
  for (Index i = 0; i < m; ++i) {
    Index ki;
    double ti;
    bracket(center_r, static_cast<double>(i), ki, ti);
    const Index ki1 = std::min(ki + 1, gr - 1);
    for (Index j = 0; j < n; ++j) {
      Index kj;
      double tj;
      bracket(center_c, static_cast<double>(j), kj, tj);
      const Index kj1 = std::min(kj + 1, gc - 1);
      out.axial(i, j) = (1 - ti) * ((1 - tj) * est_a(ki, kj) + tj * est_a(ki, kj1)) +
                        ti * ((1 - tj) * est_a(ki1, kj) + tj * est_a(ki1, kj1));
      out.lateral(i, j) = (1 - ti) * ((1 - tj) * est_l(ki, kj) + tj * est_l(ki, kj1)) +
                          ti * ((1 - tj) * est_l(ki1, kj) + tj * est_l(ki1, kj1));
    }
  }
  return out;
}

}  // namespace elasto::init
