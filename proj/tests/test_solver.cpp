#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "elasto/phantom.hpp"
#include "elasto/solver.hpp"
#include "helpers.hpp"

using namespace elasto;
using namespace elasto::solver;

namespace {

RfFrame speckle(Index rows, Index cols, std::uint64_t seed) {
  phantom::PhantomSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.rng_seed = seed;
  return phantom::generate_speckle(spec);
}

// Displacement with safe margins: every warped sample stays strictly inside
// the frame so finite-difference probes never cross the validity boundary.
DisplacementField safe_displacement(Index m, Index n, std::uint64_t seed) {
  DisplacementField d;
  d.axial = testutil::random_matrix(m, n, seed, -0.3, 0.3);
  d.lateral = testutil::random_matrix(m, n, seed ^ 0xff, -0.3, 0.3);
  for (Index j = 0; j < n; ++j) {
    d.axial(0, j) = 0.1;
    d.axial(m - 1, j) = -0.1;
  }
  for (Index i = 0; i < m; ++i) {
    d.lateral(i, 0) = 0.1;
    d.lateral(i, n - 1) = -0.1;
  }
  return d;
}

EprField random_epr(Index m, Index n, std::uint64_t seed) {
  EprField nu;
  nu.nu = testutil::random_matrix(m, n, seed, 0.0, 0.5);
  return nu;
}

}  // namespace

TEST_CASE("stacking interleaves components in column-major grid order") {
  CHECK(axial_index(0, 0, 4) == 0);
  CHECK(lateral_index(0, 0, 4) == 1);
  CHECK(axial_index(3, 0, 4) == 6);
  CHECK(axial_index(0, 1, 4) == 8);
  CHECK(lateral_index(2, 1, 4) == 13);

  DisplacementField d{testutil::random_matrix(4, 3, 1), testutil::random_matrix(4, 3, 2)};
  Vector x = stack_field(d);
  REQUIRE(x.size() == 24);
  CHECK(x(0) == d.axial(0, 0));
  CHECK(x(1) == d.lateral(0, 0));
  CHECK(x(10) == d.axial(1, 1));

  DisplacementField e = unstack_field(x, 4, 3);
  CHECK(e.axial == d.axial);
  CHECK(e.lateral == d.lateral);
  CHECK_THROWS_AS(unstack_field(x, 5, 3), SpecError);
}

TEST_CASE("linearization carries residual and interpolant gradients") {
  RfFrame pre = speckle(12, 10, 3);
  RfFrame post = pre;
  post.samples.array() += 5.0;

  DisplacementField zero{Matrix::Zero(12, 10), Matrix::Zero(12, 10)};
  Linearization lin = warp_and_linearize(pre, post, zero);
  CHECK(lin.valid.all());
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 10; ++j)
      CHECK(lin.residual(i, j) == doctest::Approx(-5.0).epsilon(1e-9));

  // The constant offset cancels in the gradents: centered differences of pre.
  for (Index i = 1; i < 11; ++i)
    for (Index j = 1; j < 9; ++j) {
      CHECK(lin.grad_axial(i, j) ==
            doctest::Approx(0.5 * (pre.samples(i + 1, j) - pre.samples(i - 1, j)))
                .epsilon(1e-9));
      CHECK(lin.grad_lateral(i, j) ==
            doctest::Approx(0.5 * (pre.samples(i, j + 1) - pre.samples(i, j - 1)))
                .epsilon(1e-9));
    }

  // Samples warped out of the frame are masked.
  DisplacementField out_top{Matrix::Zero(12, 10), Matrix::Zero(12, 10)};
  out_top.axial(0, 4) = -1.0;
  Linearization lin2 = warp_and_linearize(pre, post, out_top);
  CHECK_FALSE(lin2.valid(0, 4));
  CHECK(lin2.residual(0, 4) == 0.0);
}

TEST_CASE("a single data sample assembles the documented 2x2 block") {
  Linearization lin;
  lin.residual = Matrix::Constant(1, 1, 4.0);
  lin.grad_axial = Matrix::Constant(1, 1, 2.0);
  lin.grad_lateral = Matrix::Constant(1, 1, 1.0);
  lin.valid = BoolGrid::Constant(1, 1, true);

  SolverParams p;
  p.alpha1 = p.alpha2 = p.beta1 = p.beta2 = p.w = p.gamma = p.alpha3 = 0.0;

  DisplacementField zero{Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  EprField nu{Matrix::Constant(1, 1, 0.3)};
  LinearSystem sys = assemble_system_l2(lin, zero, p, nu, BiasState{});

  Matrix dense = Matrix(sys.matrix);
  CHECK(dense(0, 0) == 4.0);   // ga^2
  CHECK(dense(0, 1) == 2.0);   // ga*gl
  CHECK(dense(1, 0) == 2.0);
  CHECK(dense(1, 1) == 1.0);   // gl^2
  CHECK(sys.rhs(0) == 8.0);    // mu*ga
  CHECK(sys.rhs(1) == 4.0);    // mu*gl
}

TEST_CASE("assembled right-hand sides equal minus half the objective gradient") {
  const Index m = 8, n = 8;
  RfFrame pre = speckle(m, n, 11);
  RfFrame post = speckle(m, n, 12);
  DisplacementField d = safe_displacement(m, n, 21);
  EprField nu = random_epr(m, n, 31);
  BiasState bias{0.003, -0.002};
  const double h = 1e-6;

  struct Case {
    CostVariant variant;
    bool l1;
    bool mech;
  };
  const Case cases[4] = {{CostVariant::l2, false, false},
                         {CostVariant::l2m, false, true},
                         {CostVariant::l1, true, false},
                         {CostVariant::l1m, true, true}};

  for (const Case& c : cases) {
    CAPTURE(static_cast<int>(c.variant));
    SolverParams p;
    if (!c.mech) {
      p.alpha3 = 0.0;
      p.alpha3s = 0.0;
    }

    Linearization lin = warp_and_linearize(pre, post, d);
    REQUIRE(lin.valid.all());
    LinearSystem sys = c.l1 ? assemble_system_l1(lin, d, p, nu, bias)
                            : assemble_system_l2(lin, d, p, nu, bias);

    Vector x = stack_field(d);
    double worst = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
      auto probe = [&](double delta) {
        Vector xp = x;
        xp(k) += delta;
        DisplacementField dp = unstack_field(xp, m, n);
        return evaluate_cost(pre, post, dp, p, nu, bias, c.variant);
      };
      const double grad = (probe(h) - probe(-h)) / (2.0 * h);
      const double want = -0.5 * grad;
      const double err = std::fabs(sys.rhs(k) - want) / std::max(1.0, std::fabs(want));
      worst = std::max(worst, err);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("every matrix row holds at most 13 nonzero entries") {
  const Index m = 6, n = 6;
  RfFrame pre = speckle(m, n, 41);
  RfFrame post = speckle(m, n, 42);
  DisplacementField d = safe_displacement(m, n, 43);
  EprField nu = random_epr(m, n, 44);

  SolverParams p;  // all families active, alpha3 > 0
  Linearization lin = warp_and_linearize(pre, post, d);
  LinearSystem sys = assemble_system_l2(lin, d, p, nu, BiasState{0.001, 0.001});

  Index worst = 0;
  std::vector<Index> counts(static_cast<std::size_t>(sys.matrix.rows()), 0);
  for (int col = 0; col < sys.matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, col); it; ++it)
      if (it.value() != 0.0) ++counts[static_cast<std::size_t>(it.row())];
  for (Index c : counts) worst = std::max(worst, c);
  CHECK(worst == 13);

  // The matrix is symmetric.
  Matrix dense = Matrix(sys.matrix);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reweighted assembly at zero arguments is a rescaled quadratic one") {
  const Index m = 6, n = 5;
  RfFrame pre = speckle(m, n, 51);
  RfFrame post = speckle(m, n, 52);
  DisplacementField zero{Matrix::Zero(m, n), Matrix::Zero(m, n)};
  EprField nu = random_epr(m, n, 53);

  SolverParams p;
  Linearization lin = warp_and_linearize(pre, post, zero);
  LinearSystem l1 = assemble_system_l1(lin, zero, p, nu, BiasState{});

  // Quadratic weights matching weight / (2*eta) per family.
  SolverParams q = p;
  q.alpha1 = p.w_f * p.alpha1s / (2.0 * p.eta_first);
  q.alpha2 = p.w_f * p.alpha2s / (2.0 * p.eta_first);
  q.beta1 = p.w_f * p.beta1s / (2.0 * p.eta_first);
  q.beta2 = p.w_f * p.beta2s / (2.0 * p.eta_first);
  q.w = (p.w_s / p.w_f) * (p.eta_first / p.eta_second);
  q.gamma = p.gamma_s / (2.0 * p.eta_first);
  q.alpha3 = p.alpha3s / (2.0 * p.eta_m);
  LinearSystem l2 = assemble_system_l2(lin, zero, q, nu, BiasState{});

  const Matrix da = Matrix(l1.matrix) - Matrix(l2.matrix);
  CHECK(da.cwiseAbs().maxCoeff() < 1e-12 * Matrix(l2.matrix).cwiseAbs().maxCoeff());
  CHECK((l1.rhs - l2.rhs).cwiseAbs().maxCoeff() <
        1e-12 * l2.rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("sparse solves agree with a dense factorization") {
  const Index m = 4, n = 3;
  RfFrame pre = speckle(m, n, 61);
  RfFrame post = speckle(m, n, 62);
  DisplacementField d = safe_displacement(m, n, 63);
  EprField nu = random_epr(m, n, 64);

  SolverParams p;
  Linearization lin = warp_and_linearize(pre, post, d);
  LinearSystem sys = assemble_system_l2(lin, d, p, nu, BiasState{0.002, -0.001});

  Vector sparse = solve_sparse(sys, 1e-10);
  Matrix dense = Matrix(sys.matrix);
  Vector direct = dense.ldlt().solve(sys.rhs);
  CHECK((sparse - direct).norm() < 1e-8 * std::max(1.0, direct.norm()));
}

TEST_CASE("solve_sparse handles trivial and malformed systems") {
  LinearSystem sys;
  sys.matrix.resize(4, 4);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < 4; ++k) trips.emplace_back(k, k, 2.0);
  sys.matrix.setFromTriplets(trips.begin(), trips.end());

  sys.rhs = Vector::Zero(4);
  CHECK(solve_sparse(sys, 1e-10).isZero(0.0));

  sys.rhs = Vector::Constant(4, 4.0);
  Vector x = solve_sparse(sys, 1e-12);
  CHECK((x.array() - 2.0).abs().maxCoeff() < 1e-14);

  sys.rhs = Vector::Zero(3);
  CHECK_THROWS_AS(solve_sparse(sys, 1e-10), SpecError);
  sys.rhs = Vector::Zero(4);
  CHECK_THROWS_AS(solve_sparse(sys, 0.0), SpecError);
}

TEST_CASE("assembly refuses a fully masked grid") {
  Linearization lin;
  lin.residual = Matrix::Zero(3, 3);
  lin.grad_axial = Matrix::Zero(3, 3);
  lin.grad_lateral = Matrix::Zero(3, 3);
  lin.valid = BoolGrid::Constant(3, 3, false);
  DisplacementField zero{Matrix::Zero(3, 3), Matrix::Zero(3, 3)};
  EprField nu{Matrix::Constant(3, 3, 0.3)};
  CHECK_THROWS_AS(assemble_system_l2(lin, zero, SolverParams{}, nu, BiasState{}),
                  NumericalError);
}

TEST_CASE("ratio updates guard, clamp and smooth") {
  SolverParams p;
  p.epr_median = false;

  StrainTensorField s{Matrix::Constant(3, 3, -0.02), Matrix::Constant(3, 3, 0.0098)};
  s.sxx(0, 1) = 0.02;   // ratio 1.0, clamped to nu_max
  s.syy(1, 2) = 0.0;    // guarded, keeps the previous value
  EprField prev{Matrix::Constant(3, 3, 0.11)};

  EprField out = update_epr(s, prev, p);
  CHECK(out.nu(0, 0) == doctest::Approx(0.49).epsilon(1e-12));
  CHECK(out.nu(0, 1) == 0.5);
  CHECK(out.nu(1, 2) == doctest::Approx(0.11).epsilon(1e-15));

  // Median smoothing keeps values drawn from the input.
  p.epr_median = true;
  EprField sm = update_epr(s, prev, p);
  CHECK(sm.nu.minCoeff() >= 0.0);
  CHECK(sm.nu.maxCoeff() <= 0.5);

  EprField bad{Matrix::Constant(2, 2, 0.3)};
  CHECK_THROWS_AS(update_epr(s, bad, p), SpecError);
}

TEST_CASE("tracking identical frames converges immediately to zero") {
  RfFrame f = speckle(32, 24, 71);
  for (Method method : {Method::soul, Method::l1_soul, Method::mechsoul,
                        Method::l1_mechsoul}) {
    CAPTURE(static_cast<int>(method));
    SolverParams p;
    p.dp.axial_search = 4;
    p.dp.lateral_search = 1;
    TrackingResult r = run_tracking(f, f, method, p);
    CHECK(r.converged);
    CHECK(r.iterations.size() == 1);
    CHECK(r.displacement.axial.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.displacement.lateral.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.epr.nu(0, 0) == doctest::Approx(0.3));
  }
}

TEST_CASE("tracking recovers a small uniform compression") {
  phantom::PhantomSpec ps;
  ps.rows = 64;
  ps.cols = 32;
  ps.rng_seed = 404;
  RfFrame pre = phantom::generate_speckle(ps);

  phantom::DeformationSpec ds;
  ds.kind = phantom::DeformationKind::uniform_compression;
  ds.applied_strain = 0.01;
  ds.background_nu = 0.49;
  phantom::GroundTruth gt = phantom::analytic_displacement(ds, 64, 32);
  phantom::WarpResult w = phantom::warp_frame(pre, gt.displacement);

  SolverParams p;
  p.outer_iterations = 6;
  p.dp.axial_search = 3;
  p.dp.lateral_search = 1;

  TrackingResult r = run_tracking(pre, w.frame, Method::mechsoul, p);
  REQUIRE_FALSE(r.iterations.empty());

  // Interior axial strain close to the applied compression.
  double sum = 0.0;
  Index count = 0;
  for (Index i = 8; i < 56; ++i)
    for (Index j = 4; j < 28; ++j) {
      sum += r.strains.syy(i, j);
      ++count;
    }
  const double mean_syy = sum / double(count);
  CHECK(mean_syy == doctest::Approx(-0.01).epsilon(0.2));

  // EPR lands in the physical range and reacts to the data.
  CHECK(r.epr.nu.minCoeff() >= 0.0);
  CHECK(r.epr.nu.maxCoeff() <= 0.5);
}

TEST_CASE("reweighted tracking never raises the frozen-weight objective") {
  phantom::PhantomSpec ps;
  ps.rows = 48;
  ps.cols = 24;
  ps.rng_seed = 505;
  RfFrame pre = phantom::generate_speckle(ps);

  phantom::DeformationSpec ds;
  ds.applied_strain = 0.005;
  phantom::GroundTruth gt = phantom::analytic_displacement(ds, 48, 24);
  phantom::WarpResult w = phantom::warp_frame(pre, gt.displacement);

  SolverParams p;
  p.outer_iterations = 5;
  p.dp.axial_search = 2;
  p.dp.lateral_search = 1;
  TrackingResult r = run_tracking(pre, w.frame, Method::l1_mechsoul, p);
  for (const IterationRecord& rec : r.iterations)
    CHECK(rec.cost_after <= rec.cost_before * (1.0 + 1e-9) + 1e-9);
}

TEST_CASE("the coupling-free methods match mechanical runs with zero weight") {
  phantom::PhantomSpec ps;
  ps.rows = 48;
  ps.cols = 24;
  ps.rng_seed = 606;
  RfFrame pre = phantom::generate_speckle(ps);
  phantom::DeformationSpec ds;
  ds.applied_strain = 0.008;
  phantom::GroundTruth gt = phantom::analytic_displacement(ds, 48, 24);
  phantom::WarpResult w = phantom::warp_frame(pre, gt.displacement);

  SolverParams base;
  base.outer_iterations = 3;
  base.dp.axial_search = 2;
  base.dp.lateral_search = 1;

  SolverParams zeroed = base;
  zeroed.alpha3 = 0.0;
  zeroed.alpha3s = 0.0;

  TrackingResult a = run_tracking(pre, w.frame, Method::soul, base);
  TrackingResult b = run_tracking(pre, w.frame, Method::mechsoul, zeroed);
  CHECK(a.displacement.axial == b.displacement.axial);
  CHECK(a.displacement.lateral == b.displacement.lateral);

  TrackingResult c = run_tracking(pre, w.frame, Method::l1_soul, base);
  TrackingResult e = run_tracking(pre, w.frame, Method::l1_mechsoul, zeroed);
  CHECK(c.displacement.axial == e.displacement.axial);
  CHECK(c.displacement.lateral == e.displacement.lateral);
}

TEST_CASE("tracking validates its inputs") {
  RfFrame tiny = speckle(4, 4, 81);
  CHECK_THROWS_AS(run_tracking(tiny, tiny, Method::soul, SolverParams{}), SpecError);

  RfFrame f = speckle(32, 24, 82);
  SolverParams bad;
  bad.outer_iterations = 0;
  CHECK_THROWS_AS(run_tracking(f, f, Method::soul, bad), SpecError);

  SolverParams neg;
  neg.alpha1 = -1.0;
  CHECK_THROWS_AS(run_tracking(f, f, Method::soul, neg), SpecError);

  SolverParams p;
  p.dp.axial_search = 4;
  DisplacementField wrong{Matrix::Zero(8, 8), Matrix::Zero(8, 8)};
  CHECK_THROWS_AS(run_tracking(f, f, Method::soul, p, wrong), SpecError);
}
