#include "elasto/solver.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "elasto/filters.hpp"
#include "elasto/interp.hpp"
#include "elasto/strain.hpp"

namespace elasto::solver {

namespace {

// One penalty row of the objective: weight * (sum coef_k * x_k - target)^2
// for the quadratic families, weight * sqrt((...)^2 + eta^2) for the
// smoothed-L1 ones. A single enumeration drives cost evaluation and both
// assemblies, so the assembled gradient cannot drift from the objective.
struct Atom {
  int count = 0;
  Index idx[4] = {0, 0, 0, 0};
  double coef[4] = {0, 0, 0, 0};
  double target = 0.0;
  double weight = 0.0;
  double eta = 0.0;
};

struct FamilyWeights {
  double first_ya, first_xa, first_yl, first_xl;
  double second_ya, second_xa, second_yl, second_xl;
  double anchor;
  double mech;
};

FamilyWeights family_weights(const SolverParams& p, bool l1) {
  FamilyWeights f;
  if (l1) {
    f.first_ya = p.w_f * p.alpha1s;
    f.first_xa = p.w_f * p.alpha2s;
    f.first_yl = p.w_f * p.beta1s;
    f.first_xl = p.w_f * p.beta2s;
    f.second_ya = p.w_s * p.alpha1s;
    f.second_xa = p.w_s * p.alpha2s;
    f.second_yl = p.w_s * p.beta1s;
    f.second_xl = p.w_s * p.beta2s;
    f.anchor = p.gamma_s;
    f.mech = p.alpha3s;
  } else {
    f.first_ya = p.alpha1;
    f.first_xa = p.alpha2;
    f.first_yl = p.beta1;
    f.first_xl = p.beta2;
    f.second_ya = p.w * p.alpha1;
    f.second_xa = p.w * p.alpha2;
    f.second_yl = p.w * p.beta1;
    f.second_xl = p.w * p.beta2;
    f.anchor = p.gamma;
    f.mech = p.alpha3;
  }
  return f;
}

// Enumerates every penalty atom. Families with zero weight are skipped
// entirely so disabling a term leaves the remaining arithmetic untouched.
template <class Fn>
void for_each_atom(Index m, Index n, const SolverParams& p, bool l1, bool mechanical,
                   const EprField& nu, const BiasState& bias, Fn&& fn) {
  const FamilyWeights f = family_weights(p, l1);
  Atom atom;

  if (f.anchor > 0.0) {
    atom.count = 1;
    atom.target = 0.0;
    atom.weight = f.anchor;
    atom.eta = p.eta_first;
    atom.coef[0] = 1.0;
    for (Index j = 0; j < n; ++j) {
      atom.idx[0] = axial_index(0, j, m);
      fn(atom);
    }
  }

  // First-order forward differences, bias targets on the right.
  struct FirstSpec {
    double weight;
    bool axial_comp;   // differentiate the axial (true) or lateral component
    bool along_rows;   // difference along i (true) or along j
    double target;
  };
  const FirstSpec firsts[4] = {
      {f.first_ya, true, true, bias.eps_a},
      {f.first_xa, true, false, bias.eps_a},
      {f.first_yl, false, true, bias.eps_l},
      {f.first_xl, false, false, bias.eps_l},
  };
  for (const auto& s : firsts) {
    if (s.weight <= 0.0) continue;
    atom.count = 2;
    atom.weight = s.weight;
    atom.eta = p.eta_first;
    atom.target = s.target;
    atom.coef[0] = 1.0;
    atom.coef[1] = -1.0;
    const Index imax = s.along_rows ? m - 1 : m;
    const Index jmax = s.along_rows ? n : n - 1;
    for (Index j = 0; j < jmax; ++j)
      for (Index i = 0; i < imax; ++i) {
        const Index in = s.along_rows ? i + 1 : i;
        const Index jn = s.along_rows ? j : j + 1;
        if (s.axial_comp) {
          atom.idx[0] = axial_index(in, jn, m);
          atom.idx[1] = axial_index(i, j, m);
        } else {
          atom.idx[0] = lateral_index(in, jn, m);
          atom.idx[1] = lateral_index(i, j, m);
        }
        fn(atom);
      }
  }

  // Centered second differences where the 3-tap stencil fits.
  struct SecondSpec {
    double weight;
    bool axial_comp;
    bool along_rows;
  };
  const SecondSpec seconds[4] = {
      {f.second_ya, true, true},
      {f.second_xa, true, false},
      {f.second_yl, false, true},
      {f.second_xl, false, false},
  };
  for (const auto& s : seconds) {
    if (s.weight <= 0.0) continue;
    atom.count = 3;
    atom.weight = s.weight;
    atom.eta = p.eta_second;
    atom.target = 0.0;
    atom.coef[0] = 1.0;
    atom.coef[1] = -2.0;
    atom.coef[2] = 1.0;
    const Index ilo = s.along_rows ? 1 : 0;
    const Index ihi = s.along_rows ? m - 1 : m;
    const Index jlo = s.along_rows ? 0 : 1;
    const Index jhi = s.along_rows ? n : n - 1;
    for (Index j = jlo; j < jhi; ++j)
      for (Index i = ilo; i < ihi; ++i) {
        const Index ip = s.along_rows ? i + 1 : i;
        const Index im = s.along_rows ? i - 1 : i;
        const Index jp = s.along_rows ? j : j + 1;
        const Index jm = s.along_rows ? j : j - 1;
        if (s.axial_comp) {
          atom.idx[0] = axial_index(ip, jp, m);
          atom.idx[1] = axial_index(i, j, m);
          atom.idx[2] = axial_index(im, jm, m);
        } else {
          atom.idx[0] = lateral_index(ip, jp, m);
          atom.idx[1] = lateral_index(i, j, m);
          atom.idx[2] = lateral_index(im, jm, m);
        }
        fn(atom);
      }
  }

  if (mechanical && f.mech > 0.0) {
    atom.count = 4;
    atom.weight = f.mech;
    atom.eta = p.eta_m;
    atom.target = 0.0;
    for (Index j = 0; j + 1 < n; ++j)
      for (Index i = 0; i + 1 < m; ++i) {
        const double v = nu.nu(i, j);
        atom.idx[0] = lateral_index(i, j + 1, m);
        atom.coef[0] = 1.0;
        atom.idx[1] = lateral_index(i, j, m);
        atom.coef[1] = -1.0;
        atom.idx[2] = axial_index(i + 1, j, m);
        atom.coef[2] = v;
        atom.idx[3] = axial_index(i, j, m);
        atom.coef[3] = -v;
        fn(atom);
      }
  }
}

void check_shapes(const RfFrame& pre, const RfFrame& post) {
  validate_frame(pre);
  validate_frame(post);
  if (pre.rows() != post.rows() || pre.cols() != post.cols())
    throw SpecError("solver: frame shapes differ");
}

void check_params(const SolverParams& p) {
  auto nonneg = [](double v, const char* name) {
    if (v < 0.0 || !std::isfinite(v))
      throw SpecError(std::string("SolverParams.") + name + " must be finite and >= 0");
  };
  nonneg(p.alpha1, "alpha1");
  nonneg(p.alpha2, "alpha2");
  nonneg(p.beta1, "beta1");
  nonneg(p.beta2, "beta2");
  nonneg(p.w, "w");
  nonneg(p.gamma, "gamma");
  nonneg(p.alpha3, "alpha3");
  nonneg(p.alpha1s, "alpha1s");
  nonneg(p.alpha2s, "alpha2s");
  nonneg(p.beta1s, "beta1s");
  nonneg(p.beta2s, "beta2s");
  nonneg(p.gamma_s, "gamma_s");
  nonneg(p.w_f, "w_f");
  nonneg(p.w_s, "w_s");
  nonneg(p.alpha3s, "alpha3s");
  if (p.eta_first <= 0.0 || p.eta_second <= 0.0 || p.eta_m <= 0.0)
    throw SpecError("SolverParams: eta constants must be positive");
  if (p.nu_min > p.nu_max)
    throw SpecError("SolverParams: empty nu clamp range");
  if (p.s_floor <= 0.0)
    throw SpecError("SolverParams: s_floor must be positive");
  if (p.outer_iterations < 1)
    throw SpecError("SolverParams: outer_iterations must be >= 1");
  if (p.linear_solver_tolerance <= 0.0)
    throw SpecError("SolverParams: linear_solver_tolerance must be positive");
  if (p.strain_window_axial < 3 || p.strain_window_axial % 2 == 0 ||
      p.strain_window_lateral < 3 || p.strain_window_lateral % 2 == 0)
    throw SpecError("SolverParams: strain windows must be odd and >= 3");
}

void check_epr_shape(const EprField& nu, Index m, Index n) {
  if (nu.rows() != m || nu.cols() != n)
    throw SpecError("solver: EPR shape differs from the grid");
}

LinearSystem assemble(const Linearization& lin, const DisplacementField& current,
                      const SolverParams& params, const EprField& nu,
                      const BiasState& bias, bool l1) {
  const Index m = lin.residual.rows();
  const Index n = lin.residual.cols();
  if (current.rows() != m || current.cols() != n)
    throw SpecError("assemble: displacement shape differs from the grid");
  check_epr_shape(nu, m, n);
  check_params(params);
  if (!lin.valid.any())
    throw NumericalError("assemble: every sample is masked, system is singular");

  const Vector x = stack_field(current);
  const Index unknowns = 2 * m * n;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(unknowns) * 16);
  Vector rhs = Vector::Zero(unknowns);

  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) {
      if (!lin.valid(i, j)) continue;
      const double ga = lin.grad_axial(i, j);
      const double gl = lin.grad_lateral(i, j);
      const double mu = lin.residual(i, j);
      const Index ia = axial_index(i, j, m);
      const Index il = lateral_index(i, j, m);
      trips.emplace_back(ia, ia, ga * ga);
      trips.emplace_back(ia, il, ga * gl);
      trips.emplace_back(il, ia, ga * gl);
      trips.emplace_back(il, il, gl * gl);
      rhs(ia) += mu * ga;
      rhs(il) += mu * gl;
    }

  for_each_atom(m, n, params, l1, true, nu, bias, [&](const Atom& atom) {
    double v = -atom.target;
    for (int k = 0; k < atom.count; ++k) v += atom.coef[k] * x(atom.idx[k]);
    double lam = atom.weight;
    if (l1) lam /= 2.0 * std::sqrt(v * v + atom.eta * atom.eta);
    for (int a = 0; a < atom.count; ++a) {
      rhs(atom.idx[a]) -= lam * v * atom.coef[a];
      for (int b = 0; b < atom.count; ++b)
        trips.emplace_back(atom.idx[a], atom.idx[b], lam * atom.coef[a] * atom.coef[b]);
    }
  });

  LinearSystem sys;
  sys.grid_rows = m;
  sys.grid_cols = n;
  sys.matrix.resize(unknowns, unknowns);
  sys.matrix.setFromTriplets(trips.begin(), trips.end());
  sys.rhs = std::move(rhs);
  return sys;
}

Matrix forward_diff_rows(const Matrix& f) {
  return f.bottomRows(f.rows() - 1) - f.topRows(f.rows() - 1);
}

Matrix forward_diff_cols(const Matrix& f) {
  return f.rightCols(f.cols() - 1) - f.leftCols(f.cols() - 1);
}

}  // namespace

CostVariant cost_variant_of(Method method) {
  switch (method) {
    case Method::soul: return CostVariant::l2;
    case Method::mechsoul: return CostVariant::l2m;
    case Method::l1_soul: return CostVariant::l1;
    case Method::l1_mechsoul: return CostVariant::l1m;
  }
  throw SpecError("unknown method");
}

Vector stack_field(const DisplacementField& field) {
  const Index m = field.rows();
  const Index n = field.cols();
  Vector x(2 * m * n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) {
      x(axial_index(i, j, m)) = field.axial(i, j);
      x(lateral_index(i, j, m)) = field.lateral(i, j);
    }
  return x;
}

DisplacementField unstack_field(const Vector& x, Index rows, Index cols) {
  if (x.size() != 2 * rows * cols)
    throw SpecError("unstack_field: size mismatch");
  DisplacementField f;
  f.axial.resize(rows, cols);
  f.lateral.resize(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      f.axial(i, j) = x(axial_index(i, j, rows));
      f.lateral(i, j) = x(lateral_index(i, j, rows));
    }
  return f;
}

Linearization warp_and_linearize(const RfFrame& pre, const RfFrame& post,
                                 const DisplacementField& displacement) {
  check_shapes(pre, post);
  validate_displacement(displacement);
  if (displacement.rows() != pre.rows() || displacement.cols() != pre.cols())
    throw SpecError("warp_and_linearize: displacement shape differs from frames");

  const Index m = pre.rows();
  const Index n = pre.cols();
  Linearization lin;
  lin.residual = Matrix::Zero(m, n);
  lin.grad_axial = Matrix::Zero(m, n);
  lin.grad_lateral = Matrix::Zero(m, n);
  lin.valid = BoolGrid::Constant(m, n, false);

  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) {
      const double y = static_cast<double>(i) + displacement.axial(i, j);
      const double x = static_cast<double>(j) + displacement.lateral(i, j);
      const CubicSample s = sample_cubic(post.samples, y, x);
      if (!s.inside) continue;
      lin.valid(i, j) = true;
      lin.residual(i, j) = pre.samples(i, j) - s.value;
      lin.grad_axial(i, j) = s.dy;
      lin.grad_lateral(i, j) = s.dx;
    }
  return lin;
}

LinearSystem assemble_system_l2(const Linearization& lin,
                                const DisplacementField& current,
                                const SolverParams& params, const EprField& nu,
                                const BiasState& bias) {
  return assemble(lin, current, params, nu, bias, false);
}

LinearSystem assemble_system_l1(const Linearization& lin,
                                const DisplacementField& current,
                                const SolverParams& params, const EprField& nu,
                                const BiasState& bias) {
  return assemble(lin, current, params, nu, bias, true);
}

Vector solve_sparse(const LinearSystem& system, double tol) {
  if (system.matrix.rows() != system.matrix.cols() ||
      system.matrix.rows() != system.rhs.size())
    throw SpecError("solve_sparse: inconsistent system dimensions");
  if (tol <= 0.0) throw SpecError("solve_sparse: tolerance must be positive");

  const double bnorm = system.rhs.norm();
  if (bnorm == 0.0) return Vector::Zero(system.rhs.size());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(system.matrix);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("solve_sparse: factorization failed (non-positive pivot)");

  Vector x = ldlt.solve(system.rhs);
  double relres = (system.rhs - system.matrix * x).norm() / bnorm;
  for (int pass = 0; pass < 4 && relres > tol; ++pass) {
    const Vector r = system.rhs - system.matrix * x;
    x += ldlt.solve(r);
    relres = (system.rhs - system.matrix * x).norm() / bnorm;
  }
  if (!(relres <= tol)) {
    std::ostringstream msg;
    msg << "solve_sparse: relative residual " << relres << " above tolerance " << tol;
    throw NumericalError(msg.str());
  }
  return x;
}

EprField update_epr(const StrainTensorField& strains, const EprField& previous,
                    const SolverParams& params) {
  validate_strain(strains);
  if (previous.rows() != strains.rows() || previous.cols() != strains.cols())
    throw SpecError("update_epr: shape mismatch");
  EprField out;
  out.nu.resize(strains.rows(), strains.cols());
  for (Index i = 0; i < strains.rows(); ++i)
    for (Index j = 0; j < strains.cols(); ++j) {
      const double syy = strains.syy(i, j);
      const double raw = std::fabs(syy) >= params.s_floor
                             ? -strains.sxx(i, j) / syy
                             : previous.nu(i, j);
      out.nu(i, j) = std::clamp(raw, params.nu_min, params.nu_max);
    }
  if (params.epr_median) out.nu = median_filter(out.nu, 2);
  return out;
}

double evaluate_cost(const RfFrame& pre, const RfFrame& post,
                     const DisplacementField& displacement,
                     const SolverParams& params, const EprField& nu,
                     const BiasState& bias, CostVariant variant) {
  check_shapes(pre, post);
  validate_displacement(displacement);
  if (displacement.rows() != pre.rows() || displacement.cols() != pre.cols())
    throw SpecError("evaluate_cost: displacement shape differs from frames");
  const Index m = pre.rows();
  const Index n = pre.cols();
  check_epr_shape(nu, m, n);
  check_params(params);

  double cost = 0.0;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) {
      const double y = static_cast<double>(i) + displacement.axial(i, j);
      const double x = static_cast<double>(j) + displacement.lateral(i, j);
      const CubicSample s = sample_cubic(post.samples, y, x);
      if (!s.inside) continue;
      const double r = pre.samples(i, j) - s.value;
      cost += r * r;
    }

  const bool l1 = variant == CostVariant::l1 || variant == CostVariant::l1m;
  const bool mech = variant == CostVariant::l2m || variant == CostVariant::l1m;
  const Vector x = stack_field(displacement);
  for_each_atom(m, n, params, l1, mech, nu, bias, [&](const Atom& atom) {
    double v = -atom.target;
    for (int k = 0; k < atom.count; ++k) v += atom.coef[k] * x(atom.idx[k]);
    cost += l1 ? atom.weight * std::sqrt(v * v + atom.eta * atom.eta)
               : atom.weight * v * v;
  });
  return cost;
}

TrackingResult run_tracking(const RfFrame& pre, const RfFrame& post,
                            Method method, const SolverParams& params,
                            const std::optional<DisplacementField>& initial) {
  validate_frame(pre, true);
  validate_frame(post, true);
  if (pre.rows() != post.rows() || pre.cols() != post.cols())
    throw SpecError("run_tracking: frame shapes differ");
  check_params(params);

  SolverParams p = params;
  if (method == Method::soul || method == Method::l1_soul) {
    p.alpha3 = 0.0;
    p.alpha3s = 0.0;
  }
  const CostVariant variant = cost_variant_of(method);
  const bool l1 = variant == CostVariant::l1 || variant == CostVariant::l1m;

  const Index m = pre.rows();
  const Index n = pre.cols();

  DisplacementField d;
  if (initial) {
    validate_displacement(*initial);
    if (initial->rows() != m || initial->cols() != n)
      throw SpecError("run_tracking: initial displacement shape differs from frames");
    d = *initial;
  } else {
    d = init::dp_initialize(pre, post, p.dp);
  }

  EprField nu;
  nu.nu = Matrix::Constant(m, n, std::clamp(p.nu_init, p.nu_min, p.nu_max));
  BiasState bias;
  strain::LsqParams internal{p.strain_window_axial, p.strain_window_lateral};

  TrackingResult result;
  StrainTensorField strains;
  bool early = false;

  for (int iter = 1; iter <= p.outer_iterations; ++iter) {
    const Linearization lin = warp_and_linearize(pre, post, d);
    IterationRecord rec;
    rec.cost_before = evaluate_cost(pre, post, d, p, nu, bias, variant);

    const LinearSystem sys = l1 ? assemble_system_l1(lin, d, p, nu, bias)
                                : assemble_system_l2(lin, d, p, nu, bias);
    const Vector delta = solve_sparse(sys, p.linear_solver_tolerance);
    const DisplacementField step = unstack_field(delta, m, n);

    // The solved direction descends on the local quadratic model, but a full
    // step can overshoot the nonconvex data term. Halve it until the measured
    // objective stops increasing; the first candidate is accepted in the vast
    // majority of iterations, so this usually costs exactly the one post-step
    // evaluation the record needs anyway.
    const double slack = 1e-12 * std::max(1.0, std::abs(rec.cost_before));
    double best_cost = std::numeric_limits<double>::infinity();
    double best_t = 1.0;
    DisplacementField trial;
    double t = 1.0;
    for (int halving = 0; halving <= 20; ++halving, t *= 0.5) {
      trial.axial = d.axial + t * step.axial;
      trial.lateral = d.lateral + t * step.lateral;
      const double c = evaluate_cost(pre, post, trial, p, nu, bias, variant);
      if (c < best_cost) {
        best_cost = c;
        best_t = t;
      }
      if (c <= rec.cost_before + slack) break;
    }
    d.axial = d.axial + best_t * step.axial;
    d.lateral = d.lateral + best_t * step.lateral;

    rec.cost_after = best_cost;
    rec.max_update = best_t * delta.cwiseAbs().maxCoeff();
    result.iterations.push_back(rec);
    result.cost_trace.push_back(rec.cost_after);

    strains = strain::compute_strains(d, internal);

    if (rec.max_update < p.early_stop_tol) {
      early = true;
      break;
    }
    if (iter < p.outer_iterations) {
      if (p.bias_update) {
        bias.eps_a = forward_diff_rows(d.axial).mean();
        bias.eps_l = forward_diff_cols(d.lateral).mean();
      }
      if (iter + 1 >= p.epr_update_from_iteration)
        nu = update_epr(strains, nu, p);
    }
  }

  result.displacement = std::move(d);
  result.strains = std::move(strains);
  result.epr = std::move(nu);
  result.converged = early || (!result.iterations.empty() &&
                               result.iterations.back().max_update <= p.converged_tol);
  return result;
}

}  // namespace elasto::solver
