#pragma once

#include <Eigen/SparseCore>
#include <optional>
#include <vector>

#include "elasto/init.hpp"
#include "elasto/types.hpp"

namespace elasto::solver {

// Gauss-Newton tracking of the displacement between two RF frames. Each
// outer iteration linearizes the post frame around the current estimate and
// solves one sparse normal-equation system for the (delta axial, delta
// lateral) refinement of every sample. The objective combines an L2 data
// term with either quadratic (soul / mechsoul) or smoothed-L1 (l1_soul /
// l1_mechsoul) continuity penalties; the mechsoul variants add a coupling
// term tying lateral to axial strain through the effective Poisson's ratio,
// which is itself re-estimated as the iteration proceeds.

enum class Method { soul, l1_soul, mechsoul, l1_mechsoul };

enum class CostVariant { l2, l2m, l1, l1m };

CostVariant cost_variant_of(Method method);

struct SolverParams {
  // Quadratic continuity weights. alpha* act on the axial displacement,
  // beta* on the lateral one; *1 penalizes the axial derivative, *2 the
  // lateral derivative. `w` scales the second-order terms and `gamma`
  // anchors the first axial row. These defaults are calibrated for frames
  // with RMS amplitude 4 (the phantom generator's default scale); at that
  // scale the mechanical coupling weights below carry real authority over
  // the lateral field instead of being drowned by the data term.
  double alpha1 = 0.75;
  double alpha2 = 0.375;
  double beta1 = 0.75;
  double beta2 = 0.375;
  double w = 0.125;
  double gamma = 0.125;
  double alpha3 = 20.0;  // mechanical coupling weight

  // Smoothed-L1 counterparts. w_f and w_s scale the first- and second-order
  // families; eta_* are the corner-rounding constants.
  double alpha1s = 0.03125;
  double alpha2s = 0.015625;
  double beta1s = 0.03125;
  double beta2s = 0.015625;
  double gamma_s = 0.00025;
  double w_f = 0.05;
  double w_s = 0.048;
  double alpha3s = 0.045;
  double eta_first = 1e-3;
  double eta_second = 5e-4;
  double eta_m = 1e-3;

  // Effective-Poisson's-ratio handling.
  double nu_init = 0.3;
  double nu_min = 0.0;
  double nu_max = 0.5;
  double s_floor = 1e-5;   // |s_yy| below this keeps the previous ratio
  bool epr_median = true;  // 5x5 median smoothing of the updated map
  int epr_update_from_iteration = 2;

  int outer_iterations = 10;
  bool bias_update = true;       // refresh the strain bias targets per iteration
  double early_stop_tol = 1e-4;  // stop when the max refinement falls below
  double converged_tol = 1e-2;   // result flagged converged below this
  double linear_solver_tolerance = 1e-10;

  // Windows of the internal least-squares strain used for bias and EPR
  // updates (odd sample counts).
  int strain_window_axial = 11;
  int strain_window_lateral = 5;

  init::DpParams dp;  // used when no initial displacement is supplied
};

/// Spatially constant strain targets subtracted inside the first-order
/// continuity terms; keeping them at the mean measured strain stops the
/// regularization from biasing displacement slopes toward zero.
struct BiasState {
  double eps_a = 0.0;
  double eps_l = 0.0;
};

/// Residual and analytic interpolant gradients of the post frame evaluated
/// at (i + a, j + l). Samples warped outside the frame are flagged invalid
/// and carry zeros.
struct Linearization {
  Matrix residual;
  Matrix grad_axial;
  Matrix grad_lateral;
  BoolGrid valid;
};

/// Normal equations over the 2mn stacked unknowns. Sample (i, j) owns the
/// interleaved pair (axial, lateral) at flat position j*m + i, so the matrix
/// is symmetric with at most 13 nonzeros per row.
struct LinearSystem {
  Eigen::SparseMatrix<double> matrix;
  Vector rhs;
  Index grid_rows = 0;
  Index grid_cols = 0;
};

inline Index axial_index(Index i, Index j, Index m) { return 2 * (j * m + i); }
inline Index lateral_index(Index i, Index j, Index m) { return 2 * (j * m + i) + 1; }

Vector stack_field(const DisplacementField& field);
DisplacementField unstack_field(const Vector& x, Index rows, Index cols);

Linearization warp_and_linearize(const RfFrame& pre, const RfFrame& post,
                                 const DisplacementField& displacement);

/// Quadratic-penalty assembly. The right-hand side equals minus one half of
/// the objective gradient at zero refinement, so a finite-difference probe
/// of evaluate_cost is the direct oracle for these systems.
LinearSystem assemble_system_l2(const Linearization& lin,
                                const DisplacementField& current,
                                const SolverParams& params, const EprField& nu,
                                const BiasState& bias);

/// Reweighted assembly for the smoothed-L1 variants: every penalty row is
/// scaled by weight / (2*sqrt(arg^2 + eta^2)) with the argument taken at the
/// current displacement, which both majorizes the smoothed-L1 objective and
/// reproduces its exact gradient at the expansion point.
LinearSystem assemble_system_l1(const Linearization& lin,
                                const DisplacementField& current,
                                const SolverParams& params, const EprField& nu,
                                const BiasState& bias);

/// Direct sparse factorization with iterative refinement until the relative
/// residual meets `tol`. b = 0 short-circuits to x = 0.
Vector solve_sparse(const LinearSystem& system, double tol);

/// nu = -s_xx / s_yy where |s_yy| >= s_floor, previous value elsewhere,
/// clamped to [nu_min, nu_max] and median-smoothed when enabled.
EprField update_epr(const StrainTensorField& strains, const EprField& previous,
                    const SolverParams& params);

/// The full (non-linearized) objective of the selected variant at the given
/// total displacement, summed over samples that warp inside the post frame.
double evaluate_cost(const RfFrame& pre, const RfFrame& post,
                     const DisplacementField& displacement,
                     const SolverParams& params, const EprField& nu,
                     const BiasState& bias, CostVariant variant);

struct IterationRecord {
  double cost_before = 0.0;  // objective before the step, current weights
  double cost_after = 0.0;   // objective after the step, same weights
  double max_update = 0.0;   // infinity norm of the refinement
};

struct TrackingResult {
  DisplacementField displacement;
  StrainTensorField strains;  // internal-window least-squares strains
  EprField epr;               // the map used by the final solve
  std::vector<IterationRecord> iterations;
  std::vector<double> cost_trace;  // cost_after per iteration
  bool converged = false;
};

/// Runs the outer loop: seed displacement (dynamic-programming search unless
/// `initial` is given), then up to `outer_iterations` linearize/assemble/solve
/// rounds with bias and EPR refreshes between them. Steps that would raise
/// the measured objective are halved until they no longer do, so recorded
/// cost traces are non-increasing within each iteration.
TrackingResult run_tracking(const RfFrame& pre, const RfFrame& post,
                            Method method, const SolverParams& params,
                            const std::optional<DisplacementField>& initial = std::nullopt);

}  // namespace elasto::solver
