#pragma once

// Linear least-squares backends and relative L2 error evaluation.

#include "rfm/assembly.hpp"

#include <string>

namespace rfm {

enum class SolverKind : std::uint8_t { Auto, DenseCOD, SparseQR, BlockSparse };

const char* to_string(SolverKind k);
SolverKind parse_solver(const std::string& s);

struct SolveOptions {
  SolverKind kind = SolverKind::Auto;
  /// Relative rank threshold; <= 0 uses machine epsilon times the matrix size.
  double rank_tol = 0.0;
  /// Retry with regularized conjugate gradients when factorization fails.
  bool fallback = true;
  /// Auto picks the dense backend when N * M does not exceed this.
  long dense_limit = 4'000'000;
  /// Block backend: Tikhonov damping relative to the largest matrix entry.
  /// 0 gives rank-revealing basic solutions; negative picks auto_damping
  /// for underdetermined systems or a second stage above dense_stage_cols,
  /// and 0 otherwise.
  double damping = -1.0;
  static constexpr double auto_damping = 1e-8;
  /// Block backend: the second stage is dense up to this many columns.
  long dense_stage_cols = 4000;
  /// Regularization and iteration cap of the fallback.
  double ridge = 1e-12;
  int max_iterations = 20000;
};

struct SolveReport {
  Eigen::VectorXd coefficients;
  /// ||A u - b||, recomputed from the assembled matrix.
  double residual_norm = 0.0;
  long rank_estimate = 0;
  double wall_time = 0.0;
  /// Backend that produced the coefficients, e.g. "block-sparse" or "lscg-fallback".
  std::string path;
};

SolveReport least_squares(const LinearSystem& sys, const SolveOptions& opt = {});

/// OpenBLAS builds that pick their Cooperlake kernels return wrong results in
/// the sparse QR backend on some machines. Call first thing in main: when that
/// kernel is active and OPENBLAS_CORETYPE is unset, re-executes the program
/// with the SkylakeX kernels selected. Returns normally otherwise.
void select_blas_kernel(char** argv);

/// A single-group system holding a dense matrix; for small problems and tests.
LinearSystem dense_system(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

/// Points of an equally spaced evaluation grid restricted to the domain.
struct EvalGrid {
  std::vector<Vec> x;
  std::vector<Side> side;
  double t = 0.0;
};

/// Cell-centered grid with refinement * (collocation points per axis) points
/// per spatial axis, at t = T for time-dependent problems.
EvalGrid evaluation_grid(const Problem& p, long Q, int refinement = 2);

/// sqrt(sum (num - exact)^2) / sqrt(sum exact^2) over the grid points whose side
/// carries the field. Gauge fields are compared after removing the mean offset.
double relative_l2_error(const PiecewiseRfmModel& m, const Problem& p, int field, const EvalGrid& grid);

/// The same for the first derivative along a spatial axis.
double derivative_error(const PiecewiseRfmModel& m, const Problem& p, int field, int axis,
                        const EvalGrid& grid);

}  // namespace rfm
