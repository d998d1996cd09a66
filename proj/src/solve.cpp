#include "rfm/solve.hpp"

#include "rfm/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <SuiteSparseQR.hpp>
#include <spdlog/spdlog.h>

#include <dlfcn.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace rfm {

const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::Auto: return "auto";
    case SolverKind::DenseCOD: return "dense";
    case SolverKind::SparseQR: return "spqr";
    case SolverKind::BlockSparse: return "block";
  }
  return "?";
}

SolverKind parse_solver(const std::string& s) {
  for (auto k : {SolverKind::Auto, SolverKind::DenseCOD, SolverKind::SparseQR, SolverKind::BlockSparse})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::Config, "unknown solver '" + s + "' (auto, dense, spqr, block)");
}

LinearSystem dense_system(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != b.size()) throw Error(ErrorCode::DimensionMismatch, "rhs length");
  LinearSystem s;
  s.cols = A.cols();
  for (long r = 0; r < A.rows(); ++r) {
    ConditionRow row;
    for (long c = 0; c < A.cols(); ++c)
      if (A(r, c) != 0.0) row.coeffs.emplace_back(c, A(r, c));
    row.rhs = b[r];
    s.append(row, 1.0);
  }
  s.rhs = b;
  s.groups = {0, A.cols()};
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

Eigen::MatrixXd to_dense(const LinearSystem& s) { return Eigen::MatrixXd(s.matrix()); }

// Compressed rows built up by the block backend's second stage.
struct Csr {
  long cols = 0;
  std::vector<long> ptr{0};
  std::vector<long> idx;
  std::vector<double> val;
  std::vector<double> rhs;
  long rows() const { return static_cast<long>(ptr.size()) - 1; }
  void end_row(double b) {
    ptr.push_back(static_cast<long>(idx.size()));
    rhs.push_back(b);
  }
};

class Cholmod {
 public:
  Cholmod() { cholmod_l_start(&cc_); }
  ~Cholmod() { cholmod_l_finish(&cc_); }
  Cholmod(const Cholmod&) = delete;
  Cholmod& operator=(const Cholmod&) = delete;
  cholmod_common* get() { return &cc_; }

 private:
  cholmod_common cc_;
};

// Sparse QR solve of a compressed-row system. Minimum norm when
// underdetermined, a basic solution otherwise.
Eigen::VectorXd spqr_solve(long m, long n, const long* ptr, const long* idx, const double* val,
                           const double* rhs, double rank_tol, long& rank) {
  Cholmod cc;
  const long nnz = ptr[m];
  // Compressed rows of A are compressed columns of A^T.
  cholmod_sparse* At = cholmod_l_allocate_sparse(n, m, nnz, 1, 1, 0, CHOLMOD_REAL, cc.get());
  if (!At) throw Error(ErrorCode::NumericalBreakdown, "cholmod allocation failed");
  std::copy(ptr, ptr + m + 1, static_cast<SuiteSparse_long*>(At->p));
  std::copy(idx, idx + nnz, static_cast<SuiteSparse_long*>(At->i));
  std::copy(val, val + nnz, static_cast<double*>(At->x));
  cholmod_sparse* A = cholmod_l_transpose(At, 1, cc.get());
  cholmod_l_free_sparse(&At, cc.get());
  if (!A) throw Error(ErrorCode::NumericalBreakdown, "cholmod transpose failed");

  double tol = SPQR_DEFAULT_TOL;
  if (rank_tol > 0.0) {
    double mx = 0.0;
    const auto* Ap = static_cast<SuiteSparse_long*>(A->p);
    const auto* Ax = static_cast<double*>(A->x);
    for (long j = 0; j < n; ++j) {
      double s = 0.0;
      for (auto k = Ap[j]; k < Ap[j + 1]; ++k) s += Ax[k] * Ax[k];
      mx = std::max(mx, std::sqrt(s));
    }
    tol = rank_tol * mx;
  }
  cholmod_dense* B = cholmod_l_allocate_dense(m, 1, m, CHOLMOD_REAL, cc.get());
  std::copy(rhs, rhs + m, static_cast<double*>(B->x));
  cholmod_dense* X = SuiteSparseQR_min2norm<double>(SPQR_ORDERING_DEFAULT, tol, A, B, cc.get());
  cholmod_l_free_sparse(&A, cc.get());
  cholmod_l_free_dense(&B, cc.get());
  if (!X) throw Error(ErrorCode::NumericalBreakdown, "SuiteSparseQR failed (status " + std::to_string(cc.get()->status) + ")");
  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(static_cast<double*>(X->x), n);
  rank = cc.get()->SPQR_istat[4];
  cholmod_l_free_dense(&X, cc.get());
  return x;
}

Eigen::VectorXd solve_dense(const LinearSystem& s, const SolveOptions& opt, long& rank) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(to_dense(s));
  if (opt.rank_tol > 0.0) cod.setThreshold(opt.rank_tol);
  rank = cod.rank();
  return cod.solve(s.rhs);
}

Eigen::VectorXd solve_spqr(const LinearSystem& s, const SolveOptions& opt, long& rank) {
  std::vector<long> ptr(s.row_ptr.begin(), s.row_ptr.end());
  std::vector<long> idx(s.col_idx.begin(), s.col_idx.end());
  return spqr_solve(s.rows, s.cols, ptr.data(), idx.data(), s.values.data(), s.rhs.data(), opt.rank_tol, rank);
}

// Output of the first stage for one column group: the triangular factor of
// all rows living inside the group.
struct GroupFactor {
  Eigen::MatrixXd R;  // k x width, upper trapezoidal
  Eigen::VectorXd c;  // k
};

GroupFactor reduce_group(const LinearSystem& s, const std::vector<long>& rows, long begin, long width,
                         double damping) {
  GroupFactor g;
  const long w1 = width + 1;
  const long chunk = std::max<long>(2 * w1, 2048);
  Eigen::MatrixXd R(0, w1);  // running triangular factor of [A_g | b_g]
  if (damping > 0.0) {
    R = Eigen::MatrixXd::Zero(width, w1);
    R.leftCols(width).diagonal().setConstant(damping);
  }
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const long n = std::min<long>(chunk, static_cast<long>(rows.size() - start));
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(R.rows() + n, w1);
    S.topRows(R.rows()) = R;
    for (long k = 0; k < n; ++k) {
      const long r = rows[start + k];
      for (int e = s.row_ptr[r]; e < s.row_ptr[r + 1]; ++e) S(R.rows() + k, s.col_idx[e] - begin) = s.values[e];
      S(R.rows() + k, width) = s.rhs[r];
    }
    Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(S);
    const long k = std::min<long>(S.rows(), w1);
    R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  }
  const long k = std::min<long>(R.rows(), width);
  g.R = R.topLeftCorner(k, width);
  g.c = R.col(width).head(k);
  return g;
}

// Rank-revealing solve of a small dense problem; basic solution.
Eigen::VectorXd pivoted_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const SolveOptions& opt,
                              long& rank) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> cp(A);
  if (opt.rank_tol > 0.0) cp.setThreshold(opt.rank_tol);
  rank = cp.rank();
  return cp.solve(b);
}

// Second stage for nonsingular (damped) group factors. With y_g = R_g x_g and
// B = C R^-1 the problem is min |y - c|^2 + |B y - d|^2, solved through a QR
// factorization of B^T whose size is set by the number of coupling rows.
Eigen::VectorXd eliminate_coupling(const LinearSystem& s, const std::vector<GroupFactor>& f,
                                   const std::vector<long>& coupling) {
  const long N = s.cols, mc = static_cast<long>(coupling.size());
  const long G = static_cast<long>(f.size());
  Eigen::MatrixXd Bt = Eigen::MatrixXd::Zero(N, mc);
  Eigen::VectorXd r(mc), c(N);
  for (long k = 0; k < mc; ++k) {
    const long row = coupling[k];
    for (int e = s.row_ptr[row]; e < s.row_ptr[row + 1]; ++e) Bt(s.col_idx[e], k) = s.values[e];
    r[k] = s.rhs[row];
  }
  for (long g = 0; g < G; ++g) {
    const long o = s.groups[g], w = f[g].R.cols();
    f[g].R.transpose().triangularView<Eigen::Lower>().solveInPlace(Bt.middleRows(o, w));
    c.segment(o, w) = f[g].c;
  }
  r.noalias() -= Bt.transpose() * c;

  Eigen::VectorXd z(N);
  if (mc <= N) {
    // z lies in the range of B^T = Q_b R_b: z = Q_b u.
    Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(Bt);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2 * mc, mc);
    K.topRows(mc) = qr.matrixQR().topRows(mc).triangularView<Eigen::Upper>().transpose();
    K.bottomRows(mc).diagonal().setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * mc);
    rhs.head(mc) = r;
    z.setZero();
    z.head(mc) = K.householderQr().solve(rhs);
    z.applyOnTheLeft(qr.householderQ());
  } else {
    Eigen::MatrixXd K(mc + N, N);
    K.topRows(mc) = Bt.transpose();
    K.bottomRows(N).setIdentity();
    Bt.resize(0, 0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mc + N);
    rhs.head(mc) = r;
    Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(K);
    z = qr.solve(rhs);
  }

  Eigen::VectorXd x(N);
  for (long g = 0; g < G; ++g) {
    const long o = s.groups[g], w = f[g].R.cols();
    x.segment(o, w) = f[g].R.triangularView<Eigen::Upper>().solve(c.segment(o, w) + z.segment(o, w));
  }
  return x;
}

Eigen::VectorXd solve_block(const LinearSystem& s, const SolveOptions& opt, long& rank) {
  const long G = static_cast<long>(s.groups.size()) - 1;
  if (G < 1 || s.groups.back() != s.cols) throw Error(ErrorCode::InvalidArgument, "column groups do not cover the matrix");
  // Rows inside one group vs rows coupling groups.
  std::vector<std::vector<long>> local(G);
  std::vector<long> coupling;
  for (long r = 0; r < s.rows; ++r) {
    if (s.row_ptr[r] == s.row_ptr[r + 1]) continue;
    const long first = s.col_idx[s.row_ptr[r]], last = s.col_idx[s.row_ptr[r + 1] - 1];
    const long g = std::upper_bound(s.groups.begin(), s.groups.end(), first) - s.groups.begin() - 1;
    if (last < s.groups[g + 1])
      local[g].push_back(r);
    else
      coupling.push_back(r);
  }

  double rel = opt.damping;
  if (rel < 0.0)
    rel = s.rows < s.cols || (!coupling.empty() && s.cols > opt.dense_stage_cols) ? SolveOptions::auto_damping : 0.0;
  double damping = 0.0;
  if (rel > 0.0) {
    double mx = 0.0;
    for (double v : s.values) mx = std::max(mx, std::abs(v));
    damping = rel * mx;
  }
  std::vector<GroupFactor> f(G);
  long m2 = static_cast<long>(coupling.size());
  for (long g = 0; g < G; ++g) {
    f[g] = reduce_group(s, local[g], s.groups[g], s.groups[g + 1] - s.groups[g], damping);
    m2 += f[g].R.rows();
    local[g].clear();
    local[g].shrink_to_fit();
  }
  spdlog::debug("block solver: {} groups, {} reduced rows, {} coupling rows", G, m2, coupling.size());

  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.cols);
  if (coupling.empty()) {
    rank = 0;
    for (long g = 0; g < G; ++g) {
      if (f[g].R.rows() == 0) continue;
      long r = 0;
      x.segment(s.groups[g], f[g].R.cols()) = pivoted_solve(f[g].R, f[g].c, opt, r);
      rank += r;
    }
    return x;
  }

  if (s.cols <= opt.dense_stage_cols) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m2, s.cols);
    Eigen::VectorXd b(m2);
    long o = 0;
    for (long g = 0; g < G; ++g) {
      S.block(o, s.groups[g], f[g].R.rows(), f[g].R.cols()) = f[g].R;
      b.segment(o, f[g].R.rows()) = f[g].c;
      o += f[g].R.rows();
      f[g] = {};
    }
    for (long r : coupling) {
      for (int e = s.row_ptr[r]; e < s.row_ptr[r + 1]; ++e) S(o, s.col_idx[e]) = s.values[e];
      b[o++] = s.rhs[r];
    }
    if (m2 <= s.cols) return pivoted_solve(S, b, opt, rank);
    // Unpivoted blocked QR first; the damped factor has full column rank,
    // otherwise a rank-revealing QR of the square factor follows.
    Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(S);
    b.applyOnTheLeft(qr.householderQ().transpose());
    if (damping > 0.0) {
      rank = s.cols;
      return qr.matrixQR().topRows(s.cols).triangularView<Eigen::Upper>().solve(b.head(s.cols));
    }
    const Eigen::MatrixXd R2 = qr.matrixQR().topRows(s.cols).triangularView<Eigen::Upper>();
    return pivoted_solve(R2, b.head(s.cols), opt, rank);
  }

  if (damping > 0.0) {
    rank = s.cols;
    return eliminate_coupling(s, f, coupling);
  }

  Csr A;
  A.cols = s.cols;
  for (long g = 0; g < G; ++g) {
    const long o = s.groups[g];
    for (long i = 0; i < f[g].R.rows(); ++i) {
      for (long j = i; j < f[g].R.cols(); ++j)
        if (f[g].R(i, j) != 0.0) {
          A.idx.push_back(o + j);
          A.val.push_back(f[g].R(i, j));
        }
      A.end_row(f[g].c[i]);
    }
    f[g] = {};
  }
  for (long r : coupling) {
    for (int k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) {
      A.idx.push_back(s.col_idx[k]);
      A.val.push_back(s.values[k]);
    }
    A.end_row(s.rhs[r]);
  }
  return spqr_solve(A.rows(), s.cols, A.ptr.data(), A.idx.data(), A.val.data(), A.rhs.data(), opt.rank_tol, rank);
}

Eigen::VectorXd solve_lscg(const LinearSystem& s, const SolveOptions& opt) {
  // Ridge-regularized normal equations through CG on [A; sqrt(ridge) I].
  using SpMat = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(s.values.size() + s.cols);
  for (long r = 0; r < s.rows; ++r)
    for (int k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) t.emplace_back(r, s.col_idx[k], s.values[k]);
  const double d = std::sqrt(opt.ridge);
  for (long c = 0; c < s.cols; ++c) t.emplace_back(s.rows + c, c, d);
  SpMat A(s.rows + s.cols, s.cols);
  A.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.rows + s.cols);
  b.head(s.rows) = s.rhs;
  Eigen::LeastSquaresConjugateGradient<SpMat> cg;
  cg.setMaxIterations(opt.max_iterations);
  cg.setTolerance(1e-14);
  cg.compute(A);
  return cg.solve(b);
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

SolveReport least_squares(const LinearSystem& s, const SolveOptions& opt) {
  const auto t0 = Clock::now();
  if (s.rows < 1 || s.cols < 1) throw Error(ErrorCode::InvalidArgument, "empty system");
  if (!std::all_of(s.values.begin(), s.values.end(), [](double v) { return std::isfinite(v); }) ||
      !finite(s.rhs))
    throw Error(ErrorCode::NumericalBreakdown, "non-finite entries in the system");

  SolverKind kind = opt.kind;
  if (kind == SolverKind::Auto)
    kind = s.rows * s.cols <= opt.dense_limit ? SolverKind::DenseCOD : SolverKind::BlockSparse;

  SolveReport rep;
  long rank = 0;
  try {
    switch (kind) {
      case SolverKind::DenseCOD: rep.coefficients = solve_dense(s, opt, rank); break;
      case SolverKind::SparseQR: rep.coefficients = solve_spqr(s, opt, rank); break;
      default: rep.coefficients = solve_block(s, opt, rank); break;
    }
    rep.path = to_string(kind);
    if (!finite(rep.coefficients)) throw Error(ErrorCode::NumericalBreakdown, "non-finite solution");
  } catch (const Error& e) {
    if (!opt.fallback || e.code() != ErrorCode::NumericalBreakdown) throw;
    spdlog::warn("{} backend failed ({}); retrying with regularized CG", to_string(kind), e.what());
    rep.coefficients = solve_lscg(s, opt);
    rep.path = "lscg-fallback";
    rank = s.cols;
    if (!finite(rep.coefficients)) throw Error(ErrorCode::NumericalBreakdown, "fallback produced non-finite values");
  }
  rep.rank_estimate = rank;
  rep.residual_norm = (s.matrix() * rep.coefficients - s.rhs).norm();
  rep.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return rep;
}

void select_blas_kernel(char** argv) {
  if (std::getenv("OPENBLAS_CORETYPE")) return;
  using Corename = char* (*)();
  const auto corename = reinterpret_cast<Corename>(dlsym(RTLD_DEFAULT, "openblas_get_corename"));
  if (!corename || std::string(corename()) != "Cooperlake") return;
  setenv("OPENBLAS_CORETYPE", "SkylakeX", 1);
  execv("/proc/self/exe", argv);
  spdlog::warn("could not re-execute with OPENBLAS_CORETYPE=SkylakeX; sparse QR results may be wrong");
}

EvalGrid evaluation_grid(const Problem& p, long Q, int refinement) {
  if (refinement < 1) throw Error(ErrorCode::Config, "refinement must be positive");
  const int n = grid_side(Q, p.model_dim()) * refinement;
  EvalGrid g;
  g.t = p.time_dependent ? p.T : 0.0;
  for (const Vec& x : cell_grid(p.domain->lower, p.domain->upper, std::vector<int>(p.spatial_dim, n))) {
    const Subdomain s = classify(*p.domain, *p.interface, x, g.t);
    if (s == Subdomain::Outside) continue;
    g.x.push_back(x);
    g.side.push_back(s == Subdomain::One ? Side::One : Side::Two);
  }
  return g;
}

namespace {

double grid_error(const PiecewiseRfmModel& m, const Problem& p, int field, const MultiIndex& d,
                  const EvalGrid& grid) {
  if (!p.has_exact()) throw Error(ErrorCode::NoExactSolution, p.name + " has no exact solution");
  std::vector<double> num, ex;
  for (std::size_t i = 0; i < grid.x.size(); ++i) {
    if (!p.layout.supports(field, grid.side[i])) continue;
    num.push_back(m.eval(field, grid.side[i], model_coords(grid.x[i], grid.t, p.time_dependent), d));
    ex.push_back(p.exact_value(field, grid.side[i], grid.x[i], grid.t, d));
  }
  double shift = 0.0;
  const bool gauge = d.order() == 0 &&
                     std::find(p.gauge_fields.begin(), p.gauge_fields.end(), field) != p.gauge_fields.end();
  if (gauge && !num.empty()) {
    for (std::size_t i = 0; i < num.size(); ++i) shift += num[i] - ex[i];
    shift /= static_cast<double>(num.size());
  }
  double e2 = 0.0, x2 = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    const double e = num[i] - shift - ex[i];
    e2 += e * e;
    x2 += ex[i] * ex[i];
  }
  if (x2 == 0.0) throw Error(ErrorCode::ZeroDenominator, "exact field vanishes on the evaluation grid");
  return std::sqrt(e2 / x2);
}

}  // namespace

double relative_l2_error(const PiecewiseRfmModel& m, const Problem& p, int field, const EvalGrid& grid) {
  return grid_error(m, p, field, MultiIndex::value(), grid);
}

double derivative_error(const PiecewiseRfmModel& m, const Problem& p, int field, int axis,
                        const EvalGrid& grid) {
  if (axis < 0 || axis >= p.spatial_dim) throw Error(ErrorCode::InvalidArgument, "derivative axis");
  return grid_error(m, p, field, MultiIndex::d(axis), grid);
}

}  // namespace rfm
