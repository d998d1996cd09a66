#include "doctest.h"

#include "rfm/errors.hpp"
#include "rfm/solve.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

using namespace rfm;

namespace {

Eigen::MatrixXd random_matrix(long m, long n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd A(m, n);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) A(i, j) = N(rng);
  return A;
}

Eigen::VectorXd random_vector(long m, std::uint64_t seed) { return random_matrix(m, 1, seed).col(0); }

double optimal_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  SolveOptions o;
  o.kind = SolverKind::DenseCOD;
  return least_squares(dense_system(A, b), o).residual_norm;
}

// Exact solution taken from a reference model, so a model with the same
// coefficients reproduces it exactly.
class ReplayProblem : public Problem {
 public:
  explicit ReplayProblem(const PiecewiseRfmModel& ref) : ref_(ref) {
    name = "replay";
    Vec lo(2), hi(2), c(2);
    lo << -2, -2;
    hi << 2, 2;
    c << 0, 0;
    domain = DomainBox(lo, hi);
    interface = LevelSet::circle(c, 1.1);
    layout = ref.layout();
    gauge_fields = {};
  }
  std::vector<Condition> interior(const Vec&, double, Side) const override { return {}; }
  bool has_exact() const override { return true; }
  void exact_jets(Side s, const Vec& x, std::vector<Jet>& out) const override {
    out.assign(layout.num_fields(), Jet());
    for (int f = 0; f < layout.num_fields(); ++f) {
      out[f].v = ref_.eval(f, s, x, MultiIndex::value());
      for (int a = 0; a < 2; ++a) out[f].g[a] = ref_.eval(f, s, x, MultiIndex::d(a));
    }
  }
  std::vector<int>& gauges() { return gauge_fields; }

 private:
  const PiecewiseRfmModel& ref_;
};

}  // namespace

TEST_CASE("identity system") {
  const Eigen::VectorXd b = random_vector(7, 1);
  for (auto k : {SolverKind::DenseCOD, SolverKind::SparseQR, SolverKind::BlockSparse}) {
    SolveOptions o;
    o.kind = k;
    const auto rep = least_squares(dense_system(Eigen::MatrixXd::Identity(7, 7), b), o);
    CHECK((rep.coefficients - b).norm() <= 1e-14);
    CHECK(rep.residual_norm <= 1e-14);
    CHECK(rep.rank_estimate == 7);
    CHECK(rep.path == to_string(k));
  }
}

TEST_CASE("full-rank system matches the normal equations") {
  const Eigen::MatrixXd A = random_matrix(50, 30, 2);
  const Eigen::VectorXd b = random_vector(50, 3);
  const Eigen::VectorXd ref = (A.transpose() * A).ldlt().solve(A.transpose() * b);
  for (auto k : {SolverKind::Auto, SolverKind::DenseCOD, SolverKind::SparseQR, SolverKind::BlockSparse}) {
    SolveOptions o;
    o.kind = k;
    const auto rep = least_squares(dense_system(A, b), o);
    CHECK((rep.coefficients - ref).norm() <= 1e-8 * ref.norm());
    CHECK(rep.residual_norm == doctest::Approx((A * ref - b).norm()).epsilon(1e-10));
  }
}

TEST_CASE("minimum-norm solutions") {
  Eigen::MatrixXd A(1, 2);
  A << 1, 1;
  Eigen::VectorXd b(1);
  b << 2;
  for (auto k : {SolverKind::Auto, SolverKind::SparseQR}) {
    SolveOptions o;
    o.kind = k;
    const auto rep = least_squares(dense_system(A, b), o);
    CHECK(rep.coefficients[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rep.coefficients[1] == doctest::Approx(1.0).epsilon(1e-14));
  }

  // A duplicated column keeps the fit and splits the coefficient.
  const Eigen::MatrixXd B = random_matrix(20, 5, 4);
  const Eigen::VectorXd y = random_vector(20, 5);
  Eigen::MatrixXd B2(20, 6);
  B2 << B, B.col(2);
  const auto r1 = least_squares(dense_system(B, y));
  const auto r2 = least_squares(dense_system(B2, y));
  CHECK((B * r1.coefficients - B2 * r2.coefficients).norm() <= 1e-12 * y.norm());
  CHECK(r2.coefficients[2] == doctest::Approx(r2.coefficients[5]).epsilon(1e-10));
  CHECK(r2.coefficients[2] == doctest::Approx(r1.coefficients[2] / 2).epsilon(1e-10));
  CHECK(r2.rank_estimate == 5);
}

TEST_CASE("residual monotonicity") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const Eigen::MatrixXd A = random_matrix(30, 12, seed);
    const Eigen::VectorXd b = random_vector(30, seed + 100);
    const double base = optimal_residual(A, b);
    CHECK(optimal_residual(A.topRows(25), b.head(25)) <= base + 1e-12);
    Eigen::MatrixXd wider(30, 13);
    wider << A, random_vector(30, seed + 200);
    CHECK(optimal_residual(wider, b) <= base + 1e-12);
  }
}

TEST_CASE("backends agree on assembled systems") {
  for (const std::string name : {"elliptic_circle", "stokes2d_case1"}) {
    const auto p = make_problem(name);
    const PiecewiseRfmModel m(p->layout, p->default_patches(3), {});
    CollocationOptions co;
    co.Q = 100;
    co.n_interface = 20;
    co.n_boundary = 5;
    co.continuity_per_face = 2;
    const auto sys = assemble(*p, m, generate_collocation(*p, m, co));
    REQUIRE(sys.rows * sys.cols <= 300000);
    SolveOptions d;
    d.kind = SolverKind::DenseCOD;
    const Eigen::VectorXd ref = sys.matrix() * least_squares(sys, d).coefficients;
    for (auto k : {SolverKind::BlockSparse, SolverKind::SparseQR}) {
      SolveOptions o;
      o.kind = k;
      o.dense_stage_cols = k == SolverKind::BlockSparse ? 0 : 4000;  // exercise the sparse second stage
      const auto rep = least_squares(sys, o);
      INFO(name << " " << rep.path);
      CHECK((sys.matrix() * rep.coefficients - ref).norm() <= 1e-8 * ref.norm());
    }
    SolveOptions dense2;
    dense2.kind = SolverKind::BlockSparse;
    const auto rep = least_squares(sys, dense2);
    CHECK((sys.matrix() * rep.coefficients - ref).norm() <= 1e-8 * ref.norm());
  }
}

TEST_CASE("sparse QR agrees with dense QR on larger systems") {
  // Large enough for multifrontal BLAS kernels to be used.
  const Eigen::MatrixXd A = random_matrix(600, 180, 11);
  const Eigen::VectorXd b = random_vector(600, 12);
  const double ref = (A * A.colPivHouseholderQr().solve(b) - b).norm();
  SolveOptions o;
  o.kind = SolverKind::SparseQR;
  CHECK(least_squares(dense_system(A, b), o).residual_norm == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("block backend handles coupling rows") {
  // Two groups, one coupling row forcing x1 = x2 across groups.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(5, 4);
  A << 1, 0, 0, 0,  //
      0, 1, 0, 0,   //
      0, 0, 1, 0,   //
      0, 0, 0, 1,   //
      0, 1, -1, 0;
  Eigen::VectorXd b(5);
  b << 1, 2, 3, 4, 0;
  auto sys = dense_system(A, b);
  sys.groups = {0, 2, 4};
  SolveOptions o;
  o.kind = SolverKind::BlockSparse;
  const auto rep = least_squares(sys, o);
  const Eigen::VectorXd ref = A.colPivHouseholderQr().solve(b);
  CHECK((rep.coefficients - ref).norm() <= 1e-13);
  o.dense_stage_cols = 0;
  CHECK((least_squares(sys, o).coefficients - ref).norm() <= 1e-13);
}

TEST_CASE("damped block solves the augmented problem") {
  for (const std::string name : {"elliptic_circle", "stokes2d_case1"}) {
    const auto p = make_problem(name);
    const PiecewiseRfmModel m(p->layout, p->default_patches(3), {});
    CollocationOptions co;
    co.Q = 100;
    co.n_interface = 20;
    co.n_boundary = 5;
    co.continuity_per_face = 2;
    const auto sys = assemble(*p, m, generate_collocation(*p, m, co));
    const double delta = 1e-3 * 100.0;  // rows are scaled to a largest entry of 100
    Eigen::MatrixXd Aug(sys.rows + sys.cols, sys.cols);
    Aug << Eigen::MatrixXd(sys.matrix()), delta * Eigen::MatrixXd::Identity(sys.cols, sys.cols);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.rows + sys.cols);
    rhs.head(sys.rows) = sys.rhs;
    const Eigen::VectorXd ref = Aug.colPivHouseholderQr().solve(rhs);
    for (long stage_cols : {4000L, 0L}) {
      SolveOptions o;
      o.kind = SolverKind::BlockSparse;
      o.damping = 1e-3;
      o.dense_stage_cols = stage_cols;
      const auto rep = least_squares(sys, o);
      INFO(name << " " << stage_cols);
      CHECK((rep.coefficients - ref).norm() <= 1e-9 * ref.norm());
      CHECK(rep.rank_estimate == sys.cols);
    }
  }
  // More coupling rows than columns.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(9, 4);
  A.topRows(4).setIdentity();
  A.bottomRows(5) = random_matrix(5, 4, 21);
  const Eigen::VectorXd b = random_vector(9, 22);
  auto sys = dense_system(A, b);
  sys.groups = {0, 2, 4};
  SolveOptions o;
  o.kind = SolverKind::BlockSparse;
  o.damping = 1e-2;
  o.dense_stage_cols = 0;
  Eigen::MatrixXd Aug(13, 4);
  const double delta = 1e-2 * A.cwiseAbs().maxCoeff();
  Aug << A, delta * Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(13);
  rhs.head(9) = b;
  CHECK((least_squares(sys, o).coefficients - Aug.householderQr().solve(rhs)).norm() <= 1e-12);
}

TEST_CASE("non-finite input is a breakdown") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
  A(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(least_squares(dense_system(A, Eigen::VectorXd::Ones(3))), Error);
  try {
    least_squares(dense_system(A, Eigen::VectorXd::Ones(3)));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericalBreakdown);
  }
  CHECK_THROWS_AS(least_squares(LinearSystem{}), Error);
}

TEST_CASE("fallback path is reported") {
  SolveOptions o;
  o.kind = SolverKind::DenseCOD;
  const Eigen::MatrixXd A = random_matrix(10, 4, 7);
  const Eigen::VectorXd b = random_vector(10, 8);
  auto rep = least_squares(dense_system(A, b), o);
  CHECK(rep.path == "dense");
  CHECK(parse_solver("block") == SolverKind::BlockSparse);
  CHECK_THROWS_AS(parse_solver("lu"), Error);
}

TEST_CASE("error metrics") {
  const auto ell = make_problem("elliptic_circle");
  PiecewiseRfmModel ref(ell->layout, ell->default_patches(5), {});
  Eigen::VectorXd coeffs = random_vector(ref.num_columns(), 9);
  ref.set_coefficients(coeffs);
  ReplayProblem p(ref);
  PiecewiseRfmModel m = ref;
  const EvalGrid g = evaluation_grid(p, 400, 2);
  CHECK(g.x.size() == 1600);

  CHECK(relative_l2_error(m, p, 0, g) == 0.0);
  CHECK(derivative_error(m, p, 0, 0, g) == 0.0);
  m.set_coefficients(1.1 * coeffs);
  CHECK(relative_l2_error(m, p, 0, g) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(derivative_error(m, p, 0, 1, g) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(derivative_error(m, p, 0, 2, g), Error);

  // A constant offset disappears for gauge fields.
  p.gauges() = {0};
  CHECK(relative_l2_error(ref, p, 0, g) == 0.0);

  m.set_coefficients(Eigen::VectorXd::Zero(ref.num_columns()));
  ReplayProblem zero(m);
  CHECK_THROWS_AS(relative_l2_error(m, zero, 0, g), Error);

  const auto complex = make_problem("elliptic_complex");
  const PiecewiseRfmModel cm(complex->layout, complex->default_patches(2), {});
  CHECK_THROWS_AS(relative_l2_error(cm, *complex, 0, evaluation_grid(*complex, 100, 1)), Error);

  const auto par = make_problem("parabolic_circle");
  const EvalGrid pg = evaluation_grid(*par, 1000, 2);
  CHECK(pg.t == 1.0);
  CHECK(pg.x.size() == 400);
}
