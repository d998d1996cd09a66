#include "doctest.h"

#include "rfm/assembly.hpp"
#include "rfm/errors.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace rfm;

namespace {

struct EllipticConfig {
  long Q;
  int n_interface, n_boundary, per_face;
};

// Interface points: floor(4 pi n); boundary: n per face; continuity: n / 2 per face.
EllipticConfig elliptic_config(int n) {
  return {static_cast<long>(n) * n, static_cast<int>(std::floor(4.0 * M_PI * n)), n, n / 2};
}

CollocationOptions options_for(const EllipticConfig& e) {
  CollocationOptions o;
  o.Q = e.Q;
  o.n_interface = e.n_interface;
  o.n_boundary = e.n_boundary;
  o.continuity_per_face = e.per_face;
  return o;
}

double row_inf_norm(const LinearSystem& s, long r) {
  double m = 0.0;
  for (int k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) m = std::max(m, std::abs(s.values[k]));
  return m;
}

}  // namespace

TEST_CASE("grid helpers") {
  CHECK(grid_side(1600, 2) == 40);
  CHECK(grid_side(64000, 3) == 40);
  CHECK(grid_side(216000, 3) == 60);
  CHECK(grid_side(1, 3) == 1);
  CHECK_THROWS_AS(grid_side(1601, 2), Error);
  CHECK_THROWS_AS(grid_side(0, 2), Error);
  Vec lo(2), hi(2);
  lo << 0, 0;
  hi << 1, 2;
  const auto g = cell_grid(lo, hi, {2, 4});
  REQUIRE(g.size() == 8);
  CHECK(g[0][0] == 0.25);
  CHECK(g[0][1] == 0.25);
  CHECK(g[1][1] == 0.75);
  CHECK(g[7][0] == 0.75);
  CHECK(g[7][1] == 1.75);
}

TEST_CASE("row rescale") {
  ConditionRow r;
  r.coeffs = {{0, 1.0}, {3, -4.0}, {7, 2.0}};
  r.rhs = 2.0;
  CHECK(row_rescale(r, 100.0) == 25.0);
  CHECK(r.coeffs[1].second == -100.0);
  CHECK(r.rhs == 50.0);
  ConditionRow z;
  z.coeffs = {{1, 0.0}};
  CHECK_THROWS_AS(row_rescale(z, 100.0), Error);
  CHECK_THROWS_AS(row_rescale(r, 0.0), Error);
}

TEST_CASE("elliptic circle system sizes") {
  const auto p = make_problem("elliptic_circle");
  const PiecewiseRfmModel m(p->layout, p->default_patches(400), {});
  REQUIRE(m.num_columns() == 3200);
  const long expected[3] = {3084, 9370, 18854};
  const int ns[3] = {40, 80, 120};
  for (int k = 0; k < 3; ++k) {
    const auto cfg = elliptic_config(ns[k]);
    const auto cs = generate_collocation(*p, m, options_for(cfg));
    CHECK(static_cast<long>(cs.interior_count()) == cfg.Q);
    for (const auto& q : cs.interior1) CHECK(p->interface->value(q.x, 0.0) <= 0.0);
    if (k == 0) {
      const auto sys = assemble(*p, m, cs);
      CHECK(sys.rows == expected[k]);
      CHECK(sys.cols == 3200);
      CHECK(sys.count(RowTag::JumpValue) == cfg.n_interface);
      CHECK(sys.count(RowTag::Continuity) == 4 * 4 * cfg.per_face);
      CHECK(sys.dropped_rows == 0);
      for (long r = 0; r < sys.rows; ++r) CHECK(row_inf_norm(sys, r) == doctest::Approx(100.0).epsilon(1e-14));
    } else {
      const long n = static_cast<long>(cs.interior_count() + 2 * cs.interface.size() + cs.boundary.size() +
                                       4 * cs.continuity.size());
      CHECK(n == expected[k]);
    }
  }
}

TEST_CASE("rows touch only patches containing the point") {
  const auto p = make_problem("stokes2d_case1");
  const PiecewiseRfmModel m(p->layout, p->default_patches(5), {});
  CollocationOptions o;
  o.Q = 400;
  o.n_interface = 40;
  o.n_boundary = 10;
  o.continuity_per_face = 2;
  const auto cs = generate_collocation(*p, m, o);
  const auto sys = assemble(*p, m, cs);
  for (long r = 0; r < sys.rows; ++r) {
    if (sys.meta[r].tag == RowTag::Continuity) continue;
    const int first = sys.col_idx[sys.row_ptr[r]];
    const int last = sys.col_idx[sys.row_ptr[r + 1] - 1];
    const auto g = std::upper_bound(sys.groups.begin(), sys.groups.end(), first) - sys.groups.begin() - 1;
    CHECK(last < sys.groups[g + 1]);
  }
  CHECK(sys.count(RowTag::Anchor) == 1);
  // Continuity: 24 faces, 2 points each, 3 fields x 2 sides x (C0, C1).
  CHECK(sys.count(RowTag::Continuity) == 24 * 2 * 12);
}

TEST_CASE("assembly is deterministic") {
  const auto p = make_problem("parabolic_circle");
  const PiecewiseRfmModel m(p->layout, p->default_patches(6), {});
  CollocationOptions o;
  o.Q = 512;
  o.n_interface = 16;
  o.n_boundary = 6;
  o.n_time_slices = 4;
  o.continuity_per_face = 2;
  const auto cs = generate_collocation(*p, m, o);
  const auto a = assemble(*p, m, cs);
  AssemblyOptions threaded;
  threaded.threads = 3;
  const auto b = assemble(*p, m, cs, threaded);
  CHECK(a.rows == b.rows);
  CHECK(a.row_ptr == b.row_ptr);
  CHECK(a.col_idx == b.col_idx);
  CHECK(a.values == b.values);
  CHECK(a.rhs == b.rhs);
  CHECK(a.count(RowTag::Initial) == 64);
  CHECK(a.count(RowTag::JumpValue) == 4 * 16);

  std::ostringstream s1, s2;
  write_triplets(a, s1);
  write_triplets(b, s2);
  CHECK(s1.str() == s2.str());
  CHECK(s1.str().rfind("rfm-system " + std::to_string(a.rows) + " " + std::to_string(a.cols), 0) == 0);
}

TEST_CASE("zero coefficients: residual is the scaled rhs") {
  const auto p = make_problem("elliptic_circle");
  const PiecewiseRfmModel m(p->layout, p->default_patches(10), {});
  const auto cs = generate_collocation(*p, m, options_for(elliptic_config(10)));
  const auto sys = assemble(*p, m, cs);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(sys.cols);
  const Eigen::VectorXd r = sys.matrix() * u - sys.rhs;
  CHECK(r.squaredNorm() == doctest::Approx(sys.rhs.squaredNorm()).epsilon(1e-15));
}

TEST_CASE("loss equivalence on a tiny instance") {
  // One patch, four features per block, a 4 x 4 grid.
  const auto p = make_problem("elliptic_circle");
  Vec lo(2), hi(2);
  lo << -2, -2;
  hi << 2, 2;
  const PiecewiseRfmModel m(p->layout, PatchGrid::tensor(lo, hi, {1, 1}, 4), {});
  CollocationOptions o;
  o.Q = 16;
  o.n_interface = 4;
  o.n_boundary = 2;
  const auto cs = generate_collocation(*p, m, o);
  const auto sys = assemble(*p, m, cs);
  REQUIRE(sys.rows == 16 + 2 * 4 + 8);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd u(sys.cols);
  for (long j = 0; j < u.size(); ++j) u[j] = N(rng);

  // Direct summation: lambda^2 (sum coeff * D^d u_side - data)^2 per condition,
  // with lambda = c / max_j |raw coefficient of basis function j|.
  const double c = 100.0;
  auto term_row = [&](const LinearForm& form, const Vec& x) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(sys.cols);
    for (const auto& t : form) {
      const int b = m.layout().block(t.field, t.side);
      for (int j = 0; j < 4; ++j) row[m.column(b, 0, j)] += t.coeff * basis_eval(m.patch(b, 0), j, PoUKind::A, x, t.d);
    }
    return row;
  };
  auto penalised = [&](const LinearForm& form, double data, const Vec& x) {
    const Eigen::VectorXd row = term_row(form, x);
    double value = 0.0;
    for (const auto& t : form) value += t.coeff * m.eval(t.field, t.side, x, t.d, u);
    const double lambda = c / row.cwiseAbs().maxCoeff();
    return lambda * lambda * (value - data) * (value - data);
  };
  double loss = 0.0;
  auto u_exact = [&](Side s, const Vec& x) {
    const double q = x.squaredNorm();
    return s == Side::One ? std::exp(q - 1.21) + 11.1 : 10.0 * q;
  };
  for (const auto* set : {&cs.interior1, &cs.interior2}) {
    const Side s = set == &cs.interior1 ? Side::One : Side::Two;
    const double a = s == Side::One ? 10.0 : 1.0;
    for (const auto& q : *set) {
      LinearForm f{{0, s, MultiIndex::dd(0, 0), -a}, {0, s, MultiIndex::dd(1, 1), -a}};
      const double qq = q.x.squaredNorm();
      const double data = s == Side::One ? -a * std::exp(qq - 1.21) * (4.0 + 4.0 * qq) : -a * 40.0;
      loss += penalised(f, data, q.x);
    }
  }
  for (const auto& q : cs.interface) {
    loss += penalised({{0, Side::One, {}, 1.0}, {0, Side::Two, {}, -1.0}}, 0.0, q.x);
    LinearForm flux;
    for (int a = 0; a < 2; ++a) {
      flux.push_back({0, Side::One, MultiIndex::d(a), 10.0 * q.n[a]});
      flux.push_back({0, Side::Two, MultiIndex::d(a), -q.n[a]});
    }
    loss += penalised(flux, 0.0, q.x);
  }
  for (const auto& q : cs.boundary) loss += penalised({{0, Side::Two, {}, 1.0}}, u_exact(Side::Two, q.x), q.x);

  const double lsq = (sys.matrix() * u - sys.rhs).squaredNorm();
  CHECK(lsq == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("continuity rows") {
  const auto p = make_problem("elliptic_circle");
  Vec lo(2), hi(2);
  lo << -2, -2;
  hi << 2, 2;
  ModelOptions opt;
  SUBCASE("two patches, k face points") {
    const PiecewiseRfmModel m(p->layout, PatchGrid::tensor(lo, hi, {2, 1}, 3), opt);
    const auto pts = continuity_points(*p, m, 5);
    REQUIRE(pts.size() == 5);
    std::size_t rows = 0;
    for (const auto& cp : pts) {
      CHECK(cp.axis == 0);
      CHECK(cp.coords[0] == 0.0);
      rows += continuity_rows(m, cp, false).size();
    }
    CHECK(rows == 2 * 2 * 5);
  }
  SUBCASE("smooth PoU needs none") {
    opt.pou = PoUKind::B;
    const PiecewiseRfmModel m(p->layout, PatchGrid::tensor(lo, hi, {2, 2}, 3), opt);
    CHECK(continuity_points(*p, m, 5).empty());
  }
  SUBCASE("identical constant bases: zero residual") {
    opt.activation = Activation::Cos;
    opt.R = 1e-300;
    const PiecewiseRfmModel m(p->layout, PatchGrid::tensor(lo, hi, {2, 2}, 3), opt);
    const auto pts = continuity_points(*p, m, 3);
    CHECK(pts.size() == 4 * 3);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(m.num_columns(), 0.7);
    for (const auto& cp : pts)
      for (const auto& r : continuity_rows(m, cp, false)) {
        double pos = 0.0, neg = 0.0;
        for (const auto& [c, v] : r.coeffs) (v > 0 ? pos : neg) += v * u[c];
        CHECK(pos + neg == 0.0);
      }
  }
}

TEST_CASE("collocation edge cases") {
  const auto p = make_problem("elliptic_circle");
  const PiecewiseRfmModel m(p->layout, p->default_patches(3), {});
  CollocationOptions o;
  o.Q = 1;  // the single point sits at the center, inside the circle
  CHECK_THROWS_AS(generate_collocation(*p, m, o), Error);
  o.Q = 50;
  CHECK_THROWS_AS(generate_collocation(*p, m, o), Error);

  const auto torus = make_problem("stokes3d_torus");
  const PiecewiseRfmModel tm(torus->layout, torus->default_patches(2), {});
  CollocationOptions to;
  to.Q = 8000;
  to.n_boundary = 200;
  const auto cs = generate_collocation(*torus, tm, to);
  CHECK(cs.interior2.empty());
  CHECK(!cs.interior1.empty());
  const auto tls = LevelSet::torus(0.35, 0.7);
  for (const auto& q : cs.interior1) CHECK(tls.value(q.x, 0.0) < 0.0);
  for (const auto& q : cs.boundary) CHECK(std::abs(tls.value(q.x, 0.0)) < 1e-9);
  CHECK(cs.interface.empty());
}
