#include "doctest.h"
#include "rfm/errors.hpp"
#include "rfm/tracking.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace rfm;

namespace {

const double kPi = std::numbers::pi;

Point2 rotation(const Point2& x, double) { return Point2(-x.y(), x.x()); }

double max_shift(const MarkerCurve& a, const MarkerCurve& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.markers.size(); ++i) m = std::max(m, (a.markers[i] - b.markers[i]).norm());
  return m;
}

// Even-odd ray casting along +x.
bool ray_inside(const std::vector<Point2>& poly, const Point2& p) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double xc = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < xc) in = !in;
    }
  }
  return in;
}

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

}  // namespace

TEST_CASE("spline interpolates markers") {
  MarkerCurve c = MarkerCurve::circle(Point2(0.5, 0.75), 0.15, 32);
  const auto& kn = c.spline.knots();
  for (int i = 0; i < 32; ++i) CHECK((c.spline.eval(kn[i]) - c.markers[i]).norm() <= 1e-15);
}

TEST_CASE("advection") {
  MarkerCurve c = MarkerCurve::circle(Point2(0.3, 0.1), 0.4, 16);
  auto still = advect(c, [](const Point2&, double) { return Point2(0, 0); }, 0, 1, 5);
  CHECK(max_shift(c, still) == 0.0);

  auto orbit = advect(c, rotation, 0, 2 * kPi, 400);
  CHECK(max_shift(c, orbit) <= 1e-8);

  // Observed order on a quarter turn.
  auto ref = advect(c, rotation, 0, 1.0, 2000);
  auto coarse = advect(c, rotation, 0, 1.0, 10);
  auto fine = advect(c, rotation, 0, 1.0, 20);
  const double order = std::log2(max_shift(coarse, ref) / max_shift(fine, ref));
  CHECK(order >= 4.5);
  CHECK_THROWS_AS(advect(c, rotation, 1, 0, 5), Error);
}

TEST_CASE("area conservation under the divergence-free field") {
  MarkerCurve c = MarkerCurve::circle(Point2(0.5, 0.75), 0.15, 512);
  auto end = advect(c, oseen_velocity, 0, 1.5, 150);
  const double exact = kPi * 0.15 * 0.15;
  CHECK(std::abs(polygon_area(end.markers) - exact) / exact <= 0.01);
}

TEST_CASE("redistribution") {
  MarkerCurve c = MarkerCurve::circle(Point2(0, 0), 0.15, 64);
  const double L = c.spline.length();
  CHECK(std::abs(L - 2 * kPi * 0.15) <= 1e-6);
  const double target = L / 64;
  auto r = redistribute(c, target, 0.5 * target, 2 * target);
  REQUIRE(r.markers.size() == 64);
  for (int i = 0; i < 64; ++i) CHECK((r.markers[i] - c.markers[i]).norm() <= 1e-10);

  // Cluster half the markers on a short arc.
  std::vector<Point2> pts;
  for (int k = 0; k < 40; ++k) {
    const double th = 0.5 * k / 40.0;
    pts.emplace_back(std::cos(th), std::sin(th));
  }
  for (int k = 0; k < 10; ++k) {
    const double th = 0.5 + (2 * kPi - 0.5) * k / 10.0;
    pts.emplace_back(std::cos(th), std::sin(th));
  }
  MarkerCurve clustered(pts, 0);
  const double t2 = clustered.spline.length() / 50;
  auto out = redistribute(clustered, t2, 0.5 * t2, 2 * t2);
  for (std::size_t i = 0; i < out.markers.size(); ++i) {
    const double d = (out.markers[(i + 1) % out.markers.size()] - out.markers[i]).norm();
    CHECK(d >= 0.5 * t2);
    CHECK(d <= 2 * t2);
  }
  CHECK(std::abs(out.spline.length() - clustered.spline.length()) <= 1e-3 * clustered.spline.length());
  CHECK_THROWS_AS(redistribute(c, 1.0, 0.5, 2.0), Error);
}

TEST_CASE("curve level set") {
  MarkerCurve c = MarkerCurve::circle(Point2(0.5, 0.75), 0.15, 128);
  CurveShape shape(c);
  Vec ctr(2);
  ctr << 0.5, 0.75;
  CHECK(std::abs(shape.value(ctr, 0) + 0.15) <= 1e-6);
  for (int i = 0; i < 128; i += 9) {
    Vec m(2);
    m << c.markers[i].x(), c.markers[i].y();
    CHECK(std::abs(shape.value(m, 0)) <= 1e-10);
  }

  // Brute force against a dense polyline of the spline.
  std::vector<Point2> poly;
  const int dense = 20000;
  for (int k = 0; k < dense; ++k) poly.push_back(c.spline.eval(c.spline.period() * k / dense));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.2, 0.8), v(0.45, 1.0);
  for (int q = 0; q < 200; ++q) {
    Point2 p(u(rng), v(rng));
    double d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < dense; ++k) d = std::min(d, segment_distance(p, poly[k], poly[(k + 1) % dense]));
    Vec x(2);
    x << p.x(), p.y();
    CHECK(std::abs(std::abs(shape.value(x, 0)) - d) <= 1e-6);
  }

  // Winding number agrees with ray casting on a deformed curve.
  auto snake = advect(MarkerCurve::circle(Point2(0.5, 0.75), 0.15, 256), oseen_velocity, 0, 1.5, 150);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int q = 0; q < 1000; ++q) {
    Point2 p(w(rng), w(rng));
    CHECK((winding_number(snake.markers, p) != 0) == ray_inside(snake.markers, p));
  }

  auto ls = curve_levelset(c);
  auto pts = sample_interface(ls, 50, 0);
  CHECK(pts.size() == 50);
  for (const auto& p : pts) CHECK(std::abs(ls.value(p, 0)) <= 1e-10);
  Vec on(2);
  on << 0.65, 0.75;
  Vec n = unit_normal(ls, on, 0);
  CHECK(n[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("tracked interface snapshots") {
  MarkerCurve c = MarkerCurve::circle(Point2(0.5, 0.75), 0.15, 512);
  TrackingOptions opt;
  opt.markers = 256;
  TrackedInterface tr(c, oseen_velocity, {0.375, 0.75, 1.125, 1.5}, opt);
  CHECK(tr.snapshots().size() == 5);
  Vec ctr(2);
  ctr << 0.5, 0.75;
  CHECK(tr.value(ctr, 0.0) < 0);
  const double a = polygon_area(tr.at(1.5).curve().markers);
  CHECK(std::abs(a - kPi * 0.0225) / (kPi * 0.0225) <= 0.01);
  // Off-grid times advect from the previous snapshot deterministically.
  CHECK(tr.value(ctr, 0.5) == tr.value(ctr, 0.5));
}
