#include "rfm/tracking.hpp"

#include "rfm/errors.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rfm {
namespace {

// 5-point Gauss-Legendre on [0, 1].
constexpr std::array<double, 5> kGaussX = {0.04691007703066800, 0.23076534494715845, 0.5,
                                           0.76923465505284155, 0.95308992296933200};
constexpr std::array<double, 5> kGaussW = {0.11846344252809454, 0.23931433524968324,
                                           0.28444444444444444, 0.23931433524968324,
                                           0.11846344252809454};

double wrap(double s, double period) {
  double r = std::fmod(s, period);
  if (r < 0) r += period;
  return r;
}

}  // namespace

PeriodicSpline::PeriodicSpline(const std::vector<Point2>& points) : y_(points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw Error(ErrorCode::DegenerateCurve, "a closed curve needs at least 3 markers");
  knots_.assign(n + 1, 0.0);
  std::vector<double> h(n);
  for (int i = 0; i < n; ++i) {
    h[i] = (points[(i + 1) % n] - points[i]).norm();
    if (!(h[i] > 0)) throw Error(ErrorCode::DegenerateCurve, "repeated consecutive markers");
    knots_[i + 1] = knots_[i] + h[i];
  }
  Eigen::SparseMatrix<double> A(n, n);
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd rhs(n, 2);
  for (int i = 0; i < n; ++i) {
    const int im = (i + n - 1) % n, ip = (i + 1) % n;
    trip.emplace_back(i, i, 2.0 * (h[im] + h[i]));
    trip.emplace_back(i, ip, h[i]);
    trip.emplace_back(i, im, h[im]);
    const Point2 r = 6.0 * ((points[ip] - points[i]) / h[i] - (points[i] - points[im]) / h[im]);
    rhs.row(i) = r.transpose();
  }
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::DegenerateCurve, "spline system");
  const Eigen::MatrixXd M = ldlt.solve(rhs);
  m_.resize(n);
  for (int i = 0; i < n; ++i) m_[i] = M.row(i).transpose();
}

int PeriodicSpline::locate(double s, double& local) const {
  s = wrap(s, period());
  auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
  int i = static_cast<int>(it - knots_.begin()) - 1;
  i = std::clamp(i, 0, segments() - 1);
  local = s - knots_[i];
  return i;
}

Point2 PeriodicSpline::eval(double s) const {
  double u;
  const int i = locate(s, u);
  const int n = segments(), ip = (i + 1) % n;
  const double h = knots_[i + 1] - knots_[i], w = h - u;
  return m_[i] * (w * w * w / (6 * h)) + m_[ip] * (u * u * u / (6 * h)) +
         (y_[i] / h - m_[i] * (h / 6)) * w + (y_[ip] / h - m_[ip] * (h / 6)) * u;
}

Point2 PeriodicSpline::d1(double s) const {
  double u;
  const int i = locate(s, u);
  const int n = segments(), ip = (i + 1) % n;
  const double h = knots_[i + 1] - knots_[i], w = h - u;
  return -m_[i] * (w * w / (2 * h)) + m_[ip] * (u * u / (2 * h)) - (y_[i] / h - m_[i] * (h / 6)) +
         (y_[ip] / h - m_[ip] * (h / 6));
}

Point2 PeriodicSpline::d2(double s) const {
  double u;
  const int i = locate(s, u);
  const int n = segments(), ip = (i + 1) % n;
  const double h = knots_[i + 1] - knots_[i];
  return m_[i] * ((h - u) / h) + m_[ip] * (u / h);
}

double PeriodicSpline::segment_length(int i) const {
  const double a = knots_[i], h = knots_[i + 1] - knots_[i];
  double len = 0.0;
  // Two panels per segment keep the quadrature error far below 1e-10.
  for (int p = 0; p < 2; ++p)
    for (int g = 0; g < 5; ++g) len += kGaussW[g] * 0.5 * h * d1(a + 0.5 * h * (p + kGaussX[g])).norm();
  return len;
}

double PeriodicSpline::length() const {
  double L = 0.0;
  for (int i = 0; i < segments(); ++i) L += segment_length(i);
  return L;
}

double PeriodicSpline::param_at_length(int i, double a) const {
  const double s0 = knots_[i], h = knots_[i + 1] - knots_[i];
  auto len_to = [&](double s) {
    double len = 0.0;
    const double w = s - s0;
    for (int g = 0; g < 5; ++g) len += kGaussW[g] * w * d1(s0 + w * kGaussX[g]).norm();
    return len;
  };
  const double total = segment_length(i);
  double s = s0 + h * std::clamp(a / total, 0.0, 1.0);
  for (int it = 0; it < 30; ++it) {
    const double f = len_to(s) - a;
    const double df = d1(s).norm();
    const double next = std::clamp(s - f / df, s0, s0 + h);
    if (std::abs(next - s) < 1e-15 * std::max(1.0, std::abs(s))) break;
    s = next;
  }
  return s;
}

MarkerCurve::MarkerCurve(std::vector<Point2> m, double t)
    : markers(std::move(m)), time(t), spline(markers) {}

MarkerCurve MarkerCurve::circle(const Point2& center, double radius, int n, double time) {
  std::vector<Point2> pts(n);
  for (int k = 0; k < n; ++k) {
    const double th = 2.0 * std::numbers::pi * k / n;
    pts[k] = center + radius * Point2(std::cos(th), std::sin(th));
  }
  return MarkerCurve(std::move(pts), time);
}

MarkerCurve advect(const MarkerCurve& curve, const VelocityField& w, double t0, double t1,
                   int n_substeps) {
  if (!(t1 > t0)) throw Error(ErrorCode::InvalidArgument, "advect needs t1 > t0");
  if (n_substeps < 1) throw Error(ErrorCode::InvalidArgument, "advect needs n_substeps >= 1");
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  const double dt = (t1 - t0) / n_substeps;
  std::vector<Point2> pts = curve.markers;
  for (auto& x : pts) {
    double t = t0;
    for (int s = 0; s < n_substeps; ++s) {
      const Point2 k1 = w(x, t);
      const Point2 k2 = w(x + dt * a21 * k1, t + dt / 5);
      const Point2 k3 = w(x + dt * (a31 * k1 + a32 * k2), t + dt * 3 / 10);
      const Point2 k4 = w(x + dt * (a41 * k1 + a42 * k2 + a43 * k3), t + dt * 4 / 5);
      const Point2 k5 = w(x + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), t + dt * 8 / 9);
      const Point2 k6 = w(x + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), t + dt);
      x += dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      t = t0 + (s + 1) * dt;
    }
  }
  return MarkerCurve(std::move(pts), t1);
}

MarkerCurve redistribute(const MarkerCurve& curve, double target, double min_spacing,
                         double max_spacing) {
  if (!(min_spacing > 0 && min_spacing < target && target < max_spacing))
    throw Error(ErrorCode::InvalidArgument, "need 0 < min < target < max spacing");
  const auto& sp = curve.spline;
  const int n = sp.segments();
  std::vector<double> cum(n + 1, 0.0);
  for (int i = 0; i < n; ++i) cum[i + 1] = cum[i] + sp.segment_length(i);
  const double L = cum[n];
  if (L < 3.0 * min_spacing) throw Error(ErrorCode::DegenerateCurve, "curve shorter than 3 min spacings");
  const int count = std::max(3, static_cast<int>(std::lround(L / target)));
  const double step = L / count;
  std::vector<Point2> pts(count);
  int seg = 0;
  for (int k = 0; k < count; ++k) {
    const double a = k * step;
    while (seg < n - 1 && cum[seg + 1] <= a) ++seg;
    pts[k] = sp.eval(sp.param_at_length(seg, a - cum[seg]));
  }
  return MarkerCurve(std::move(pts), curve.time);
}

double polygon_area(const std::vector<Point2>& pts) {
  double a = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = pts[i];
    const Point2& q = pts[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

int winding_number(const std::vector<Point2>& pts, const Point2& p) {
  int wn = 0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = pts[i];
    const Point2& b = pts[(i + 1) % n];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y());
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && cross > 0) ++wn;
    } else if (b.y() <= p.y() && cross < 0) {
      --wn;
    }
  }
  return wn;
}

CurveShape::CurveShape(MarkerCurve curve, int densify) : curve_(std::move(curve)) {
  const auto& sp = curve_.spline;
  const auto& kn = sp.knots();
  for (int i = 0; i < sp.segments(); ++i)
    for (int k = 0; k < densify; ++k) {
      const double s = kn[i] + (kn[i + 1] - kn[i]) * k / densify;
      dense_s_.push_back(s);
      dense_.push_back(sp.eval(s));
    }
  orientation_ = polygon_area(dense_) >= 0 ? 1.0 : -1.0;
}

CurveShape::Closest CurveShape::closest(const Point2& p) const {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    const double d = (dense_[i] - p).squaredNorm();
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  const auto& sp = curve_.spline;
  const std::size_t n = dense_s_.size();
  double lo = dense_s_[(best + n - 1) % n], hi = dense_s_[(best + 1) % n];
  if (best == 0) lo -= sp.period();
  if (best + 1 == n) hi += sp.period();
  double s = dense_s_[best];
  for (int it = 0; it < 30; ++it) {
    const Point2 r = sp.eval(s) - p;
    const Point2 t = sp.d1(s);
    const double g = r.dot(t);
    const double dg = t.squaredNorm() + r.dot(sp.d2(s));
    if (!(dg > 0)) break;
    const double next = std::clamp(s - g / dg, lo, hi);
    if (std::abs(next - s) < 1e-16 * std::max(1.0, sp.period())) {
      s = next;
      break;
    }
    s = next;
  }
  Closest c;
  c.s = s;
  c.point = sp.eval(s);
  c.dist = (c.point - p).norm();
  if (std::sqrt(bd) < c.dist) {
    c.s = dense_s_[best];
    c.point = dense_[best];
    c.dist = std::sqrt(bd);
  }
  return c;
}

double CurveShape::value(const Vec& x, double) const {
  const Point2 p(x[0], x[1]);
  const double d = closest(p).dist;
  return winding_number(dense_, p) != 0 ? -d : d;
}

Vec CurveShape::gradient(const Vec& x, double) const {
  const Point2 p(x[0], x[1]);
  const Closest c = closest(p);
  Point2 g;
  if (c.dist > 1e-9) {
    g = (p - c.point) / c.dist;
    if (winding_number(dense_, p) != 0) g = -g;
  } else {
    const Point2 t = curve_.spline.d1(c.s).normalized();
    g = orientation_ * Point2(t.y(), -t.x());
  }
  Vec out(2);
  out << g.x(), g.y();
  return out;
}

std::vector<Vec> CurveShape::sample(int n, double) const {
  const auto& sp = curve_.spline;
  std::vector<double> cum(sp.segments() + 1, 0.0);
  for (int i = 0; i < sp.segments(); ++i) cum[i + 1] = cum[i] + sp.segment_length(i);
  std::vector<Vec> pts;
  int seg = 0;
  for (int k = 0; k < n; ++k) {
    const double a = cum.back() * k / n;
    while (seg < sp.segments() - 1 && cum[seg + 1] <= a) ++seg;
    const Point2 q = sp.eval(sp.param_at_length(seg, a - cum[seg]));
    Vec v(2);
    v << q.x(), q.y();
    pts.push_back(v);
  }
  return pts;
}

LevelSet curve_levelset(const MarkerCurve& curve) {
  return LevelSet::discrete(std::make_shared<CurveShape>(curve));
}

TrackedInterface::TrackedInterface(MarkerCurve initial, VelocityField w,
                                   std::vector<double> times, TrackingOptions options)
    : w_(std::move(w)), opt_(options) {
  const double L0 = initial.spline.length();
  target_ = L0 / opt_.markers;
  MarkerCurve cur = redistribute(initial, target_, opt_.min_factor * target_,
                                 opt_.max_factor * target_);
  snaps_[cur.time] = std::make_shared<CurveShape>(cur);
  std::sort(times.begin(), times.end());
  for (double t : times) {
    if (t < cur.time + 1e-14) continue;
    cur = step(cur, t);
    snaps_[t] = std::make_shared<CurveShape>(cur);
  }
}

MarkerCurve TrackedInterface::step(const MarkerCurve& from, double t1) const {
  const int n = std::max(1, static_cast<int>(std::ceil((t1 - from.time) * opt_.substeps_per_unit_time)));
  MarkerCurve next = advect(from, w_, from.time, t1, n);
  const double lo = opt_.min_factor * target_, hi = opt_.max_factor * target_;
  const auto& m = next.markers;
  bool ok = true;
  for (std::size_t i = 0; i < m.size() && ok; ++i) {
    const double d = (m[(i + 1) % m.size()] - m[i]).norm();
    ok = d >= lo && d <= hi;
  }
  return ok ? next : redistribute(next, target_, lo, hi);
}

const CurveShape& TrackedInterface::at(double t) const {
  auto it = snaps_.upper_bound(t + 1e-12);
  if (it == snaps_.begin())
    throw Error(ErrorCode::InvalidArgument, "time precedes the initial interface");
  --it;
  if (std::abs(it->first - t) <= 1e-12) return *it->second;
  std::lock_guard<std::mutex> lock(mu_);
  auto c = cache_.find(t);
  if (c != cache_.end()) return *c->second;
  auto shape = std::make_shared<CurveShape>(step(it->second->curve(), t));
  return *cache_.emplace(t, shape).first->second;
}

double TrackedInterface::value(const Vec& x, double t) const { return at(t).value(x, t); }
Vec TrackedInterface::gradient(const Vec& x, double t) const { return at(t).gradient(x, t); }
std::vector<Vec> TrackedInterface::sample(int n, double t) const { return at(t).sample(n, t); }

Point2 oseen_velocity(const Point2& x, double t) {
  const double pi = std::numbers::pi;
  const double c = std::cos(pi * t / 3.0);
  const double sx = std::sin(pi * x.x()), sy = std::sin(pi * x.y());
  return c * Point2(sx * sx * std::sin(2 * pi * x.y()), -sy * sy * std::sin(2 * pi * x.x()));
}

}  // namespace rfm
