#include "rfm/geometry.hpp"

#include "rfm/errors.hpp"
#include "rfm/jet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rfm {
namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Analytic level-set formulas, shared by double and Jet evaluation.
template <class T>
T ball_value(const LevelSet::Ball& b, const std::array<T, 3>& x, int dim, double t) {
  const Vec off = b.drift.offset(dim, t);
  T s = T(0.0);
  for (int k = 0; k < dim; ++k) {
    T d = x[k] - (b.center[k] + off[k]);
    s = s + d * d;
  }
  return s - b.radius * b.radius;
}

template <class T>
T torus_value(const LevelSet::Torus& tor, const std::array<T, 3>& x) {
  using std::sqrt;
  T rho = sqrt(x[0] * x[0] + x[1] * x[1]);
  T d = tor.c - rho;
  return d * d + x[2] * x[2] - tor.a * tor.a;
}

template <class T>
T flower_value(const LevelSet::Flower& f, const std::array<T, 3>& x, double t) {
  using std::atan2;
  using std::cos;
  const Vec off = f.drift.offset(2, t);
  T X = x[0] - (f.center[0] + off[0]);
  T Y = x[1] - (f.center[1] + off[1]);
  T r = f.r0 + f.amp * cos(static_cast<double>(f.lobes) * atan2(Y, X));
  return X * X + Y * Y - r * r;
}

template <class T, class F>
Vec jet_gradient(const Vec& x, F&& fn) {
  std::array<Jet, 3> xj;
  const int dim = static_cast<int>(x.size());
  for (int k = 0; k < 3; ++k) xj[k] = k < dim ? Jet::variable(x[k], k) : Jet(0.0);
  const Jet v = fn(xj);
  Vec g(dim);
  for (int k = 0; k < dim; ++k) g[k] = v.g[k];
  return g;
}

std::array<double, 3> pad3(const Vec& x) {
  std::array<double, 3> a{0.0, 0.0, 0.0};
  for (int k = 0; k < x.size() && k < 3; ++k) a[k] = x[k];
  return a;
}

double box_signed(const LevelSet::BoxComplement& b, const Vec& x, int* active, int* sign) {
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < x.size(); ++k) {
    const double mid = 0.5 * (b.lower[k] + b.upper[k]);
    const double half = 0.5 * (b.upper[k] - b.lower[k]);
    const double d = std::abs(x[k] - mid) - half;
    if (d > best) {
      best = d;
      if (active) *active = k;
      if (sign) *sign = x[k] >= mid ? 1 : -1;
    }
  }
  return -best;
}

std::vector<Vec> fibonacci_sphere(const Vec& center, double radius, int n) {
  std::vector<Vec> pts;
  pts.reserve(n);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    Vec p(3);
    p << center[0] + radius * rad * std::cos(phi), center[1] + radius * rad * std::sin(phi),
        center[2] + radius * z;
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

Drift Drift::linear(Vec velocity) {
  Drift d;
  d.kind = Kind::Linear;
  d.velocity = std::move(velocity);
  return d;
}

Drift Drift::circular(double radius, double omega, double phase) {
  Drift d;
  d.kind = Kind::Circular;
  d.radius = radius;
  d.omega = omega;
  d.phase = phase;
  return d;
}

Vec Drift::offset(int dim, double t) const {
  Vec o = Vec::Zero(dim);
  switch (kind) {
    case Kind::None: break;
    case Kind::Linear:
      for (int k = 0; k < dim && k < velocity.size(); ++k) o[k] = velocity[k] * t;
      break;
    case Kind::Circular:
      o[0] = radius * std::cos(omega * t + phase);
      o[1] = radius * std::sin(omega * t + phase);
      break;
  }
  return o;
}

LevelSet LevelSet::circle(const Vec& center, double radius, Drift drift) {
  if (center.size() != 2) throw Error(ErrorCode::DimensionMismatch, "circle needs a 2-D center");
  return LevelSet(Ball{center, radius, std::move(drift)});
}

LevelSet LevelSet::sphere(const Vec& center, double radius, Drift drift) {
  if (center.size() != 3) throw Error(ErrorCode::DimensionMismatch, "sphere needs a 3-D center");
  return LevelSet(Ball{center, radius, std::move(drift)});
}

LevelSet LevelSet::torus(double a, double c) { return LevelSet(Torus{a, c}); }

LevelSet LevelSet::flower(const Vec& center, double r0, double amp, int lobes, Drift drift) {
  return LevelSet(Flower{center, r0, amp, lobes, std::move(drift)});
}

LevelSet LevelSet::box_complement(const Vec& lower, const Vec& upper) {
  return LevelSet(BoxComplement{lower, upper});
}

LevelSet LevelSet::composite_min(std::vector<LevelSet> children) {
  if (children.empty()) throw Error(ErrorCode::InvalidArgument, "composite-min needs children");
  return LevelSet(CompositeMin{std::move(children)});
}

LevelSet LevelSet::complement(LevelSet child) {
  Complement c;
  c.child.push_back(std::move(child));
  return LevelSet(std::move(c));
}

LevelSet LevelSet::constant(double value, int dim) { return LevelSet(Constant{value, dim}); }

LevelSet LevelSet::discrete(std::shared_ptr<const ImplicitShape> shape) {
  return LevelSet(Discrete{std::move(shape)});
}

int LevelSet::dim() const {
  return std::visit(Overloaded{
                        [](const Ball& b) { return static_cast<int>(b.center.size()); },
                        [](const Torus&) { return 3; },
                        [](const Flower&) { return 2; },
                        [](const BoxComplement& b) { return static_cast<int>(b.lower.size()); },
                        [](const CompositeMin& c) { return c.children.front().dim(); },
                        [](const Complement& c) { return c.child.front().dim(); },
                        [](const Constant& c) { return c.dim; },
                        [](const Discrete& d) { return d.shape->dim(); },
                    },
                    kind_);
}

bool LevelSet::time_dependent() const {
  return std::visit(Overloaded{
                        [](const Ball& b) { return b.drift.moving(); },
                        [](const Torus&) { return false; },
                        [](const Flower& f) { return f.drift.moving(); },
                        [](const BoxComplement&) { return false; },
                        [](const CompositeMin& c) {
                          return std::any_of(c.children.begin(), c.children.end(),
                                             [](const LevelSet& l) { return l.time_dependent(); });
                        },
                        [](const Complement& c) { return c.child.front().time_dependent(); },
                        [](const Constant&) { return false; },
                        [](const Discrete& d) { return d.shape->time_dependent(); },
                    },
                    kind_);
}

double LevelSet::value(const Vec& x, double t) const {
  return std::visit(
      Overloaded{
          [&](const Ball& b) {
            return ball_value<double>(b, pad3(x), static_cast<int>(b.center.size()), t);
          },
          [&](const Torus& tor) { return torus_value<double>(tor, pad3(x)); },
          [&](const Flower& f) { return flower_value<double>(f, pad3(x), t); },
          [&](const BoxComplement& b) { return box_signed(b, x, nullptr, nullptr); },
          [&](const CompositeMin& c) {
            double m = std::numeric_limits<double>::infinity();
            for (const auto& ch : c.children) m = std::min(m, ch.value(x, t));
            return m;
          },
          [&](const Complement& c) { return -c.child.front().value(x, t); },
          [&](const Constant& c) { return c.value; },
          [&](const Discrete& d) { return d.shape->value(x, t); },
      },
      kind_);
}

Vec LevelSet::gradient(const Vec& x, double t) const {
  const int d = static_cast<int>(x.size());
  return std::visit(
      Overloaded{
          [&](const Ball& b) {
            return jet_gradient<Jet>(x, [&](const std::array<Jet, 3>& xj) {
              return ball_value<Jet>(b, xj, static_cast<int>(b.center.size()), t);
            });
          },
          [&](const Torus& tor) {
            return jet_gradient<Jet>(
                x, [&](const std::array<Jet, 3>& xj) { return torus_value<Jet>(tor, xj); });
          },
          [&](const Flower& f) {
            return jet_gradient<Jet>(
                x, [&](const std::array<Jet, 3>& xj) { return flower_value<Jet>(f, xj, t); });
          },
          [&](const BoxComplement& b) {
            int active = 0, sign = 1;
            box_signed(b, x, &active, &sign);
            Vec g = Vec::Zero(d);
            g[active] = -static_cast<double>(sign);
            return g;
          },
          [&](const CompositeMin& c) {
            std::size_t best = 0;
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < c.children.size(); ++i) {
              const double v = c.children[i].value(x, t);
              if (v < m) {
                m = v;
                best = i;
              }
            }
            return c.children[best].gradient(x, t);
          },
          [&](const Complement& c) { return Vec(-c.child.front().gradient(x, t)); },
          [&](const Constant&) { return Vec(Vec::Zero(d)); },
          [&](const Discrete& dd) { return dd.shape->gradient(x, t); },
      },
      kind_);
}

std::vector<Vec> LevelSet::parametric_sample(int n, double t) const {
  std::vector<Vec> pts;
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need at least one interface point");
  std::visit(
      Overloaded{
          [&](const Ball& b) {
            const int dim = static_cast<int>(b.center.size());
            const Vec c = b.center + b.drift.offset(dim, t);
            if (dim == 2) {
              for (int k = 0; k < n; ++k) {
                const double th = 2.0 * kPi * k / n;
                Vec p(2);
                p << c[0] + b.radius * std::cos(th), c[1] + b.radius * std::sin(th);
                pts.push_back(p);
              }
            } else {
              pts = fibonacci_sphere(c, b.radius, n);
            }
          },
          [&](const Torus& tor) {
            // Grid in (theta, phi) with aspect ratio c : a.
            int nt = std::max(1, static_cast<int>(std::lround(std::sqrt(n * tor.c / tor.a))));
            int np = std::max(1, n / nt);
            for (int i = 0; i < nt; ++i) {
              const double th = 2.0 * kPi * (i + 0.5) / nt;
              for (int j = 0; j < np; ++j) {
                const double ph = 2.0 * kPi * (j + 0.5) / np;
                const double rr = tor.c + tor.a * std::cos(ph);
                Vec p(3);
                p << rr * std::cos(th), rr * std::sin(th), tor.a * std::sin(ph);
                pts.push_back(p);
              }
            }
          },
          [&](const Flower& f) {
            const Vec c = f.center + f.drift.offset(2, t);
            for (int k = 0; k < n; ++k) {
              const double th = 2.0 * kPi * k / n;
              const double r = f.r0 + f.amp * std::cos(f.lobes * th);
              Vec p(2);
              p << c[0] + r * std::cos(th), c[1] + r * std::sin(th);
              pts.push_back(p);
            }
          },
          [&](const BoxComplement& b) {
            const int dim = static_cast<int>(b.lower.size());
            const int per_axis =
                dim == 2 ? std::max(1, n / 4)
                         : std::max(1, static_cast<int>(std::lround(std::sqrt(n / 6.0))));
            pts = sample_box_faces(b.lower, b.upper, per_axis);
          },
          [&](const CompositeMin& c) {
            for (const auto& ch : c.children) {
              auto sub = ch.parametric_sample(n, t);
              pts.insert(pts.end(), sub.begin(), sub.end());
            }
          },
          [&](const Complement& c) { pts = c.child.front().parametric_sample(n, t); },
          [&](const Constant&) {
            throw Error(ErrorCode::InvalidArgument, "constant level set has no zero set");
          },
          [&](const Discrete& d) { pts = d.shape->sample(n, t); },
      },
      kind_);
  return pts;
}

DomainBox::DomainBox(Vec lo, Vec up, std::vector<LevelSet> h, bool faces)
    : lower(std::move(lo)), upper(std::move(up)), holes(std::move(h)), faces_are_boundary(faces) {
  if (lower.size() != upper.size())
    throw Error(ErrorCode::DimensionMismatch, "box corners differ in dimension");
  for (int k = 0; k < lower.size(); ++k)
    if (!(lower[k] < upper[k])) throw Error(ErrorCode::InvalidArgument, "box needs lower < upper");
}

bool DomainBox::in_box(const Vec& x, double slack) const {
  if (x.size() != lower.size()) throw Error(ErrorCode::DimensionMismatch, "point/box dimension");
  for (int k = 0; k < x.size(); ++k)
    if (x[k] < lower[k] - slack || x[k] > upper[k] + slack) return false;
  return true;
}

bool DomainBox::in_hole(const Vec& x, double t) const {
  for (const auto& h : holes)
    if (h.value(x, t) < 0.0) return true;
  return false;
}

double signed_value(const LevelSet& ls, const Vec& x, double t) { return ls.value(x, t); }

Vec unit_normal(const LevelSet& ls, const Vec& x, double t, const GeometryTolerances& tol) {
  const Vec g = ls.gradient(x, t);
  const double n = g.norm();
  if (!(n > tol.tol_grad)) throw Error(ErrorCode::DegenerateGradient, "|grad F| too small");
  return g / n;
}

Subdomain classify(const DomainBox& box, const LevelSet& ls, const Vec& x, double t) {
  if (!box.contains(x, t)) return Subdomain::Outside;
  return ls.value(x, t) <= 0.0 ? Subdomain::One : Subdomain::Two;
}

Vec project_to_zero(const LevelSet& ls, const Vec& x0, double t, const GeometryTolerances& tol) {
  Vec x = x0;
  double f = ls.value(x, t);
  for (int it = 0; it < tol.max_iter; ++it) {
    if (std::abs(f) <= tol.tol_proj) return x;
    const Vec g = ls.gradient(x, t);
    const double g2 = g.squaredNorm();
    if (!(std::sqrt(g2) > tol.tol_grad))
      throw Error(ErrorCode::DegenerateGradient, "projection hit a critical point of F");
    const Vec step = (f / g2) * g;
    double damp = 1.0;
    Vec trial = x - step;
    double ft = ls.value(trial, t);
    while (std::abs(ft) > std::abs(f) && damp > 1e-4) {
      damp *= 0.5;
      trial = x - damp * step;
      ft = ls.value(trial, t);
    }
    x = trial;
    f = ft;
  }
  if (std::abs(f) <= tol.tol_proj) return x;
  throw Error(ErrorCode::ProjectionFailed, "Newton projection did not converge");
}

std::vector<Vec> sample_interface(const LevelSet& ls, int n_points, double t,
                                  const GeometryTolerances& tol) {
  if (n_points < 1) throw Error(ErrorCode::InvalidArgument, "n_points must be >= 1");
  std::vector<Vec> raw = ls.parametric_sample(n_points, t);
  std::vector<Vec> out;
  out.reserve(raw.size());
  const bool composite = std::holds_alternative<LevelSet::CompositeMin>(ls.kind());
  for (auto& p : raw) {
    double f = ls.value(p, t);
    if (composite) {
      // Child zero-set points that lie inside another child are not on the union boundary.
      if (std::abs(f) > tol.tol_proj) continue;
      out.push_back(p);
      continue;
    }
    if (std::abs(f) > tol.tol_proj) p = project_to_zero(ls, p, t, tol);
    out.push_back(p);
  }
  return out;
}

std::vector<Vec> sample_box_faces(const Vec& lower, const Vec& upper, int per_axis) {
  const int dim = static_cast<int>(lower.size());
  std::vector<Vec> pts;
  if (dim == 1) {
    pts.push_back(lower);
    pts.push_back(upper);
    return pts;
  }
  for (int axis = 0; axis < dim; ++axis) {
    for (int side = 0; side < 2; ++side) {
      const double fixed = side == 0 ? lower[axis] : upper[axis];
      // Tangential axes.
      std::array<int, 2> tang{};
      int nt = 0;
      for (int k = 0; k < dim; ++k)
        if (k != axis) tang[nt++] = k;
      const int count0 = per_axis;
      const int count1 = nt > 1 ? per_axis : 1;
      for (int i = 0; i < count0; ++i) {
        for (int j = 0; j < count1; ++j) {
          Vec p(dim);
          p[axis] = fixed;
          p[tang[0]] = lower[tang[0]] + (i + 0.5) * (upper[tang[0]] - lower[tang[0]]) / count0;
          if (nt > 1)
            p[tang[1]] = lower[tang[1]] + (j + 0.5) * (upper[tang[1]] - lower[tang[1]]) / count1;
          pts.push_back(p);
        }
      }
    }
  }
  return pts;
}

namespace {

double perimeter_estimate(const LevelSet& ls, double t) {
  const auto pts = ls.parametric_sample(512, t);
  double len = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) len += (pts[(i + 1) % pts.size()] - pts[i]).norm();
  return len;
}

}  // namespace

std::vector<Vec> sample_boundary(const DomainBox& box, int n, int n_hole, double t) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "boundary count must be >= 1");
  const int dim = box.dim();
  std::vector<Vec> pts;
  if (box.faces_are_boundary) {
    const int per_axis =
        dim == 2 ? n : std::max(1, static_cast<int>(std::lround(std::sqrt(n / 6.0))));
    pts = sample_box_faces(box.lower, box.upper, per_axis);
  }
  for (const auto& h : box.holes) {
    int count = n_hole;
    if (count < 0) {
      if (dim == 2) {
        const double density = n / (box.upper[0] - box.lower[0]);
        count = std::max(1, static_cast<int>(std::lround(density * perimeter_estimate(h, t))));
      } else {
        count = n;
      }
    }
    auto hp = sample_interface(h, count, t);
    pts.insert(pts.end(), hp.begin(), hp.end());
  }
  return pts;
}

ComplexGeometry ComplexGeometry::shipped_default() {
  ComplexGeometry g;
  // Filled circle 0 and removed circle 0 nearly touch at (1.935, 1.78).
  g.filled = {{1.800, 1.78, 0.135}, {1.75, 1.28, 0.15}, {2.28, 1.42, 0.12}, {2.32, 1.82, 0.10}};
  g.removed = {{2.045, 1.78, 0.110}, {2.05, 1.22, 0.10}, {1.63, 1.58, 0.08}};
  return g;
}

DomainBox ComplexGeometry::domain() const {
  Vec lo(2), hi(2);
  lo << 1.5, 1.0;
  hi << 2.5, 2.0;
  std::vector<LevelSet> holes;
  for (const auto& c : removed) {
    Vec ctr(2);
    ctr << c.cx, c.cy;
    holes.push_back(LevelSet::circle(ctr, c.r));
  }
  return DomainBox(lo, hi, std::move(holes));
}

LevelSet ComplexGeometry::inclusions() const {
  std::vector<LevelSet> ch;
  for (const auto& c : filled) {
    Vec ctr(2);
    ctr << c.cx, c.cy;
    ch.push_back(LevelSet::circle(ctr, c.r));
  }
  return LevelSet::composite_min(std::move(ch));
}

}  // namespace rfm
