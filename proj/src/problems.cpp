#include "rfm/problems.hpp"

#include "rfm/errors.hpp"
#include "rfm/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace rfm {

const char* to_string(RowTag t) {
  switch (t) {
    case RowTag::Interior1: return "interior1";
    case RowTag::Interior2: return "interior2";
    case RowTag::JumpValue: return "jump_value";
    case RowTag::JumpFlux: return "jump_flux";
    case RowTag::Boundary: return "boundary";
    case RowTag::Initial: return "initial";
    case RowTag::Continuity: return "continuity";
    case RowTag::Anchor: return "anchor";
  }
  return "?";
}

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}
Vec vec3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v;
}

// Form builders.
void add(LinearForm& f, int field, Side s, const MultiIndex& d, double c) {
  if (c != 0.0) f.push_back({field, s, d, c});
}
void add_laplacian(LinearForm& f, int field, Side s, int dims, double c) {
  for (int a = 0; a < dims; ++a) add(f, field, s, MultiIndex::dd(a, a), c);
}
void add_normal_derivative(LinearForm& f, int field, Side s, const Vec& n, double c) {
  for (int a = 0; a < n.size(); ++a) add(f, field, s, MultiIndex::d(a), c * n[a]);
}

// Sign of a side's contribution to a jump (One minus Two).
double sgn(Side s) { return s == Side::One ? 1.0 : -1.0; }

std::array<Jet, kMaxDim> jet_coords(const Vec& coords) {
  std::array<Jet, kMaxDim> c;
  for (int k = 0; k < coords.size(); ++k) c[k] = Jet::variable(coords[k], k);
  return c;
}

using std::cos;
using std::exp;
using std::sin;
using std::sqrt;

}  // namespace

PatchGrid Problem::default_patches(int J) const {
  return PatchGrid::tensor(patch_lower, patch_upper, patch_counts, J);
}

std::vector<Condition> Problem::jump(const Vec&, double, const Vec&) const { return {}; }
std::vector<Condition> Problem::boundary(const Vec&, double, Side) const { return {}; }
std::vector<Condition> Problem::initial(const Vec&, Side) const { return {}; }

void Problem::exact_jets(Side, const Vec&, std::vector<Jet>&) const {
  throw Error(ErrorCode::NoExactSolution, name + " has no exact solution");
}

double Problem::exact_value(int field, Side side, const Vec& x, double t,
                            const MultiIndex& d) const {
  if (!has_exact()) throw Error(ErrorCode::NoExactSolution, name + " has no exact solution");
  std::vector<Jet> out;
  exact_jets(side, model_coords(x, t, time_dependent), out);
  return out.at(field).derivative(d);
}

Side Problem::side_of(const Vec& x, double t) const {
  return interface->value(x, t) <= 0.0 ? Side::One : Side::Two;
}

double Problem::apply_exact(const LinearForm& form, const Vec& x, double t) const {
  const Vec c = model_coords(x, t, time_dependent);
  std::vector<Jet> one, two;
  bool have_one = false, have_two = false;
  double s = 0.0;
  for (const auto& term : form) {
    auto& jets = term.side == Side::One ? one : two;
    bool& have = term.side == Side::One ? have_one : have_two;
    if (!have) {
      exact_jets(term.side, c, jets);
      have = true;
    }
    s += term.coeff * jets.at(term.field).derivative(term.d);
  }
  return s;
}

Condition Problem::with_exact(LinearForm form, const Vec& x, double t, int component) const {
  Condition c;
  c.rhs = apply_exact(form, x, t);
  c.form = std::move(form);
  c.component = component;
  return c;
}

std::vector<Condition> Problem::dirichlet(const std::vector<int>& fields, Side side, const Vec& x,
                                          double t) const {
  std::vector<Condition> out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    LinearForm f{{fields[i], side, MultiIndex::value(), 1.0}};
    out.push_back(has_exact() ? with_exact(std::move(f), x, t, static_cast<int>(i))
                              : Condition{std::move(f), 0.0, static_cast<int>(i)});
  }
  return out;
}

namespace {

// ---------------------------------------------------------------- elliptic

class EllipticCircle : public Problem {
 public:
  static constexpr double r = 1.1;
  double a[2] = {10.0, 1.0};

  EllipticCircle() {
    name = "elliptic_circle";
    spatial_dim = 2;
    domain = DomainBox(vec2(-2, -2), vec2(2, 2));
    interface = LevelSet::circle(vec2(0, 0), r);
    layout = FieldLayout({{"u", SideSupport::Both}});
    K_I = K_J = K_B = 1;
    patch_lower = vec2(-2, -2);
    patch_upper = vec2(2, 2);
    patch_counts = {2, 2};
    error_fields = {"u"};
    derivative_errors = true;
  }

  template <class T>
  static T u(Side s, const T* c) {
    const T q = c[0] * c[0] + c[1] * c[1];
    if (s == Side::One) return exp(q - r * r) + (10.0 * r * r - 1.0);
    return 10.0 * q;
  }

  bool has_exact() const override { return true; }
  void exact_jets(Side s, const Vec& coords, std::vector<Jet>& out) const override {
    const auto c = jet_coords(coords);
    out = {u<Jet>(s, c.data())};
  }

  std::vector<Condition> interior(const Vec& x, double t, Side s) const override {
    LinearForm f;
    add_laplacian(f, 0, s, 2, -a[s == Side::One ? 0 : 1]);
    return {with_exact(std::move(f), x, t, 0)};
  }
  std::vector<Condition> jump(const Vec&, double, const Vec& n) const override {
    LinearForm v{{0, Side::One, MultiIndex::value(), 1.0}, {0, Side::Two, MultiIndex::value(), -1.0}};
    LinearForm q;
    add_normal_derivative(q, 0, Side::One, n, a[0]);
    add_normal_derivative(q, 0, Side::Two, n, -a[1]);
    // No jumps in value or flux.
    return {{std::move(v), 0.0, 0}, {std::move(q), 0.0, 0}};
  }
  std::vector<Condition> boundary(const Vec& x, double t, Side s) const override {
    return dirichlet({0}, s, x, t);
  }
};

class EllipticComplex : public Problem {
 public:
  double a[2] = {1.0, 2.0};

  explicit EllipticComplex(const ComplexGeometry& g) {
    name = "elliptic_complex";
    spatial_dim = 2;
    domain = g.domain();
    interface = g.inclusions();
    layout = FieldLayout({{"u", SideSupport::Both}});
    K_I = K_J = K_B = 1;
    patch_lower = vec2(1.5, 1.0);
    patch_upper = vec2(2.5, 2.0);
    patch_counts = {8, 8};
    error_fields = {"u"};
    derivative_errors = true;
  }

  std::vector<Condition> interior(const Vec&, double, Side s) const override {
    LinearForm f;
    add_laplacian(f, 0, s, 2, -a[s == Side::One ? 0 : 1]);
    return {{std::move(f), 1.0, 0}};
  }
  std::vector<Condition> jump(const Vec&, double, const Vec& n) const override {
    LinearForm v{{0, Side::One, MultiIndex::value(), 1.0}, {0, Side::Two, MultiIndex::value(), -1.0}};
    LinearForm q;
    add_normal_derivative(q, 0, Side::One, n, a[0]);
    add_normal_derivative(q, 0, Side::Two, n, -a[1]);
    return {{std::move(v), 0.0, 0}, {std::move(q), 0.0, 0}};
  }
  std::vector<Condition> boundary(const Vec&, double, Side s) const override {
    return {{{{0, s, MultiIndex::value(), 1.0}}, 0.0, 0}};
  }
};

// ---------------------------------------------------------------- Stokes

// Shared Stokes forms for `dims` velocity components followed by pressure.
struct StokesForms {
  int dims;
  double mu[2];

  std::vector<LinearForm> interior(Side s) const {
    std::vector<LinearForm> out;
    const double m = mu[s == Side::One ? 0 : 1];
    for (int i = 0; i < dims; ++i) {
      LinearForm f;
      add_laplacian(f, i, s, dims, -m);
      add(f, dims, s, MultiIndex::d(i), 1.0);
      out.push_back(std::move(f));
    }
    LinearForm div;
    for (int i = 0; i < dims; ++i) add(div, i, s, MultiIndex::d(i), 1.0);
    out.push_back(std::move(div));
    return out;
  }
  std::vector<LinearForm> value_jump() const {
    std::vector<LinearForm> out;
    for (int i = 0; i < dims; ++i)
      out.push_back({{i, Side::One, MultiIndex::value(), 1.0}, {i, Side::Two, MultiIndex::value(), -1.0}});
    return out;
  }
  // (-p I + mu (grad u + grad u^T)) n, One minus Two.
  std::vector<LinearForm> stress_jump(const Vec& n) const {
    std::vector<LinearForm> out;
    for (int i = 0; i < dims; ++i) {
      LinearForm f;
      for (Side s : {Side::One, Side::Two}) {
        const double m = mu[s == Side::One ? 0 : 1] * sgn(s);
        for (int j = 0; j < dims; ++j) {
          add(f, i, s, MultiIndex::d(j), m * n[j]);
          add(f, j, s, MultiIndex::d(i), m * n[j]);
        }
        add(f, dims, s, MultiIndex::value(), -sgn(s) * n[i]);
      }
      out.push_back(std::move(f));
    }
    return out;
  }
};

class Stokes2d : public Problem {
 public:
  StokesForms forms{2, {1.0, 10.0}};
  bool anchor = true;

  Stokes2d(int which, double mu2, bool pin) : anchor(pin) {
    name = "stokes2d_case" + std::to_string(which);
    forms.mu[1] = mu2;
    spatial_dim = 2;
    domain = DomainBox(vec2(-2, -2), vec2(2, 2));
    interface = LevelSet::circle(vec2(0, 0), 1.0);
    layout = FieldLayout({{"u", SideSupport::Both}, {"v", SideSupport::Both}, {"p", SideSupport::Both}});
    K_I = 3;
    K_J = 2;
    K_B = 2;
    patch_lower = vec2(-2, -2);
    patch_upper = vec2(2, 2);
    patch_counts = {4, 4};
    error_fields = {"u", "v", "p"};
    gauge_fields = {2};
  }

  template <class T>
  static void sol(Side s, const T* c, T* out) {
    const T& x = c[0];
    const T& y = c[1];
    if (s == Side::One) {
      out[0] = 0.25 * y * (x * x + y * y);
      out[1] = -0.25 * x * y * y;
      out[2] = T(5.0);
    } else {
      const T r = sqrt(x * x + y * y);
      out[0] = y / r - 0.75 * y;
      out[1] = -x / r + 0.25 * x * (3.0 + x * x);
      out[2] = (-0.75 * x * x * x + 0.375 * x) * y;
    }
  }

  bool has_exact() const override { return true; }
  void exact_jets(Side s, const Vec& coords, std::vector<Jet>& out) const override {
    const auto c = jet_coords(coords);
    out.resize(3);
    sol<Jet>(s, c.data(), out.data());
  }
  std::vector<Condition> interior(const Vec& x, double t, Side s) const override {
    std::vector<Condition> out;
    auto forms_s = forms.interior(s);
    for (int i = 0; i < 3; ++i) {
      // The divergence-free constraint holds exactly.
      out.push_back(i < 2 ? with_exact(std::move(forms_s[i]), x, t, i)
                          : Condition{std::move(forms_s[i]), 0.0, i});
    }
    return out;
  }
  std::vector<Condition> jump(const Vec& x, double t, const Vec& n) const override {
    std::vector<Condition> out;
    int k = 0;
    // Velocity is continuous.
    for (auto& f : forms.value_jump()) out.push_back({std::move(f), 0.0, k++});
    k = 0;
    for (auto& f : forms.stress_jump(n)) out.push_back(with_exact(std::move(f), x, t, k++));
    return out;
  }
  std::vector<Condition> boundary(const Vec& x, double t, Side s) const override {
    return dirichlet({0, 1}, s, x, t);
  }
  std::vector<PointCondition> anchors() const override {
    if (!anchor) return {};
    PointCondition pc;
    pc.x = vec2(0, 0);
    pc.cond = with_exact({{2, Side::One, MultiIndex::value(), 1.0}}, pc.x, 0.0, 0);
    return {pc};
  }
};

class Stokes3dSphere : public Problem {
 public:
  StokesForms forms{3, {1.0, 10.0}};
  bool nonsmooth;

  explicit Stokes3dSphere(bool ns) : nonsmooth(ns) {
    name = ns ? "stokes3d_sphere_nonsmooth" : "stokes3d_sphere_smooth";
    spatial_dim = 3;
    domain = DomainBox(vec3(-1, -1, -1), vec3(1, 1, 1));
    interface = LevelSet::sphere(vec3(0, 0, 0), 1.0);
    layout = FieldLayout({{"u", SideSupport::Both},
                          {"v", SideSupport::Both},
                          {"w", SideSupport::Both},
                          {"p", SideSupport::Both}});
    K_I = 4;
    K_J = 3;
    K_B = 3;
    patch_lower = vec3(-1, -1, -1);
    patch_upper = vec3(1, 1, 1);
    patch_counts = {2, 2, 2};
    error_fields = {"u", "v", "w"};
    gauge_fields = {3};
  }

  template <class T>
  static void sol(Side s, bool ns, const T* c, T* out) {
    const T& x = c[0];
    const T& y = c[1];
    const T& z = c[2];
    const T x2 = x * x, y2 = y * y, z2 = z * z;
    out[0] = x2 * (2.0 - x2) + 4.0 * x * y * (x2 + y2 - 1.0) + z2 * (3.0 * z2 - 6.0 * x2 - 2.0);
    out[1] = x2 * (3.0 * x2 - 6.0 * y2 - 1.0) + y2 * (1.0 - y2);
    out[2] = 4.0 * z * x * (z2 + x2 - 1.0);
    out[3] = 8.0 * y * (3.0 * x2 - y2) + 8.0 * x * (3.0 * z2 - x2);
    if (ns && s == Side::One) {
      const T q = x2 + y2 + z2 - 1.0;
      out[0] = out[0] + (y - z) * q;
      out[1] = out[1] + (z - x) * q;
      out[2] = out[2] + (x - y) * q;
    }
  }

  bool has_exact() const override { return true; }
  void exact_jets(Side s, const Vec& coords, std::vector<Jet>& out) const override {
    const auto c = jet_coords(coords);
    out.resize(4);
    sol<Jet>(s, nonsmooth, c.data(), out.data());
  }
  std::vector<Condition> interior(const Vec& x, double t, Side s) const override {
    std::vector<Condition> out;
    auto fs = forms.interior(s);
    // This velocity has div u = -2y, so the divergence row carries data too.
    for (int i = 0; i < 4; ++i) out.push_back(with_exact(std::move(fs[i]), x, t, i));
    return out;
  }
  std::vector<Condition> jump(const Vec& x, double t, const Vec& n) const override {
    std::vector<Condition> out;
    int k = 0;
    for (auto& f : forms.value_jump()) out.push_back({std::move(f), 0.0, k++});
    k = 0;
    for (auto& f : forms.stress_jump(n)) out.push_back(with_exact(std::move(f), x, t, k++));
    return out;
  }
  std::vector<Condition> boundary(const Vec& x, double t, Side s) const override {
    return dirichlet({0, 1, 2}, s, x, t);
  }
};

class Stokes3dTorus : public Problem {
 public:
  StokesForms forms{3, {1.0, 1.0}};
  static constexpr double a = 0.35, c = 0.7;

  Stokes3dTorus() {
    name = "stokes3d_torus";
    spatial_dim = 3;
    domain = DomainBox(vec3(-(a + c), -(a + c), -a), vec3(a + c, a + c, a),
                       {LevelSet::complement(LevelSet::torus(a, c))}, false);
    interface = LevelSet::constant(-1.0, 3);
    layout = FieldLayout({{"u", SideSupport::One},
                          {"v", SideSupport::One},
                          {"w", SideSupport::One},
                          {"p", SideSupport::One}});
    K_I = 4;
    K_J = 0;
    K_B = 3;
    patch_lower = vec3(-1.2, -1.2, -1.2);
    patch_upper = vec3(1.2, 1.2, 1.2);
    patch_counts = {2, 2, 2};
    error_fields = {"u", "v", "w"};
    gauge_fields = {3};
  }

  template <class T>
  static void sol(const T* cc, T* out) {
    const T& x = cc[0];
    const T& y = cc[1];
    const T& z = cc[2];
    const T x2 = x * x, y2 = y * y, z2 = z * z;
    out[0] = -4.0 * x * y * (1.0 - x2 - y2) - x2 * (x2 + 6.0 * z2 - 2.0) + z2 * (3.0 * z2 - 2.0) +
             exp(cos(y)) + exp(sin(z));
    out[1] = x2 * (3.0 * x2 - 6.0 * y2 - 2.0) - y2 * (y2 - 2.0) + exp(sin(x));
    out[2] = -4.0 * (1.0 - x2 - z2) * x * z + exp(cos(x));
    out[3] = exp(1.0 - y2 - z2 * z) * sin(x2 + 1.0);
  }

  bool has_exact() const override { return true; }
  void exact_jets(Side, const Vec& coords, std::vector<Jet>& out) const override {
    const auto cc = jet_coords(coords);
    out.resize(4);
    sol<Jet>(cc.data(), out.data());
  }
  std::vector<Condition> interior(const Vec& x, double t, Side s) const override {
    std::vector<Condition> out;
    auto fs = forms.interior(s);
    for (int i = 0; i < 4; ++i)
      out.push_back(i < 3 ? with_exact(std::move(fs[i]), x, t, i) : Condition{std::move(fs[i]), 0.0, i});
    return out;
  }
  std::vector<Condition> boundary(const Vec& x, double t, Side s) const override {
    return dirichlet({0, 1, 2}, s, x, t);
  }
};

// ---------------------------------------------------------------- elasticity

class Elasticity3d : public Problem {
 public:
  double lam[2] = {1.0, 100.0};
  double mu[2] = {1.0, 100.0};

  Elasticity3d() {
    name = "elasticity3d";
    spatial_dim = 3;
    domain = DomainBox(vec3(0, 0, 0), vec3(1, 1, 1));
    interface = LevelSet::sphere(vec3(0.5, 0.5, 0.5), 0.25);
    layout = FieldLayout({{"u", SideSupport::Both}, {"v", SideSupport::Both}, {"w", SideSupport::Both}});
    K_I = 3;
    K_J = 3;
    K_B = 3;
    patch_lower = vec3(0, 0, 0);
    patch_upper = vec3(1, 1, 1);
    patch_counts = {2, 2, 2};
    error_fields = {"u", "v", "w"};
  }

  template <class T>
  static void sol(Side s, const T* c, T* out) {
    const T& x = c[0];
    const T& y = c[1];
    const T& z = c[2];
    if (s == Side::One) {
      out[0] = -cos(x * x) * exp(-(y * y)) * sin(2.0 * kPi * z);
      out[1] = -cos(y * y) * exp(-(x * x)) * sin(2.0 * kPi * z);
      out[2] = cos(y * y) * exp(-(z * z)) * sin(2.0 * kPi * x);
    } else {
      out[0] = -sin(x * x) * exp(y * y) * cos(2.0 * kPi * z);
      out[1] = -sin(y * y) * exp(x * x) * cos(2.0 * kPi * z);
      out[2] = sin(y * y) * exp(z * z) * cos(2.0 * kPi * x);
    }
  }

  bool has_exact() const override { return true; }
  void exact_jets(Side s, const Vec& coords, std::vector<Jet>& out) const override {
    const auto c = jet_coords(coords);
    out.resize(3);
    sol<Jet>(s, c.data(), out.data());
  }
  std::vector<Condition> interior(const Vec& x, double t, Side s) const override {
    const int k = s == Side::One ? 0 : 1;
    std::vector<Condition> out;
    for (int i = 0; i < 3; ++i) {
      // -div sigma_i = -(lambda + mu) d_i div u - mu Laplace u_i.
      LinearForm f;
      for (int j = 0; j < 3; ++j) add(f, j, s, MultiIndex::dd(i, j), -(lam[k] + mu[k]));
      add_laplacian(f, i, s, 3, -mu[k]);
      out.push_back(with_exact(std::move(f), x, t, i));
    }
    return out;
  }
  std::vector<Condition> jump(const Vec& x, double t, const Vec& n) const override {
    std::vector<Condition> out;
    for (int i = 0; i < 3; ++i)
      out.push_back(with_exact({{i, Side::One, MultiIndex::value(), 1.0}, {i, Side::Two, MultiIndex::value(), -1.0}},
                               x, t, i));
    for (int i = 0; i < 3; ++i) {
      LinearForm f;
      for (Side s : {Side::One, Side::Two}) {
        const int k = s == Side::One ? 0 : 1;
        // (sigma n)_i = lambda div u n_i + mu (d_j u_i + d_i u_j) n_j.
        for (int j = 0; j < 3; ++j) {
          add(f, j, s, MultiIndex::d(j), sgn(s) * lam[k] * n[i]);
          add(f, i, s, MultiIndex::d(j), sgn(s) * mu[k] * n[j]);
          add(f, j, s, MultiIndex::d(i), sgn(s) * mu[k] * n[j]);
        }
      }
      out.push_back(with_exact(std::move(f), x, t, i));
    }
    return out;
  }
  std::vector<Condition> boundary(const Vec& x, double t, Side s) const override {
    return dirichlet({0, 1, 2}, s, x, t);
  }
};

// ---------------------------------------------------------------- parabolic

class Parabolic : public Problem {
 public:
  double beta[2] = {1.0, 10.0};

  Parabolic() {
    spatial_dim = 2;
    time_dependent = true;
    T = 1.0;
    domain = DomainBox(vec2(-1, -1), vec2(1, 1));
    layout = FieldLayout({{"u", SideSupport::Both}});
    K_I = K_J = K_B = 1;
    patch_lower = vec3(-1, -1, 0);
    patch_upper = vec3(1, 1, 1);
    patch_counts = {2, 2, 2};
    error_fields = {"u"};
    derivative_errors = true;
  }

  bool has_exact() const override { return true; }
  std::vector<Condition> interior(const Vec& x, double t, Side s) const override {
    LinearForm f;
    add(f, 0, s, MultiIndex::d(2), 1.0);
    add_laplacian(f, 0, s, 2, -beta[s == Side::One ? 0 : 1]);
    return {with_exact(std::move(f), x, t, 0)};
  }
  std::vector<Condition> jump(const Vec& x, double t, const Vec& n) const override {
    LinearForm v{{0, Side::One, MultiIndex::value(), 1.0}, {0, Side::Two, MultiIndex::value(), -1.0}};
    LinearForm q;
    add_normal_derivative(q, 0, Side::One, n, beta[0]);
    add_normal_derivative(q, 0, Side::Two, n, -beta[1]);
    return {with_exact(std::move(v), x, t, 0), with_exact(std::move(q), x, t, 0)};
  }
  std::vector<Condition> boundary(const Vec& x, double t, Side s) const override {
    return dirichlet({0}, s, x, t);
  }
  std::vector<Condition> initial(const Vec& x, Side s) const override {
    return dirichlet({0}, s, x, 0.0);
  }
};

class ParabolicCircle : public Parabolic {
 public:
  static constexpr double R = kPi / 6.0;

  ParabolicCircle() {
    name = "parabolic_circle";
    interface = LevelSet::circle(vec2(0, 0), R, Drift::circular(0.3, kPi, 0.0));
  }

  template <class T>
  static T u(Side s, const T* c, const double* beta) {
    const T X = c[0] - 0.3 * cos(kPi * c[2]);
    const T Y = c[1] - 0.3 * sin(kPi * c[2]);
    const T rho5 = pow(X * X + Y * Y, 2.5);
    if (s == Side::One) return rho5 / R / beta[0];
    return rho5 / R / beta[1] + std::pow(R, 4) * (1.0 / beta[0] - 1.0 / beta[1]);
  }

  void exact_jets(Side s, const Vec& coords, std::vector<Jet>& out) const override {
    const auto c = jet_coords(coords);
    out = {u<Jet>(s, c.data(), beta)};
  }
};

class ParabolicMerge : public Parabolic {
 public:
  ParabolicMerge() {
    name = "parabolic_merge";
    interface = LevelSet::composite_min(
        {LevelSet::flower(vec2(0, 0.5), 0.3, 0.1, 4, Drift::linear(vec2(0, -0.4))),
         LevelSet::flower(vec2(0, -0.5), 0.3, 0.1, 4, Drift::linear(vec2(0, 0.4)))});
  }

  template <class T>
  static T u(Side s, const T* c) {
    if (s == Side::One) return sin(kPi * c[0]) * sin(kPi * c[1]) * sin(c[2]);
    return 10.0 - c[0] * c[0] - c[1] * c[1] - c[2] * c[2];
  }

  void exact_jets(Side s, const Vec& coords, std::vector<Jet>& out) const override {
    const auto c = jet_coords(coords);
    out = {u<Jet>(s, c.data())};
  }
};

// ---------------------------------------------------------------- Oseen

class Oseen2d : public Problem {
 public:
  double nu[2] = {1.0, 1e-3};

  Oseen2d() {
    name = "oseen2d";
    spatial_dim = 2;
    time_dependent = true;
    T = 1.5;
    domain = DomainBox(vec2(0, 0), vec2(1, 1));
    std::vector<double> snaps;
    for (int k = 1; k <= 30; ++k) snaps.push_back(T * k / 30.0);
    TrackingOptions opt;
    opt.substeps_per_unit_time = 200.0;
    interface = LevelSet::discrete(std::make_shared<TrackedInterface>(
        MarkerCurve::circle(Point2(0.5, 0.75), 0.15, 512), oseen_velocity, snaps, opt));
    layout = FieldLayout({{"u", SideSupport::Both}, {"v", SideSupport::Both}, {"p", SideSupport::Both}});
    K_I = 3;
    K_J = 2;
    K_B = 2;
    patch_lower = vec3(0, 0, 0);
    patch_upper = vec3(1, 1, 1.5);
    patch_counts = {2, 2, 2};
    error_fields = {"u", "v"};
    gauge_fields = {2};
  }

  template <class T>
  static void sol(Side s, const T* c, T* out) {
    const T& x = c[0];
    const T& y = c[1];
    const T& t = c[2];
    if (s == Side::One) {
      out[0] = cos(t) * cos(kPi * x) * sin(kPi * y);
      out[1] = -cos(t) * sin(kPi * x) * cos(kPi * y);
      out[2] = cos(0.5 * kPi * x) * sin(0.5 * kPi * y);
    } else {
      out[0] = exp(x) * sin(kPi * y + kPi * t);
      out[1] = exp(x) * (1.0 / kPi) * cos(kPi * y + kPi * t);
      out[2] = sin(0.5 * kPi * x) * cos(0.5 * kPi * y);
    }
  }

  bool has_exact() const override { return true; }
  void exact_jets(Side s, const Vec& coords, std::vector<Jet>& out) const override {
    const auto c = jet_coords(coords);
    out.resize(3);
    sol<Jet>(s, c.data(), out.data());
  }
  std::vector<Condition> interior(const Vec& x, double t, Side s) const override {
    const double n = nu[s == Side::One ? 0 : 1];
    const Point2 w = oseen_velocity(Point2(x[0], x[1]), t);
    std::vector<Condition> out;
    for (int i = 0; i < 2; ++i) {
      LinearForm f;
      add(f, i, s, MultiIndex::d(2), 1.0);
      add(f, i, s, MultiIndex::d(0), w.x());
      add(f, i, s, MultiIndex::d(1), w.y());
      add_laplacian(f, i, s, 2, -n);
      add(f, 2, s, MultiIndex::d(i), 1.0);
      out.push_back(with_exact(std::move(f), x, t, i));
    }
    LinearForm div;
    add(div, 0, s, MultiIndex::d(0), 1.0);
    add(div, 1, s, MultiIndex::d(1), 1.0);
    out.push_back(with_exact(std::move(div), x, t, 2));
    return out;
  }
  std::vector<Condition> jump(const Vec& x, double t, const Vec& n) const override {
    std::vector<Condition> out;
    for (int i = 0; i < 2; ++i)
      out.push_back(with_exact({{i, Side::One, MultiIndex::value(), 1.0}, {i, Side::Two, MultiIndex::value(), -1.0}},
                               x, t, i));
    for (int i = 0; i < 2; ++i) {
      LinearForm f;
      for (Side s : {Side::One, Side::Two}) {
        add_normal_derivative(f, i, s, n, sgn(s) * nu[s == Side::One ? 0 : 1]);
        add(f, 2, s, MultiIndex::value(), -sgn(s) * n[i]);
      }
      out.push_back(with_exact(std::move(f), x, t, i));
    }
    return out;
  }
  std::vector<Condition> boundary(const Vec& x, double t, Side s) const override {
    return dirichlet({0, 1}, s, x, t);
  }
  std::vector<Condition> initial(const Vec& x, Side s) const override {
    return dirichlet({0, 1}, s, x, 0.0);
  }
};

// ---------------------------------------------------------------- FSI

class Fsi2d : public Problem {
 public:
  double radius;  // 0: distance from the origin

  Fsi2d(const ComplexGeometry& g, double r) : radius(r) {
    name = "fsi2d";
    spatial_dim = 2;
    time_dependent = true;
    T = 1.0;
    domain = g.domain();
    interface = g.inclusions();
    layout = FieldLayout({{"uS", SideSupport::One},
                          {"vS", SideSupport::One},
                          {"uF", SideSupport::Two},
                          {"vF", SideSupport::Two},
                          {"pF", SideSupport::Two}});
    K_I = 3;
    K_J = 2;
    K_B = 2;
    patch_lower = vec3(1.5, 1.0, 0.0);
    patch_upper = vec3(2.5, 2.0, 1.0);
    patch_counts = {2, 2, 2};
    error_fields = {"uS", "vS", "uF", "vF"};
  }

  template <class T>
  static void sol(Side s, const T* c, double radius, T* out) {
    const T& x = c[0];
    const T& y = c[1];
    const T& t = c[2];
    if (s == Side::One) {
      out[0] = 10.0 - x * x - y * y - t * t;
      out[1] = 20.0 - x - y - t;
      out[2] = out[3] = out[4] = T(0.0);
    } else {
      const T r = radius > 0 ? T(radius) : sqrt(x * x + y * y);
      out[0] = out[1] = T(0.0);
      out[2] = exp(t) * y / r;
      out[3] = -exp(t) * x / r;
      const T xm = x - 1.0, ym = y - 1.0, tm = t - 1.0;
      out[4] = xm * xm * xm + ym * ym * ym + tm * tm;
    }
  }

  bool has_exact() const override { return true; }
  void exact_jets(Side s, const Vec& coords, std::vector<Jet>& out) const override {
    const auto c = jet_coords(coords);
    out.resize(5);
    sol<Jet>(s, c.data(), radius, out.data());
  }
  std::vector<Condition> interior(const Vec& x, double t, Side s) const override {
    std::vector<Condition> out;
    if (s == Side::One) {
      for (int i = 0; i < 2; ++i) {
        LinearForm f;
        add(f, i, s, MultiIndex::dd(2, 2), 1.0);
        add_laplacian(f, i, s, 2, -1.0);
        add(f, i, s, MultiIndex::value(), 1.0);
        add(f, i, s, MultiIndex::d(2), 1.0);
        out.push_back(with_exact(std::move(f), x, t, i));
      }
      return out;
    }
    for (int i = 0; i < 2; ++i) {
      LinearForm f;
      add(f, 2 + i, s, MultiIndex::d(2), 1.0);
      add_laplacian(f, 2 + i, s, 2, -1.0);
      add(f, 4, s, MultiIndex::d(i), 1.0);
      out.push_back(with_exact(std::move(f), x, t, i));
    }
    out.push_back({{{2, s, MultiIndex::d(0), 1.0}, {3, s, MultiIndex::d(1), 1.0}}, 0.0, 2});
    return out;
  }
  std::vector<Condition> jump(const Vec& x, double t, const Vec& n) const override {
    std::vector<Condition> out;
    // d_t u^S - u^F on the interface.
    for (int i = 0; i < 2; ++i)
      out.push_back(with_exact({{i, Side::One, MultiIndex::d(2), 1.0}, {2 + i, Side::Two, MultiIndex::value(), -1.0}},
                               x, t, i));
    // d_n d_t u^S - (d_n u^F - p^F n).
    for (int i = 0; i < 2; ++i) {
      LinearForm f;
      for (int a = 0; a < 2; ++a) add(f, i, Side::One, MultiIndex::dd(a, 2), n[a]);
      add_normal_derivative(f, 2 + i, Side::Two, n, -1.0);
      add(f, 4, Side::Two, MultiIndex::value(), n[i]);
      out.push_back(with_exact(std::move(f), x, t, i));
    }
    return out;
  }
  std::vector<Condition> boundary(const Vec& x, double t, Side) const override {
    // The outer boundary belongs to the fluid, including where a solid touches it.
    return dirichlet({2, 3}, Side::Two, x, t);
  }
  std::vector<Condition> initial(const Vec& x, Side s) const override {
    if (s == Side::Two) return dirichlet({2, 3}, s, x, 0.0);
    auto out = dirichlet({0, 1}, s, x, 0.0);
    for (int i = 0; i < 2; ++i)
      out.push_back(with_exact({{i, s, MultiIndex::d(2), 1.0}}, x, 0.0, 2 + i));
    return out;
  }
};

}  // namespace

std::vector<std::string> catalog_names() {
  return {"elliptic_circle",        "elliptic_complex",          "stokes2d_case1",
          "stokes2d_case2",         "stokes2d_case3",            "stokes3d_sphere_smooth",
          "stokes3d_sphere_nonsmooth", "stokes3d_torus",         "elasticity3d",
          "parabolic_circle",       "parabolic_merge",           "oseen2d",
          "fsi2d"};
}

std::unique_ptr<Problem> make_problem(const std::string& name, const ProblemKnobs& knobs) {
  if (name == "elliptic_circle") return std::make_unique<EllipticCircle>();
  if (name == "elliptic_complex") return std::make_unique<EllipticComplex>(knobs.geometry);
  if (name == "stokes2d_case1") return std::make_unique<Stokes2d>(1, 10.0, knobs.pressure_anchor);
  if (name == "stokes2d_case2") return std::make_unique<Stokes2d>(2, 100.0, knobs.pressure_anchor);
  if (name == "stokes2d_case3") return std::make_unique<Stokes2d>(3, 1000.0, knobs.pressure_anchor);
  if (name == "stokes3d_sphere_smooth") return std::make_unique<Stokes3dSphere>(false);
  if (name == "stokes3d_sphere_nonsmooth") return std::make_unique<Stokes3dSphere>(true);
  if (name == "stokes3d_torus") return std::make_unique<Stokes3dTorus>();
  if (name == "elasticity3d") return std::make_unique<Elasticity3d>();
  if (name == "parabolic_circle") return std::make_unique<ParabolicCircle>();
  if (name == "parabolic_merge") return std::make_unique<ParabolicMerge>();
  if (name == "oseen2d") return std::make_unique<Oseen2d>();
  if (name == "fsi2d") return std::make_unique<Fsi2d>(knobs.geometry, knobs.fsi_radius);
  throw Error(ErrorCode::Config, "unknown problem '" + name + "'");
}

// ---------------------------------------------------------------- rows

std::vector<ConditionRow> realize(const PiecewiseRfmModel& m, const std::vector<Condition>& conds,
                                  const Vec& x, double t, bool with_time, RowTag tag) {
  const Vec c = model_coords(x, t, with_time);
  if (c.size() != m.dim()) throw Error(ErrorCode::DimensionMismatch, "point/model dimension");
  const auto patches = m.active_patches(c);
  const int B = m.layout().num_blocks();
  // Basis tables per (block, active patch), computed on first use.
  std::vector<Eigen::MatrixXd> tables(static_cast<std::size_t>(B) * patches.size());
  std::vector<char> ready(tables.size(), 0);
  const int d = m.dim();

  std::vector<ConditionRow> rows;
  rows.reserve(conds.size());
  std::map<int, Eigen::VectorXd> acc;  // keyed by block * P + patch slot
  for (const auto& cond : conds) {
    acc.clear();
    for (const auto& term : cond.form) {
      const int b = m.layout().block(term.field, term.side);
      const int slot = derivative_slot(d, term.d);
      for (std::size_t pi = 0; pi < patches.size(); ++pi) {
        const std::size_t key = static_cast<std::size_t>(b) * patches.size() + pi;
        if (!ready[key]) {
          basis_table(m.patch(b, patches[pi]), m.options().pou, c, tables[key]);
          ready[key] = 1;
        }
        auto it = acc.find(static_cast<int>(key));
        if (it == acc.end())
          it = acc.emplace(static_cast<int>(key), Eigen::VectorXd::Zero(tables[key].rows())).first;
        it->second.noalias() += term.coeff * tables[key].col(slot);
      }
    }
    ConditionRow row;
    row.rhs = cond.rhs;
    row.tag = tag;
    row.point = x;
    row.t = t;
    row.component = cond.component;
    for (const auto& [key, v] : acc) {
      const int b = key / static_cast<int>(patches.size());
      const int n = patches[key % patches.size()];
      for (int j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) row.coeffs.emplace_back(m.column(b, n, j), v[j]);
    }
    std::sort(row.coeffs.begin(), row.coeffs.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ConditionRow> interior_rows(const Problem& p, const PiecewiseRfmModel& m,
                                        const Vec& x, double t, Side side) {
  const Subdomain sd = classify(*p.domain, *p.interface, x, t);
  const Subdomain want = side == Side::One ? Subdomain::One : Subdomain::Two;
  if (sd != want) throw Error(ErrorCode::WrongSide, "interior point is not in the requested side");
  return realize(m, p.interior(x, t, side), x, t, p.time_dependent,
                 side == Side::One ? RowTag::Interior1 : RowTag::Interior2);
}

std::vector<ConditionRow> jump_rows(const Problem& p, const PiecewiseRfmModel& m, const Vec& x,
                                    double t, double tol) {
  if (std::abs(p.interface->value(x, t)) > tol)
    throw Error(ErrorCode::NotOnInterface, "jump point is off the interface");
  const Vec n = unit_normal(*p.interface, x, t);
  const auto conds = p.jump(x, t, n);
  const std::size_t half = conds.size() / 2;
  std::vector<Condition> value(conds.begin(), conds.begin() + half);
  std::vector<Condition> flux(conds.begin() + half, conds.end());
  auto rows = realize(m, value, x, t, p.time_dependent, RowTag::JumpValue);
  auto frows = realize(m, flux, x, t, p.time_dependent, RowTag::JumpFlux);
  rows.insert(rows.end(), std::make_move_iterator(frows.begin()), std::make_move_iterator(frows.end()));
  return rows;
}

std::vector<ConditionRow> boundary_rows(const Problem& p, const PiecewiseRfmModel& m,
                                        const Vec& x, double t, double tol) {
  const DomainBox& box = *p.domain;
  bool on = false;
  if (box.faces_are_boundary && box.in_box(x, tol))
    for (int a = 0; a < box.dim(); ++a)
      on |= std::abs(x[a] - box.lower[a]) <= tol || std::abs(x[a] - box.upper[a]) <= tol;
  for (const auto& h : box.holes) on |= std::abs(h.value(x, t)) <= tol && box.in_box(x, tol);
  if (!on) throw Error(ErrorCode::NotOnBoundary, "point is not on the domain boundary");
  return realize(m, p.boundary(x, t, p.side_of(x, t)), x, t, p.time_dependent, RowTag::Boundary);
}

std::vector<ConditionRow> initial_rows(const Problem& p, const PiecewiseRfmModel& m,
                                       const Vec& x) {
  if (!p.time_dependent) throw Error(ErrorCode::StationaryProblem, p.name + " has no initial data");
  return realize(m, p.initial(x, p.side_of(x, 0.0)), x, 0.0, true, RowTag::Initial);
}

double exact_error_data(const Problem& p, int field, Side side, const Vec& x, double t) {
  return p.exact_value(field, side, x, t);
}

}  // namespace rfm
