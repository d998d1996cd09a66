#include "rfm/features.hpp"

#include "rfm/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace rfm {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Pou1d {
  double v, d1, d2;
};

Pou1d pou_b_1d(double l) {
  const double a = std::abs(l);
  if (a <= 0.75) return {1.0, 0.0, 0.0};
  if (a > 1.25) return {0.0, 0.0, 0.0};
  const double s = std::sin(kTwoPi * l), c = std::cos(kTwoPi * l);
  const double sign = l < 0 ? 1.0 : -1.0;
  return {0.5 * (1.0 + sign * s), sign * std::numbers::pi * c,
          -sign * 2.0 * std::numbers::pi * std::numbers::pi * s};
}

// Closed box with a relative round-off allowance, so points on a shared face
// belong to both patches.
bool in_box(const Vec& l, double half) {
  const double lim = half * (1.0 + 1e-12);
  for (int k = 0; k < l.size(); ++k)
    if (!(std::abs(l[k]) <= lim)) return false;
  return true;
}

void check_order(const MultiIndex& order) {
  if (order.order() > 2) throw Error(ErrorCode::UnsupportedOrder, "derivative order above 2");
}

// sigma, sigma', sigma'' applied elementwise.
void activation_derivs(Activation a, const Eigen::ArrayXd& z, Eigen::ArrayXd& s0,
                       Eigen::ArrayXd& s1, Eigen::ArrayXd& s2) {
  switch (a) {
    case Activation::Tanh:
      s0 = z.tanh();
      s1 = 1.0 - s0.square();
      s2 = -2.0 * s0 * s1;
      break;
    case Activation::Sin:
      s0 = z.sin();
      s1 = z.cos();
      s2 = -s0;
      break;
    case Activation::Cos:
      s0 = z.cos();
      s1 = -z.sin();
      s2 = -s0;
      break;
  }
}

double activation_scalar(Activation a, double z, int order) {
  switch (a) {
    case Activation::Tanh: {
      const double t = std::tanh(z);
      if (order == 0) return t;
      if (order == 1) return 1.0 - t * t;
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::Sin: {
      const double v[] = {std::sin(z), std::cos(z), -std::sin(z)};
      return v[order];
    }
    case Activation::Cos: {
      const double v[] = {std::cos(z), -std::sin(z), -std::cos(z)};
      return v[order];
    }
  }
  return 0.0;
}

void check_dim(const Patch& p, const Vec& x) {
  if (x.size() != p.dim()) throw Error(ErrorCode::DimensionMismatch, "point/patch dimension");
}

}  // namespace

const char* to_string(PoUKind k) { return k == PoUKind::A ? "A" : "B"; }

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sin: return "sin";
    case Activation::Cos: return "cos";
  }
  return "?";
}

PoUKind parse_pou(const std::string& s) {
  if (s == "A" || s == "a") return PoUKind::A;
  if (s == "B" || s == "b") return PoUKind::B;
  throw Error(ErrorCode::Config, "unknown pou '" + s + "' (expected A or B)");
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "sin") return Activation::Sin;
  if (s == "cos") return Activation::Cos;
  throw Error(ErrorCode::Config, "unknown activation '" + s + "'");
}

Patch init_patch(const Vec& center, const Vec& radii, int J, double R, Activation activation,
                 FeatureSeed seed) {
  if (J < 1) throw Error(ErrorCode::InvalidArgument, "J must be >= 1");
  if (!(R > 0)) throw Error(ErrorCode::InvalidArgument, "R must be positive");
  if (center.size() != radii.size())
    throw Error(ErrorCode::DimensionMismatch, "center/radii dimension");
  for (int k = 0; k < radii.size(); ++k)
    if (!(radii[k] > 0)) throw Error(ErrorCode::InvalidArgument, "radii must be positive");
  Patch p;
  p.center = center;
  p.radii = radii;
  p.R = R;
  p.activation = activation;
  const int d = static_cast<int>(center.size());
  p.k.resize(J, d);
  p.b.resize(J);
  std::seed_seq seq{static_cast<std::uint32_t>(seed.seed), static_cast<std::uint32_t>(seed.seed >> 32),
                    static_cast<std::uint32_t>(seed.block), static_cast<std::uint32_t>(seed.patch)};
  std::mt19937_64 gen(seq);
  auto uniform = [&] {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return R * (2.0 * u - 1.0);
  };
  for (int j = 0; j < J; ++j) {
    for (int a = 0; a < d; ++a) p.k(j, a) = uniform();
    p.b[j] = uniform();
  }
  return p;
}

Vec normalized_coord(const Patch& patch, const Vec& x) {
  check_dim(patch, x);
  return ((x - patch.center).array() / patch.radii.array()).matrix();
}

double pou_eval(PoUKind kind, const Vec& l, const MultiIndex& order) {
  check_order(order);
  if (kind == PoUKind::A) {
    if (order.order() > 0) return 0.0;
    return in_box(l, 1.0) ? 1.0 : 0.0;
  }
  double r = 1.0;
  for (int k = 0; k < l.size(); ++k) {
    const Pou1d p = pou_b_1d(l[k]);
    const int m = order.alpha[k];
    r *= m == 0 ? p.v : (m == 1 ? p.d1 : p.d2);
  }
  return r;
}

bool in_support(PoUKind kind, const Patch& patch, const Vec& x) {
  return in_box(normalized_coord(patch, x), kind == PoUKind::A ? 1.0 : 1.25);
}

double feature_eval(const Patch& patch, int j, const Vec& x, const MultiIndex& order) {
  check_order(order);
  if (j < 0 || j >= patch.J()) throw Error(ErrorCode::InvalidArgument, "feature index");
  const Vec l = normalized_coord(patch, x);
  const double z = patch.k.row(j).dot(l) + patch.b[j];
  double scale = 1.0;
  for (int a = 0; a < patch.dim(); ++a)
    for (int c = 0; c < order.alpha[a]; ++c) scale *= patch.k(j, a) / patch.radii[a];
  return scale * activation_scalar(patch.activation, z, order.order());
}

double basis_eval(const Patch& patch, int j, PoUKind kind, const Vec& x,
                  const MultiIndex& order) {
  check_order(order);
  const Vec l = normalized_coord(patch, x);
  // Leibniz rule over the split of `order` into PoU and feature parts.
  const auto ax = order.axes();
  auto pou_x = [&](const MultiIndex& m) {
    double s = 1.0;
    for (int a = 0; a < patch.dim(); ++a)
      for (int c = 0; c < m.alpha[a]; ++c) s /= patch.radii[a];
    return s * pou_eval(kind, l, m);
  };
  switch (order.order()) {
    case 0: {
      const double psi = pou_x(MultiIndex::value());
      return psi == 0.0 ? 0.0 : psi * feature_eval(patch, j, x, order);
    }
    case 1: {
      const MultiIndex e = MultiIndex::d(ax[0]);
      return pou_x(MultiIndex::value()) * feature_eval(patch, j, x, e) +
             pou_x(e) * feature_eval(patch, j, x, MultiIndex::value());
    }
    default: {
      const MultiIndex ea = MultiIndex::d(ax[0]), eb = MultiIndex::d(ax[1]);
      const MultiIndex v = MultiIndex::value();
      return pou_x(v) * feature_eval(patch, j, x, order) +
             pou_x(ea) * feature_eval(patch, j, x, eb) +
             pou_x(eb) * feature_eval(patch, j, x, ea) + pou_x(order) * feature_eval(patch, j, x, v);
    }
  }
}

int derivative_slots(int dim) { return 1 + dim + dim * (dim + 1) / 2; }

int derivative_slot(int dim, const MultiIndex& order) {
  const auto ax = order.axes();
  switch (order.order()) {
    case 0: return 0;
    case 1: return 1 + ax[0];
    case 2: {
      const int a = ax[0], b = ax[1];  // a <= b
      // Offset of row a in the upper triangle.
      const int row = a * dim - a * (a - 1) / 2;
      return 1 + dim + row + (b - a);
    }
    default: throw Error(ErrorCode::UnsupportedOrder, "derivative order above 2");
  }
}

void basis_table(const Patch& patch, PoUKind kind, const Vec& x, Eigen::MatrixXd& out) {
  const int d = patch.dim();
  const int J = patch.J();
  const int S = derivative_slots(d);
  out.resize(J, S);
  const Vec l = normalized_coord(patch, x);
  if (!in_box(l, kind == PoUKind::A ? 1.0 : 1.25)) {
    out.setZero();
    return;
  }
  const Eigen::ArrayXd z = (patch.k * l + patch.b).array();
  Eigen::ArrayXd s0, s1, s2;
  activation_derivs(patch.activation, z, s0, s1, s2);

  // PoU factors in x.
  double psi = 1.0;
  std::array<double, kMaxDim> dpsi{};
  std::array<std::array<double, kMaxDim>, kMaxDim> ddpsi{};
  if (kind == PoUKind::B) {
    std::array<Pou1d, kMaxDim> p1{};
    for (int a = 0; a < d; ++a) p1[a] = pou_b_1d(l[a]);
    auto prod = [&](int skip1, int skip2) {
      double s = 1.0;
      for (int a = 0; a < d; ++a)
        if (a != skip1 && a != skip2) s *= p1[a].v;
      return s;
    };
    psi = prod(-1, -1);
    for (int a = 0; a < d; ++a) {
      dpsi[a] = p1[a].d1 / patch.radii[a] * prod(a, -1);
      ddpsi[a][a] = p1[a].d2 / (patch.radii[a] * patch.radii[a]) * prod(a, -1);
      for (int b = a + 1; b < d; ++b) {
        ddpsi[a][b] = ddpsi[b][a] =
            p1[a].d1 * p1[b].d1 / (patch.radii[a] * patch.radii[b]) * prod(a, b);
      }
    }
  }

  std::array<Eigen::ArrayXd, kMaxDim> c;
  for (int a = 0; a < d; ++a) c[a] = patch.k.col(a).array() / patch.radii[a];

  out.col(0) = psi * s0;
  for (int a = 0; a < d; ++a) {
    Eigen::ArrayXd fa = s1 * c[a];
    out.col(1 + a) = psi * fa + dpsi[a] * s0;
  }
  int slot = 1 + d;
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b, ++slot) {
      Eigen::ArrayXd col = psi * s2 * c[a] * c[b];
      if (kind == PoUKind::B)
        col += dpsi[a] * s1 * c[b] + dpsi[b] * s1 * c[a] + ddpsi[a][b] * s0;
      out.col(slot) = col;
    }
  }
}

}  // namespace rfm
