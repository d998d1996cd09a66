#pragma once

// Patches, partition-of-unity functions and random feature functions with
// analytic derivatives up to second order. Time, when present, is just one
// more coordinate.

#include "rfm/types.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace rfm {

enum class PoUKind : std::uint8_t { A, B };
enum class Activation : std::uint8_t { Tanh, Sin, Cos };

const char* to_string(PoUKind k);
const char* to_string(Activation a);
PoUKind parse_pou(const std::string& s);
Activation parse_activation(const std::string& s);

struct Patch {
  Vec center;
  Vec radii;
  Eigen::MatrixXd k;  // J x dim
  Eigen::VectorXd b;  // J
  double R = 1.0;
  Activation activation = Activation::Tanh;

  int dim() const { return static_cast<int>(center.size()); }
  int J() const { return static_cast<int>(b.size()); }
};

/// Keys a patch's random draw. Identical keys give bitwise-identical patches.
struct FeatureSeed {
  std::uint64_t seed = 0;
  std::uint64_t block = 0;
  std::uint64_t patch = 0;
};

Patch init_patch(const Vec& center, const Vec& radii, int J, double R, Activation activation,
                 FeatureSeed seed);

/// l = (x - x_n) / r_n.
Vec normalized_coord(const Patch& patch, const Vec& x);

/// Tensor-product PoU or one of its partial derivatives with respect to l.
double pou_eval(PoUKind kind, const Vec& l, const MultiIndex& order);

/// True when x lies in the closed support of the patch's PoU.
bool in_support(PoUKind kind, const Patch& patch, const Vec& x);

/// phi_nj(x) or a partial derivative with respect to x.
double feature_eval(const Patch& patch, int j, const Vec& x, const MultiIndex& order);

/// psi_n(x) phi_nj(x) or a partial derivative with respect to x.
double basis_eval(const Patch& patch, int j, PoUKind kind, const Vec& x,
                  const MultiIndex& order);

/// Column slot of a multi-index in a derivative table: value, then first
/// derivatives by axis, then second derivatives (a <= b) in row-major order.
int derivative_slot(int dim, const MultiIndex& order);
int derivative_slots(int dim);

/// All basis values and derivatives up to order 2 for one patch at one point:
/// a J x derivative_slots(dim) matrix. Zero outside the PoU support.
void basis_table(const Patch& patch, PoUKind kind, const Vec& x, Eigen::MatrixXd& out);

}  // namespace rfm
