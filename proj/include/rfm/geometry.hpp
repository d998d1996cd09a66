#pragma once

// Level sets, domain boxes and point sampling on interfaces and boundaries.
//
// Convention: F(x, t) <= 0 is subdomain One, F > 0 is subdomain Two, and the
// unit normal grad F / |grad F| points from One into Two.

#include "rfm/types.hpp"

#include <memory>
#include <variant>
#include <vector>

namespace rfm {

struct GeometryTolerances {
  double tol_proj = 1e-10;
  double tol_grad = 1e-12;
  int max_iter = 50;
};

/// Rigid motion of a shape's reference center over time.
struct Drift {
  enum class Kind { None, Linear, Circular };
  Kind kind = Kind::None;
  Vec velocity;          // Linear
  double radius = 0.0;   // Circular: center + radius (cos(wt+phase), sin(wt+phase))
  double omega = 0.0;
  double phase = 0.0;

  static Drift none() { return {}; }
  static Drift linear(Vec velocity);
  static Drift circular(double radius, double omega, double phase = 0.0);

  Vec offset(int dim, double t) const;
  bool moving() const { return kind != Kind::None; }
};

/// Extension point for level sets that have no closed form (tracked curves).
/// Implementations must be immutable after construction.
class ImplicitShape {
 public:
  virtual ~ImplicitShape() = default;
  virtual int dim() const = 0;
  virtual bool time_dependent() const = 0;
  virtual double value(const Vec& x, double t) const = 0;
  virtual Vec gradient(const Vec& x, double t) const = 0;
  /// Points on the zero set, roughly uniform along it.
  virtual std::vector<Vec> sample(int n, double t) const = 0;
};

class LevelSet {
 public:
  struct Ball {
    Vec center;
    double radius;
    Drift drift;
  };
  struct Torus {
    double a;  // tube radius
    double c;  // distance from the z axis to the tube center
  };
  struct Flower {
    Vec center;
    double r0;
    double amp;
    int lobes;
    Drift drift;
  };
  /// Negative outside the axis-aligned box, positive inside.
  struct BoxComplement {
    Vec lower, upper;
  };
  struct CompositeMin {
    std::vector<LevelSet> children;
  };
  struct Complement {
    std::vector<LevelSet> child;  // exactly one element
  };
  struct Constant {
    double value;
    int dim;
  };
  struct Discrete {
    std::shared_ptr<const ImplicitShape> shape;
  };
  using Kind = std::variant<Ball, Torus, Flower, BoxComplement, CompositeMin, Complement,
                            Constant, Discrete>;

  explicit LevelSet(Kind kind) : kind_(std::move(kind)) {}

  static LevelSet circle(const Vec& center, double radius, Drift drift = {});
  static LevelSet sphere(const Vec& center, double radius, Drift drift = {});
  static LevelSet torus(double a, double c);
  static LevelSet flower(const Vec& center, double r0, double amp, int lobes, Drift drift = {});
  static LevelSet box_complement(const Vec& lower, const Vec& upper);
  static LevelSet composite_min(std::vector<LevelSet> children);
  static LevelSet complement(LevelSet child);
  static LevelSet constant(double value, int dim);
  static LevelSet discrete(std::shared_ptr<const ImplicitShape> shape);

  const Kind& kind() const { return kind_; }
  int dim() const;
  bool time_dependent() const;

  double value(const Vec& x, double t) const;
  /// Spatial gradient; never normalized.
  Vec gradient(const Vec& x, double t) const;
  /// Parametric sampler of the zero set (no projection or filtering).
  std::vector<Vec> parametric_sample(int n, double t) const;

 private:
  Kind kind_;
};

/// Axis-aligned box with optional removed regions. A hole removes the points
/// where its level set is strictly negative.
struct DomainBox {
  Vec lower, upper;
  std::vector<LevelSet> holes;
  /// False when the box only bounds the domain (e.g. a torus carved by a hole).
  bool faces_are_boundary = true;

  DomainBox(Vec lower, Vec upper, std::vector<LevelSet> holes = {}, bool faces = true);

  int dim() const { return static_cast<int>(lower.size()); }
  bool in_box(const Vec& x, double slack = 1e-12) const;
  bool in_hole(const Vec& x, double t) const;
  bool contains(const Vec& x, double t) const { return in_box(x) && !in_hole(x, t); }
};

double signed_value(const LevelSet& ls, const Vec& x, double t);

/// grad F / |grad F|; throws DegenerateGradient when |grad F| <= tol_grad.
Vec unit_normal(const LevelSet& ls, const Vec& x, double t, const GeometryTolerances& tol = {});

Subdomain classify(const DomainBox& box, const LevelSet& ls, const Vec& x, double t);

/// Damped Newton projection onto F = 0.
Vec project_to_zero(const LevelSet& ls, const Vec& x0, double t,
                    const GeometryTolerances& tol = {});

/// Points with |F| <= tol_proj. Composite sets are sampled child by child and
/// points off the composite zero set are dropped.
std::vector<Vec> sample_interface(const LevelSet& ls, int n_points, double t,
                                  const GeometryTolerances& tol = {});

/// Points on the box faces (2-D: n per face; 3-D: n in total, a k x k grid
/// per face) plus points on each hole boundary. n_hole < 0 picks the same
/// linear density as the faces for 2-D holes, and n for 3-D holes.
std::vector<Vec> sample_boundary(const DomainBox& box, int n, int n_hole = -1, double t = 0.0);

/// Equally spaced (cell-centered) points on the faces of [lower, upper].
std::vector<Vec> sample_box_faces(const Vec& lower, const Vec& upper, int per_axis);

/// The "three removed, four filled circles" geometry in (1.5,2.5) x (1,2).
struct CircleData {
  double cx, cy, r;
};
struct ComplexGeometry {
  std::vector<CircleData> removed;
  std::vector<CircleData> filled;

  static ComplexGeometry shipped_default();
  DomainBox domain() const;
  /// Union of the filled circles as a composite-min level set.
  LevelSet inclusions() const;
};

}  // namespace rfm
