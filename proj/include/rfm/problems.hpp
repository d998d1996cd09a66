#pragma once

// Catalog of interface problems expressed as linear condition generators.
//
// Each condition is a linear form over (field, side, derivative) terms plus a
// right-hand side. Forcing, jump, boundary and initial data of problems with a
// closed-form solution are obtained by applying the same form to that solution
// (evaluated with second-order jets).

#include "rfm/geometry.hpp"
#include "rfm/jet.hpp"
#include "rfm/model.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rfm {

struct Term {
  int field;
  Side side;
  MultiIndex d;
  double coeff;
};
using LinearForm = std::vector<Term>;

enum class RowTag : std::uint8_t {
  Interior1,
  Interior2,
  JumpValue,
  JumpFlux,
  Boundary,
  Initial,
  Continuity,
  Anchor
};
const char* to_string(RowTag t);

struct Condition {
  LinearForm form;
  double rhs = 0.0;
  int component = 0;
};

struct ConditionRow {
  std::vector<std::pair<long, double>> coeffs;  // sorted by column
  double rhs = 0.0;
  RowTag tag = RowTag::Interior1;
  Vec point;
  double t = 0.0;
  int component = 0;
};

/// A condition imposed at one fixed point (e.g. a pressure reference value).
struct PointCondition {
  Vec x;
  double t = 0.0;
  Condition cond;
};

/// Tunable physical/geometric parameters shared by the catalog constructors.
struct ProblemKnobs {
  /// Radius used in the fluid velocity of the fluid-solid problem; 0 means
  /// the distance from the origin.
  double fsi_radius = 0.0;
  ComplexGeometry geometry = ComplexGeometry::shipped_default();
  /// Pin the pressure at one point for the 2-D Stokes problems.
  bool pressure_anchor = true;
};

class Problem {
 public:
  virtual ~Problem() = default;

  std::string name;
  int spatial_dim = 2;
  bool time_dependent = false;
  double T = 0.0;
  std::optional<DomainBox> domain;
  std::optional<LevelSet> interface;
  FieldLayout layout;
  int K_I = 1, K_J = 1, K_B = 1;
  /// Box tiled by the default patch grid and patches per axis (space, then time).
  Vec patch_lower, patch_upper;
  std::vector<int> patch_counts;
  /// Fields reported in error tables, and whether derivative errors are too.
  std::vector<std::string> error_fields;
  bool derivative_errors = false;
  /// Fields defined only up to an additive constant.
  std::vector<int> gauge_fields;

  int model_dim() const { return spatial_dim + (time_dependent ? 1 : 0); }
  PatchGrid default_patches(int J) const;

  virtual std::vector<Condition> interior(const Vec& x, double t, Side side) const = 0;
  /// Value-jump conditions first, then flux-jump conditions. n points from One to Two.
  virtual std::vector<Condition> jump(const Vec& x, double t, const Vec& n) const;
  virtual std::vector<Condition> boundary(const Vec& x, double t, Side side) const;
  virtual std::vector<Condition> initial(const Vec& x, Side side) const;
  virtual std::vector<PointCondition> anchors() const { return {}; }

  virtual bool has_exact() const { return false; }
  /// All fields on `side` as jets in model coordinates (x, then t).
  virtual void exact_jets(Side side, const Vec& coords, std::vector<Jet>& out) const;
  double exact_value(int field, Side side, const Vec& x, double t,
                     const MultiIndex& d = MultiIndex::value()) const;

  /// Side that owns a point of the closed domain.
  Side side_of(const Vec& x, double t) const;

 protected:
  /// Sum of coeff * D^d(exact field) over the form's terms.
  double apply_exact(const LinearForm& form, const Vec& x, double t) const;
  Condition with_exact(LinearForm form, const Vec& x, double t, int component) const;
  /// Dirichlet rows on the listed fields of one side.
  std::vector<Condition> dirichlet(const std::vector<int>& fields, Side side, const Vec& x,
                                   double t) const;
};

/// Catalog names accepted by make_problem.
std::vector<std::string> catalog_names();
std::unique_ptr<Problem> make_problem(const std::string& name, const ProblemKnobs& knobs = {});

/// Interior rows of `side` at x; WrongSide if x is not classified there.
std::vector<ConditionRow> interior_rows(const Problem& p, const PiecewiseRfmModel& m,
                                        const Vec& x, double t, Side side);
/// Value and flux jump rows; NotOnInterface when |F| > tol.
std::vector<ConditionRow> jump_rows(const Problem& p, const PiecewiseRfmModel& m, const Vec& x,
                                    double t, double tol = 1e-10);
/// Dirichlet rows; NotOnBoundary when x is not on the domain boundary.
std::vector<ConditionRow> boundary_rows(const Problem& p, const PiecewiseRfmModel& m,
                                        const Vec& x, double t, double tol = 1e-9);
/// Initial rows at t = 0; StationaryProblem for stationary problems.
std::vector<ConditionRow> initial_rows(const Problem& p, const PiecewiseRfmModel& m,
                                       const Vec& x);
/// Exact field value; NoExactSolution when the problem has none.
double exact_error_data(const Problem& p, int field, Side side, const Vec& x, double t);

/// Turns conditions at one point into sparse rows, sharing basis tables.
std::vector<ConditionRow> realize(const PiecewiseRfmModel& m, const std::vector<Condition>& conds,
                                  const Vec& x, double t, bool with_time, RowTag tag);

}  // namespace rfm
