#pragma once

// Marker-based tracking of a closed planar interface: periodic cubic spline
// reconstruction, Runge-Kutta advection, arc-length redistribution and a
// signed-distance level set.

#include "rfm/geometry.hpp"

#include <Eigen/Core>

#include <functional>
#include <map>
#include <mutex>
#include <vector>

namespace rfm {

using Point2 = Eigen::Vector2d;
using VelocityField = std::function<Point2(const Point2&, double)>;

/// Periodic cubic interpolant with chord-length knots.
class PeriodicSpline {
 public:
  PeriodicSpline() = default;
  explicit PeriodicSpline(const std::vector<Point2>& points);

  int segments() const { return static_cast<int>(knots_.size()) - 1; }
  double period() const { return knots_.back(); }
  const std::vector<double>& knots() const { return knots_; }

  /// Position, first and second derivative at parameter s (wrapped).
  Point2 eval(double s) const;
  Point2 d1(double s) const;
  Point2 d2(double s) const;

  /// Arc length of segment i (Gauss-Legendre).
  double segment_length(int i) const;
  double length() const;
  /// Parameter at arc length `a` from the start of segment i.
  double param_at_length(int i, double a) const;

 private:
  int locate(double s, double& local) const;
  std::vector<Point2> y_;
  std::vector<Point2> m_;  // second derivatives at knots
  std::vector<double> knots_;
};

struct MarkerCurve {
  std::vector<Point2> markers;
  double time = 0.0;
  PeriodicSpline spline;

  MarkerCurve() = default;
  MarkerCurve(std::vector<Point2> markers, double time);
  static MarkerCurve circle(const Point2& center, double radius, int n, double time = 0.0);
};

/// Dormand-Prince fifth-order stepping with n_substeps equal steps.
MarkerCurve advect(const MarkerCurve& curve, const VelocityField& w, double t0, double t1,
                   int n_substeps);

/// Resample markers at equal arc length with spacing close to target_spacing.
MarkerCurve redistribute(const MarkerCurve& curve, double target_spacing, double min_spacing,
                         double max_spacing);

/// Shoelace area of the marker polygon (positive for counter-clockwise).
double polygon_area(const std::vector<Point2>& pts);
/// Winding number of the closed polygon around p.
int winding_number(const std::vector<Point2>& pts, const Point2& p);

/// Signed distance to the spline: negative inside, positive outside.
class CurveShape : public ImplicitShape {
 public:
  explicit CurveShape(MarkerCurve curve, int densify = 8);
  int dim() const override { return 2; }
  bool time_dependent() const override { return false; }
  double value(const Vec& x, double t) const override;
  Vec gradient(const Vec& x, double t) const override;
  std::vector<Vec> sample(int n, double t) const override;
  const MarkerCurve& curve() const { return curve_; }

 private:
  struct Closest {
    double s;
    double dist;
    Point2 point;
  };
  Closest closest(const Point2& p) const;
  MarkerCurve curve_;
  std::vector<Point2> dense_;
  std::vector<double> dense_s_;
  double orientation_ = 1.0;
};

LevelSet curve_levelset(const MarkerCurve& curve);

struct TrackingOptions {
  int markers = 512;
  double substeps_per_unit_time = 100.0;
  double min_factor = 0.5;
  double max_factor = 2.0;
};

/// Interface advected from an initial curve; snapshots are kept on a fixed
/// time grid and other times are advected from the preceding snapshot.
class TrackedInterface : public ImplicitShape {
 public:
  TrackedInterface(MarkerCurve initial, VelocityField w, std::vector<double> snapshot_times,
                   TrackingOptions options = {});
  int dim() const override { return 2; }
  bool time_dependent() const override { return true; }
  double value(const Vec& x, double t) const override;
  Vec gradient(const Vec& x, double t) const override;
  std::vector<Vec> sample(int n, double t) const override;

  const CurveShape& at(double t) const;
  const std::map<double, std::shared_ptr<const CurveShape>>& snapshots() const { return snaps_; }

 private:
  MarkerCurve step(const MarkerCurve& from, double t1) const;
  VelocityField w_;
  TrackingOptions opt_;
  double target_ = 0.0;
  std::map<double, std::shared_ptr<const CurveShape>> snaps_;
  mutable std::mutex mu_;
  mutable std::map<double, std::shared_ptr<const CurveShape>> cache_;
};

/// Velocity driving the Oseen interface.
Point2 oseen_velocity(const Point2& x, double t);

}  // namespace rfm
