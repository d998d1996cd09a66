#pragma once

// Collocation point sets, penalty rescaling, patch continuity rows and the
// assembled sparse least-squares system.

#include "rfm/problems.hpp"

#include <Eigen/SparseCore>

#include <iosfwd>
#include <vector>

namespace rfm {

struct CollocationPoint {
  Vec x;
  double t = 0.0;
};

struct InterfacePoint {
  Vec x;
  double t = 0.0;
  Vec n;
};

/// A point on the face shared by patches a and b, normal to `axis`.
struct ContinuityPoint {
  Vec coords;  // model coordinates
  int patch_a = 0, patch_b = 0;
  int axis = 0;
};

struct CollocationSet {
  std::vector<CollocationPoint> interior1, interior2;
  std::vector<InterfacePoint> interface;
  std::vector<CollocationPoint> boundary;
  std::vector<CollocationPoint> initial;
  std::vector<ContinuityPoint> continuity;

  std::size_t interior_count() const { return interior1.size() + interior2.size(); }
};

struct CollocationOptions {
  /// Interior grid points over the (space-time) box; must be a perfect power.
  long Q = 1600;
  /// Interface points per time slice.
  int n_interface = 0;
  /// Boundary points per time slice, as understood by sample_boundary.
  int n_boundary = 0;
  int n_hole = -1;
  /// Time slices for interface and boundary points, including t = 0 and t = T.
  int n_time_slices = 1;
  /// Points per axis of the t = 0 grid; 0 uses the interior grid's spatial spacing.
  int n_initial = 0;
  /// Points per axis on each shared patch face; 0 matches the interior grid density.
  int continuity_per_face = 0;
};

/// Points per axis of a grid with Q points in `dim` axes; throws Config unless exact.
int grid_side(long Q, int dim);

/// Cell-centered grid over [lower, upper] with n points per axis, first axis slowest.
std::vector<Vec> cell_grid(const Vec& lower, const Vec& upper, const std::vector<int>& n);

CollocationSet generate_collocation(const Problem& p, const PiecewiseRfmModel& m,
                                    const CollocationOptions& opt);

/// Face points of face-adjacent patches; empty for the smooth PoU or a single patch.
std::vector<ContinuityPoint> continuity_points(const Problem& p, const PiecewiseRfmModel& m,
                                               int per_face);

/// C0 and normal-derivative C1 rows for every (field, side) block at one face point.
std::vector<ConditionRow> continuity_rows(const PiecewiseRfmModel& m, const ContinuityPoint& cp,
                                          bool with_time);

/// Multiplies a row and its rhs by c / max|coeff| and returns the factor;
/// throws ZeroRow when every coefficient is zero.
double row_rescale(ConditionRow& row, double c);

struct RowMeta {
  RowTag tag;
  int component;
  double lambda;
};

/// N x M system in compressed row storage plus row provenance.
struct LinearSystem {
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
  using MatrixView = Eigen::Map<const Matrix>;

  long rows = 0, cols = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col_idx;
  std::vector<double> values;
  Eigen::VectorXd rhs;
  std::vector<RowMeta> meta;
  /// Column ranges [groups[g], groups[g+1]) owned by one patch each.
  std::vector<long> groups;
  /// Rows dropped because every raw coefficient was zero.
  long dropped_rows = 0;

  long nnz() const { return static_cast<long>(values.size()); }
  MatrixView matrix() const;
  void append(const ConditionRow& row, double lambda);
  long count(RowTag tag) const;
};

struct AssemblyOptions {
  double c = 100.0;
  int threads = 1;
};

LinearSystem assemble(const Problem& p, const PiecewiseRfmModel& m, const CollocationSet& colloc,
                      const AssemblyOptions& opt = {});

/// Plain-text dump: header "rfm-system N M nnz", then "row col value" lines,
/// then "rhs" and one value per row.
void write_triplets(const LinearSystem& sys, std::ostream& os);

}  // namespace rfm
