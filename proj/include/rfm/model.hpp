#pragma once

// Piecewise random-feature model: column layout and evaluation.
//
// Columns are patch-major. Patch n owns a contiguous range of B * J_n columns,
// where B is the number of (field, side) blocks; inside it, block b holds the
// J_n coefficients of that block's features on patch n.

#include "rfm/features.hpp"
#include "rfm/types.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rfm {

enum class SideSupport : std::uint8_t { One, Two, Both };

struct FieldSpec {
  std::string name;
  SideSupport support = SideSupport::Both;
};

class FieldLayout {
 public:
  FieldLayout() = default;
  explicit FieldLayout(std::vector<FieldSpec> fields);

  const std::vector<FieldSpec>& fields() const { return fields_; }
  int num_fields() const { return static_cast<int>(fields_.size()); }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int field_index(const std::string& name) const;
  bool supports(int field, Side side) const;
  /// Block of (field, side); throws UnsupportedSideField.
  int block(int field, Side side) const;
  std::pair<int, Side> block_key(int block) const { return blocks_[block]; }

 private:
  std::vector<FieldSpec> fields_;
  std::vector<std::pair<int, Side>> blocks_;
};

/// Geometry of the patch tiling, shared by every block.
struct PatchGrid {
  std::vector<Vec> centers;
  std::vector<Vec> radii;
  std::vector<int> J;

  int size() const { return static_cast<int>(centers.size()); }
  /// Regular tensor grid: `counts` patches per axis covering [lower, upper].
  static PatchGrid tensor(const Vec& lower, const Vec& upper, const std::vector<int>& counts,
                          int J);
};

struct ModelOptions {
  PoUKind pou = PoUKind::A;
  Activation activation = Activation::Tanh;
  double R = 1.0;
  std::uint64_t seed = 0;
};

class PiecewiseRfmModel {
 public:
  PiecewiseRfmModel(FieldLayout layout, PatchGrid grid, ModelOptions options);

  const FieldLayout& layout() const { return layout_; }
  const PatchGrid& grid() const { return grid_; }
  const ModelOptions& options() const { return options_; }
  int dim() const { return grid_.centers.front().size(); }
  int num_patches() const { return grid_.size(); }
  long num_columns() const { return offsets_.back(); }

  const Patch& patch(int block, int n) const { return patches_[block * num_patches() + n]; }
  long column(int block, int n, int j) const {
    return offsets_[n] + static_cast<long>(block) * grid_.J[n] + j;
  }
  /// First column of patch n and the number of columns it owns.
  long patch_begin(int n) const { return offsets_[n]; }
  long patch_width(int n) const { return offsets_[n + 1] - offsets_[n]; }

  /// Column of (side, field, patch, j); throws UnsupportedSideField.
  long column_index(Side side, int field, int n, int j) const;

  /// Patches whose PoU support contains x. For the indicator PoU only the
  /// lowest-index containing patch is returned, so the tiling is a partition.
  std::vector<int> active_patches(const Vec& x) const;

  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  void set_coefficients(Eigen::VectorXd c);

  double eval(int field, Side side, const Vec& x, const MultiIndex& order) const;
  double eval(int field, Side side, const Vec& x, const MultiIndex& order,
              const Eigen::VectorXd& coeffs) const;
  /// Sparse row (column, value) such that eval = row . coefficients.
  std::vector<std::pair<long, double>> basis_row(int field, Side side, const Vec& x,
                                                 const MultiIndex& order) const;

  void save(std::ostream& os) const;
  static PiecewiseRfmModel load(std::istream& is);

 private:
  FieldLayout layout_;
  PatchGrid grid_;
  ModelOptions options_;
  std::vector<Patch> patches_;
  std::vector<long> offsets_;
  Eigen::VectorXd coeffs_;
};

/// Model coordinates: spatial point followed by time for space-time models.
Vec model_coords(const Vec& x, double t, bool with_time);

}  // namespace rfm
