#include "rfm/model.hpp"

#include "rfm/errors.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace rfm {

FieldLayout::FieldLayout(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw Error(ErrorCode::InvalidArgument, "layout needs at least one field");
  for (int f = 0; f < num_fields(); ++f) {
    if (fields_[f].support != SideSupport::Two) blocks_.emplace_back(f, Side::One);
    if (fields_[f].support != SideSupport::One) blocks_.emplace_back(f, Side::Two);
  }
}

int FieldLayout::field_index(const std::string& name) const {
  for (int f = 0; f < num_fields(); ++f)
    if (fields_[f].name == name) return f;
  throw Error(ErrorCode::UnsupportedSideField, "no field named '" + name + "'");
}

bool FieldLayout::supports(int field, Side side) const {
  if (field < 0 || field >= num_fields()) return false;
  const auto s = fields_[field].support;
  return s == SideSupport::Both || (s == SideSupport::One) == (side == Side::One);
}

int FieldLayout::block(int field, Side side) const {
  for (int b = 0; b < num_blocks(); ++b)
    if (blocks_[b].first == field && blocks_[b].second == side) return b;
  throw Error(ErrorCode::UnsupportedSideField,
              "field " + std::to_string(field) + " has no side " + to_string(side));
}

PatchGrid PatchGrid::tensor(const Vec& lower, const Vec& upper, const std::vector<int>& counts,
                            int J) {
  const int d = static_cast<int>(lower.size());
  if (static_cast<int>(counts.size()) != d)
    throw Error(ErrorCode::DimensionMismatch, "patch counts per axis");
  PatchGrid g;
  Vec r(d);
  for (int a = 0; a < d; ++a) r[a] = (upper[a] - lower[a]) / (2.0 * counts[a]);
  int total = 1;
  for (int c : counts) total *= c;
  // Lexicographic order with the first axis slowest.
  for (int idx = 0; idx < total; ++idx) {
    Vec c(d);
    int rem = idx;
    for (int a = d - 1; a >= 0; --a) {
      const int i = rem % counts[a];
      rem /= counts[a];
      c[a] = lower[a] + (2 * i + 1) * r[a];
    }
    g.centers.push_back(c);
    g.radii.push_back(r);
    g.J.push_back(J);
  }
  return g;
}

PiecewiseRfmModel::PiecewiseRfmModel(FieldLayout layout, PatchGrid grid, ModelOptions options)
    : layout_(std::move(layout)), grid_(std::move(grid)), options_(options) {
  if (grid_.size() == 0) throw Error(ErrorCode::InvalidArgument, "model needs patches");
  if (grid_.radii.size() != grid_.centers.size() || grid_.J.size() != grid_.centers.size())
    throw Error(ErrorCode::DimensionMismatch, "patch grid arrays differ in length");
  const int B = layout_.num_blocks();
  const int P = grid_.size();
  offsets_.assign(P + 1, 0);
  for (int n = 0; n < P; ++n) offsets_[n + 1] = offsets_[n] + static_cast<long>(B) * grid_.J[n];
  patches_.reserve(static_cast<std::size_t>(B) * P);
  for (int b = 0; b < B; ++b)
    for (int n = 0; n < P; ++n)
      patches_.push_back(init_patch(grid_.centers[n], grid_.radii[n], grid_.J[n], options_.R,
                                    options_.activation,
                                    {options_.seed, static_cast<std::uint64_t>(b),
                                     static_cast<std::uint64_t>(n)}));
  coeffs_ = Eigen::VectorXd::Zero(num_columns());
}

long PiecewiseRfmModel::column_index(Side side, int field, int n, int j) const {
  const int b = layout_.block(field, side);
  if (n < 0 || n >= num_patches() || j < 0 || j >= grid_.J[n])
    throw Error(ErrorCode::InvalidArgument, "patch or feature index out of range");
  return column(b, n, j);
}

std::vector<int> PiecewiseRfmModel::active_patches(const Vec& x) const {
  std::vector<int> out;
  for (int n = 0; n < num_patches(); ++n) {
    if (in_support(options_.pou, patches_[n], x)) {
      out.push_back(n);
      if (options_.pou == PoUKind::A) break;
    }
  }
  return out;
}

void PiecewiseRfmModel::set_coefficients(Eigen::VectorXd c) {
  if (c.size() != num_columns())
    throw Error(ErrorCode::DimensionMismatch, "coefficient vector length differs from M");
  coeffs_ = std::move(c);
}

double PiecewiseRfmModel::eval(int field, Side side, const Vec& x, const MultiIndex& order) const {
  return eval(field, side, x, order, coeffs_);
}

double PiecewiseRfmModel::eval(int field, Side side, const Vec& x, const MultiIndex& order,
                               const Eigen::VectorXd& coeffs) const {
  if (order.order() > 2) throw Error(ErrorCode::UnsupportedOrder, "derivative order above 2");
  const int b = layout_.block(field, side);
  const int slot = derivative_slot(dim(), order);
  double s = 0.0;
  Eigen::MatrixXd T;
  for (int n : active_patches(x)) {
    basis_table(patch(b, n), options_.pou, x, T);
    s += T.col(slot).dot(coeffs.segment(column(b, n, 0), grid_.J[n]));
  }
  return s;
}

std::vector<std::pair<long, double>> PiecewiseRfmModel::basis_row(int field, Side side,
                                                                  const Vec& x,
                                                                  const MultiIndex& order) const {
  if (order.order() > 2) throw Error(ErrorCode::UnsupportedOrder, "derivative order above 2");
  const int b = layout_.block(field, side);
  const int slot = derivative_slot(dim(), order);
  std::vector<std::pair<long, double>> row;
  Eigen::MatrixXd T;
  for (int n : active_patches(x)) {
    basis_table(patch(b, n), options_.pou, x, T);
    for (int j = 0; j < grid_.J[n]; ++j) row.emplace_back(column(b, n, j), T(j, slot));
  }
  return row;
}

namespace {

const char* support_name(SideSupport s) {
  switch (s) {
    case SideSupport::One: return "one";
    case SideSupport::Two: return "two";
    case SideSupport::Both: return "both";
  }
  return "?";
}

SideSupport parse_support(const std::string& s) {
  if (s == "one") return SideSupport::One;
  if (s == "two") return SideSupport::Two;
  if (s == "both") return SideSupport::Both;
  throw Error(ErrorCode::Io, "bad side support '" + s + "'");
}

template <class T>
T read(std::istream& is, const char* what) {
  T v;
  if (!(is >> v)) throw Error(ErrorCode::Io, std::string("model file: cannot read ") + what);
  return v;
}

void expect(std::istream& is, const std::string& word) {
  const auto got = read<std::string>(is, word.c_str());
  if (got != word) throw Error(ErrorCode::Io, "model file: expected '" + word + "', got '" + got + "'");
}

}  // namespace

void PiecewiseRfmModel::save(std::ostream& os) const {
  os << std::setprecision(17);
  os << "rfm-model 1\n";
  os << "dim " << dim() << "\n";
  os << "pou " << to_string(options_.pou) << "\n";
  os << "activation " << to_string(options_.activation) << "\n";
  os << "R " << options_.R << "\n";
  os << "seed " << options_.seed << "\n";
  os << "fields " << layout_.num_fields() << "\n";
  for (const auto& f : layout_.fields()) os << f.name << " " << support_name(f.support) << "\n";
  os << "patches " << num_patches() << "\n";
  for (int n = 0; n < num_patches(); ++n) {
    os << grid_.J[n];
    for (int a = 0; a < dim(); ++a) os << " " << grid_.centers[n][a];
    for (int a = 0; a < dim(); ++a) os << " " << grid_.radii[n][a];
    os << "\n";
  }
  os << "coefficients " << num_columns() << "\n";
  for (long i = 0; i < num_columns(); ++i) os << coeffs_[i] << "\n";
}

PiecewiseRfmModel PiecewiseRfmModel::load(std::istream& is) {
  expect(is, "rfm-model");
  if (read<int>(is, "version") != 1) throw Error(ErrorCode::Io, "unsupported model version");
  expect(is, "dim");
  const int d = read<int>(is, "dim");
  ModelOptions opt;
  expect(is, "pou");
  opt.pou = parse_pou(read<std::string>(is, "pou"));
  expect(is, "activation");
  opt.activation = parse_activation(read<std::string>(is, "activation"));
  expect(is, "R");
  opt.R = read<double>(is, "R");
  expect(is, "seed");
  opt.seed = read<std::uint64_t>(is, "seed");
  expect(is, "fields");
  const int nf = read<int>(is, "field count");
  std::vector<FieldSpec> fields;
  for (int f = 0; f < nf; ++f) {
    FieldSpec fs;
    fs.name = read<std::string>(is, "field name");
    fs.support = parse_support(read<std::string>(is, "field support"));
    fields.push_back(fs);
  }
  expect(is, "patches");
  const int np = read<int>(is, "patch count");
  PatchGrid g;
  for (int n = 0; n < np; ++n) {
    g.J.push_back(read<int>(is, "J"));
    Vec c(d), r(d);
    for (int a = 0; a < d; ++a) c[a] = read<double>(is, "center");
    for (int a = 0; a < d; ++a) r[a] = read<double>(is, "radius");
    g.centers.push_back(c);
    g.radii.push_back(r);
  }
  PiecewiseRfmModel m(FieldLayout(std::move(fields)), std::move(g), opt);
  expect(is, "coefficients");
  const long M = read<long>(is, "coefficient count");
  if (M != m.num_columns()) throw Error(ErrorCode::Io, "coefficient count differs from layout");
  Eigen::VectorXd c(M);
  for (long i = 0; i < M; ++i) c[i] = read<double>(is, "coefficient");
  m.set_coefficients(std::move(c));
  return m;
}

Vec model_coords(const Vec& x, double t, bool with_time) {
  if (!with_time) return x;
  Vec y(x.size() + 1);
  y.head(x.size()) = x;
  y[x.size()] = t;
  return y;
}

}  // namespace rfm
