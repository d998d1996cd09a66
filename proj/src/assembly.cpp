#include "rfm/assembly.hpp"

#include "rfm/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <climits>
#include <cmath>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

namespace rfm {

int grid_side(long Q, int dim) {
  if (Q < 1) throw Error(ErrorCode::Config, "Q must be positive");
  const long n = std::lround(std::pow(static_cast<double>(Q), 1.0 / dim));
  for (long k = std::max(1L, n - 1); k <= n + 1; ++k) {
    long p = 1;
    for (int a = 0; a < dim; ++a) p *= k;
    if (p == Q) return static_cast<int>(k);
  }
  throw Error(ErrorCode::Config,
              "Q = " + std::to_string(Q) + " is not a perfect power of dimension " + std::to_string(dim));
}

std::vector<Vec> cell_grid(const Vec& lower, const Vec& upper, const std::vector<int>& n) {
  const int d = static_cast<int>(lower.size());
  long total = 1;
  for (int a = 0; a < d; ++a) total *= n[a];
  std::vector<Vec> out;
  out.reserve(total);
  std::vector<int> idx(d, 0);
  for (long k = 0; k < total; ++k) {
    Vec x(d);
    for (int a = 0; a < d; ++a)
      x[a] = lower[a] + (upper[a] - lower[a]) * (idx[a] + 0.5) / n[a];
    out.push_back(x);
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < n[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

namespace {

bool uses_side(const FieldLayout& layout, Side s) {
  for (int f = 0; f < layout.num_fields(); ++f)
    if (layout.supports(f, s)) return true;
  return false;
}

// Model-coordinate box of the problem: spatial box, then [0, T].
std::pair<Vec, Vec> model_box(const Problem& p) {
  const int sd = p.spatial_dim;
  Vec lo(p.model_dim()), hi(p.model_dim());
  lo.head(sd) = p.domain->lower;
  hi.head(sd) = p.domain->upper;
  if (p.time_dependent) {
    lo[sd] = 0.0;
    hi[sd] = p.T;
  }
  return {lo, hi};
}

std::vector<double> slice_times(const Problem& p, int n) {
  if (!p.time_dependent) return {0.0};
  if (n < 1) throw Error(ErrorCode::Config, "n_time_slices must be positive");
  if (n == 1) return {p.T};
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = p.T * k / (n - 1);
  return t;
}

}  // namespace

std::vector<ContinuityPoint> continuity_points(const Problem& p, const PiecewiseRfmModel& m,
                                               int per_face) {
  std::vector<ContinuityPoint> out;
  if (m.options().pou != PoUKind::A || m.num_patches() < 2) return out;
  const auto [lo, hi] = model_box(p);
  const int sd = p.spatial_dim;
  const int d = m.dim();
  const auto& g = m.grid();
  for (int a = 0; a < g.size(); ++a) {
    for (int b = a + 1; b < g.size(); ++b) {
      const Vec &ca = g.centers[a], &cb = g.centers[b], &ra = g.radii[a], &rb = g.radii[b];
      int axis = -1;
      bool overlap = true;
      for (int k = 0; k < d && overlap; ++k) {
        const double gap = std::abs(ca[k] - cb[k]);
        const double touch = ra[k] + rb[k];
        if (std::abs(gap - touch) <= 1e-12 * touch) {
          if (axis >= 0) overlap = false;  // edge or corner contact
          axis = k;
        } else {
          const double l = std::max(ca[k] - ra[k], cb[k] - rb[k]);
          const double h = std::min(ca[k] + ra[k], cb[k] + rb[k]);
          overlap = h - l > 1e-12 * (ra[k] + rb[k]);
        }
      }
      if (!overlap || axis < 0) continue;
      Vec flo(d - 1), fhi(d - 1);
      std::vector<int> counts;
      for (int k = 0, q = 0; k < d; ++k) {
        if (k == axis) continue;
        flo[q] = std::max(ca[k] - ra[k], cb[k] - rb[k]);
        fhi[q] = std::min(ca[k] + ra[k], cb[k] + rb[k]);
        counts.push_back(per_face);
        ++q;
      }
      const double face = ca[axis] < cb[axis] ? ca[axis] + ra[axis] : ca[axis] - ra[axis];
      for (const Vec& f : cell_grid(flo, fhi, counts)) {
        Vec c(d);
        for (int k = 0, q = 0; k < d; ++k) c[k] = k == axis ? face : f[q++];
        const Vec x = c.head(sd);
        const double t = p.time_dependent ? c[sd] : 0.0;
        if (!p.domain->contains(x, t)) continue;
        if (p.time_dependent && (t < lo[sd] || t > hi[sd])) continue;
        out.push_back({c, a, b, axis});
      }
    }
  }
  return out;
}

CollocationSet generate_collocation(const Problem& p, const PiecewiseRfmModel& m,
                                    const CollocationOptions& opt) {
  if (p.model_dim() != m.dim()) throw Error(ErrorCode::DimensionMismatch, "model/problem dimension");
  CollocationSet cs;
  const DomainBox& box = *p.domain;
  const LevelSet& ls = *p.interface;
  const int sd = p.spatial_dim;
  const int d = p.model_dim();
  const auto [lo, hi] = model_box(p);

  const int n = grid_side(opt.Q, d);
  for (const Vec& c : cell_grid(lo, hi, std::vector<int>(d, n))) {
    const Vec x = c.head(sd);
    const double t = p.time_dependent ? c[sd] : 0.0;
    switch (classify(box, ls, x, t)) {
      case Subdomain::One: cs.interior1.push_back({x, t}); break;
      case Subdomain::Two: cs.interior2.push_back({x, t}); break;
      case Subdomain::Outside: break;
    }
  }
  if (uses_side(p.layout, Side::One) && cs.interior1.empty())
    throw Error(ErrorCode::EmptySubdomain, "no interior points in subdomain One");
  if (uses_side(p.layout, Side::Two) && cs.interior2.empty())
    throw Error(ErrorCode::EmptySubdomain, "no interior points in subdomain Two");

  const auto times = slice_times(p, opt.n_time_slices);
  if (p.K_J > 0 && opt.n_interface > 0) {
    for (double t : times)
      for (const Vec& x : sample_interface(ls, opt.n_interface, t)) {
        if (!box.contains(x, t)) continue;
        cs.interface.push_back({x, t, unit_normal(ls, x, t)});
      }
  }
  if (opt.n_boundary > 0) {
    for (double t : times)
      for (const Vec& x : sample_boundary(box, opt.n_boundary, opt.n_hole, t)) cs.boundary.push_back({x, t});
  }
  if (p.time_dependent) {
    std::vector<int> counts(sd);
    for (int a = 0; a < sd; ++a) counts[a] = opt.n_initial > 0 ? opt.n_initial : n;
    for (const Vec& x : cell_grid(box.lower, box.upper, counts))
      if (box.contains(x, 0.0)) cs.initial.push_back({x, 0.0});
  }
  int per_face = opt.continuity_per_face;
  if (per_face <= 0) {
    // Match the interior grid density along the first face-tangential axis.
    const double h = (hi[0] - lo[0]) / n;
    per_face = std::max(1, static_cast<int>(std::lround(2.0 * m.grid().radii[0][0] / h)));
  }
  cs.continuity = continuity_points(p, m, per_face);
  return cs;
}

std::vector<ConditionRow> continuity_rows(const PiecewiseRfmModel& m, const ContinuityPoint& cp,
                                          bool with_time) {
  const int d = m.dim();
  const int B = m.layout().num_blocks();
  const int slots[2] = {0, derivative_slot(d, MultiIndex::d(cp.axis))};
  const int sd = with_time ? d - 1 : d;
  std::vector<ConditionRow> rows;
  Eigen::MatrixXd ta, tb;
  for (int blk = 0; blk < B; ++blk) {
    basis_table(m.patch(blk, cp.patch_a), m.options().pou, cp.coords, ta);
    basis_table(m.patch(blk, cp.patch_b), m.options().pou, cp.coords, tb);
    for (int s = 0; s < 2; ++s) {
      ConditionRow r;
      r.tag = RowTag::Continuity;
      r.point = cp.coords.head(sd);
      r.t = with_time ? cp.coords[sd] : 0.0;
      r.component = s;
      for (int j = 0; j < ta.rows(); ++j)
        if (ta(j, slots[s]) != 0.0) r.coeffs.emplace_back(m.column(blk, cp.patch_a, j), ta(j, slots[s]));
      for (int j = 0; j < tb.rows(); ++j)
        if (tb(j, slots[s]) != 0.0) r.coeffs.emplace_back(m.column(blk, cp.patch_b, j), -tb(j, slots[s]));
      std::sort(r.coeffs.begin(), r.coeffs.end());
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

double row_rescale(ConditionRow& row, double c) {
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "penalty constant must be positive");
  double mx = 0.0;
  for (const auto& e : row.coeffs) mx = std::max(mx, std::abs(e.second));
  if (mx == 0.0) throw Error(ErrorCode::ZeroRow, std::string("all-zero ") + to_string(row.tag) + " row");
  const double lambda = c / mx;
  for (auto& e : row.coeffs) e.second *= lambda;
  row.rhs *= lambda;
  return lambda;
}

LinearSystem::MatrixView LinearSystem::matrix() const {
  return MatrixView(rows, cols, nnz(), row_ptr.data(), col_idx.data(), values.data());
}

void LinearSystem::append(const ConditionRow& row, double lambda) {
  if (values.size() + row.coeffs.size() > static_cast<std::size_t>(INT_MAX))
    throw Error(ErrorCode::InvalidArgument, "system exceeds 2^31 nonzeros");
  for (const auto& [c, v] : row.coeffs) {
    col_idx.push_back(static_cast<int>(c));
    values.push_back(v);
  }
  row_ptr.push_back(static_cast<int>(values.size()));
  meta.push_back({row.tag, row.component, lambda});
  ++rows;
}

long LinearSystem::count(RowTag tag) const {
  return std::count_if(meta.begin(), meta.end(), [tag](const RowMeta& r) { return r.tag == tag; });
}

LinearSystem assemble(const Problem& p, const PiecewiseRfmModel& m, const CollocationSet& cs,
                      const AssemblyOptions& opt) {
  const bool td = p.time_dependent;
  // Every collocation point becomes one generator call, in a fixed order.
  std::vector<std::function<std::vector<ConditionRow>(std::size_t)>> gens;
  std::vector<std::size_t> sizes;
  auto add = [&](std::size_t n, std::function<std::vector<ConditionRow>(std::size_t)> f) {
    gens.push_back(std::move(f));
    sizes.push_back(n);
  };
  add(cs.interior1.size(), [&](std::size_t i) {
    const auto& q = cs.interior1[i];
    return realize(m, p.interior(q.x, q.t, Side::One), q.x, q.t, td, RowTag::Interior1);
  });
  add(cs.interior2.size(), [&](std::size_t i) {
    const auto& q = cs.interior2[i];
    return realize(m, p.interior(q.x, q.t, Side::Two), q.x, q.t, td, RowTag::Interior2);
  });
  add(cs.interface.size(), [&](std::size_t i) {
    const auto& q = cs.interface[i];
    auto conds = p.jump(q.x, q.t, q.n);
    const auto half = static_cast<std::ptrdiff_t>(conds.size() / 2);
    std::vector<Condition> flux(conds.begin() + half, conds.end());
    conds.resize(half);
    auto rows = realize(m, conds, q.x, q.t, td, RowTag::JumpValue);
    for (auto& r : realize(m, flux, q.x, q.t, td, RowTag::JumpFlux)) rows.push_back(std::move(r));
    return rows;
  });
  add(cs.boundary.size(), [&](std::size_t i) {
    const auto& q = cs.boundary[i];
    return realize(m, p.boundary(q.x, q.t, p.side_of(q.x, q.t)), q.x, q.t, td, RowTag::Boundary);
  });
  add(cs.initial.size(), [&](std::size_t i) {
    const auto& q = cs.initial[i];
    return realize(m, p.initial(q.x, p.side_of(q.x, 0.0)), q.x, 0.0, true, RowTag::Initial);
  });
  const auto anchors = p.anchors();
  add(anchors.size(), [&](std::size_t i) {
    const auto& a = anchors[i];
    return realize(m, {a.cond}, a.x, a.t, td, RowTag::Anchor);
  });
  add(cs.continuity.size(), [&](std::size_t i) { return continuity_rows(m, cs.continuity[i], td); });

  LinearSystem sys;
  sys.cols = m.num_columns();
  for (int n = 0; n < m.num_patches(); ++n) sys.groups.push_back(m.patch_begin(n));
  sys.groups.push_back(m.num_columns());
  std::vector<double> rhs;

  auto emit = [&](std::vector<ConditionRow>& rows) {
    for (auto& r : rows) {
      double lambda;
      try {
        lambda = row_rescale(r, opt.c);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroRow) throw;
        ++sys.dropped_rows;
        spdlog::debug("dropping {} row at t={}: {}", to_string(r.tag), r.t, e.what());
        continue;
      }
      sys.append(r, lambda);
      rhs.push_back(r.rhs);
    }
  };

  const int threads = std::max(1, opt.threads);
  constexpr std::size_t chunk = 1024;
  for (std::size_t g = 0; g < gens.size(); ++g) {
    for (std::size_t start = 0; start < sizes[g]; start += chunk * threads) {
      const std::size_t stop = std::min(sizes[g], start + chunk * threads);
      std::vector<std::vector<ConditionRow>> out(stop - start);
      auto work = [&](int w) {
        for (std::size_t i = start + w; i < stop; i += threads) out[i - start] = gens[g](i);
      };
      if (threads == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex mu;
        for (int w = 0; w < threads; ++w)
          pool.emplace_back([&, w] {
            try {
              work(w);
            } catch (...) {
              std::lock_guard lk(mu);
              if (!err) err = std::current_exception();
            }
          });
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
      }
      for (auto& rows : out) emit(rows);
    }
  }
  if (sys.dropped_rows > 0) spdlog::warn("dropped {} all-zero rows", sys.dropped_rows);
  sys.rhs = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<long>(rhs.size()));
  return sys;
}

void write_triplets(const LinearSystem& sys, std::ostream& os) {
  os << "rfm-system " << sys.rows << ' ' << sys.cols << ' ' << sys.nnz() << '\n';
  os << std::setprecision(17);
  for (long r = 0; r < sys.rows; ++r)
    for (int k = sys.row_ptr[r]; k < sys.row_ptr[r + 1]; ++k)
      os << r << ' ' << sys.col_idx[k] << ' ' << sys.values[k] << '\n';
  os << "rhs\n";
  for (long r = 0; r < sys.rows; ++r) os << sys.rhs[r] << '\n';
}

}  // namespace rfm
