#include "rfm/cli.hpp"

#include "rfm/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace rfm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& v) {
  T x{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    if constexpr (std::is_integral_v<T>)
      throw Error(ErrorCode::Config, "expected an integer, got '" + v + "'");
    else
      throw Error(ErrorCode::Config, "expected a number, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::Config, "expected true or false, got '" + v + "'");
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Field {
  std::string key, doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define RFM_INT(name, doc)                                                                 \
  Field {                                                                                  \
    #name, doc, [](RunConfig& c, const std::string& v) { c.name = parse_number<decltype(c.name)>(v); }, \
        [](const RunConfig& c) { return std::to_string(c.name); }                          \
  }
#define RFM_REAL(name, doc)                                                                  \
  Field {                                                                                    \
    #name, doc, [](RunConfig& c, const std::string& v) { c.name = parse_number<double>(v); }, \
        [](const RunConfig& c) { return num(c.name); }                                       \
  }
#define RFM_BOOL(name, doc)                                                          \
  Field {                                                                            \
    #name, doc, [](RunConfig& c, const std::string& v) { c.name = parse_bool(v); }, \
        [](const RunConfig& c) { return std::string(c.name ? "true" : "false"); }   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"problem", "catalog name",
       [](RunConfig& c, const std::string& v) {
         const auto names = catalog_names();
         if (std::find(names.begin(), names.end(), v) == names.end())
           throw Error(ErrorCode::Config, "unknown problem '" + v + "'");
         c.problem = v;
       },
       [](const RunConfig& c) { return c.problem; }},
      RFM_INT(seed, "random feature seed"),
      RFM_INT(J, "features per field, side and patch"),
      RFM_INT(Q, "interior collocation points (perfect power of the model dimension)"),
      RFM_INT(n_interface, "interface points per time slice"),
      RFM_INT(n_boundary, "boundary points per face and time slice"),
      RFM_INT(n_hole, "points per hole boundary and time slice; -1 follows the boundary density"),
      RFM_INT(n_time_slices, "time slices for interface and boundary points"),
      RFM_INT(n_initial, "initial points"),
      RFM_INT(continuity_per_face, "continuity points per tangential axis of a patch face"),
      {"pou", "partition of unity: A (indicator) or B (smooth)",
       [](RunConfig& c, const std::string& v) { c.pou = parse_pou(v); },
       [](const RunConfig& c) { return std::string(to_string(c.pou)); }},
      {"activation", "tanh, sin or cos",
       [](RunConfig& c, const std::string& v) { c.activation = parse_activation(v); },
       [](const RunConfig& c) { return std::string(to_string(c.activation)); }},
      RFM_REAL(R, "feature parameter range [-R, R]"),
      RFM_REAL(c, "row scaling target"),
      RFM_INT(refinement, "evaluation grid refinement over the collocation grid"),
      {"solver", "auto, dense, spqr or block",
       [](RunConfig& c, const std::string& v) { c.solver = parse_solver(v); },
       [](const RunConfig& c) { return std::string(to_string(c.solver)); }},
      RFM_REAL(damping, "block solver damping relative to the largest entry; negative picks it from the system shape"),
      RFM_REAL(rank_tol, "relative rank threshold; 0 uses library defaults"),
      RFM_INT(threads, "assembly threads"),
      RFM_REAL(fsi_radius, "radius in the fluid-solid velocity; 0 uses |x|"),
      RFM_BOOL(derivatives, "report first-derivative errors where the problem has them"),
      RFM_BOOL(dump_fields, "write evaluation-grid field values"),
      RFM_BOOL(dump_system, "write the assembled system as triplets"),
      RFM_BOOL(dump_model, "write the solved model"),
      {"label", "free text copied to the CSV", [](RunConfig& c, const std::string& v) { c.label = v; },
       [](const RunConfig& c) { return c.label; }},
  };
  return f;
}

#undef RFM_INT
#undef RFM_REAL
#undef RFM_BOOL

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw Error(ErrorCode::Config, "unknown key");
}

struct Preset {
  int J;
  long Q;
  int n_interface, n_boundary, n_hole, n_time_slices, n_initial, per_face;
};

// Smallest benchmark configuration of each problem.
const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> p = {
      {"elliptic_circle", {200, 1600, 502, 40, -1, 1, 0, 20}},
      {"elliptic_complex", {400, 160000, 2208, 400, 200, 1, 0, 50}},
      {"stokes2d_case1", {100, 1600, 60, 40, -1, 1, 0, 5}},
      {"stokes2d_case2", {100, 1600, 60, 40, -1, 1, 0, 5}},
      {"stokes2d_case3", {100, 1600, 60, 40, -1, 1, 0, 5}},
      {"stokes3d_sphere_smooth", {600, 64000, 1600, 400, -1, 1, 0, 20}},
      {"stokes3d_sphere_nonsmooth", {600, 64000, 1600, 400, -1, 1, 0, 20}},
      {"stokes3d_torus", {800, 64000, 1, 400, -1, 1, 0, 20}},
      {"elasticity3d", {800, 64000, 1600, 400, -1, 1, 0, 20}},
      {"parabolic_circle", {800, 64000, 365, 40, -1, 40, 40, 10}},
      {"parabolic_merge", {50, 64000, 459, 40, -1, 40, 40, 10}},
      {"oseen2d", {600, 64000, 200, 40, -1, 40, 40, 20}},
      {"fsi2d", {400, 8000, 91, 20, 20, 20, 20, 5}},
  };
  return p;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_schema() {
  static const auto s = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.key, f.doc);
    return out;
  }();
  return s;
}

std::vector<RunConfig> parse_config(const std::string& text, const std::string& source, bool allow_lists) {
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
  std::vector<int> lines;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](int ln, const std::string& key, const std::string& msg) {
    throw Error(ErrorCode::Config,
                source + ":" + std::to_string(ln) + (key.empty() ? "" : ": " + key) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "", "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const bool known = std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return f.key == key; });
    if (!known) fail(lineno, key, "unknown key");
    for (const auto& e : entries)
      if (e.first == key) fail(lineno, key, "duplicate key");
    auto values = key == "label" ? std::vector<std::string>{value} : split(value, ',');
    if (values.empty() || std::any_of(values.begin(), values.end(), [](const auto& v) { return v.empty(); }))
      fail(lineno, key, "missing value");
    if (values.size() > 1 && !allow_lists) fail(lineno, key, "value lists are only allowed in sweeps");
    // Validate each value now so errors point at the line.
    for (const auto& v : values) {
      RunConfig probe;
      try {
        field(key).set(probe, v);
      } catch (const Error& e) {
        std::string msg = e.what();
        const auto colon = msg.find(": ");
        fail(lineno, key, colon == std::string::npos ? msg : msg.substr(colon + 2));
      }
    }
    entries.emplace_back(key, std::move(values));
    lines.push_back(lineno);
  }
  if (std::none_of(entries.begin(), entries.end(), [](const auto& e) { return e.first == "problem"; }))
    fail(lineno, "problem", "required key missing");

  std::vector<RunConfig> out(1);
  for (const auto& [key, values] : entries) {
    std::vector<RunConfig> next;
    for (const auto& base : out)
      for (const auto& v : values) {
        RunConfig c = base;
        field(key).set(c, v);
        next.push_back(std::move(c));
      }
    out = std::move(next);
  }
  return out;
}

std::vector<RunConfig> load_config(const std::filesystem::path& path, bool allow_lists) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), allow_lists);
}

void apply_override(std::vector<RunConfig>& cfgs, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::Config, "override '" + assignment + "': expected key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  try {
    for (auto& c : cfgs) field(key).set(c, value);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, "override " + key + ": " + e.what());
  }
}

RunConfig preset(const std::string& problem) {
  RunConfig c;
  c.problem = problem;
  return resolve(c);
}

RunConfig resolve(RunConfig c) {
  const auto it = presets().find(c.problem);
  if (it == presets().end()) throw Error(ErrorCode::Config, "unknown problem '" + c.problem + "'");
  const Preset& p = it->second;
  auto fill = [](auto& v, auto d) {
    if (v < 0) v = d;
  };
  fill(c.J, p.J);
  fill(c.Q, p.Q);
  fill(c.n_interface, p.n_interface);
  fill(c.n_boundary, p.n_boundary);
  fill(c.n_hole, p.n_hole);
  fill(c.n_time_slices, p.n_time_slices);
  fill(c.n_initial, p.n_initial);
  fill(c.continuity_per_face, p.per_face);
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::Config, what);
  };
  need(c.J >= 1, "J must be positive");
  need(c.Q >= 1, "Q must be positive");
  need(c.n_time_slices >= 1, "n_time_slices must be positive");
  need(c.refinement >= 1, "refinement must be positive");
  need(c.threads >= 1, "threads must be positive");
  need(c.R > 0.0, "R must be positive");
  need(c.c > 0.0, "c must be positive");
  return c;
}

std::string format_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& f : fields()) {
    if (f.key == "label" && cfg.label.empty()) continue;
    os << f.key << " = " << f.get(cfg) << "\n";
  }
  return os.str();
}

namespace {

struct Built {
  std::unique_ptr<Problem> problem;
  std::unique_ptr<PiecewiseRfmModel> model;
  CollocationOptions colloc;
};

Built build(const RunConfig& cfg) {
  Built b;
  ProblemKnobs knobs;
  knobs.fsi_radius = cfg.fsi_radius;
  b.problem = make_problem(cfg.problem, knobs);
  ModelOptions mo;
  mo.pou = cfg.pou;
  mo.activation = cfg.activation;
  mo.R = cfg.R;
  mo.seed = cfg.seed;
  b.model = std::make_unique<PiecewiseRfmModel>(b.problem->layout, b.problem->default_patches(cfg.J), mo);
  b.colloc.Q = cfg.Q;
  b.colloc.n_interface = cfg.n_interface;
  b.colloc.n_boundary = cfg.n_boundary;
  b.colloc.n_hole = cfg.n_hole;
  b.colloc.n_time_slices = cfg.n_time_slices;
  b.colloc.n_initial = cfg.n_initial;
  b.colloc.continuity_per_face = cfg.continuity_per_face;
  return b;
}

std::string run_name(const RunConfig& c) {
  return c.problem + "_J" + std::to_string(c.J) + "_Q" + std::to_string(c.Q) + "_s" + std::to_string(c.seed);
}

void dump_fields(const std::filesystem::path& file, const Problem& p, const PiecewiseRfmModel& m,
                 const EvalGrid& g) {
  std::ofstream os(file);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + file.string());
  os << std::setprecision(17);
  for (int f = 0; f < p.layout.num_fields(); ++f) {
    os << "# field " << p.layout.fields()[f].name << "\n";
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      if (!p.layout.supports(f, g.side[i])) continue;
      for (int a = 0; a < g.x[i].size(); ++a) os << g.x[i][a] << " ";
      if (p.time_dependent) os << g.t << " ";
      os << m.eval(f, g.side[i], model_coords(g.x[i], g.t, p.time_dependent), MultiIndex::value()) << " ";
      if (p.has_exact())
        os << p.exact_value(f, g.side[i], g.x[i], g.t);
      else
        os << "nan";
      os << "\n";
    }
    os << "\n";
  }
}

}  // namespace

std::pair<long, long> count_system(const RunConfig& cfg_in) {
  RunConfig cfg = resolve(cfg_in);
  const long J = cfg.J;
  cfg.J = 1;  // row counts do not depend on the feature count
  Built b = build(cfg);
  const auto sys = assemble(*b.problem, *b.model, generate_collocation(*b.problem, *b.model, b.colloc),
                            {cfg.c, cfg.threads});
  return {sys.rows, sys.cols * J};
}

RunResult run_config(const RunConfig& cfg_in, const RunOutputs& out) {
  RunResult r;
  r.config = cfg_in;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const RunConfig cfg = resolve(cfg_in);
    r.config = cfg;
    Built b = build(cfg);
    const auto sys = assemble(*b.problem, *b.model, generate_collocation(*b.problem, *b.model, b.colloc),
                              {cfg.c, cfg.threads});
    r.N = sys.rows;
    r.M = sys.cols;
    SolveOptions so;
    so.kind = cfg.solver;
    so.rank_tol = cfg.rank_tol;
    so.damping = cfg.damping;
    const auto rep = least_squares(sys, so);
    r.residual = rep.residual_norm;
    r.rank = rep.rank_estimate;
    r.path = rep.path;
    b.model->set_coefficients(rep.coefficients);

    const EvalGrid grid = evaluation_grid(*b.problem, cfg.Q, cfg.refinement);
    if (b.problem->has_exact()) {
      for (const auto& name : b.problem->error_fields) {
        const int f = b.problem->layout.field_index(name);
        r.errors.emplace_back("err_" + name, relative_l2_error(*b.model, *b.problem, f, grid));
        if (cfg.derivatives && b.problem->derivative_errors)
          for (int a = 0; a < b.problem->spatial_dim; ++a)
            r.errors.emplace_back("err_" + name + "_" + "xyz"[a],
                                  derivative_error(*b.model, *b.problem, f, a, grid));
      }
    }
    if (!out.dir.empty() && (cfg.dump_fields || cfg.dump_system || cfg.dump_model)) {
      const auto dir = out.dir / run_name(cfg);
      std::filesystem::create_directories(dir);
      if (cfg.dump_fields) dump_fields(dir / "fields.txt", *b.problem, *b.model, grid);
      if (cfg.dump_system) {
        std::ofstream os(dir / "system.txt");
        write_triplets(sys, os);
      }
      if (cfg.dump_model) {
        std::ofstream os(dir / "model.txt");
        b.model->save(os);
      }
    }
  } catch (const Error& e) {
    r.status = std::string("error:") + to_string(e.code());
    r.message = e.what();
    spdlog::error("{}: {}", cfg_in.problem, e.what());
  } catch (const std::bad_alloc&) {
    r.status = "error:OutOfMemory";
    r.message = "allocation failed";
    spdlog::error("{}: out of memory", cfg_in.problem);
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<RunResult> run_sweep(const std::vector<RunConfig>& cfgs, int workers, const RunOutputs& out) {
  if (cfgs.empty()) throw Error(ErrorCode::Config, "sweep needs at least one config");
  std::vector<RunResult> res(cfgs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < cfgs.size();) res[i] = run_config(cfgs[i], out);
  };
  const int n = std::clamp<int>(workers, 1, static_cast<int>(cfgs.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return res;
}

std::string csv_table(const std::vector<RunResult>& rows) {
  std::vector<std::string> cols;
  for (const auto& r : rows)
    for (const auto& [name, v] : r.errors)
      if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);
  std::ostringstream os;
  os << "problem,seed,label,J,Q,M,N";
  for (const auto& c : cols) os << "," << c;
  os << ",residual,rank,wall_time,path,status\n";
  for (const auto& r : rows) {
    const auto& c = r.config;
    os << c.problem << "," << c.seed << "," << c.label << "," << c.J << "," << c.Q << ",";
    if (r.ok()) os << r.M << "," << r.N;
    else os << ",";
    for (const auto& name : cols) {
      os << ",";
      for (const auto& [n2, v] : r.errors)
        if (n2 == name) os << num(v);
    }
    os << ",";
    if (r.ok()) os << num(r.residual) << "," << r.rank;
    else os << ",";
    os << "," << num(r.wall_time) << "," << r.path << "," << r.status << "\n";
  }
  return os.str();
}

std::vector<std::map<std::string, std::string>> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return {};
  const auto header = split(line, ',');
  std::vector<std::map<std::string, std::string>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line, ',');
    cells.resize(header.size());
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
    out.push_back(std::move(row));
  }
  return out;
}

void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& inputs,
                    const std::vector<RunConfig>& cfgs) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "manifest.txt");
  if (!os) throw Error(ErrorCode::Io, "cannot write manifest in " + dir.string());
  os << "version = " << RFM_VERSION << "\n";
  for (const auto& in : inputs) os << "input = " << in << "\n";
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    os << "\n[run " << i << "]\n";
    try {
      os << format_config(resolve(cfgs[i]));
    } catch (const Error& e) {
      os << format_config(cfgs[i]) << "# " << e.what() << "\n";
    }
  }
}

}  // namespace rfm
