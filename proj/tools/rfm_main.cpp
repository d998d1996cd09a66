#include "rfm/cli.hpp"
#include "rfm/errors.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

std::vector<rfm::RunConfig> load_all(const std::vector<std::string>& paths, bool lists,
                                     const std::vector<std::string>& overrides,
                                     const std::optional<std::uint64_t>& seed) {
  std::vector<rfm::RunConfig> cfgs;
  for (const auto& p : paths) {
    auto c = rfm::load_config(p, lists);
    cfgs.insert(cfgs.end(), c.begin(), c.end());
  }
  for (const auto& o : overrides) rfm::apply_override(cfgs, o);
  if (seed)
    for (auto& c : cfgs) c.seed = *seed;
  return cfgs;
}

int emit(const std::vector<rfm::RunResult>& res, const fs::path& out) {
  const std::string csv = rfm::csv_table(res);
  std::cout << csv;
  if (!out.empty()) {
    std::ofstream os(out / "errors.csv");
    os << csv;
  }
  for (const auto& r : res)
    if (!r.ok()) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  rfm::select_blas_kernel(argv);
  CLI::App app{"Random feature method solver for PDE interface problems"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log", log_level, "log level (trace, debug, info, warn, error, off)");

  std::vector<std::string> paths, overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool fields = false, system = false, model = false;
  int workers = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", paths, "config files")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the seed of every run");
    sub->add_option("--set", overrides, "override a key, e.g. --set J=400");
    sub->add_option("-o,--out", out_dir, "run directory for the manifest, CSV and dumps");
    sub->add_flag("--dump-fields", fields, "write evaluation-grid fields");
    sub->add_flag("--dump-system", system, "write the assembled system");
    sub->add_flag("--dump-model", model, "write the solved model");
  };
  auto* run = app.add_subcommand("run", "solve one config");
  add_common(run);
  auto* sweep = app.add_subcommand("sweep", "solve every config, expanding comma lists");
  add_common(sweep);
  sweep->add_option("-w,--workers", workers, "rows solved concurrently")->check(CLI::PositiveNumber);
  auto* count = app.add_subcommand("count", "print M and N without solving, expanding comma lists");
  count->add_option("config", paths, "config files")->required()->check(CLI::ExistingFile);
  count->add_option("--set", overrides, "override a key");
  auto* presets = app.add_subcommand("presets", "print the resolved preset of each problem");
  std::string only;
  presets->add_option("problem", only, "one catalog name");
  auto* schema = app.add_subcommand("schema", "list the config keys");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*presets) {
      for (const auto& name : rfm::catalog_names()) {
        if (!only.empty() && name != only) continue;
        std::cout << "# " << name << "\n" << rfm::format_config(rfm::preset(name)) << "\n";
      }
      if (!only.empty() && std::find(rfm::catalog_names().begin(), rfm::catalog_names().end(), only) ==
                               rfm::catalog_names().end())
        throw rfm::Error(rfm::ErrorCode::Config, "unknown problem '" + only + "'");
      return 0;
    }
    if (*schema) {
      for (const auto& [k, d] : rfm::config_schema()) std::cout << k << "\t" << d << "\n";
      return 0;
    }
    if (*count) {
      std::cout << "problem,J,Q,M,N\n";
      for (const auto& c : load_all(paths, true, overrides, std::nullopt)) {
        const auto r = rfm::resolve(c);
        const auto [N, M] = rfm::count_system(r);
        std::cout << r.problem << "," << r.J << "," << r.Q << "," << M << "," << N << "\n";
      }
      return 0;
    }
    auto cfgs = load_all(paths, sweep->parsed(), overrides, seed);
    for (auto& c : cfgs) {
      c.dump_fields = c.dump_fields || fields;
      c.dump_system = c.dump_system || system;
      c.dump_model = c.dump_model || model;
    }
    for (const auto& c : cfgs) {
      spdlog::info("resolved config:\n{}", rfm::format_config(rfm::resolve(c)));
    }
    const fs::path out = out_dir;
    if (!out.empty()) rfm::write_manifest(out, paths, cfgs);
    rfm::RunOutputs ro{out};
    if (*run) {
      if (cfgs.size() != 1) throw rfm::Error(rfm::ErrorCode::Config, "run takes exactly one config");
      return emit({rfm::run_config(cfgs[0], ro)}, out);
    }
    return emit(rfm::run_sweep(cfgs, workers, ro), out);
  } catch (const rfm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
