#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qgraph/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  // compare only
  std::string run_a, run_b, measure;
  std::optional<double> tolerance;
  std::string mode;
};

int execute(qgraph::ExperimentKind kind, const Overrides& o) {
  qgraph::ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = qgraph::read_config_file(o.config);
    if (cfg.kind != kind) {
      throw qgraph::ConfigError("field kind: config is for '" + std::string(to_string(cfg.kind)) +
                                "', subcommand is '" + std::string(to_string(kind)) + "'");
    }
  } else if (kind != qgraph::ExperimentKind::compare) {
    throw qgraph::ConfigError("--config is required");
  }
  cfg.kind = kind;
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (o.out) cfg.output = *o.out;
  if (!o.run_a.empty()) cfg.compare.run_a = o.run_a;
  if (!o.run_b.empty()) cfg.compare.run_b = o.run_b;
  if (!o.measure.empty()) cfg.compare.measure = o.measure;
  if (o.tolerance) cfg.compare.tolerance = *o.tolerance;
  if (!o.mode.empty()) cfg.compare.mode = o.mode;

  const qgraph::RunManifest m = qgraph::run(cfg);
  std::cout << m.kind << " " << cfg.output << " digest " << m.digest << "\n";
  for (const auto& f : m.outputs) std::cout << "  " << f.path << " " << f.sha256 << "\n";
  for (const auto& [k, v] : m.notes) std::cout << "  " << k << ": " << v << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum graph spectral and scattering statistics"};
  app.set_version_flag("--version", std::string(qgraph::code_version()));
  app.require_subcommand(1);

  Overrides o;
  std::optional<qgraph::ExperimentKind> chosen;
  const qgraph::ExperimentKind kinds[] = {
      qgraph::ExperimentKind::closed_spectrum, qgraph::ExperimentKind::closed_stats,
      qgraph::ExperimentKind::open_scatter,    qgraph::ExperimentKind::goe_spectrum,
      qgraph::ExperimentKind::goe_scatter,     qgraph::ExperimentKind::pf_analysis,
      qgraph::ExperimentKind::compare};
  for (auto kind : kinds) {
    const std::string name(to_string(kind));
    auto* sub = app.add_subcommand(name, "Run the " + name + " experiment");
    sub->add_option("--config", o.config, "Experiment config (JSON)");
    sub->add_option("--seed", o.seed, "Override the run seed");
    sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "Output directory");
    if (kind == qgraph::ExperimentKind::compare) {
      sub->add_option("--run-a", o.run_a, "First run directory");
      sub->add_option("--run-b", o.run_b, "Second run directory");
      sub->add_option("--measure", o.measure, "Measure name (nns, form_factor, ...)");
      sub->add_option("--tolerance", o.tolerance, "Pass threshold");
      sub->add_option("--mode", o.mode, "distance or sigma");
    }
    sub->callback([&chosen, kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return execute(*chosen, o);
  } catch (const qgraph::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const qgraph::NumericalError& e) {
    std::cerr << "numerical integrity error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
