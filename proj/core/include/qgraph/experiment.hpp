#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qgraph/graph.hpp"
#include "qgraph/scattering.hpp"
#include "qgraph/stats.hpp"

namespace qgraph {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

std::string_view code_version();

enum class ExperimentKind {
  closed_spectrum,
  closed_stats,
  open_scatter,
  goe_spectrum,
  goe_scatter,
  pf_analysis,
  compare
};

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view name);

struct GraphSection {
  int vertices = 2;
  double length_min = 1.0;
  double length_max = 2.0;
  std::string condition = "neumann";
  /// Fixed bond lengths (V(V-1)/2 values); empty means sampled.
  std::vector<double> lengths;
  int channels = 0;
  /// Per-channel target transmissions; alternatively explicit weights.
  std::vector<double> transmissions;
  std::vector<double> weights;
};

struct SolverSection {
  double k_lo = 0.0;
  double k_hi = 0.0;
  double tolerance = 1e-10;
  double levels_per_step = 4.0;
  double grid_step = 0.0;
  /// S-matrix sampling step; 0 picks 1/(8 <d_R>).
  double smatrix_step = 0.0;
};

struct GoeSection {
  int dimension = 500;
  int realizations = 200;
  double mean_spacing = 1.0;
  /// Energy step and half-width of the S-matrix window; 0 picks defaults.
  double energy_step = 0.0;
  double half_width = 0.0;
  std::vector<double> targets;
  double match_tolerance = 0.01;
};

/// Offsets are in units of the mean level spacing so one section applies to
/// graph and GOE runs alike.
struct CorrelatorSection {
  std::vector<std::array<int, 2>> retarded;
  std::vector<std::array<int, 2>> advanced;
  std::vector<double> retarded_offsets;
  std::vector<double> advanced_offsets;
};

struct StatsSection {
  std::vector<std::string> measures{"nns", "form_factor", "number_variance",
                                    "density_correlator"};
  std::size_t segment = 250;
  std::vector<double> tau;
  double smoothing = 0.02;
  std::vector<double> lengths;
  std::size_t windows = 2000;
  double epsilon = 0.5;
  std::vector<double> offsets;
  double density_step = 0.05;
  double margin = 30.0;
  double block = 40.0;
};

struct PfSection {
  std::vector<int> scan_vertices;
  std::vector<std::uint64_t> scan_seeds{0};
  int m_max = 200;
};

struct CompareSection {
  std::string run_a;
  std::string run_b;
  std::string measure = "nns";
  double tolerance = 0.03;
  std::string mode = "distance";
  std::optional<double> lo;
  std::optional<double> hi;
};

struct ExperimentConfig {
  int version = kConfigSchemaVersion;
  ExperimentKind kind = ExperimentKind::closed_spectrum;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output = "out";
  GraphSection graph;
  SolverSection solver;
  GoeSection goe;
  StatsSection stats;
  std::vector<CorrelatorSection> correlators;
  PfSection pf;
  CompareSection compare;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Hash of the physics-relevant content (output directory and worker
  /// count excluded).
  std::string hash() const;
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig read_config_file(const std::string& path);
void write_config_file(const std::string& path, const ExperimentConfig& cfg);

/// Graph described by the config (graph stream of the seed trail).
Graph build_graph(const ExperimentConfig& cfg);

struct OutputFile {
  std::string path;  // relative to the run directory
  std::string sha256;
};

struct SeedUse {
  std::string stage;
  std::uint64_t seed = 0;
};

struct RunManifest {
  std::string kind;
  std::string config_hash;
  std::string code_version;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string started;
  std::string finished;
  std::vector<OutputFile> inputs;
  std::vector<OutputFile> outputs;
  std::vector<std::pair<std::string, long long>> excluded;
  std::vector<SeedUse> seed_trail;
  std::vector<std::pair<std::string, std::string>> notes;
  /// Hash over config hash, seed trail and output hashes; timestamps and
  /// worker count do not enter.
  std::string digest;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(std::string_view text);
RunManifest read_manifest(const std::string& run_dir);

/// Executes the experiment and writes results plus manifest.json into
/// cfg.output.
RunManifest run(const ExperimentConfig& cfg);

struct CompareReport {
  Comparison comparison;
  std::string measure;
  std::string run_a;
  std::string run_b;
};

/// Loads `measure` from two run directories and compares it.
CompareReport compare_runs(const std::string& run_a, const std::string& run_b,
                           const std::string& measure, double tolerance,
                           CompareMode mode = CompareMode::distance,
                           std::optional<double> lo = std::nullopt,
                           std::optional<double> hi = std::nullopt);

}  // namespace qgraph
