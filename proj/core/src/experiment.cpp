#include "qgraph/experiment.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qgraph/classical_pf.hpp"
#include "qgraph/rmt.hpp"
#include "qgraph/spectral.hpp"

#ifndef QGRAPH_VERSION
#define QGRAPH_VERSION "0.0.0"
#endif

namespace qgraph {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view code_version() { return QGRAPH_VERSION; }

namespace {

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 7> kKindNames{{
    {ExperimentKind::closed_spectrum, "closed-spectrum"},
    {ExperimentKind::closed_stats, "closed-stats"},
    {ExperimentKind::open_scatter, "open-scatter"},
    {ExperimentKind::goe_spectrum, "goe-spectrum"},
    {ExperimentKind::goe_scatter, "goe-scatter"},
    {ExperimentKind::pf_analysis, "pf-analysis"},
    {ExperimentKind::compare, "compare"},
}};

// Seed streams derived from the run seed.
enum SeedStream : std::uint64_t {
  kGraphStream = 1,
  kGoeStream = 2,
  kCouplingStream = 3,
  kBootstrapStream = 4,
  kWindowStream = 5,
};

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "closed-spectrum";
}

ExperimentKind experiment_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("field kind: unknown experiment kind '" + std::string(name) + "'");
}

// --- config serialization ----------------------------------------------

namespace {

// Reads the fields of one JSON object, naming the field on type errors and
// rejecting unknown keys.
class FieldReader {
 public:
  FieldReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("field " + where() + ": expected an object");
  }

  template <class T>
  void get(const std::string& name, T& out) {
    seen_.insert(name);
    if (!j_.contains(name)) return;
    try {
      out = j_.at(name).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("field " + prefix_ + name + ": " + e.what());
    }
  }

  void get_optional(const std::string& name, std::optional<double>& out) {
    seen_.insert(name);
    if (!j_.contains(name) || j_.at(name).is_null()) return;
    double v = 0.0;
    get(name, v);
    out = v;
  }

  const json* child(const std::string& name) {
    seen_.insert(name);
    return j_.contains(name) ? &j_.at(name) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("field " + prefix_ + key + ": unknown field");
    }
  }

 private:
  std::string where() const { return prefix_.empty() ? "<root>" : prefix_.substr(0, prefix_.size() - 1); }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

json to_json_value(const ExperimentConfig& c, bool physics_only) {
  json j;
  j["schema"] = "qgraph.config";
  j["version"] = c.version;
  j["kind"] = std::string(to_string(c.kind));
  j["seed"] = c.seed;
  if (!physics_only) {
    j["workers"] = c.workers;
    j["output"] = c.output;
  }
  j["graph"] = {{"vertices", c.graph.vertices},
                {"length_min", c.graph.length_min},
                {"length_max", c.graph.length_max},
                {"condition", c.graph.condition},
                {"lengths", c.graph.lengths},
                {"channels", c.graph.channels},
                {"transmissions", c.graph.transmissions},
                {"weights", c.graph.weights}};
  j["solver"] = {{"k_lo", c.solver.k_lo},
                 {"k_hi", c.solver.k_hi},
                 {"tolerance", c.solver.tolerance},
                 {"levels_per_step", c.solver.levels_per_step},
                 {"grid_step", c.solver.grid_step},
                 {"smatrix_step", c.solver.smatrix_step}};
  j["goe"] = {{"dimension", c.goe.dimension},
              {"realizations", c.goe.realizations},
              {"mean_spacing", c.goe.mean_spacing},
              {"energy_step", c.goe.energy_step},
              {"half_width", c.goe.half_width},
              {"targets", c.goe.targets},
              {"match_tolerance", c.goe.match_tolerance}};
  j["stats"] = {{"measures", c.stats.measures},
                {"segment", c.stats.segment},
                {"tau", c.stats.tau},
                {"smoothing", c.stats.smoothing},
                {"lengths", c.stats.lengths},
                {"windows", c.stats.windows},
                {"epsilon", c.stats.epsilon},
                {"offsets", c.stats.offsets},
                {"density_step", c.stats.density_step},
                {"margin", c.stats.margin},
                {"block", c.stats.block}};
  json corr = json::array();
  for (const auto& s : c.correlators) {
    corr.push_back({{"retarded", s.retarded},
                    {"advanced", s.advanced},
                    {"retarded_offsets", s.retarded_offsets},
                    {"advanced_offsets", s.advanced_offsets}});
  }
  j["correlators"] = corr;
  j["pf"] = {{"scan_vertices", c.pf.scan_vertices},
             {"scan_seeds", c.pf.scan_seeds},
             {"m_max", c.pf.m_max}};
  json cmp = {{"run_a", c.compare.run_a},
              {"run_b", c.compare.run_b},
              {"measure", c.compare.measure},
              {"tolerance", c.compare.tolerance},
              {"mode", c.compare.mode}};
  cmp["lo"] = c.compare.lo ? json(*c.compare.lo) : json(nullptr);
  cmp["hi"] = c.compare.hi ? json(*c.compare.hi) : json(nullptr);
  j["compare"] = cmp;
  return j;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  return to_json_value(cfg, false).dump(2) + "\n";
}

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  FieldReader root(j, "");
  std::string schema = "qgraph.config";
  root.get("schema", schema);
  if (schema != "qgraph.config") throw ConfigError("field schema: expected 'qgraph.config'");
  root.get("version", c.version);
  if (c.version != kConfigSchemaVersion) {
    throw ConfigError("field version: unsupported config version " + std::to_string(c.version));
  }
  std::string kind = std::string(to_string(c.kind));
  root.get("kind", kind);
  c.kind = experiment_kind_from_string(kind);
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  root.get("output", c.output);

  if (const json* g = root.child("graph")) {
    FieldReader r(*g, "graph.");
    r.get("vertices", c.graph.vertices);
    r.get("length_min", c.graph.length_min);
    r.get("length_max", c.graph.length_max);
    r.get("condition", c.graph.condition);
    r.get("lengths", c.graph.lengths);
    r.get("channels", c.graph.channels);
    r.get("transmissions", c.graph.transmissions);
    r.get("weights", c.graph.weights);
    r.finish();
  }
  if (const json* s = root.child("solver")) {
    FieldReader r(*s, "solver.");
    r.get("k_lo", c.solver.k_lo);
    r.get("k_hi", c.solver.k_hi);
    r.get("tolerance", c.solver.tolerance);
    r.get("levels_per_step", c.solver.levels_per_step);
    r.get("grid_step", c.solver.grid_step);
    r.get("smatrix_step", c.solver.smatrix_step);
    r.finish();
  }
  if (const json* s = root.child("goe")) {
    FieldReader r(*s, "goe.");
    r.get("dimension", c.goe.dimension);
    r.get("realizations", c.goe.realizations);
    r.get("mean_spacing", c.goe.mean_spacing);
    r.get("energy_step", c.goe.energy_step);
    r.get("half_width", c.goe.half_width);
    r.get("targets", c.goe.targets);
    r.get("match_tolerance", c.goe.match_tolerance);
    r.finish();
  }
  if (const json* s = root.child("stats")) {
    FieldReader r(*s, "stats.");
    r.get("measures", c.stats.measures);
    r.get("segment", c.stats.segment);
    r.get("tau", c.stats.tau);
    r.get("smoothing", c.stats.smoothing);
    r.get("lengths", c.stats.lengths);
    r.get("windows", c.stats.windows);
    r.get("epsilon", c.stats.epsilon);
    r.get("offsets", c.stats.offsets);
    r.get("density_step", c.stats.density_step);
    r.get("margin", c.stats.margin);
    r.get("block", c.stats.block);
    r.finish();
  }
  if (const json* s = root.child("correlators")) {
    if (!s->is_array()) throw ConfigError("field correlators: expected an array");
    for (std::size_t i = 0; i < s->size(); ++i) {
      FieldReader r(s->at(i), "correlators[" + std::to_string(i) + "].");
      CorrelatorSection cs;
      r.get("retarded", cs.retarded);
      r.get("advanced", cs.advanced);
      r.get("retarded_offsets", cs.retarded_offsets);
      r.get("advanced_offsets", cs.advanced_offsets);
      r.finish();
      c.correlators.push_back(std::move(cs));
    }
  }
  if (const json* s = root.child("pf")) {
    FieldReader r(*s, "pf.");
    r.get("scan_vertices", c.pf.scan_vertices);
    r.get("scan_seeds", c.pf.scan_seeds);
    r.get("m_max", c.pf.m_max);
    r.finish();
  }
  if (const json* s = root.child("compare")) {
    FieldReader r(*s, "compare.");
    r.get("run_a", c.compare.run_a);
    r.get("run_b", c.compare.run_b);
    r.get("measure", c.compare.measure);
    r.get("tolerance", c.compare.tolerance);
    r.get("mode", c.compare.mode);
    r.get_optional("lo", c.compare.lo);
    r.get_optional("hi", c.compare.hi);
    r.finish();
  }
  root.finish();
  return c;
}

ExperimentConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void write_config_file(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << config_to_json(cfg);
}

std::string ExperimentConfig::hash() const {
  return sha256_hex(to_json_value(*this, true).dump()).substr(0, 16);
}

// --- validation ---------------------------------------------------------

namespace {

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError("field " + field + ": " + message);
}

bool needs_graph(ExperimentKind k) {
  return k == ExperimentKind::closed_spectrum || k == ExperimentKind::closed_stats ||
         k == ExperimentKind::open_scatter || k == ExperimentKind::pf_analysis;
}

void validate_correlators(const std::vector<CorrelatorSection>& corr, int channels) {
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const auto& c = corr[i];
    const std::string p = "correlators[" + std::to_string(i) + "].";
    require(!c.retarded.empty(), p + "retarded", "need at least one retarded factor");
    require(!c.advanced.empty(), p + "advanced", "need at least one advanced factor");
    require(c.retarded_offsets.size() == c.retarded.size(), p + "retarded_offsets",
            "one offset per retarded factor");
    require(c.advanced_offsets.size() == c.advanced.size(), p + "advanced_offsets",
            "one offset per advanced factor");
    for (const auto* list : {&c.retarded, &c.advanced}) {
      for (const auto& pair : *list) {
        require(pair[0] >= 0 && pair[0] < channels && pair[1] >= 0 && pair[1] < channels,
                p + (list == &c.retarded ? "retarded" : "advanced"),
                "channel index out of range");
      }
    }
  }
}

void validate_stats(const StatsSection& s) {
  for (const auto& m : s.measures) {
    try {
      (void)measure_kind_from_string(m);
    } catch (const ConfigError&) {
      require(false, "stats.measures", "unknown measure '" + m + "'");
    }
  }
  require(s.segment >= 10, "stats.segment", "must be at least 10");
  for (double t : s.tau) require(t > 0.0 && t <= 3.0, "stats.tau", "values must lie in (0, 3]");
  require(s.smoothing > 0.0, "stats.smoothing", "must be positive");
  for (double l : s.lengths) {
    require(l > 0.0 && l < static_cast<double>(s.segment) - 1.0, "stats.lengths",
            "values must be positive and shorter than a segment");
  }
  require(s.windows > 0, "stats.windows", "must be positive");
  require(s.epsilon > 0.0, "stats.epsilon", "must be positive");
  require(s.density_step > 0.0, "stats.density_step", "must be positive");
  require(s.margin > 0.0, "stats.margin", "must be positive");
  require(s.block >= 0.0, "stats.block", "must be non-negative");
}

}  // namespace

void ExperimentConfig::validate() const {
  require(workers >= 1, "workers", "must be at least 1");
  require(!output.empty(), "output", "must not be empty");
  if (needs_graph(kind)) {
    require(graph.vertices >= 2, "graph.vertices", "must be at least 2");
    (void)vertex_condition_from_string(graph.condition);
    require(graph.condition != "custom", "graph.condition", "custom conditions need a graph file");
    if (graph.lengths.empty()) {
      require(graph.length_min > 0.0 && graph.length_min < graph.length_max, "graph.length_min",
              "need 0 < length_min < length_max");
    } else {
      require(static_cast<int>(graph.lengths.size()) == graph.vertices * (graph.vertices - 1) / 2,
              "graph.lengths", "need V(V-1)/2 values");
      for (double l : graph.lengths) require(l > 0.0, "graph.lengths", "must be positive");
    }
  }
  const bool spectral = kind == ExperimentKind::closed_spectrum ||
                        kind == ExperimentKind::closed_stats || kind == ExperimentKind::open_scatter;
  if (spectral) {
    require(solver.k_lo >= 0.0, "solver.k_lo", "must be non-negative");
    require(solver.k_hi > solver.k_lo, "solver.k_hi", "must exceed k_lo");
    require(solver.tolerance > 0.0 && solver.tolerance < 1e-3, "solver.tolerance",
            "must lie in (0, 1e-3)");
    require(solver.levels_per_step > 0.0, "solver.levels_per_step", "must be positive");
    require(solver.grid_step >= 0.0, "solver.grid_step", "must be non-negative");
    require(solver.smatrix_step >= 0.0, "solver.smatrix_step", "must be non-negative");
  }
  if (kind == ExperimentKind::open_scatter) {
    require(graph.channels >= 1, "graph.channels", "open graphs need at least one channel");
    require(graph.channels <= graph.vertices, "graph.channels",
            "cannot exceed the number of vertices");
    require(graph.transmissions.empty() != graph.weights.empty(), "graph.transmissions",
            "give either transmissions or weights");
    if (!graph.transmissions.empty()) {
      require(static_cast<int>(graph.transmissions.size()) == graph.channels,
              "graph.transmissions", "need one value per channel");
      for (double t : graph.transmissions) {
        require(t > 0.0 && t <= 1.0, "graph.transmissions", "values must lie in (0, 1]");
      }
    } else {
      require(static_cast<int>(graph.weights.size()) == graph.channels, "graph.weights",
              "need one value per channel");
      for (double w : graph.weights) require(w > 0.0, "graph.weights", "must be positive");
    }
    validate_correlators(correlators, graph.channels);
  }
  if (kind == ExperimentKind::goe_spectrum || kind == ExperimentKind::goe_scatter) {
    require(goe.dimension >= 10, "goe.dimension", "must be at least 10");
    require(goe.realizations >= 1, "goe.realizations", "must be at least 1");
    require(goe.mean_spacing > 0.0, "goe.mean_spacing", "must be positive");
    require(goe.energy_step >= 0.0, "goe.energy_step", "must be non-negative");
    require(goe.half_width >= 0.0, "goe.half_width", "must be non-negative");
  }
  if (kind == ExperimentKind::goe_scatter) {
    require(!goe.targets.empty(), "goe.targets", "need one transmission target per channel");
    require(static_cast<int>(goe.targets.size()) <= goe.dimension, "goe.targets",
            "more channels than GOE dimension");
    for (double t : goe.targets) require(t >= 0.0 && t <= 1.0, "goe.targets", "values must lie in [0, 1]");
    require(goe.match_tolerance > 0.0, "goe.match_tolerance", "must be positive");
    validate_correlators(correlators, static_cast<int>(goe.targets.size()));
  }
  if (kind == ExperimentKind::closed_stats || kind == ExperimentKind::goe_spectrum) {
    validate_stats(stats);
  }
  if (kind == ExperimentKind::pf_analysis) {
    require(pf.m_max >= 1, "pf.m_max", "must be positive");
    for (int v : pf.scan_vertices) require(v >= 2, "pf.scan_vertices", "values must be at least 2");
    require(!pf.scan_seeds.empty(), "pf.scan_seeds", "need at least one seed");
  }
  if (kind == ExperimentKind::compare) {
    require(!compare.run_a.empty(), "compare.run_a", "must name a run directory");
    require(!compare.run_b.empty(), "compare.run_b", "must name a run directory");
    (void)measure_kind_from_string(compare.measure);
    require(compare.tolerance >= 0.0, "compare.tolerance", "must be non-negative");
    require(compare.mode == "distance" || compare.mode == "sigma", "compare.mode",
            "must be 'distance' or 'sigma'");
  }
}

// --- graph construction ---------------------------------------------------

Graph build_graph(const ExperimentConfig& cfg) {
  const std::uint64_t seed = derive_seed(cfg.seed, kGraphStream);
  const VertexCondition cond = vertex_condition_from_string(cfg.graph.condition);
  if (cfg.graph.lengths.empty()) {
    GraphParams p;
    p.vertices = cfg.graph.vertices;
    p.length_min = cfg.graph.length_min;
    p.length_max = cfg.graph.length_max;
    p.condition = cond;
    p.seed = seed;
    return Graph::complete(p);
  }
  const int valency = cfg.graph.vertices - 1;
  std::vector<CMatrix> mats;
  for (int v = 0; v < cfg.graph.vertices; ++v) {
    if (cond == VertexCondition::neumann) {
      mats.push_back(neumann_vertex_matrix(valency).cast<cplx>());
    } else {
      mats.push_back(random_symmetric_unitary(valency, derive_seed(seed, 1000 + v)));
    }
  }
  return Graph::from_parts(cfg.graph.vertices, cfg.graph.lengths, std::move(mats), cond, seed);
}

// --- manifest -------------------------------------------------------------

std::string manifest_to_json(const RunManifest& m) {
  json j;
  j["schema"] = "qgraph.manifest";
  j["version"] = kManifestSchemaVersion;
  j["kind"] = m.kind;
  j["config_hash"] = m.config_hash;
  j["code_version"] = m.code_version;
  j["seed"] = m.seed;
  j["workers"] = m.workers;
  j["started"] = m.started;
  j["finished"] = m.finished;
  auto files = [](const std::vector<OutputFile>& v) {
    json a = json::array();
    for (const auto& f : v) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return a;
  };
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  json ex = json::object();
  for (const auto& [k, v] : m.excluded) ex[k] = v;
  j["excluded"] = ex;
  json trail = json::array();
  for (const auto& s : m.seed_trail) trail.push_back({{"stage", s.stage}, {"seed", s.seed}});
  j["seed_trail"] = trail;
  json notes = json::object();
  for (const auto& [k, v] : m.notes) notes[k] = v;
  j["notes"] = notes;
  j["digest"] = m.digest;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    if (j.value("schema", "") != "qgraph.manifest") throw ConfigError("not a run manifest");
    m.kind = j.at("kind").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.code_version = j.at("code_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.workers = j.at("workers").get<unsigned>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    for (const auto& f : j.at("inputs")) m.inputs.push_back({f.at("path"), f.at("sha256")});
    for (const auto& f : j.at("outputs")) m.outputs.push_back({f.at("path"), f.at("sha256")});
    for (const auto& [k, v] : j.at("excluded").items()) m.excluded.emplace_back(k, v.get<long long>());
    for (const auto& s : j.at("seed_trail")) m.seed_trail.push_back({s.at("stage"), s.at("seed")});
    for (const auto& [k, v] : j.at("notes").items()) m.notes.emplace_back(k, v.get<std::string>());
    m.digest = j.at("digest").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest read_manifest(const std::string& run_dir) {
  const std::string path = (fs::path(run_dir) / "manifest.json").string();
  std::ifstream in(path);
  if (!in) throw ConfigError("no manifest in " + run_dir);
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

// --- run ------------------------------------------------------------------

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> v;
  for (int i = 0;; ++i) {
    const double x = lo + step * i;
    if (x > hi + 1e-9) break;
    v.push_back(x);
  }
  return v;
}

class RunContext {
 public:
  explicit RunContext(const ExperimentConfig& cfg) : cfg_(cfg) {
    dir_ = fs::path(cfg.output);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("field output: cannot create directory " + cfg.output);
    manifest_.kind = std::string(to_string(cfg.kind));
    manifest_.config_hash = cfg.hash();
    manifest_.code_version = std::string(code_version());
    manifest_.seed = cfg.seed;
    manifest_.workers = cfg.workers;
    manifest_.started = utc_now();
  }

  Metadata meta() const {
    Metadata m;
    m.set("config_hash", manifest_.config_hash);
    m.set("seed", static_cast<long long>(cfg_.seed));
    m.set("experiment", manifest_.kind);
    return m;
  }

  std::uint64_t seed(const std::string& stage, std::uint64_t stream) {
    const std::uint64_t s = derive_seed(cfg_.seed, stream);
    manifest_.seed_trail.push_back({stage, s});
    return s;
  }

  template <class Writer>
  void emit(const std::string& name, Writer&& write) {
    const fs::path path = dir_ / name;
    {
      std::ofstream out(path);
      if (!out) throw ConfigError("field output: cannot write " + path.string());
      write(out);
    }
    manifest_.outputs.push_back({name, sha256_file(path.string())});
  }

  void input(const std::string& path) { manifest_.inputs.push_back({path, sha256_file(path)}); }
  void excluded(const std::string& what, long long n) { manifest_.excluded.emplace_back(what, n); }
  void note(const std::string& key, const std::string& value) {
    manifest_.notes.emplace_back(key, value);
  }

  RunManifest finish() {
    manifest_.finished = utc_now();
    std::string d = manifest_.config_hash + "\n" + std::to_string(manifest_.seed) + "\n";
    for (const auto& s : manifest_.seed_trail) d += s.stage + "=" + std::to_string(s.seed) + "\n";
    for (const auto& f : manifest_.outputs) d += f.path + "=" + f.sha256 + "\n";
    manifest_.digest = sha256_hex(d);
    std::ofstream out(dir_ / "manifest.json");
    if (!out) throw ConfigError("field output: cannot write manifest");
    out << manifest_to_json(manifest_);
    return manifest_;
  }

  const ExperimentConfig& cfg() const { return cfg_; }

 private:
  const ExperimentConfig& cfg_;
  fs::path dir_;
  RunManifest manifest_;
};

SolverOptions solver_options(const ExperimentConfig& cfg) {
  SolverOptions o;
  o.tolerance = cfg.solver.tolerance;
  o.levels_per_step = cfg.solver.levels_per_step;
  o.grid_step = cfg.solver.grid_step;
  o.workers = cfg.workers;
  return o;
}

SpectrumResult closed_levels(RunContext& ctx, const Graph& g) {
  const auto& cfg = ctx.cfg();
  ctx.emit("graph.json", [&](std::ostream& os) { write_graph(os, g); });
  SpectrumResult s = find_levels(g, cfg.solver.k_lo, cfg.solver.k_hi, solver_options(cfg));
  ctx.emit("levels.tsv", [&](std::ostream& os) { write_spectrum(os, s, ctx.meta()); });
  ctx.note("level_count", std::to_string(s.levels.size()));
  ctx.note("winding_count", std::to_string(s.winding_count));
  ctx.note("near_degenerate_pairs", std::to_string(s.near_degenerate.size()));
  return s;
}

void emit_measures(RunContext& ctx, const LevelSequences& segments,
                   const LevelSequences& density_sequences, double density_block,
                   const std::string& source) {
  const auto& st = ctx.cfg().stats;
  for (const auto& name : st.measures) {
    const MeasureKind kind = measure_kind_from_string(name);
    MeasureResult m;
    Metadata meta = ctx.meta();
    switch (kind) {
      case MeasureKind::nns: {
        m = nns(segments);
        m.source = source;
        ctx.emit("nns_samples.tsv", [&](std::ostream& os) {
          TableWriter w(os, ctx.meta(), {"s"});
          for (double s : m.samples) w.row(std::vector<double>{s});
        });
        break;
      }
      case MeasureKind::form_factor: {
        const auto tau = st.tau.empty() ? grid(0.02, 3.0, 0.02) : st.tau;
        m = form_factor(segments, tau, st.smoothing);
        meta.set("smoothing", st.smoothing);
        break;
      }
      case MeasureKind::number_variance: {
        const auto lengths =
            st.lengths.empty()
                ? std::vector<double>{0.1, 0.2, 0.5, 1, 1.5, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 20}
                : st.lengths;
        m = number_variance(segments, lengths, ctx.seed("number_variance", kWindowStream),
                            st.windows);
        meta.set("windows", st.windows);
        break;
      }
      case MeasureKind::density_correlator: {
        SmoothedDensityOptions o;
        o.epsilon = st.epsilon;
        o.step = st.density_step;
        o.margin = st.margin;
        o.block = density_block;
        o.seed = ctx.seed("density_bootstrap", kBootstrapStream);
        const auto offsets = st.offsets.empty() ? grid(0.0, 5.0, 0.25) : st.offsets;
        const auto dc = density_correlator(density_sequences, offsets, o);
        m = dc.curve;
        meta.set("epsilon", st.epsilon);
        meta.set("mean_fluctuation", dc.mean_fluctuation);
        meta.set("mean_error", dc.mean_error);
        if (dc.epsilon_warning) {
          meta.set("warning", std::string("epsilon outside [0.1, 1] mean spacings"));
          ctx.note("density_correlator_warning", "epsilon outside [0.1, 1] mean spacings");
        }
        break;
      }
      case MeasureKind::r2:
        throw ConfigError("field stats.measures: r2 is not produced by this pipeline");
    }
    m.source = source;
    ctx.emit(name + ".tsv", [&](std::ostream& os) { write_measure(os, m, meta); });
  }
}

std::vector<CorrelatorEstimate> run_correlators(RunContext& ctx,
                                                const std::vector<const SMatrixSeries*>& series,
                                                double spacing, double step,
                                                std::vector<std::string>& labels) {
  const auto& cfg = ctx.cfg();
  CorrelatorOptions opt;
  opt.seed = ctx.seed("correlator_bootstrap", kBootstrapStream);
  std::vector<CorrelatorEstimate> rows;
  for (const auto& c : cfg.correlators) {
    CorrelatorSpec spec;
    std::string label;
    for (const auto& p : c.retarded) {
      spec.retarded.push_back({p[0], p[1]});
      label += (label.empty() ? "" : ";") + std::to_string(p[0]) + "," + std::to_string(p[1]);
    }
    label += "|";
    bool first = true;
    for (const auto& p : c.advanced) {
      spec.advanced.push_back({p[0], p[1]});
      label += (first ? "" : ";") + std::to_string(p[0]) + "," + std::to_string(p[1]);
      first = false;
    }
    for (double o : c.retarded_offsets) spec.retarded_offsets.push_back(snap_offset(o * spacing, step));
    for (double o : c.advanced_offsets) spec.advanced_offsets.push_back(snap_offset(o * spacing, step));
    rows.push_back(correlate(series, spec, opt));
    labels.push_back(label);
  }
  return rows;
}

void run_open_scatter(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const Graph g = build_graph(cfg);
  ctx.seed("graph", kGraphStream);
  std::vector<double> weights = cfg.graph.weights;
  if (weights.empty()) {
    for (double t : cfg.graph.transmissions) {
      weights.push_back(householder_weight_for_transmission(cfg.graph.vertices, t));
    }
  }
  const OpenGraph og(g, cfg.graph.channels, weights);
  ctx.emit("graph.json", [&](std::ostream& os) { write_graph(os, g); });
  const KGrid kg = make_k_grid(og, cfg.solver.k_lo, cfg.solver.k_hi, cfg.solver.smatrix_step);
  const SMatrixSeries series = sample_smatrix(og, kg, cfg.workers);
  if (series.max_unitarity_residual > 1e-10 || series.max_symmetry_residual > 1e-10) {
    throw NumericalError("open-scatter: S(k) unitarity/symmetry residual above 1e-10");
  }
  ctx.excluded("singular_smatrix_samples", static_cast<long long>(series.excluded));
  const auto avg = average_smatrix(series, ctx.seed("average_bootstrap", kBootstrapStream));
  const auto& rho = og.backscattering();
  ctx.emit("smatrix_average.tsv", [&](std::ostream& os) {
    Metadata meta = ctx.meta();
    meta.set("samples", avg.samples);
    meta.set("window_too_small", std::string(avg.window_too_small ? "true" : "false"));
    meta.set("max_unitarity_residual", series.max_unitarity_residual);
    meta.set("max_symmetry_residual", series.max_symmetry_residual);
    TableWriter w(os, meta, {"a", "b", "mean_re", "mean_im", "std_error", "expected"});
    for (int a = 0; a < og.channels(); ++a) {
      for (int b = 0; b < og.channels(); ++b) {
        w.row(std::vector<double>{static_cast<double>(a), static_cast<double>(b),
                                  avg.mean(a, b).real(), avg.mean(a, b).imag(),
                                  avg.std_error(a, b), a == b ? rho[a] : 0.0});
      }
    }
  });
  const auto measured = transmission_coefficients(avg);
  const auto nominal = og.nominal_transmission();
  ctx.emit("transmission.tsv", [&](std::ostream& os) {
    TableWriter w(os, ctx.meta(), {"channel", "weight", "nominal", "measured"});
    for (int a = 0; a < og.channels(); ++a) {
      w.row(std::vector<double>{static_cast<double>(a), weights[a], nominal[a], measured[a]});
    }
  });
  std::vector<std::string> labels;
  const auto rows = run_correlators(ctx, {&series}, 1.0 / g.mean_density(), kg.step, labels);
  if (!rows.empty()) {
    ctx.emit("correlators.tsv", [&](std::ostream& os) {
      Metadata meta = ctx.meta();
      meta.set("offset_unit", std::string("mean_spacing"));
      write_correlators(os, rows, labels, meta);
    });
  }
  const auto pf = pf_spectrum(pf_operator(g));
  ctx.note("closed_graph_gap", format_double(pf.gap));
}

void run_goe_scatter(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  GoeConfig gc{cfg.goe.dimension, cfg.goe.mean_spacing, cfg.goe.realizations,
               ctx.seed("goe", kGoeStream)};
  const int channels = static_cast<int>(cfg.goe.targets.size());
  const GoeScatteringEnsemble ens(gc, channels, ctx.seed("coupling", kCouplingStream), cfg.workers);
  const auto match = match_transmission(ens, cfg.goe.targets, cfg.goe.match_tolerance, cfg.workers);
  ctx.emit("coupling.tsv", [&](std::ostream& os) {
    TableWriter w(os, ctx.meta(), {"channel", "target", "strength", "achieved"});
    for (int a = 0; a < channels; ++a) {
      w.row(std::vector<double>{static_cast<double>(a), cfg.goe.targets[a], match.strengths[a],
                                match.achieved[a]});
    }
  });
  const auto series =
      ens.sample(match.strengths, cfg.goe.energy_step, cfg.goe.half_width, cfg.workers);
  std::size_t excluded = 0;
  double unit = 0.0, sym = 0.0;
  std::vector<const SMatrixSeries*> ptrs;
  for (const auto& s : series) {
    excluded += s.excluded;
    unit = std::max(unit, s.max_unitarity_residual);
    sym = std::max(sym, s.max_symmetry_residual);
    ptrs.push_back(&s);
  }
  if (unit > 1e-10 || sym > 1e-10) {
    throw NumericalError("goe-scatter: S(E) unitarity/symmetry residual above 1e-10");
  }
  ctx.excluded("singular_smatrix_samples", static_cast<long long>(excluded));
  std::vector<std::string> labels;
  const auto rows = run_correlators(ctx, ptrs, cfg.goe.mean_spacing,
                                    series.front().grid.step, labels);
  if (!rows.empty()) {
    ctx.emit("correlators.tsv", [&](std::ostream& os) {
      Metadata meta = ctx.meta();
      meta.set("offset_unit", std::string("mean_spacing"));
      write_correlators(os, rows, labels, meta);
    });
  }
}

void run_pf(RunContext& ctx) {
  const auto& cfg = ctx.cfg();
  const Graph g = build_graph(cfg);
  ctx.seed("graph", kGraphStream);
  ctx.emit("graph.json", [&](std::ostream& os) { write_graph(os, g); });
  const auto f = pf_operator(g);
  const double residual = stochasticity_residual(f.matrix);
  if (residual > 1e-12) throw NumericalError("pf-analysis: PF operator not doubly stochastic");
  const auto s = pf_spectrum(f);
  ctx.emit("pf_spectrum.tsv", [&](std::ostream& os) {
    Metadata meta = ctx.meta();
    meta.set("stochasticity_residual", residual);
    write_pf_spectrum(os, s, meta);
  });
  std::vector<double> r0(static_cast<std::size_t>(f.matrix.rows()), 0.0);
  r0[0] = 1.0;
  const auto decay = mixing_decay(f, r0, cfg.pf.m_max);
  ctx.emit("decay.tsv", [&](std::ostream& os) { write_decay(os, decay, ctx.meta()); });
  if (!cfg.pf.scan_vertices.empty()) {
    const auto scan = gap_scan(cfg.pf.scan_vertices, vertex_condition_from_string(cfg.graph.condition),
                               cfg.pf.scan_seeds, cfg.graph.length_min, cfg.graph.length_max,
                               cfg.workers);
    ctx.emit("gap_scan.tsv", [&](std::ostream& os) { write_gap_scan(os, scan, ctx.meta()); });
  }
  ctx.note("gap", format_double(s.gap));
  ctx.note("mixing", s.mixing ? "true" : "false");
}

MeasureResult load_measure(const std::string& run_dir, const std::string& measure) {
  const RunManifest m = read_manifest(run_dir);
  const std::string file = measure + ".tsv";
  const bool listed = std::any_of(m.outputs.begin(), m.outputs.end(),
                                  [&](const OutputFile& f) { return f.path == file; });
  if (!listed) throw ConfigError("run " + run_dir + " has no measure '" + measure + "'");
  std::ifstream in(fs::path(run_dir) / file);
  if (!in) throw ConfigError("cannot read " + file + " in " + run_dir);
  MeasureResult r = read_measure(in);
  if (r.kind == MeasureKind::nns) {
    const Table t = read_table_file((fs::path(run_dir) / "nns_samples.tsv").string());
    r.samples = t.numeric("s");
  }
  return r;
}

}  // namespace

CompareReport compare_runs(const std::string& run_a, const std::string& run_b,
                           const std::string& measure, double tolerance, CompareMode mode,
                           std::optional<double> lo, std::optional<double> hi) {
  const auto a = load_measure(run_a, measure);
  const auto b = load_measure(run_b, measure);
  CompareReport r;
  r.comparison = compare(a, b, tolerance, mode, lo.value_or(-std::numeric_limits<double>::infinity()),
                         hi.value_or(std::numeric_limits<double>::infinity()));
  r.measure = measure;
  r.run_a = run_a;
  r.run_b = run_b;
  return r;
}

RunManifest run(const ExperimentConfig& cfg) {
  cfg.validate();
  RunContext ctx(cfg);
  switch (cfg.kind) {
    case ExperimentKind::closed_spectrum: {
      ctx.seed("graph", kGraphStream);
      closed_levels(ctx, build_graph(cfg));
      break;
    }
    case ExperimentKind::closed_stats: {
      ctx.seed("graph", kGraphStream);
      const Graph g = build_graph(cfg);
      const auto unfolded = unfold(closed_levels(ctx, g));
      emit_measures(ctx, segment(unfolded.x, cfg.stats.segment), LevelSequences{unfolded.x},
                    cfg.stats.block, "graph");
      break;
    }
    case ExperimentKind::goe_spectrum: {
      GoeConfig gc{cfg.goe.dimension, cfg.goe.mean_spacing, cfg.goe.realizations,
                   ctx.seed("goe", kGoeStream)};
      const auto seqs = goe_levels_unfolded(gc, cfg.workers);
      ctx.emit("levels.tsv", [&](std::ostream& os) {
        Metadata meta = ctx.meta();
        meta.set("kind", std::string("goe_levels_unfolded"));
        meta.set("dimension", gc.dimension);
        meta.set("realizations", gc.realizations);
        TableWriter w(os, meta, {"sequence", "x"});
        for (std::size_t r = 0; r < seqs.size(); ++r) {
          for (double x : seqs[r]) w.row(std::vector<double>{static_cast<double>(r), x});
        }
      });
      LevelSequences segs;
      for (const auto& s : seqs) {
        for (auto& part : segment(s, std::min(cfg.stats.segment, s.size()))) segs.push_back(std::move(part));
      }
      emit_measures(ctx, segs, seqs, 0.0, "goe");
      break;
    }
    case ExperimentKind::open_scatter: run_open_scatter(ctx); break;
    case ExperimentKind::goe_scatter: run_goe_scatter(ctx); break;
    case ExperimentKind::pf_analysis: run_pf(ctx); break;
    case ExperimentKind::compare: {
      for (const auto& d : {cfg.compare.run_a, cfg.compare.run_b}) {
        ctx.input((fs::path(d) / "manifest.json").string());
      }
      const auto rep = compare_runs(cfg.compare.run_a, cfg.compare.run_b, cfg.compare.measure,
                                    cfg.compare.tolerance,
                                    cfg.compare.mode == "sigma" ? CompareMode::sigma
                                                                : CompareMode::distance,
                                    cfg.compare.lo, cfg.compare.hi);
      const auto& c = rep.comparison;
      ctx.emit("compare.tsv", [&](std::ostream& os) {
        TableWriter w(os, ctx.meta(),
                      {"measure", "method", "statistic", "max_sigma", "tolerance", "pass"});
        w.row(std::vector<std::string>{rep.measure, c.method, format_double(c.statistic),
                                       format_double(c.max_sigma), format_double(c.tolerance),
                                       c.pass ? "1" : "0"});
      });
      ctx.emit("verdict.txt", [&](std::ostream& os) {
        os << (c.pass ? "PASS" : "FAIL") << ": " << rep.measure << " " << c.method << " = "
           << format_double(c.statistic) << " (tolerance " << format_double(c.tolerance)
           << ", max " << format_double(c.max_sigma) << " sigma)\n"
           << "run_a: " << rep.run_a << "\nrun_b: " << rep.run_b << "\n";
      });
      ctx.note("verdict", c.pass ? "pass" : "fail");
      break;
    }
  }
  return ctx.finish();
}

}  // namespace qgraph
