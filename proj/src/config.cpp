#include "statns/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "statns/error.hpp"
#include "statns/mms.hpp"

namespace statns {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_label() + ": expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + std::string(it->type_name()) + ")");
    }
  }

  template <class F>
  void object(const char* key, F&& f) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    ObjectReader sub(*it, field(key));
    f(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key().c_str()) + ": unknown key");
    }
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string path_label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void apply_overrides(const json& j, ExperimentConfig& c) {
  ObjectReader r(j, "");
  std::string preset_dummy;
  r.read("preset", preset_dummy);
  r.read("name", c.name);
  r.read("seed", c.seed);
  r.read("tolerance_profile", c.tolerance_profile);
  r.read("output_times", c.output_times);
  r.object("grid", [&](ObjectReader& g) {
    g.read("dim", c.grid.dim);
    g.read("extents", c.grid.extents);
    g.read("cells", c.grid.cells);
  });
  r.object("eos", [&](ObjectReader& e) {
    e.read("a", c.solver.eos.a);
    e.read("gamma", c.solver.eos.gamma);
  });
  r.object("solver", [&](ObjectReader& s) {
    s.read("mu", c.solver.mu);
    s.read("lambda", c.solver.lambda);
    s.read("cfl", c.solver.cfl);
    s.read("artificial_dissipation", c.solver.artificial_dissipation);
    s.read("dt", c.solver.dt);
  });
  r.object("boundary", [&](ObjectReader& b) {
    b.read("kind", c.boundary.kind);
    b.read("inflow_density", c.boundary.inflow_density);
    b.read("velocity", c.boundary.velocity);
    b.read("gravity", c.boundary.gravity);
    b.read("rho_floor", c.boundary.rho_floor);
  });
  r.object("initial", [&](ObjectReader& i) {
    i.read("kind", c.initial.kind);
    i.read("rho_mean", c.initial.rho_mean);
    i.read("rho_amplitude", c.initial.rho_amplitude);
    i.read("mom_amplitude", c.initial.mom_amplitude);
  });
  r.object("ensemble", [&](ObjectReader& e) {
    e.read("kind", c.ensemble.kind);
    e.read("atoms", c.ensemble.atoms);
    e.read("modes", c.ensemble.modes);
    e.read("rho_amplitude", c.ensemble.rho_amplitude);
    e.read("mom_amplitude", c.ensemble.mom_amplitude);
  });
  r.object("distance", [&](ObjectReader& d) {
    d.read("method", c.distance.method);
    d.read("epsilon", c.distance.epsilon);
    d.read("time", c.distance.time);
  });
  r.object("continuity", [&](ObjectReader& d) {
    d.read("n_max", c.continuity.n_max);
    d.read("deltas", c.continuity.deltas);
    d.read("horizon", c.continuity.horizon);
    d.read("outputs", c.continuity.outputs);
    d.read("band", c.continuity.band);
    d.read("modes", c.continuity.modes);
  });
  r.object("selection", [&](ObjectReader& s) {
    s.read("dissipation_levels", c.selection.dissipation_levels);
    s.read("lambdas", c.selection.lambdas);
    s.read("horizon", c.selection.horizon);
  });
  r.object("mms", [&](ObjectReader& m) { m.read("resolutions", c.mms.resolutions); });
  r.finish();
}

std::string line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

std::vector<double> uniform_times(double horizon, int count) {
  std::vector<double> t;
  for (int k = 0; k <= count; ++k) t.push_back(horizon * k / count);
  return t;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(grid.dim == 1 || grid.dim == 2, "grid.dim", "must be 1 or 2");
  for (int a = 0; a < grid.dim; ++a) {
    require(grid.extents[a] > 0.0, "grid.extents", "must be positive");
    require(grid.cells[a] >= 4, "grid.cells", "need at least 4 cells per axis");
  }
  require(solver.eos.a > 0.0, "eos.a", "must be positive");
  require(solver.eos.gamma > 1.0, "eos.gamma", "must exceed 1");
  require(solver.mu > 0.0, "solver.mu", "must be positive");
  require(solver.lambda >= 0.0, "solver.lambda", "must be nonnegative");
  require(solver.cfl > 0.0 && solver.cfl <= 1.0, "solver.cfl", "must lie in (0, 1]");
  require(solver.artificial_dissipation > 0.0, "solver.artificial_dissipation", "must be positive");
  require(solver.dt >= 0.0, "solver.dt", "must be nonnegative");
  static const std::set<std::string> bkinds{"wall", "channel", "gravity", "mms"};
  require(bkinds.count(boundary.kind) > 0, "boundary.kind", "unknown kind '" + boundary.kind + "'");
  require(boundary.inflow_density > 0.0, "boundary.inflow_density", "must be positive");
  require(boundary.rho_floor > 0.0, "boundary.rho_floor", "must be positive");
  static const std::set<std::string> ikinds{"uniform", "wave", "mms"};
  require(ikinds.count(initial.kind) > 0, "initial.kind", "unknown kind '" + initial.kind + "'");
  require(initial.rho_mean > 0.0, "initial.rho_mean", "must be positive");
  require(initial.rho_amplitude >= 0.0 && initial.rho_amplitude < 1.0, "initial.rho_amplitude",
          "must lie in [0, 1)");
  if (boundary.kind == "mms" || initial.kind == "mms") {
    require(grid.dim == 1 && grid.extents[0] == 1.0, "grid", "mms needs the 1D unit interval");
    require(boundary.kind == "mms" && initial.kind == "mms", "initial.kind",
            "mms boundary and initial kinds go together");
  }
  require(ensemble.kind == "fourier" || ensemble.kind == "dirac", "ensemble.kind",
          "must be fourier or dirac");
  require(ensemble.atoms >= 1, "ensemble.atoms", "must be at least 1");
  require(ensemble.modes >= 1, "ensemble.modes", "must be at least 1");
  require(ensemble.rho_amplitude >= 0.0 && ensemble.rho_amplitude < 1.0, "ensemble.rho_amplitude",
          "must lie in [0, 1)");
  require(distance.method == "exact" || distance.method == "entropic", "distance.method",
          "must be exact or entropic");
  require(distance.epsilon > 0.0, "distance.epsilon", "must be positive");
  require(continuity.n_max >= 1, "continuity.n_max", "must be at least 1");
  for (double d : continuity.deltas) {
    require(d >= 0.0 && d <= 1.0, "continuity.deltas", "entries must lie in [0, 1]");
  }
  require(continuity.horizon > 0.0, "continuity.horizon", "must be positive");
  require(continuity.outputs >= 1, "continuity.outputs", "must be at least 1");
  require(continuity.band > 1.0, "continuity.band", "must exceed 1");
  require(continuity.modes >= 1, "continuity.modes", "must be at least 1");
  require(!selection.dissipation_levels.empty(), "selection.dissipation_levels", "empty");
  for (double d : selection.dissipation_levels) {
    require(d > 0.0, "selection.dissipation_levels", "entries must be positive");
  }
  require(!selection.lambdas.empty(), "selection.lambdas", "empty");
  for (double l : selection.lambdas) require(l > 0.0, "selection.lambdas", "entries must be positive");
  require(selection.horizon >= 0.0, "selection.horizon", "must be nonnegative");
  for (int n : mms.resolutions) require(n >= 4, "mms.resolutions", "need at least 4 cells");
  require(!output_times.empty(), "output_times", "empty");
  for (std::size_t k = 0; k < output_times.size(); ++k) {
    require(output_times[k] >= 0.0 && std::isfinite(output_times[k]), "output_times",
            "entries must be finite and nonnegative");
    if (k > 0) require(output_times[k] > output_times[k - 1], "output_times", "must increase");
  }
  require(tolerance_profile == "default" || tolerance_profile == "strict", "tolerance_profile",
          "must be default or strict");
}

std::vector<std::string> preset_names() {
  return {"equilibrium", "decaying", "inflow", "mms", "gravity"};
}

ExperimentConfig preset_config(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  c.preset = std::string(name);
  if (name == "equilibrium") {
    c.initial.kind = "uniform";
    c.output_times = uniform_times(1.0, 4);
  } else if (name == "decaying") {
    c.solver.lambda = 0.05;
    c.output_times = uniform_times(30.0, 30);
    c.selection.lambdas = {0.5, 1.0, 2.0};
  } else if (name == "inflow") {
    c.boundary.kind = "channel";
    c.initial.kind = "uniform";
    c.initial.rho_mean = 1.5;
    c.output_times = uniform_times(1.0, 10);
  } else if (name == "mms") {
    c.boundary.kind = "mms";
    c.initial.kind = "mms";
    c.output_times = uniform_times(1.0, 20);
  } else if (name == "gravity") {
    c.boundary.kind = "gravity";
    c.solver.lambda = 0.05;
    c.output_times = uniform_times(10.0, 20);
  } else {
    throw ConfigError("preset: unknown preset '" + std::string(name) + "'");
  }
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error at " + line_column(text, e.byte > 0 ? e.byte - 1 : 0) + ": " +
                      e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ExperimentConfig c;
  if (auto it = j.find("preset"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("preset: wrong type");
    const std::string p = it->get<std::string>();
    if (p != "custom") c = preset_config(p);
    c.preset = p;
  }
  apply_overrides(j, c);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["tolerance_profile"] = c.tolerance_profile;
  j["output_times"] = c.output_times;
  j["grid"] = {{"dim", c.grid.dim}, {"extents", c.grid.extents}, {"cells", c.grid.cells}};
  j["eos"] = {{"a", c.solver.eos.a}, {"gamma", c.solver.eos.gamma}};
  j["solver"] = {{"mu", c.solver.mu},
                 {"lambda", c.solver.lambda},
                 {"cfl", c.solver.cfl},
                 {"artificial_dissipation", c.solver.artificial_dissipation},
                 {"dt", c.solver.dt}};
  j["boundary"] = {{"kind", c.boundary.kind},
                   {"inflow_density", c.boundary.inflow_density},
                   {"velocity", c.boundary.velocity},
                   {"gravity", c.boundary.gravity},
                   {"rho_floor", c.boundary.rho_floor}};
  j["initial"] = {{"kind", c.initial.kind},
                  {"rho_mean", c.initial.rho_mean},
                  {"rho_amplitude", c.initial.rho_amplitude},
                  {"mom_amplitude", c.initial.mom_amplitude}};
  j["ensemble"] = {{"kind", c.ensemble.kind},
                   {"atoms", c.ensemble.atoms},
                   {"modes", c.ensemble.modes},
                   {"rho_amplitude", c.ensemble.rho_amplitude},
                   {"mom_amplitude", c.ensemble.mom_amplitude}};
  j["distance"] = {
      {"method", c.distance.method}, {"epsilon", c.distance.epsilon}, {"time", c.distance.time}};
  j["continuity"] = {{"n_max", c.continuity.n_max},
                     {"deltas", c.continuity.deltas},
                     {"horizon", c.continuity.horizon},
                     {"outputs", c.continuity.outputs},
                     {"band", c.continuity.band},
                     {"modes", c.continuity.modes}};
  j["selection"] = {{"dissipation_levels", c.selection.dissipation_levels},
                    {"lambdas", c.selection.lambdas},
                    {"horizon", c.selection.horizon}};
  j["mms"] = {{"resolutions", c.mms.resolutions}};
  return j.dump(2) + "\n";
}

Grid make_grid(const ExperimentConfig& c) {
  return build_grid(c.grid.dim, c.grid.extents, c.grid.cells);
}

BoundaryData make_boundary(const ExperimentConfig& c, const Grid& grid) {
  const BoundarySpec& b = c.boundary;
  if (b.kind == "wall") return wall_boundary(grid);
  if (b.kind == "mms") {
    MmsProblem p;
    p.eos = c.solver.eos;
    return p.boundary(grid);
  }
  const double rho_b = b.inflow_density;
  const Vec2 u = b.kind == "channel" ? Vec2{b.velocity, 0.0} : Vec2{0.0, 0.0};
  const Vec2 g = b.kind == "gravity" ? Vec2{b.gravity, 0.0} : Vec2{0.0, 0.0};
  std::function<double(Vec2)> potential;
  if (b.kind == "gravity") {
    const double s = b.gravity;
    potential = [s](Vec2 x) { return s * x[0]; };
  }
  return boundary_from_functions(
      grid, [rho_b](Vec2) { return rho_b; }, [u](Vec2) { return u; }, [g](Vec2) { return g; },
      potential, std::min(b.rho_floor, rho_b));
}

FieldState make_initial(const ExperimentConfig& c, const Grid& grid, const BoundaryData& bd) {
  if (c.initial.kind == "mms") {
    MmsProblem p;
    p.eos = c.solver.eos;
    return p.exact(grid, 0.0);
  }
  const auto& u = bd.u_cell;
  FieldState s(grid.cell_count());
  const InitialSpec& in = c.initial;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const Vec2 x = grid.cell_center(k);
    const double sx = x[0] / grid.extents[0];
    const double sy = grid.dim == 2 ? x[1] / grid.extents[1] : 0.5;
    double rho = in.rho_mean;
    Vec2 m{0.0, 0.0};
    if (in.kind == "wave") {
      const double cy = grid.dim == 2 ? std::cos(M_PI * sy) : 1.0;
      rho *= 1.0 + in.rho_amplitude * std::cos(M_PI * sx) * cy;
      m[0] = in.mom_amplitude * std::sin(M_PI * sx) * std::sin(M_PI * sy);
    }
    s.rho[k] = rho;
    s.mom[k] = {m[0] + rho * u[k][0], m[1] + rho * u[k][1]};
  }
  return s;
}

std::shared_ptr<const Forcing> make_forcing(const ExperimentConfig& c) {
  if (c.boundary.kind != "mms") return nullptr;
  MmsProblem p;
  p.eos = c.solver.eos;
  return p.forcing();
}

Tolerances tolerances(std::string_view profile) {
  if (profile == "strict") return {1e-10, 1e-12};
  if (profile == "default") return {};
  throw ConfigError("tolerance_profile: must be default or strict");
}

}  // namespace statns
