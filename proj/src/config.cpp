#include "ljcr/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ljcr {

namespace {

constexpr double kPa = 1e3;
constexpr double kDegree = 3.14159265358979323846 / 180.0;

int line_of(const YAML::Node& node) {
  if (!node.IsDefined()) return 0;
  const YAML::Mark mark = node.Mark();
  return mark.is_null() ? 0 : mark.line + 1;
}

// One mapping node; keys are claimed as they are read and anything left
// over is reported by finish().
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ConfigError(path_ + " must be a mapping", line_of(node_));
  }

  bool present() const { return node_ && node_.IsMap(); }
  int line() const { return line_of(node_); }
  const std::string& path() const { return path_; }

  YAML::Node take(const std::string& key) {
    claimed_.insert(key);
    static const YAML::Node empty(YAML::NodeType::Map);
    const YAML::Node& source = present() ? node_ : empty;
    return source[key];
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void scalar(const std::string& key, double& out) {
    const YAML::Node n = take(key);
    if (n) out = as_double(n, name(key));
  }

  void scalar(const std::string& key, int& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    const double v = as_double(n, name(key));
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw ConfigError(name(key) + " must be an integer", line_of(n));
    out = static_cast<int>(v);
  }

  void scalar(const std::string& key, bool& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    try {
      out = n.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(name(key) + " must be true or false", line_of(n));
    }
  }

  void scalar(const std::string& key, std::string& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    if (!n.IsScalar()) throw ConfigError(name(key) + " must be a string", line_of(n));
    out = n.Scalar();
  }

  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!claimed_.count(key)) throw ConfigError("unknown key '" + name(key) + "'", line_of(kv.first));
    }
  }

  static double as_double(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) throw ConfigError(key + " must be a number", line_of(n));
    try {
      const double v = n.as<double>();
      if (!std::isfinite(v)) throw ConfigError(key + " must be finite", line_of(n));
      return v;
    } catch (const YAML::Exception&) {
      throw ConfigError(key + " must be a number, got '" + n.Scalar() + "'", line_of(n));
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> claimed_;
};

std::vector<double> as_list(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) throw ConfigError(key + " must be a list of numbers", line_of(n));
  std::vector<double> out;
  for (std::size_t k = 0; k < n.size(); ++k) out.push_back(Section::as_double(n[k], key));
  return out;
}

VectorXd as_vector(const YAML::Node& n, const std::string& key) {
  const std::vector<double> v = as_list(n, key);
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

void check(bool ok, const std::string& key, const std::string& constraint, int line) {
  if (!ok) throw ConfigError(key + " " + constraint, line);
}

void read_robot(Section s, Params& robot) {
  s.scalar("links", robot.links);
  s.scalar("tendons", robot.tendons);
  s.scalar("link_length", robot.link_length);
  s.scalar("link_mass", robot.link_mass);
  s.scalar("alpha1", robot.alpha1);
  s.scalar("alpha2", robot.alpha2);
  s.scalar("u0", robot.u0);
  s.scalar("moment_arm", robot.moment_arm);
  if (const YAML::Node r = s.take("routing")) {
    check(r.IsSequence() && r.size() > 0, s.name("routing"), "must be a list of rows", line_of(r));
    MatrixXd g(static_cast<Index>(r.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const VectorXd row = as_vector(r[i], s.name("routing"));
      if (i == 0) g.resize(g.rows(), row.size());
      check(row.size() == g.cols(), s.name("routing"), "rows must have equal length", line_of(r[i]));
      g.row(static_cast<Index>(i)) = row.transpose();
    }
    robot.routing = g;
  }
  s.finish();
  try {
    robot.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), s.line());
  }
}

void read_friction(Section s, Friction& fric) {
  s.scalar("mu_s", fric.mu_s);
  s.scalar("mu_c", fric.mu_c);
  s.scalar("v_s", fric.v_s);
  s.scalar("sigma0", fric.sigma0);
  s.scalar("sigma1", fric.sigma1);
  s.scalar("sigma2", fric.sigma2);
  s.scalar("sigma3", fric.sigma3);
  s.finish();
  try {
    fric.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), s.line());
  }
}

void read_initial(Section s, const Params& robot, State& x) {
  x = State::zero(robot.links);
  for (auto [key, block] : {std::pair{"q", &x.q}, std::pair{"p", &x.p}, std::pair{"z", &x.z}}) {
    if (const YAML::Node n = s.take(key)) {
      *block = as_vector(n, s.name(key));
      check(block->size() == robot.links, s.name(key), "must have robot.links entries", line_of(n));
    }
  }
  s.finish();
}

Phase read_phase(const YAML::Node& node, std::size_t index, const Params& robot) {
  Section s(node, "profile.phases[" + std::to_string(index) + "]");
  check(s.present(), s.path(), "must be a mapping", line_of(node));
  Phase ph;
  ph.name = "phase" + std::to_string(index + 1);
  s.scalar("name", ph.name);
  s.scalar("duration", ph.duration);
  check(ph.duration > 0, s.name("duration"), "must be > 0", s.line());
  if (const YAML::Node n = s.take("ramp")) {
    ph.ramp = Section::as_double(n, s.name("ramp"));
    check(*ph.ramp > 0 && *ph.ramp <= ph.duration, s.name("ramp"), "must lie in (0, duration]",
          line_of(n));
  }
  if (const YAML::Node n = s.take("tension")) {
    ph.tension = as_vector(n, s.name("tension"));
    check(ph.tension.size() == robot.tendons, s.name("tension"), "must have robot.tendons entries",
          line_of(n));
    for (Index i = 0; i < ph.tension.size(); ++i)
      check(ph.tension(i) >= 0, s.name("tension"), "must be non-negative (tendons can only pull)",
            line_of(n[static_cast<std::size_t>(i)]));
  }
  if (const YAML::Node n = s.take("pressure")) {
    const double p = Section::as_double(n, s.name("pressure"));
    check(p >= 0, s.name("pressure"), "must be >= 0 kPa", line_of(n));
    ph.pressure = p * kPa;
  }
  if (const YAML::Node n = s.take("torque")) {
    ph.torque = as_vector(n, s.name("torque"));
    check(ph.torque.size() == robot.links, s.name("torque"), "must have robot.links entries", line_of(n));
  }
  s.finish();
  return ph;
}

void read_profile(Section s, const Params& robot, std::vector<Phase>& phases) {
  if (const YAML::Node n = s.take("phases")) {
    check(n.IsSequence(), s.name("phases"), "must be a list", line_of(n));
    for (std::size_t k = 0; k < n.size(); ++k) phases.push_back(read_phase(n[k], k, robot));
  }
  s.finish();
}

void read_integrator(Section s, IntegratorConfig& cfg) {
  s.scalar("dt", cfg.dt);
  check(cfg.dt > 0, s.name("dt"), "must be > 0", s.line());
  if (const YAML::Node n = s.take("t_end")) {
    cfg.t_end = Section::as_double(n, s.name("t_end"));
    check(*cfg.t_end > 0, s.name("t_end"), "must be > 0", line_of(n));
  }
  s.scalar("record_stride", cfg.record_stride);
  check(cfg.record_stride >= 1, s.name("record_stride"), "must be >= 1", s.line());
  s.finish();
}

std::vector<double> read_pressures(const YAML::Node& n, const std::string& key) {
  std::vector<double> v = as_list(n, key);
  check(!v.empty(), key, "must not be empty", line_of(n));
  for (std::size_t k = 0; k < v.size(); ++k) {
    check(v[k] >= 0, key, "entries must be >= 0 kPa", line_of(n[k]));
    if (k > 0) check(v[k] > v[k - 1], key, "must be strictly ascending", line_of(n[k]));
  }
  for (double& x : v) x *= kPa;
  return v;
}

void positive(Section& s, const std::string& key, double value) {
  check(value > 0, s.name(key), "must be > 0", s.line());
}

void read_analysis(Section s, AnalysisConfig& a) {
  s.scalar("mode", a.mode);
  check(a.mode == "stiffness" || a.mode == "shape-lock", s.name("mode"),
        "must be 'stiffness' or 'shape-lock'", s.line());
  if (const YAML::Node n = s.take("pressures")) a.pressures = read_pressures(n, s.name("pressures"));
  if (const YAML::Node n = s.take("lock_pressures"))
    a.lock_pressures = read_pressures(n, s.name("lock_pressures"));
  double bend_deg = a.bend_target / kDegree;
  s.scalar("bend_target_deg", bend_deg);
  check(bend_deg > 0 && bend_deg < 180, s.name("bend_target_deg"), "must lie in (0, 180)", s.line());
  a.bend_target = bend_deg * kDegree;
  s.scalar("tip_force", a.tip_force);
  positive(s, "tip_force", a.tip_force);
  s.scalar("probe_displacement", a.probe_displacement);
  positive(s, "probe_displacement", a.probe_displacement);
  s.scalar("repeats", a.repeats);
  check(a.repeats >= 1, s.name("repeats"), "must be >= 1", s.line());

  {
    Section p(s.take("probe"), s.name("probe"));
    ProbeOptions& o = a.probe;
    p.scalar("dt", o.dt);
    p.scalar("ramp", o.ramp);
    p.scalar("max_time", o.max_time);
    p.scalar("velocity_tol", o.velocity_tol);
    p.scalar("dwell", o.dwell);
    for (auto [k, v] : {std::pair{"dt", o.dt}, {"ramp", o.ramp}, {"max_time", o.max_time},
                        {"velocity_tol", o.velocity_tol}, {"dwell", o.dwell}})
      positive(p, k, v);
    p.finish();
  }
  {
    Section p(s.take("shape_lock"), s.name("shape_lock"));
    ShapeLockTimings& o = a.shape_lock;
    p.scalar("dt", o.dt);
    p.scalar("settle", o.settle);
    p.scalar("bend_ramp", o.bend_ramp);
    p.scalar("bend_hold", o.bend_hold);
    p.scalar("lock_max", o.lock_max);
    p.scalar("release_ramp", o.release_ramp);
    p.scalar("release_max", o.release_max);
    p.scalar("velocity_tol", o.velocity_tol);
    p.scalar("dwell", o.dwell);
    p.scalar("manifold_tol", o.manifold_tol);
    p.scalar("bend_tolerance", o.bend_tolerance);
    p.scalar("reset_bristle_on_lock", o.reset_bristle_on_lock);
    p.scalar("record_stride", o.record_stride);
    for (auto [k, v] : {std::pair{"dt", o.dt}, {"settle", o.settle}, {"bend_ramp", o.bend_ramp},
                        {"bend_hold", o.bend_hold}, {"lock_max", o.lock_max},
                        {"release_ramp", o.release_ramp}, {"release_max", o.release_max},
                        {"velocity_tol", o.velocity_tol}, {"dwell", o.dwell},
                        {"manifold_tol", o.manifold_tol}, {"bend_tolerance", o.bend_tolerance}})
      positive(p, k, v);
    check(o.record_stride >= 1, p.name("record_stride"), "must be >= 1", p.line());
    p.finish();
  }
  {
    Section p(s.take("attraction"), s.name("attraction"));
    AttractionOptions& o = a.attraction_options;
    p.scalar("enabled", a.attraction);
    p.scalar("max_radius", o.max_radius);
    p.scalar("resolution", o.resolution);
    p.scalar("drift_tolerance", o.drift_tolerance);
    p.scalar("max_time", o.max_time);
    p.scalar("dt", o.dt);
    int seed = static_cast<int>(o.seed);
    p.scalar("seed", seed);
    check(seed >= 0, p.name("seed"), "must be >= 0", p.line());
    o.seed = static_cast<unsigned>(seed);
    for (auto [k, v] : {std::pair{"max_radius", o.max_radius}, {"resolution", o.resolution},
                        {"drift_tolerance", o.drift_tolerance}, {"max_time", o.max_time},
                        {"dt", o.dt}})
      positive(p, k, v);
    p.finish();
  }
  s.finish();
}

std::string list(const std::vector<double>& v, double scale = 1.0) {
  std::string out = "[";
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + format_double(v[k] / scale);
  return out + "]";
}

std::string list(const VectorXd& v) { return list(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

AnalysisConfig::AnalysisConfig() {
  for (int k = 0; k <= 16; ++k) pressures.push_back(5.0 * k * kPa);
  lock_pressures = {0.0, 30 * kPa, 80 * kPa};
}

double ScenarioConfig::t_end() const {
  if (integrator.t_end) return *integrator.t_end;
  if (phases.empty()) return 1.0;
  double t = 0.0;
  for (const auto& ph : phases) t += ph.duration;
  return t;
}

InputProfile ScenarioConfig::profile() const {
  if (phases.empty())
    return InputProfile::constant(VectorXd::Zero(robot.tendons), 0.0, VectorXd::Zero(robot.links));
  return InputProfile::from_phases(phases, robot.links, robot.tendons);
}

void validate_config(const ScenarioConfig& c) {
  try {
    c.robot.validate();
    c.friction.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  check(c.integrator.dt > 0, "integrator.dt", "must be > 0", 0);
  check(c.analysis.probe.dt > 0 && c.analysis.shape_lock.dt > 0, "analysis dt", "must be > 0", 0);
  for (const auto& ph : c.phases) {
    check(ph.pressure >= 0, "profile.phases.pressure", "must be >= 0 kPa", 0);
    check((ph.tension.array() >= 0).all(), "profile.phases.tension", "must be non-negative", 0);
  }
  check(c.initial.q.size() == c.robot.links, "initial.q", "must have robot.links entries", 0);
}

ScenarioConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("parse error: " + e.msg, e.mark.is_null() ? 0 : e.mark.line + 1);
  }
  ScenarioConfig c;
  Section top(root, "");
  if (root && !root.IsNull() && !root.IsMap()) throw ConfigError("top level must be a mapping", line_of(root));
  read_robot(Section(top.take("robot"), "robot"), c.robot);
  read_friction(Section(top.take("friction"), "friction"), c.friction);
  read_initial(Section(top.take("initial"), "initial"), c.robot, c.initial);
  read_profile(Section(top.take("profile"), "profile"), c.robot, c.phases);
  read_integrator(Section(top.take("integrator"), "integrator"), c.integrator);
  read_analysis(Section(top.take("analysis"), "analysis"), c.analysis);
  {
    Section out(top.take("output"), "output");
    out.scalar("dir", c.output_dir);
    check(!c.output_dir.empty(), "output.dir", "must not be empty", out.line());
    out.finish();
  }
  top.finish();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string echo_config(const ScenarioConfig& c) {
  const auto f = [](double x) { return format_double(x); };
  std::ostringstream o;
  o << "# resolved configuration (pressures in kPa)\n";
  o << "robot:\n"
    << "  links: " << c.robot.links << "\n"
    << "  tendons: " << c.robot.tendons << "\n"
    << "  link_length: " << f(c.robot.link_length) << "\n"
    << "  link_mass: " << f(c.robot.link_mass) << "\n"
    << "  alpha1: " << f(c.robot.alpha1) << "\n"
    << "  alpha2: " << f(c.robot.alpha2) << "\n"
    << "  u0: " << f(c.robot.u0) << "\n"
    << "  moment_arm: " << f(c.robot.moment_arm) << "\n";
  if (c.robot.routing) {
    o << "  routing:\n";
    for (Index i = 0; i < c.robot.routing->rows(); ++i)
      o << "    - " << list(VectorXd(c.robot.routing->row(i).transpose())) << "\n";
  }
  const Friction& fr = c.friction;
  o << "friction:\n"
    << "  mu_s: " << f(fr.mu_s) << "\n"
    << "  mu_c: " << f(fr.mu_c) << "\n"
    << "  v_s: " << f(fr.v_s) << "\n"
    << "  sigma0: " << f(fr.sigma0) << "\n"
    << "  sigma1: " << f(fr.sigma1) << "\n"
    << "  sigma2: " << f(fr.sigma2) << "\n"
    << "  sigma3: " << f(fr.sigma3) << "\n";
  o << "initial:\n"
    << "  q: " << list(c.initial.q) << "\n"
    << "  p: " << list(c.initial.p) << "\n"
    << "  z: " << list(c.initial.z) << "\n";
  o << "profile:\n";
  if (c.phases.empty()) {
    o << "  phases: []\n";
  } else {
    o << "  phases:\n";
    for (const auto& ph : c.phases) {
      o << "    - name: \"" << ph.name << "\"\n"
        << "      duration: " << f(ph.duration) << "\n";
      if (ph.ramp) o << "      ramp: " << f(*ph.ramp) << "\n";
      if (ph.tension.size()) o << "      tension: " << list(ph.tension) << "\n";
      o << "      pressure: " << f(ph.pressure / kPa) << "\n";
      if (ph.torque.size()) o << "      torque: " << list(ph.torque) << "\n";
    }
  }
  o << "integrator:\n"
    << "  dt: " << f(c.integrator.dt) << "\n"
    << "  t_end: " << f(c.t_end()) << "\n"
    << "  record_stride: " << c.integrator.record_stride << "\n";
  const AnalysisConfig& a = c.analysis;
  o << "analysis:\n"
    << "  mode: " << a.mode << "\n"
    << "  pressures: " << list(a.pressures, kPa) << "\n"
    << "  lock_pressures: " << list(a.lock_pressures, kPa) << "\n"
    << "  bend_target_deg: " << f(a.bend_target / kDegree) << "\n"
    << "  tip_force: " << f(a.tip_force) << "\n"
    << "  probe_displacement: " << f(a.probe_displacement) << "\n"
    << "  repeats: " << a.repeats << "\n";
  o << "  probe:\n"
    << "    dt: " << f(a.probe.dt) << "\n"
    << "    ramp: " << f(a.probe.ramp) << "\n"
    << "    max_time: " << f(a.probe.max_time) << "\n"
    << "    velocity_tol: " << f(a.probe.velocity_tol) << "\n"
    << "    dwell: " << f(a.probe.dwell) << "\n";
  const ShapeLockTimings& s = a.shape_lock;
  o << "  shape_lock:\n"
    << "    dt: " << f(s.dt) << "\n"
    << "    settle: " << f(s.settle) << "\n"
    << "    bend_ramp: " << f(s.bend_ramp) << "\n"
    << "    bend_hold: " << f(s.bend_hold) << "\n"
    << "    lock_max: " << f(s.lock_max) << "\n"
    << "    release_ramp: " << f(s.release_ramp) << "\n"
    << "    release_max: " << f(s.release_max) << "\n"
    << "    velocity_tol: " << f(s.velocity_tol) << "\n"
    << "    dwell: " << f(s.dwell) << "\n"
    << "    manifold_tol: " << f(s.manifold_tol) << "\n"
    << "    bend_tolerance: " << f(s.bend_tolerance) << "\n"
    << "    reset_bristle_on_lock: " << (s.reset_bristle_on_lock ? "true" : "false") << "\n"
    << "    record_stride: " << s.record_stride << "\n";
  const AttractionOptions& at = a.attraction_options;
  o << "  attraction:\n"
    << "    enabled: " << (a.attraction ? "true" : "false") << "\n"
    << "    max_radius: " << f(at.max_radius) << "\n"
    << "    resolution: " << f(at.resolution) << "\n"
    << "    drift_tolerance: " << f(at.drift_tolerance) << "\n"
    << "    max_time: " << f(at.max_time) << "\n"
    << "    dt: " << f(at.dt) << "\n"
    << "    seed: " << at.seed << "\n";
  o << "output:\n"
    << "  dir: \"" << c.output_dir << "\"\n";
  return o.str();
}

}  // namespace ljcr
