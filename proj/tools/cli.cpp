#include "cli.hpp"

#include "ljcr/config.hpp"
#include "ljcr/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace ljcr::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kPa = 1e3;
const char* const kCommands[] = {"simulate", "shape-lock", "stiffness", "sweep", "audit"};

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<double> dt;
  std::optional<double> pressure_kpa;
  bool quiet = false;
};

class Run {
 public:
  Run(ScenarioConfig config, const Options& opts, std::ostream& out, std::ostream& err)
      : cfg_(std::move(config)), opts_(opts), out_(opts.quiet ? null_ : out), err_(err) {}

  int dispatch() {
    fs::create_directories(cfg_.output_dir);
    write("config.resolved.yaml", [&](std::ostream& o) { o << echo_config(cfg_); });
    if (opts_.command == "simulate") return simulate_cmd();
    if (opts_.command == "audit") return audit_cmd();
    if (opts_.command == "shape-lock") return shape_lock_cmd();
    if (opts_.command == "stiffness") return stiffness_cmd();
    return sweep_cmd();
  }

 private:
  template <typename Fn>
  void write(const std::string& name, Fn&& fn) {
    const fs::path path = fs::path(cfg_.output_dir) / name;
    std::ofstream o(path, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write '" + path.string() + "'");
    fn(o);
    if (!o) throw std::runtime_error("write failed for '" + path.string() + "'");
  }

  void emit(const std::string& stem, const Table& table) {
    write(stem + ".csv", [&](std::ostream& o) { write_csv(o, table); });
    write(stem + ".txt", [&](std::ostream& o) { write_text(o, table); });
    write_text(out_, table);
    out_ << '\n';
  }

  void report_diagnostics(const Trajectory& traj, const std::string& context) {
    for (const auto& d : traj.diagnostics) err_ << context << d << '\n';
  }

  Trajectory run_profile() {
    SimulationOptions sim;
    sim.dt = cfg_.integrator.dt;
    sim.record_stride = cfg_.integrator.record_stride;
    Trajectory traj = simulate(cfg_.initial, cfg_.profile(), 0.0, cfg_.t_end(), sim, cfg_.robot, cfg_.friction);
    report_diagnostics(traj, "");
    return traj;
  }

  Table events_table(const Trajectory& traj) {
    Table t{"pressure events", {"t", "from_kPa", "to_kPa", "energy_jump"}, {}};
    for (const auto& e : traj.events) t.add({e.t, e.from / kPa, e.to / kPa, e.energy_jump});
    return t;
  }

  int simulate_cmd() {
    const Trajectory traj = run_profile();
    write("trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); });
    const Sample& end = traj.back();
    Table summary{"simulate", {"t_end", "samples", "H", "Hz", "res_p", "res_grad", "events"}, {}};
    summary.add({end.t, static_cast<long>(traj.samples.size()), end.total_energy, end.bristle_energy,
                 end.residual_momentum, end.residual_gradient, static_cast<long>(traj.events.size())});
    emit("summary", summary);
    if (!traj.events.empty()) emit("events", events_table(traj));
    return kOk;
  }

  int audit_cmd() {
    const Trajectory traj = run_profile();
    const InputProfile profile = cfg_.profile();
    Table t{"energy and passivity audit",
            {"segment", "t0", "t1", "u_p_kPa", "max_abs_residual", "quadrature_error", "max_increase",
             "supply", "storage_delta", "tolerance", "condition_held", "passive"},
            {}};
    bool failed = false;
    const auto segments = constant_pressure_segments(traj);
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const Trajectory& seg = segments[k];
      if (seg.samples.size() < 2) continue;
      const EnergyAudit ea = energy_audit(seg, profile, cfg_.robot, cfg_.friction);
      const PassivityAudit pa = passivity_audit(seg, cfg_.friction);
      const bool gated = pa.condition_held && !pa.satisfied;
      failed = failed || gated;
      t.add({static_cast<long>(k), seg.front().t, seg.back().t, seg.front().u_p / kPa, ea.max_abs_residual,
             ea.quadrature_error, ea.max_increase, pa.supply, pa.storage_delta, pa.tolerance,
             std::string(pa.condition_held ? "yes" : "no"), std::string(pa.satisfied ? "yes" : "no")});
    }
    write("trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); });
    emit("audit", t);
    if (!traj.events.empty()) emit("events", events_table(traj));
    if (failed) {
      err_ << "error: passivity violated on a window where the damping condition held\n";
      return kNumeric;
    }
    return kOk;
  }

  std::vector<double> grid(const std::vector<double>& configured) const {
    if (opts_.pressure_kpa) return {*opts_.pressure_kpa * kPa};
    return configured;
  }

  int shape_lock_cmd() {
    const AnalysisConfig& a = cfg_.analysis;
    Table t{"shape locking",
            {"u_p_kPa", "bend_rad", "residual_angle_rad", "tip_displacement_mm", "res_p", "res_grad",
             "settle_time", "converged", "attraction_radius"},
            {}};
    bool failed = false;
    for (double u_p : grid(a.lock_pressures)) {
      const ShapeLockResult r = shape_locking_scenario(a.bend_target, u_p, a.shape_lock, cfg_.robot, cfg_.friction);
      const std::string tag = "shape_lock_" + format_double(u_p / kPa) + "kPa";
      for (std::size_t k = 0; k < r.phases.size(); ++k) {
        report_diagnostics(r.phases[k], tag + " phase " + std::to_string(k + 1) + ": ");
        write(tag + "_phase" + std::to_string(k + 1) + ".csv",
              [&](std::ostream& o) { write_trajectory_csv(o, r.phases[k]); });
      }
      Cell radius = std::string("-");
      if (a.attraction && u_p > 0)
        radius = attraction_radius(r.q_end, u_p, cfg_.robot, cfg_.friction, a.attraction_options);
      const Trajectory& last = r.phases[3];
      t.add({u_p / kPa, r.bend_at_release, r.residual_angle, 1e3 * r.tip_displacement, r.manifold.momentum,
             r.manifold.gradient, last.settled ? Cell(last.settle_time) : Cell(std::string("-")),
             std::string(u_p > 0 ? (r.converged ? "yes" : "no") : "control"), radius});
      if (u_p > 0 && !r.converged) failed = true;
    }
    emit("shape_lock", t);
    if (failed) {
      err_ << "error: shape locking did not reach the equilibrium manifold within the time budget\n";
      return kNonConvergence;
    }
    return kOk;
  }

  int stiffness_cmd() {
    const AnalysisConfig& a = cfg_.analysis;
    Table t{"stiffness",
            {"u_p_kPa", "hessian_rel_err", "probe_rel_err", "probe_max_dq", "kt_analytic", "kt_probe",
             "max_eig_real"},
            {}};
    Table mats{"", {"u_p_kPa", "source", "row", "col", "value"}, {}};
    for (double u_p : grid(a.pressures)) {
      const MatrixXd k = analytic_stiffness(u_p, cfg_.robot, cfg_.friction);
      const MatrixXd h = numeric_stiffness_hessian(u_p, cfg_.robot, cfg_.friction);
      const double h_err = (h - k).norm() / k.norm();
      Cell p_err = std::string("-"), max_dq = std::string("-"), kt_probe = std::string("-");
      Cell eig = std::string("-");
      std::optional<MatrixXd> probed;
      if (u_p > 0) {
        // Torque that keeps the largest column of K^-1 at the requested |dq|.
        const MatrixXd compliance = k.inverse();
        const double torque = a.probe_displacement / compliance.colwise().norm().maxCoeff();
        const ProbeResult pr = probe_stiffness(u_p, torque, cfg_.robot, cfg_.friction, a.probe);
        probed = pr.stiffness;
        p_err = (pr.stiffness - k).norm() / k.norm();
        max_dq = pr.max_displacement;
        eig = linearized_eigenvalues(u_p, cfg_.robot, cfg_.friction).real().maxCoeff();
      }
      kt_probe = transverse_stiffness(u_p, a.tip_force, cfg_.robot, cfg_.friction, a.probe).stiffness;
      t.add({u_p / kPa, h_err, p_err, max_dq, analytic_transverse_stiffness(u_p, cfg_.robot, cfg_.friction),
             kt_probe, eig});
      const auto dump = [&](const std::string& source, const MatrixXd& m) {
        for (Index i = 0; i < m.rows(); ++i)
          for (Index j = 0; j < m.cols(); ++j)
            mats.add({u_p / kPa, source, static_cast<long>(i + 1), static_cast<long>(j + 1), m(i, j)});
      };
      dump("analytic", k);
      dump("hessian", h);
      if (probed) dump("probe", *probed);
    }
    emit("stiffness", t);
    write("stiffness_matrices.csv", [&](std::ostream& o) { write_csv(o, mats); });
    return kOk;
  }

  int sweep_cmd() {
    const AnalysisConfig& a = cfg_.analysis;
    const std::vector<double> g = grid(a.pressures);
    if (a.mode == "shape-lock") return shape_lock_sweep_cmd(g);

    const StiffnessReport rep =
        stiffness_sweep(g, a.tip_force, a.repeats, cfg_.robot, cfg_.friction, a.probe, worker_count());
    Table t{"stiffness sweep", {"u_p_kPa", "repeat", "kt_probe", "kt_analytic", "error"}, {}};
    std::vector<double> x, y;
    std::size_t ok = 0;
    for (const auto& pt : rep.points) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t r = 0; r < pt.kt_probe.size(); ++r) {
        const bool failed = !pt.error.empty() && pt.kt_probe[r] == 0.0;
        t.add({pt.u_p / kPa, static_cast<long>(r + 1), failed ? Cell(std::string("-")) : Cell(pt.kt_probe[r]),
               pt.kt_analytic, failed ? pt.error : std::string()});
        if (!failed) {
          sum += pt.kt_probe[r];
          ++count;
        }
      }
      if (!pt.error.empty()) err_ << "sweep point " << format_double(pt.u_p / kPa) << " kPa: " << pt.error << '\n';
      if (count > 0) {
        x.push_back(pt.u_p / kPa);
        y.push_back(sum / count);
        ++ok;
      }
    }
    emit("sweep", t);
    write("sweep_kt.dat", [&](std::ostream& o) { write_dat(o, "u_p[kPa] K_T[N/m]", x, y); });

    Table fit{"fit K_T = slope u_p + intercept", {"slope_N_per_m_per_kPa", "intercept_N_per_m", "r2", "points"}, {}};
    const Cell r2 = rep.fit.r2 ? Cell(*rep.fit.r2) : Cell(std::string("degenerate"));
    fit.add({rep.fit.slope * kPa, rep.fit.intercept, r2, static_cast<long>(ok)});
    emit("fit", fit);
    return ok == 0 ? kNonConvergence : kOk;
  }

  int shape_lock_sweep_cmd(const std::vector<double>& g) {
    const AnalysisConfig& a = cfg_.analysis;
    const auto points = shape_lock_sweep(g, a.bend_target, a.shape_lock, cfg_.robot, cfg_.friction, worker_count());
    Table t{"shape-lock sweep",
            {"u_p_kPa", "tip_displacement_mm", "residual_angle_rad", "res_p", "res_grad", "converged", "error"},
            {}};
    std::vector<double> x, y;
    for (const auto& pt : points) {
      if (!pt.error.empty()) {
        err_ << "sweep point " << format_double(pt.u_p / kPa) << " kPa: " << pt.error << '\n';
        t.add({pt.u_p / kPa, std::string("-"), std::string("-"), std::string("-"), std::string("-"),
               std::string("no"), pt.error});
        continue;
      }
      t.add({pt.u_p / kPa, 1e3 * pt.tip_displacement, pt.residual_angle, pt.manifold.momentum,
             pt.manifold.gradient, std::string(pt.u_p > 0 ? (pt.converged ? "yes" : "no") : "control"),
             std::string()});
      x.push_back(pt.u_p / kPa);
      y.push_back(1e3 * pt.tip_displacement);
    }
    emit("sweep_shape_lock", t);
    write("sweep_tip.dat", [&](std::ostream& o) { write_dat(o, "u_p[kPa] tip_displacement[mm]", x, y); });
    return x.empty() ? kNonConvergence : kOk;
  }

  ScenarioConfig cfg_;
  Options opts_;
  std::ostringstream null_;
  std::ostream& out_;
  std::ostream& err_;
};

ScenarioConfig resolve(const Options& opts) {
  ScenarioConfig cfg = opts.config_path.empty() ? parse_config("") : load_config(opts.config_path);
  if (opts.out_dir) cfg.output_dir = *opts.out_dir;
  if (opts.dt) {
    if (!(*opts.dt > 0)) throw ConfigError("--dt must be > 0");
    cfg.integrator.dt = *opts.dt;
    cfg.analysis.probe.dt = *opts.dt;
    cfg.analysis.shape_lock.dt = *opts.dt;
    cfg.analysis.attraction_options.dt = *opts.dt;
  }
  if (opts.pressure_kpa) {
    if (!(*opts.pressure_kpa >= 0)) throw ConfigError("--pressure must be >= 0 kPa");
    // Constant set-point for simulate/audit; single-point grid otherwise.
    if (cfg.phases.empty()) cfg.phases.push_back(Phase{"hold", cfg.t_end(), std::nullopt, {}, 0.0, {}});
    for (auto& ph : cfg.phases) ph.pressure = *opts.pressure_kpa * kPa;
    cfg.analysis.pressures = {*opts.pressure_kpa * kPa};
    cfg.analysis.lock_pressures = {*opts.pressure_kpa * kPa};
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace

std::string usage() {
  return "usage: ljcr <simulate|shape-lock|stiffness|sweep|audit> [--config <path>] [--out <dir>]\n"
         "            [--dt <seconds>] [--pressure <kPa>] [--quiet]\n"
         "environment: LJCR_WORKERS sets the sweep worker count\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (!args.empty() && args.front().rfind("-", 0) != 0 &&
      std::find(std::begin(kCommands), std::end(kCommands), args.front()) == std::end(kCommands)) {
    err << "error: unknown subcommand '" << args.front() << "'\n" << usage();
    return kConfig;
  }

  Options opts;
  CLI::App app{"Layer-jamming continuum robot simulation and analysis", "ljcr"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", opts.config_path, "scenario configuration (YAML)")->check(CLI::ExistingFile);
  app.add_option("--out", opts.out_dir, "output directory (overrides output.dir)");
  app.add_option("--dt", opts.dt, "integration step in seconds (overrides every dt)");
  app.add_option("--pressure", opts.pressure_kpa, "vacuum pressure override in kPa");
  app.add_flag("--quiet", opts.quiet, "suppress report tables on stdout");
  for (const char* name : kCommands) app.add_subcommand(name)->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help() << usage();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << usage();
    return kConfig;
  }
  opts.command = app.get_subcommands().front()->get_name();

  try {
    Run run(resolve(opts), opts, out, err);
    return run.dispatch();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const NonConvergenceError& e) {
    err << "non-convergence: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace ljcr::cli
