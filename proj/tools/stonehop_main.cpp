// Command-line front end: gait optimization, library construction and
// interpolation, scenario runs, and offline re-scoring of saved logs.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stonehop/gait_library.hpp"
#include "stonehop/harness.hpp"
#include "stonehop/robot_model.hpp"
#include "stonehop/scenario.hpp"
#include "stonehop/trajopt.hpp"

namespace {

using namespace stonehop;

RobotModel load_model(const std::string& path) {
  if (path.empty()) return RobotModel{};
  return RobotModel::load(path);
}

nlohmann::ordered_json metrics_json(const RunMetrics& m) {
  nlohmann::ordered_json j;
  j["success"] = m.success;
  if (!m.success) j["failure"] = m.failure;
  j["crashed"] = m.crashed;
  j["jumps_completed"] = m.jumps_completed;
  j["simulated_time"] = m.simulated_time;
  j["max_abs_pitch"] = m.max_abs_pitch;
  j["final_abs_pitch"] = m.final_abs_pitch;
  j["max_abs_torque"] = m.max_abs_torque;
  j["max_joint_speed"] = m.max_joint_speed;
  j["max_landing_error"] = m.max_landing_error;
  nlohmann::ordered_json jl = nlohmann::ordered_json::array();
  for (const LandingRecord& rec : m.landings) {
    jl.push_back({{"t", rec.t}, {"stone", rec.stone}, {"error_x", rec.error_x}});
  }
  j["landings"] = jl;
  return j;
}

// Library location: explicit flag first, then the scenario's own entry
// (relative entries resolve against the scenario file's directory).
std::string resolve_library_dir(const std::string& flag,
                                const std::string& scenario_path,
                                const Scenario& sc) {
  if (!flag.empty()) return flag;
  if (sc.library_dir.empty()) {
    throw std::runtime_error(
        "no gait library: pass --lib or set gait_library in the scenario");
  }
  std::filesystem::path p(sc.library_dir);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(scenario_path).parent_path() / p).string();
}

int cmd_optimize(double distance, const std::string& out,
                 const std::string& model_path, bool verbose) {
  const RobotModel m = load_model(model_path);
  TrajoptOptions opts;
  opts.verbose = verbose;
  try {
    const GaitTrajectory g = optimize_gait(m, distance, opts);
    save_gait(g, out);
    const GaitValidation v = validate_gait(m, g);
    std::printf("optimized %.3f m jump -> %s\n%s\n", distance, out.c_str(),
                v.describe().c_str());
    return 0;
  } catch (const GaitOptimizationError& e) {
    std::fprintf(stderr, "optimization failed: %s\n%s\n", e.what(),
                 e.validation.describe().c_str());
    return 1;
  }
}

int cmd_library_build(const std::vector<double>& distances, const std::string& out,
                      const std::string& model_path, bool verbose) {
  const RobotModel m = load_model(model_path);
  GaitLibrary lib;
  TrajoptOptions opts;
  opts.verbose = verbose;
  for (double d : distances) {
    std::printf("optimizing %.3f m jump...\n", d);
    std::fflush(stdout);
    lib.add(optimize_gait(m, d, opts));
  }
  save_gait_library(lib, out);
  std::printf("library with %d gaits -> %s\n", lib.size(), out.c_str());
  return 0;
}

int cmd_interp(const std::string& lib_dir, double distance,
               const std::string& out) {
  const GaitLibrary lib = load_gait_library(lib_dir);
  const GaitTrajectory g = lib.interpolate(distance);
  save_gait(g, out);
  std::printf("interpolated %.3f m jump -> %s\n", g.jump_distance, out.c_str());
  return 0;
}

int cmd_validate(const std::string& path, const std::string& model_path) {
  const RobotModel m = load_model(model_path);
  const GaitTrajectory g = load_gait(path);
  const GaitValidation v = validate_gait(m, g);
  std::printf("%s\n", v.describe().c_str());
  return v.ok ? 0 : 1;
}

int cmd_run(const std::string& scenario_path, const std::string& lib_flag,
            int seed_flag, const std::string& out_dir,
            const std::string& model_path) {
  const Scenario sc = load_scenario(scenario_path);
  const unsigned seed = seed_flag >= 0 ? static_cast<unsigned>(seed_flag) : sc.seed;
  const GaitLibrary lib =
      load_gait_library(resolve_library_dir(lib_flag, scenario_path, sc));
  const RobotModel base = load_model(model_path);

  const RunResult r = run_scenario(sc, base, lib, seed);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path d(out_dir);
    save_tick_log(r.log, (d / "log.csv").string());
    save_events(r.events, (d / "events.csv").string());
    save_report(sc, seed, r, (d / "report.json").string());
  }
  std::printf("%s\n", metrics_json(r.metrics).dump(2).c_str());
  return r.metrics.success ? 0 : 1;
}

int cmd_metrics(const std::string& log_path, const std::string& events_path,
                const std::string& scenario_path, int seed_flag,
                const std::string& model_path) {
  const Scenario sc = load_scenario(scenario_path);
  const unsigned seed = seed_flag >= 0 ? static_cast<unsigned>(seed_flag) : sc.seed;
  const RobotModel base = load_model(model_path);
  const ResolvedScenario rs = resolve_scenario(sc, base, seed);

  const std::vector<TickLog> log = load_tick_log(log_path);
  std::vector<ContactEvent> events;
  if (!events_path.empty()) events = load_events(events_path);
  const RunMetrics m = compute_metrics(log, events, rs.stones, base);
  std::printf("%s\n", metrics_json(m).dump(2).c_str());
  return m.success ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stonehop: jump gait optimization and stepping-stone runs"};
  app.require_subcommand(1);
  std::string model_path;
  app.add_option("--model", model_path,
                 "robot parameter file (default: built-in A1 planar values)");

  // gait optimize / interp / validate
  auto* gait = app.add_subcommand("gait", "single-gait operations");
  gait->require_subcommand(1);

  double distance = 0.6;
  std::string out_file = "gait.txt";
  bool verbose = false;
  auto* opt = gait->add_subcommand("optimize", "optimize one periodic jump");
  opt->add_option("--distance", distance, "jump length [m]")->required();
  opt->add_option("--out", out_file, "output gait file")->required();
  opt->add_flag("--verbose", verbose, "print solver progress");

  std::string lib_dir;
  auto* interp = gait->add_subcommand("interp", "interpolate from a library");
  interp->add_option("--lib", lib_dir, "gait library directory")->required();
  interp->add_option("--distance", distance, "jump length [m]")->required();
  interp->add_option("--out", out_file, "output gait file")->required();

  std::string gait_file;
  auto* val = gait->add_subcommand("validate", "audit a gait file");
  val->add_option("--in", gait_file, "gait file")->required();

  // library build
  auto* library = app.add_subcommand("library", "gait library operations");
  library->require_subcommand(1);
  std::vector<double> distances = {0.6, 0.7, 0.8, 0.9};
  std::string out_dir;
  auto* build = library->add_subcommand("build", "optimize a set of distances");
  build->add_option("--distances", distances, "jump lengths [m]");
  build->add_option("--out", out_dir, "output directory")->required();
  build->add_flag("--verbose", verbose, "print solver progress");

  // run
  std::string scenario_path;
  int seed_flag = -1;
  std::string run_out;
  auto* run = app.add_subcommand("run", "simulate a scenario");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--lib", lib_dir, "gait library directory (overrides scenario)");
  run->add_option("--seed", seed_flag, "seed override");
  run->add_option("--out", run_out, "directory for log.csv/events.csv/report.json");

  // metrics
  std::string log_path, events_path;
  auto* metrics = app.add_subcommand("metrics", "re-score a saved log");
  metrics->add_option("--log", log_path, "tick log CSV")->required();
  metrics->add_option("--events", events_path, "events CSV");
  metrics->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  metrics->add_option("--seed", seed_flag, "seed override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (opt->parsed()) return cmd_optimize(distance, out_file, model_path, verbose);
    if (interp->parsed()) return cmd_interp(lib_dir, distance, out_file);
    if (val->parsed()) return cmd_validate(gait_file, model_path);
    if (build->parsed())
      return cmd_library_build(distances, out_dir, model_path, verbose);
    if (run->parsed())
      return cmd_run(scenario_path, lib_dir, seed_flag, run_out, model_path);
    if (metrics->parsed())
      return cmd_metrics(log_path, events_path, scenario_path, seed_flag,
                         model_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
