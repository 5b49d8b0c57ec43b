#include "spherediff/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "spherediff/errors.hpp"
#include "spherediff/scenario_io.hpp"

namespace spherediff {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void write_engine_csv(std::ostream& out, const std::vector<ObservationPoint>& observe, const SimulationResult& res,
                      bool network) {
  out << "t,point_id,p,i_r,i_theta,i_phi,mass" << (network ? ",sphere_id" : "") << '\n';
  for (std::size_t k = 0; k < res.times.size(); ++k) {
    for (std::size_t i = 0; i < observe.size(); ++i) {
      const FieldVector& fv = res.fields[i][k];
      out << fmt(res.times[k]) << ',' << i << ',' << fmt(fv.p) << ',' << fmt(fv.i_r) << ',' << fmt(fv.i_theta) << ','
          << fmt(fv.i_phi) << ',' << fmt(res.mass[observe[i].sphere][k]);
      if (network) out << ',' << observe[i].sphere + 1;
      out << '\n';
    }
  }
}

void write_oracle_csv(std::ostream& out, const std::vector<ObservationPoint>& observe, const OracleResult& res,
                      bool network, bool normalized) {
  const double p_scale = normalized && res.saturation > 0.0 ? 1.0 / res.saturation : 1.0;
  const double m_scale = normalized && res.injected_mass > 0.0 ? 1.0 / res.injected_mass : 1.0;
  out << "t,point_id,p,i_r,i_theta,i_phi,mass" << (network ? ",sphere_id" : "") << '\n';
  for (std::size_t k = 0; k < res.times.size(); ++k) {
    for (std::size_t i = 0; i < observe.size(); ++i) {
      out << fmt(res.times[k]) << ',' << i << ',' << fmt(res.estimates[i][k].value * p_scale) << ",nan,nan,nan,"
          << fmt(res.mass[observe[i].sphere][k] * m_scale);
      if (network) out << ',' << observe[i].sphere + 1;
      out << '\n';
    }
  }
}

ComparisonReport compare_results(const SimulationResult& engine, const OracleResult& oracle, double T, double tol) {
  if (engine.fields.size() != oracle.estimates.size()) {
    throw std::invalid_argument("compare_results: observation point count differs");
  }
  ComparisonReport report;
  for (std::size_t i = 0; i < engine.fields.size(); ++i) {
    PointComparison pc;
    pc.point_id = static_cast<int>(i);
    for (const FieldVector& fv : engine.fields[i]) pc.peak = std::max(pc.peak, fv.p);
    const double floor = pc.peak > 0.0 ? pc.peak : 1.0;
    for (std::size_t j = 0; j < oracle.times.size(); ++j) {
      const auto k = static_cast<std::size_t>(std::llround(oracle.times[j] / T));
      if (k >= engine.fields[i].size()) break;
      const ConcentrationEstimate& est = oracle.estimates[i][j];
      const double dev = std::abs(engine.fields[i][k].p - est.value);
      const double allowed = std::max(tol * floor, 3.0 * est.sigma);
      pc.max_deviation = std::max(pc.max_deviation, dev / floor);
      pc.worst_ratio = std::max(pc.worst_ratio, dev / allowed);
      if (dev > allowed) ++pc.exceedances;
    }
    report.pass = report.pass && pc.exceedances == 0;
    report.points.push_back(pc);
  }
  return report;
}

namespace {

struct Options {
  std::string scenario;
  std::string out_dir = ".";
  double tol = 0.05;
  bool dump_matrices = false;
  bool normalized = false;
  int threads = 0;
};

std::string output_stem(const ScenarioFile& sf, const std::string& scenario_path) {
  if (!sf.output_path.empty()) {
    fs::path p(sf.output_path);
    return (p.parent_path() / p.stem()).string();
  }
  return fs::path(scenario_path).stem().string();
}

fs::path output_file(const Options& opt, const std::string& stem, const std::string& suffix) {
  fs::create_directories(opt.out_dir);
  return fs::path(opt.out_dir) / (stem + suffix);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string() + ": cannot open for writing");
  return out;
}

void dump_block_matrix(const fs::path& path, const BlockMatrix& m) {
  std::ofstream out = open_output(path);
  out << "row,col,value\n";
  for (const MatrixBlock& blk : m.blocks()) {
    for (std::size_t i = 0; i < blk.index.size(); ++i) {
      for (std::size_t j = 0; j < blk.index.size(); ++j) {
        const double v = (*blk.values)(i, j);
        if (v != 0.0) out << blk.index[i] << ',' << blk.index[j] << ',' << fmt(v) << '\n';
      }
    }
  }
  std::cout << "wrote " << path.string() << '\n';
}

void maybe_dump(const Options& opt, const std::string& stem, const Scenario& sc) {
  if (!opt.dump_matrices) return;
  if (sc.spheres.front().feedback) dump_block_matrix(output_file(opt, stem, "_feedback.csv"), sc.spheres.front().feedback->matrix);
  if (sc.connection) dump_block_matrix(output_file(opt, stem, "_connection.csv"), sc.connection->matrix);
}

int cmd_simulate(const Options& opt) {
  ScenarioFile sf = load_scenario(opt.scenario);
  if (opt.normalized) sf.normalized = true;
  const auto start = std::chrono::steady_clock::now();
  const Scenario sc = build_scenario(sf);
  const std::string stem = output_stem(sf, opt.scenario);
  maybe_dump(opt, stem, sc);
  const SimulationResult res = sc.connection ? simulate_network(sc) : simulate(sc);
  const double elapsed = seconds_since(start);
  const fs::path path = output_file(opt, stem, ".csv");
  std::ofstream out = open_output(path);
  write_engine_csv(out, sc.observe, res, sc.connection.has_value());
  const ModeSet& ms = sc.spheres.front().modes;
  std::cout << "modes: requested " << ms.requested() << ", used " << ms.size() << ", largest |s| "
            << ms.max_decay_rate() << '\n';
  std::cout << "excited blocks:";
  for (int b : res.active_blocks) std::cout << ' ' << b;
  std::cout << "\ninjected mass " << res.injected_mass << ", final mass";
  for (const auto& m : res.mass) std::cout << ' ' << m.back() * (sf.normalized ? res.injected_mass : 1.0);
  std::cout << "\nruntime " << std::fixed << std::setprecision(2) << elapsed << " s\nwrote " << path.string() << '\n';
  return 0;
}

int cmd_oracle(const Options& opt) {
  ScenarioFile sf = load_scenario(opt.scenario);
  if (opt.normalized) sf.normalized = true;
  OracleConfig cfg = sf.oracle;
  cfg.threads = opt.threads;
  const auto start = std::chrono::steady_clock::now();
  const OracleResult res = run_oracle(build_oracle_problem(sf), cfg);
  const double elapsed = seconds_since(start);
  for (const std::string& w : res.warnings) std::cerr << "warning: " << w << '\n';
  const fs::path path = output_file(opt, output_stem(sf, opt.scenario), "_oracle.csv");
  std::ofstream out = open_output(path);
  write_oracle_csv(out, sf.observe, res, sf.network.enabled, sf.normalized);
  std::cout << "particles " << res.n_particles << ", runtime " << std::fixed << std::setprecision(2) << elapsed
            << " s\nwrote " << path.string() << '\n';
  return 0;
}

int cmd_compare(const Options& opt) {
  ScenarioFile sf = load_scenario(opt.scenario);
  if (opt.normalized) sf.normalized = true;
  const std::string stem = output_stem(sf, opt.scenario);

  ScenarioFile absolute = sf;
  absolute.normalized = false;
  auto start = std::chrono::steady_clock::now();
  const Scenario sc = build_scenario(absolute);
  maybe_dump(opt, stem, sc);
  SimulationResult eng = sc.connection ? simulate_network(sc) : simulate(sc);
  const double engine_time = seconds_since(start);

  OracleConfig cfg = sf.oracle;
  cfg.threads = opt.threads;
  start = std::chrono::steady_clock::now();
  const OracleResult orc = run_oracle(build_oracle_problem(sf), cfg);
  const double oracle_time = seconds_since(start);
  for (const std::string& w : orc.warnings) std::cerr << "warning: " << w << '\n';

  const ComparisonReport report = compare_results(eng, orc, sf.T, opt.tol);

  if (sf.normalized && eng.saturation > 0.0) {
    for (auto& series : eng.fields) {
      for (FieldVector& fv : series) {
        fv.p /= eng.saturation;
        fv.i_r /= eng.saturation;
        fv.i_theta /= eng.saturation;
        fv.i_phi /= eng.saturation;
      }
    }
    for (auto& series : eng.mass) {
      for (double& m : series) m /= eng.injected_mass;
    }
  }
  {
    std::ofstream out = open_output(output_file(opt, stem, ".csv"));
    write_engine_csv(out, sc.observe, eng, sc.connection.has_value());
  }
  {
    std::ofstream out = open_output(output_file(opt, stem, "_oracle.csv"));
    write_oracle_csv(out, sf.observe, orc, sf.network.enabled, sf.normalized);
  }

  std::cout << "point_id,peak,max_deviation_of_peak,worst_deviation_over_tolerance,exceedances\n";
  for (const PointComparison& pc : report.points) {
    std::cout << pc.point_id << ',' << fmt(pc.peak) << ',' << fmt(pc.max_deviation) << ',' << fmt(pc.worst_ratio)
              << ',' << pc.exceedances << '\n';
  }
  std::cout << "engine " << std::fixed << std::setprecision(2) << engine_time << " s, oracle " << oracle_time
            << " s, ratio " << (engine_time > 0.0 ? oracle_time / engine_time : 0.0) << '\n';
  std::cout << (report.pass ? "PASS" : "FAIL") << " (tol " << opt.tol << " of peak, floor 3 sigma)\n";
  return report.pass ? 0 : 1;
}

int cmd_spectrum(const Options& opt) {
  const ScenarioFile sf = load_scenario(opt.scenario);
  const Scenario sc = build_scenario(sf);
  const std::string stem = output_stem(sf, opt.scenario);
  maybe_dump(opt, stem, sc);
  const SphereModel& s1 = sc.spheres.front();
  const ModeSet& ms = s1.modes;
  const FeedbackMatrix* fb = s1.feedback ? &*s1.feedback : nullptr;
  const double gamma = s1.gamma.max_gamma();

  {
    const fs::path path = output_file(opt, stem, "_modes.csv");
    std::ofstream out = open_output(path);
    out << "mu,n,nu,m,k,s,N\n";
    for (const ModeIndex& mode : ms.modes()) {
      out << mode.mu << ',' << mode.n << ',' << mode.nu << ',' << mode.m << ',' << fmt(mode.k) << ',' << fmt(mode.s)
          << ',' << fmt(mode.N) << '\n';
    }
    std::cout << "wrote " << path.string() << '\n';
  }
  {
    const fs::path path = output_file(opt, stem, "_eigenvalues.csv");
    std::ofstream out = open_output(path);
    out << "block,n,m,index,open_loop,closed_loop_re,closed_loop_im\n";
    const std::vector<BlockSpectrum> spectrum = closed_loop_spectrum(ms, fb, gamma);
    for (std::size_t b = 0; b < spectrum.size(); ++b) {
      const BlockSpectrum& bs = spectrum[b];
      std::vector<double> open;
      for (int mu : bs.modes) open.push_back(ms[mu].s);
      std::sort(open.rbegin(), open.rend());
      for (Eigen::Index i = 0; i < bs.eigenvalues.size(); ++i) {
        out << b << ',' << bs.n << ',' << bs.m << ',' << i << ',' << fmt(open[i]) << ','
            << fmt(bs.eigenvalues[i].real()) << ',' << fmt(bs.eigenvalues[i].imag()) << '\n';
      }
    }
    std::cout << "wrote " << path.string() << '\n';
  }
  std::cout << "modes: requested " << ms.requested() << ", used " << ms.size() << ", largest |s| "
            << ms.max_decay_rate() << '\n';
  std::cout << "gamma " << gamma << ", leading n=0 closed-loop eigenvalue " << std::setprecision(8)
            << dominant_eigenvalue(ms, fb, gamma) << '\n';
  return 0;
}

int cmd_presets(const Options& opt, const std::string& name) {
  for (const auto& [stem, sf] : preset(name)) {
    const fs::path path = output_file(opt, stem, ".json");
    std::ofstream out = open_output(path);
    out << to_json(sf).dump(2) << '\n';
    std::cout << "wrote " << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Spectral simulation of diffusion in bounded spheres"};
  app.require_subcommand(1);
  Options opt;
  std::string preset_name;

  auto add_common = [&](CLI::App* cmd, bool with_scenario) {
    if (with_scenario) cmd->add_option("scenario", opt.scenario, "Scenario JSON file")->required();
    cmd->add_option("--out", opt.out_dir, "Output directory");
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "Run the spectral engine");
  add_common(simulate_cmd, true);
  auto* oracle_cmd = app.add_subcommand("oracle", "Run the particle simulation");
  add_common(oracle_cmd, true);
  auto* compare_cmd = app.add_subcommand("compare", "Run both and compare");
  add_common(compare_cmd, true);
  compare_cmd->add_option("--tol", opt.tol, "Tolerance as a fraction of the peak concentration");
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Write modes and open/closed-loop eigenvalues");
  add_common(spectrum_cmd, true);
  auto* presets_cmd = app.add_subcommand("presets", "Write built-in scenario files");
  add_common(presets_cmd, false);
  presets_cmd->add_option("name", preset_name, "fig4, fig5 or fig6")->required();

  for (CLI::App* cmd : {simulate_cmd, compare_cmd, spectrum_cmd}) {
    cmd->add_flag("--dump-matrices", opt.dump_matrices, "Write feedback/connection matrices as CSV triplets");
  }
  for (CLI::App* cmd : {simulate_cmd, oracle_cmd, compare_cmd}) {
    cmd->add_flag("--normalized", opt.normalized, "Divide concentrations by M_total / V");
  }
  for (CLI::App* cmd : {oracle_cmd, compare_cmd}) {
    cmd->add_option("--threads", opt.threads, "Particle simulation threads (0 = all cores)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(opt);
    if (*oracle_cmd) return cmd_oracle(opt);
    if (*compare_cmd) return cmd_compare(opt);
    if (*spectrum_cmd) return cmd_spectrum(opt);
    if (*presets_cmd) return cmd_presets(opt, preset_name);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace spherediff
