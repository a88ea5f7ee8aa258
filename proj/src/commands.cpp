#include "pointer/commands.hpp"
#include "pointer/io.hpp"
#include "pointer/locmodel.hpp"
#include "pointer/packets.hpp"
#include "pointer/pdp.hpp"
#include "pointer/reference.hpp"
#include "pointer/soliton.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#ifndef POINTER_VERSION
#define POINTER_VERSION "unknown"
#endif

namespace pointer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A p-value below alpha. Carries the message for the log.
struct Rejection : Error
{
  using Error::Error;
};

// JSON object view that remembers which keys were read, so leftovers can be rejected.
class Section
{
public:
  Section(json j, std::string path)
    : j_(std::move(j))
    , path_(std::move(path))
  {
    if (j_.is_null()) {
      j_ = json::object();
    }
    if (!j_.is_object()) {
      throw ConfigError(path_ + " must be an object");
    }
  }

  bool has(std::string const &key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T get(std::string const &key, T fallback)
  {
    used_.insert(key);
    if (!has(key)) {
      return fallback;
    }
    return convert<T>(key);
  }

  template <typename T>
  std::optional<T> optional(std::string const &key)
  {
    used_.insert(key);
    if (!has(key)) {
      return std::nullopt;
    }
    return convert<T>(key);
  }

  template <typename T>
  T require(std::string const &key)
  {
    used_.insert(key);
    if (!has(key)) {
      throw ConfigError(path_ + "." + key + " is required");
    }
    return convert<T>(key);
  }

  Section sub(std::string const &key)
  {
    used_.insert(key);
    return Section(has(key) ? j_.at(key) : json::object(), path_ + "." + key);
  }

  std::vector<Section> list(std::string const &key)
  {
    used_.insert(key);
    std::vector<Section> out;
    if (!has(key)) {
      return out;
    }
    if (!j_.at(key).is_array()) {
      throw ConfigError(path_ + "." + key + " must be an array");
    }
    for (std::size_t i = 0; i < j_.at(key).size(); ++i) {
      out.emplace_back(j_.at(key)[i], path_ + "." + key + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  void allow(std::string const &key) { used_.insert(key); }

  void finish() const
  {
    for (auto const &[key, value] : j_.items()) {
      if (!used_.count(key)) {
        throw ConfigError("unknown configuration key " + path_ + "." + key);
      }
    }
  }

  std::string const &path() const { return path_; }

private:
  template <typename T>
  T convert(std::string const &key) const
  {
    try {
      return j_.at(key).get<T>();
    } catch (json::exception const &e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  json j_;
  std::string path_;
  std::set<std::string> used_;
};

double positive(double v, std::string const &name)
{
  if (!(v > 0) || !std::isfinite(v)) {
    throw ConfigError(name + " must be positive");
  }
  return v;
}

std::string timestamp()
{
  auto const now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Everything a command needs besides its own section.
struct Run
{
  std::string command;
  fs::path out;
  json echo; // effective configuration
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::ostream *log = nullptr;
  std::vector<std::string> outputs;

  fs::path file(std::string const &name)
  {
    outputs.push_back(name);
    fs::create_directories((out / name).parent_path());
    return out / name;
  }

  std::uint64_t require_seed() const
  {
    if (!seed) {
      throw ConfigError("a seed is required for stochastic runs (config key 'seed' or --seed)");
    }
    return *seed;
  }

  void write_json(std::string const &name, json const &j)
  {
    std::ofstream os(file(name));
    os << std::setw(2) << j << '\n';
  }
};

// Model parameters. Runs use units hbar = m = gamma = 1; physical inputs are reduced to kappa.
ModelParams read_model(Section model, json &echo)
{
  ModelParams p;
  if (model.has("kappa")) {
    for (char const *k : {"gamma", "sigma_G", "mass", "hbar"}) {
      if (model.has(k)) {
        throw ConfigError("model: give either kappa or the physical parameters, not both");
      }
    }
    double const kappa = positive(model.require<double>("kappa"), "model.kappa");
    p = {1.0, std::sqrt(kappa), 1.0, 1.0};
  } else {
    ModelParams const phys{model.get("gamma", 1.0), model.get("sigma_G", 1.0), model.get("mass", 1.0),
                           model.get("hbar", 1.0)};
    phys.validate();
    p = nondimensionalize(phys);
    auto const u = unit_scales(phys);
    echo["units"] = {{"time", u.time}, {"length", u.length()}, {"momentum", u.momentum()}};
  }
  model.finish();
  p.validate();
  echo["kappa"] = p.kappa();
  return p;
}

struct PacketSpec
{
  double x = 0;
  double weight = 1;
  double sigma = 1;
  double momentum = 0;
};

std::vector<PacketSpec> read_packets(Section &sec, std::string const &key, ModelParams const &p)
{
  std::vector<PacketSpec> out;
  for (Section s : sec.list(key)) {
    PacketSpec k;
    k.x = s.get("x", 0.0);
    k.weight = s.get("weight", 1.0);
    k.sigma = positive(s.get("sigma", p.localization_length()), s.path() + ".sigma");
    k.momentum = s.get("momentum", 0.0);
    if (!(k.weight >= 0)) {
      throw ConfigError(s.path() + ".weight must be non-negative");
    }
    s.finish();
    out.push_back(k);
  }
  return out;
}

WaveFunction superposition(Grid const &grid, std::vector<PacketSpec> const &packets, ModelParams const &p)
{
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(grid.n);
  for (auto const &k : packets) {
    sum += std::sqrt(k.weight) * gaussian_packet(grid, k.x, k.sigma, k.momentum, p.hbar).amplitudes();
  }
  return WaveFunction(grid, std::move(sum));
}

void write_profile(CsvWriter &csv, WaveFunction const &psi, std::optional<double> t = std::nullopt)
{
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    if (t) {
      csv << *t;
    }
    csv << psi.grid().x(i) << std::abs(psi[i]) << std::arg(psi[i]);
    csv.end_row();
  }
}

void write_series(Run &run, std::vector<TimeSample> const &series)
{
  CsvWriter csv(run.file("timeseries.csv"), {"t", "norm_drift", "centroid", "sigma", "shape_residual"});
  for (auto const &s : series) {
    csv << s.t << s.norm_drift << s.centroid << s.sigma << s.shape_residual;
    csv.end_row();
  }
  csv.close();
}

int cmd_soliton(Section root, Run &run)
{
  ModelParams const p = read_model(root.sub("model"), run.echo);
  Section sec = root.sub("soliton");
  std::string const mode = sec.get<std::string>("mode", "find");
  if (mode != "find" && mode != "evolve") {
    throw ConfigError("soliton.mode must be 'find' or 'evolve'");
  }
  auto const n = sec.get<Eigen::Index>("n", 4096);
  double const domain = positive(sec.get("domain", 80.0 * p.localization_length()), "soliton.domain");
  Grid const grid = Grid::centered(domain, n);
  EvolveConfig cfg;
  cfg.dt = sec.get("dt", default_dt(grid, p));
  cfg.t_max = sec.get("t_max", mode == "find" ? 4000.0 : 100.0);
  cfg.convergence_tol = sec.get("convergence_tol", 1e-6);
  cfg.potential_slope = sec.get("potential_slope", 0.0);
  cfg.recenter = sec.get("recenter", false);
  cfg.record_interval = sec.get("record_interval", 1.0);
  cfg.snapshot_times = sec.get("snapshot_times", std::vector<double>{});
  auto const packets = read_packets(sec, "packets", p);
  sec.finish();
  cfg.validate(grid, p);
  LocalizationRate const rate(p);

  json summary;
  summary["grid"] = {{"n", grid.n}, {"x0", grid.x0}, {"dx", grid.dx}};
  summary["dt"] = cfg.dt;
  if (mode == "find") {
    SolitonSearch search{grid, cfg, std::nullopt, 3};
    if (!packets.empty()) {
      search.initial = superposition(grid, packets, p);
    }
    SolitonProfile prof;
    try {
      prof = find_soliton(p, rate, search);
    } catch (ConvergenceError const &e) {
      *run.log << "error: " << e.what() << "\nresidual history:";
      for (double r : e.residual_history) {
        *run.log << ' ' << r;
      }
      *run.log << '\n';
      return exit_internal;
    }
    write_series(run, prof.series);
    CsvWriter csv(run.file("profile.csv"), {"x", "abs_psi", "phase"});
    write_profile(csv, prof.state);
    csv.close();
    summary["converged"] = prof.converged;
    summary["residual"] = prof.residual;
    summary["residual_history"] = prof.residual_history;
    summary["t_final"] = prof.t_final;
    summary["sigma_pi"] = prof.sigma_pi;
    summary["width"] = prof.sigma_pi * p.sigma_G / p.hbar;
    summary["v0"] = prof.v0;
    summary["tail_k"] = prof.tail_k;
    summary["tail_r_squared"] = prof.tail_r_squared;
    run.write_json("summary.json", summary);
    *run.log << "soliton: width sigma_pi sigma_G/hbar = " << prof.sigma_pi * p.sigma_G / p.hbar
             << ", residual = " << prof.residual << (prof.converged ? " (converged)" : " (not converged)") << '\n';
    if (!prof.converged) {
      *run.log << "error: soliton search did not converge by t_max = " << cfg.t_max << '\n';
      return exit_internal;
    }
    return exit_ok;
  }

  WaveFunction const psi0 = packets.empty() ? gaussian_packet(grid, grid.center(), p.localization_length(), 0.0, p.hbar)
                                            : superposition(grid, packets, p);
  EvolveResult const res = evolve_nonlinear(psi0, cfg, p, rate);
  write_series(run, res.series);
  {
    CsvWriter csv(run.file("profile.csv"), {"x", "abs_psi", "phase"});
    write_profile(csv, res.final_state);
    csv.close();
  }
  if (!res.snapshots.empty()) {
    CsvWriter csv(run.file("snapshots.csv"), {"t", "x", "abs_psi", "phase"});
    for (auto const &[t, psi] : res.snapshots) {
      write_profile(csv, psi, t);
    }
    csv.close();
  }
  summary["t_final"] = res.t_final;
  summary["max_norm_drift"] = res.max_norm_drift;
  summary["drift_constant"] = res.drift_constant;
  summary["centroid"] = res.final_state.centroid() + res.frame.shift;
  summary["sigma"] = res.final_state.position_spread();
  run.write_json("summary.json", summary);
  return exit_ok;
}

int cmd_weights(Section root, Run &run)
{
  ModelParams const p = read_model(root.sub("model"), run.echo);
  Section sec = root.sub("weights");
  BornTestConfig cfg;
  cfg.n_packets = sec.get<Eigen::Index>("N", 2);
  cfg.n_trials = sec.get<std::size_t>("n_trials", 10000);
  cfg.separation = positive(sec.get("separation", 20.0), "weights.separation");
  cfg.packet.epsilon_win = sec.get("epsilon_win", 1e-6);
  cfg.packet.dt = positive(sec.get("dt", 0.01), "weights.dt");
  cfg.packet.t_timeout = positive(sec.get("t_timeout", 1000.0), "weights.t_timeout");
  cfg.packet.burn_in = sec.get("burn_in", 50);
  cfg.weights = sec.get("weights", std::vector<double>{});
  bool const control = sec.get("negative_control", false);
  double const alpha = sec.get("alpha", 0.01);
  sec.finish();
  if (!(alpha > 0 && alpha < 1)) {
    throw ConfigError("weights.alpha must lie in (0, 1)");
  }
  cfg.seed = run.require_seed();
  cfg.workers = run.workers;

  WinnerStatistics const st = born_weight_test(cfg, p);

  CsvWriter trials(run.file("trials.csv"), {"trial", "seed", "winner", "n_jumps", "termination_time", "timed_out"});
  for (std::size_t i = 0; i < st.trials.size(); ++i) {
    auto const &tr = st.trials[i];
    trials << i << stream_seed(cfg.seed, i) << tr.winner << tr.jumps << tr.t_end << tr.timed_out;
    trials.end_row();
  }
  trials.close();
  CsvWriter cells(run.file("weights.csv"), {"index", "expected", "observed"});
  for (std::size_t i = 0; i < st.counts.size(); ++i) {
    cells << i << st.expected[i] << st.counts[i];
    cells.end_row();
  }
  cells.close();
  ChiSquare const &test = control ? st.control : st.test;
  CsvWriter exp(run.file("experiment.csv"), {"N", "n_trials", "chi2", "p_value", "pooled_cells", "dof", "timeouts", "expected"});
  exp << cfg.n_packets << st.n_trials << test.chi2 << test.p_value << test.pooled_cells << test.dof << st.timeouts
      << std::string(control ? "uniform" : "born");
  exp.end_row();
  exp.close();

  *run.log << "weights: N = " << cfg.n_packets << ", trials = " << st.n_trials << ", chi2 = " << test.chi2
           << ", dof = " << test.dof << ", p = " << test.p_value << " against "
           << (control ? "uniform (negative control)" : "Born") << " weights\n";
  if (test.pooled_cells > 0) {
    *run.log << "weights: pooled " << test.pooled_cells << " cells with expected count below 5\n";
  }
  if (st.timeouts > 0) {
    *run.log << "weights: " << st.timeouts << " trajectories timed out and were excluded\n";
  }
  if (test.p_value < alpha) {
    throw Rejection("chi-square test rejected at alpha = " + format_double(alpha) +
                    (control ? " (expected for the negative control)" : ""));
  }
  return exit_ok;
}

int cmd_ensemble(Section root, Run &run)
{
  ModelParams const p = read_model(root.sub("model"), run.echo);
  Section sec = root.sub("ensemble");
  auto const n = sec.get<Eigen::Index>("n", 64);
  double const domain = positive(sec.get("domain", 64.0), "ensemble.domain");
  auto const factor = sec.get<Eigen::Index>("downsample", 1);
  TrajectoryOptions topt;
  topt.dt = positive(sec.get("dt", 0.01), "ensemble.dt");
  double const ref_dt = positive(sec.get("reference_dt", topt.dt), "ensemble.reference_dt");
  auto const m = sec.get<std::size_t>("trajectories", 1000);
  std::vector<double> times = sec.get("times", std::vector<double>{0.5, 1.0, 2.0});
  bool const snapshots = sec.get("write_snapshots", false);
  std::string const rule_name = sec.get<std::string>("winner_rule", "nearest");
  auto packets = read_packets(sec, "packets", p);
  sec.finish();
  if (packets.empty()) {
    packets = {{-domain / 4, 0.5, domain / 40, 0.0}, {domain / 4, 0.5, domain / 40, 0.0}};
  }
  if (m == 0) {
    throw ConfigError("ensemble.trajectories must be positive");
  }
  if (rule_name != "nearest" && rule_name != "majority") {
    throw ConfigError("ensemble.winner_rule must be 'nearest' or 'majority'");
  }
  for (double t : times) {
    positive(t, "ensemble.times");
  }
  std::sort(times.begin(), times.end());
  WinnerRule const rule = rule_name == "nearest" ? WinnerRule::Nearest : WinnerRule::Majority;
  std::uint64_t const seed = run.require_seed();

  Grid const grid = Grid::centered(domain, n);
  WaveFunction const psi0 = superposition(grid, packets, p);
  LocalizationRate const rate(p);
  topt.t_max = times.back();
  topt.snapshot_times = times;

  std::vector<TrajectoryRecord> recs(m);
  auto run_range = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      recs[i] = simulate_trajectory(psi0, topt, p, rate, stream_seed(seed, i));
    }
  };
  if (run.workers <= 1) {
    run_range(0, m);
  } else {
    std::vector<std::future<void>> jobs;
    std::size_t const chunk = (m + run.workers - 1) / run.workers;
    for (std::size_t b = 0; b < m; b += chunk) {
      jobs.push_back(std::async(std::launch::async, run_range, b, std::min(m, b + chunk)));
    }
    for (auto &j : jobs) {
      j.get();
    }
  }

  std::vector<double> centers;
  for (auto const &k : packets) {
    centers.push_back(k.x);
  }
  CsvWriter traj(run.file("trajectories.csv"),
                 {"trajectory", "seed", "n_jumps", "winner_index", "final_centroid", "final_width", "max_jump_overlap"});
  for (std::size_t i = 0; i < m; ++i) {
    double ov = 0;
    for (auto const &e : recs[i].events) {
      ov = std::max(ov, e.overlap);
    }
    traj << i << recs[i].seed << recs[i].jumps() << winner_index(recs[i].final_psi, centers, rule)
         << recs[i].final_psi.centroid() << recs[i].final_psi.position_spread() << ov;
    traj.end_row();
  }
  traj.close();

  MasterConfig mcfg;
  mcfg.dt = ref_dt;
  mcfg.snapshot_times = times;
  DensityMatrix const rho0 = DensityMatrix::pure(downsample(psi0, factor));
  MasterResult const ref = evolve_master(rho0, times.back(), mcfg, p, rate);

  CsvWriter td(run.file("trace_distance.csv"), {"t", "trace_distance", "mc_error", "purity_ensemble", "purity_reference"});
  CsvWriter diag(run.file("diagonal.csv"), {"t", "x", "ensemble", "reference"});
  CsvWriter coh(run.file("coherence.csv"), {"t", "s", "ensemble", "reference"});
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<WaveFunction> states;
    states.reserve(m);
    for (auto const &r : recs) {
      states.push_back(downsample(r.snapshots.at(k).second, factor));
    }
    EnsembleDensity const ens = ensemble_density(states);
    DensityMatrix const &rr = ref.snapshots.at(k).second;
    double const mc = ens.std_error.norm() * ens.rho.grid().dx;
    td << times[k] << trace_distance(ens.rho, rr) << mc << ens.rho.purity() << rr.purity();
    td.end_row();
    for (Eigen::Index i = 0; i < rr.grid().n; ++i) {
      diag << times[k] << rr.grid().x(i) << ens.rho.kernel()(i, i).real() << rr.kernel()(i, i).real();
      diag.end_row();
    }
    CoherenceFit const ce = coherence_profile(ens.rho);
    CoherenceFit const cr = coherence_profile(rr);
    for (std::size_t j = 0; j < std::min(ce.s.size(), cr.s.size()); ++j) {
      coh << times[k] << cr.s[j] << ce.magnitude[j] << cr.magnitude[j];
      coh.end_row();
    }
    if (snapshots) {
      std::ofstream os(run.file("snapshots/reference_t" + std::to_string(k) + ".bin"), std::ios::binary);
      write_snapshot(os, rr, times[k]);
      for (std::size_t i = 0; i < m; ++i) {
        std::ofstream ws(run.file("snapshots/traj" + std::to_string(i) + "_t" + std::to_string(k) + ".bin"),
                         std::ios::binary);
        write_snapshot(ws, recs[i].snapshots.at(k).second, times[k]);
      }
    }
    *run.log << "ensemble: t = " << times[k] << ", trace distance = " << trace_distance(ens.rho, rr)
             << ", MC error = " << mc << '\n';
  }
  td.close();
  diag.close();
  coh.close();
  return exit_ok;
}

int cmd_widthsweep(Section root, Run &run)
{
  Section sec = root.sub("widthsweep");
  std::vector<double> kappas = sec.get("kappas", std::vector<double>{});
  auto const kmin = sec.optional<double>("kappa_min");
  auto const kmax = sec.optional<double>("kappa_max");
  auto const points = sec.get<int>("points", 8);
  WidthSweepConfig cfg;
  cfg.t_max = positive(sec.get("t_max", 4000.0), "widthsweep.t_max");
  cfg.convergence_tol = positive(sec.get("convergence_tol", 1e-6), "widthsweep.convergence_tol");
  double const a_ref = positive(sec.get("a_loc_reference", 0.4), "widthsweep.a_loc_reference");
  bool const use_cache = sec.get("cache", true);
  sec.finish();
  if (kappas.empty()) {
    double const lo = positive(kmin.value_or(1e-4), "widthsweep.kappa_min");
    double const hi = positive(kmax.value_or(10.0), "widthsweep.kappa_max");
    if (points < 1 || hi < lo) {
      throw ConfigError("widthsweep needs points >= 1 and kappa_max >= kappa_min");
    }
    for (int i = 0; i < points; ++i) {
      kappas.push_back(points == 1 ? lo : lo * std::pow(hi / lo, double(i) / (points - 1)));
    }
  } else if (kmin || kmax) {
    throw ConfigError("widthsweep: give either kappas or kappa_min/kappa_max");
  }
  for (double k : kappas) {
    positive(k, "widthsweep.kappas");
  }
  cfg.workers = run.workers;

  // Rows already computed by an earlier run with the same solver settings are reused.
  fs::path const cache_dir = run.out / "cache";
  auto cache_file = [&](double kappa) {
    return cache_dir / ("kappa_" + format_double(kappa) + "_tmax_" + format_double(cfg.t_max) + "_tol_" +
                        format_double(cfg.convergence_tol) + ".csv");
  };
  std::vector<std::string> const header{"kappa", "width", "converged", "residual", "t_final", "n", "domain", "error"};
  std::vector<WidthRow> rows(kappas.size());
  std::vector<double> missing;
  std::vector<std::size_t> missing_index;
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    fs::path const f = cache_file(kappas[i]);
    if (use_cache && fs::exists(f)) {
      CsvTable const t = read_csv(f);
      if (t.header == header && t.rows.size() == 1 && t.rows[0].size() >= 7) {
        auto const &r = t.rows[0];
        rows[i] = {std::stod(r[0]), std::stod(r[1]), r[2] == "1", std::stod(r[3]), std::stod(r[4]),
                   static_cast<Eigen::Index>(std::stoll(r[5])), std::stod(r[6]), r.size() > 7 ? r[7] : ""};
        *run.log << "widthsweep: kappa = " << kappas[i] << " from cache\n";
        continue;
      }
    }
    missing.push_back(kappas[i]);
    missing_index.push_back(i);
  }
  auto write_row = [](CsvWriter &csv, WidthRow const &r) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    csv << r.kappa << r.width << r.converged << r.residual << r.t_final << static_cast<long long>(r.n) << r.domain
        << err;
    csv.end_row();
  };
  for (std::size_t j = 0; j < missing.size(); ++j) {
    *run.log << "widthsweep: solving kappa = " << missing[j] << '\n';
    WidthRow const row = width_curve({missing[j]}, cfg).front();
    rows[missing_index[j]] = row;
    if (use_cache) {
      fs::create_directories(cache_dir);
      CsvWriter c(cache_file(missing[j]), header);
      write_row(c, row);
      c.close();
    }
  }

  CsvWriter csv(run.file("widths.csv"), header);
  std::vector<WidthSample> table;
  for (auto const &r : rows) {
    write_row(csv, r);
    if (r.converged && r.error.empty()) {
      table.push_back({r.kappa, r.width});
    } else {
      *run.log << "widthsweep: kappa = " << r.kappa << " failed: " << (r.error.empty() ? "not converged" : r.error)
               << '\n';
    }
  }
  csv.close();

  json fit;
  fit["rows"] = rows.size();
  fit["converged_rows"] = table.size();
  double dev_ref = 0;
  for (auto const &s : table) {
    dev_ref = std::max(dev_ref, std::abs(width_model_1d(s.kappa, a_ref) / s.width - 1));
  }
  fit["a_loc_reference"] = a_ref;
  fit["max_relative_deviation_at_reference"] = dev_ref;
  if (table.size() >= 5) {
    ALocFit const f = fit_a_loc(table);
    fit["a_loc"] = f.a_loc;
    fit["std_error"] = f.std_error;
    fit["max_relative_deviation"] = f.max_relative_deviation;
    fit["decades"] = f.decades;
    fit["narrow_span"] = f.narrow_span;
    *run.log << "widthsweep: a_loc = " << f.a_loc << " +- " << f.std_error
             << ", max relative deviation = " << f.max_relative_deviation << '\n';
    if (f.narrow_span) {
      *run.log << "warning: kappa range spans fewer than two decades; a_loc is poorly constrained\n";
    }
  } else {
    fit["a_loc"] = nullptr;
    *run.log << "warning: " << table.size() << " converged rows; at least 5 are needed to fit a_loc, no fit\n";
  }
  run.write_json("fit.json", fit);
  return exit_ok;
}

int cmd_gasmodel(Section root, Run &run)
{
  Section sec = root.sub("gasmodel");
  double const a_loc = sec.get("a_loc", 0.4);
  double const lambda_th = positive(sec.get("lambda_th", 1.0), "gasmodel.lambda_th");
  double const ell_free = positive(sec.get("ell_free", 1.0), "gasmodel.ell_free");
  std::vector<double> sweep = sec.get("ell_free_sweep", std::vector<double>{});
  sec.finish();
  GasParams const gas{ell_free, lambda_th, a_loc};
  gas.validate();
  double const xi = solve_xi_loc(a_loc);
  double const sigma = pointer_width_3d(ell_free, lambda_th, xi);
  json out;
  out["a_loc"] = a_loc;
  out["xi_loc"] = xi;
  out["xi_loc_residual"] = xi_loc_residual(xi, a_loc);
  out["lambda_th"] = lambda_th;
  out["ell_free"] = ell_free;
  out["sigma_pi"] = sigma;
  out["lambda_coh"] = coherence_length(sigma, lambda_th);
  run.write_json("gasmodel.json", out);
  *run.log << "gasmodel: xi_loc = " << xi << ", sigma_pi = " << sigma << ", lambda_coh = " << out["lambda_coh"]
           << '\n';
  if (!sweep.empty()) {
    std::sort(sweep.begin(), sweep.end());
    CsvWriter csv(run.file("sweep.csv"), {"ell_free", "sigma_pi", "lambda_coh", "lambda_th"});
    for (double l : sweep) {
      double const s = pointer_width_3d(positive(l, "gasmodel.ell_free_sweep"), lambda_th, xi);
      csv << l << s << coherence_length(s, lambda_th) << lambda_th;
      csv.end_row();
    }
    csv.close();
  }
  return exit_ok;
}

void write_manifest(Run &run, std::string const &started)
{
  json m;
  m["schema_version"] = schema_version;
  m["command"] = run.command;
  m["code_version"] = POINTER_VERSION;
  m["config"] = run.echo;
  m["started"] = started;
  m["finished"] = timestamp();
  json files = json::array();
  for (auto const &name : run.outputs) {
    files.push_back({{"file", name}, {"sha256", sha256_file(run.out / name)}, {"bytes", fs::file_size(run.out / name)}});
  }
  m["outputs"] = files;
  std::ofstream os(run.out / "manifest.json");
  os << std::setw(2) << m << '\n';
}

} // namespace

int run(std::string const &command, Options const &opt, std::ostream &log)
{
  static std::map<std::string, int (*)(Section, Run &)> const commands{
    {"soliton", cmd_soliton}, {"weights", cmd_weights}, {"ensemble", cmd_ensemble},
    {"widthsweep", cmd_widthsweep}, {"gasmodel", cmd_gasmodel}};
  std::string const started = timestamp();
  Run run;
  run.command = command;
  run.log = &log;
  try {
    auto const it = commands.find(command);
    if (it == commands.end()) {
      throw ConfigError("unknown command '" + command + "'");
    }
    json cfg = json::object();
    if (!opt.config.empty()) {
      std::ifstream in(opt.config);
      if (!in) {
        throw ConfigError("cannot read config file " + opt.config.string());
      }
      try {
        cfg = json::parse(in);
      } catch (json::exception const &e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    Section root(cfg, "config");
    int const version = root.get("schema_version", schema_version);
    if (version != schema_version) {
      throw ConfigError("unsupported schema_version " + std::to_string(version));
    }
    run.seed = root.optional<std::uint64_t>("seed");
    if (opt.seed) {
      run.seed = opt.seed;
    }
    run.workers = opt.workers.value_or(root.get<unsigned>("workers", 1u));
    if (run.workers == 0) {
      throw ConfigError("workers must be at least 1");
    }
    for (auto const &[name, fn] : commands) {
      if (name != command) {
        root.allow(name);
      }
    }
    root.allow("model");
    root.allow(command);

    if (opt.out) {
      run.out = *opt.out;
    } else if (char const *env = std::getenv(out_root_env)) {
      run.out = fs::path(env) / command;
    } else {
      run.out = fs::path("out") / command;
    }
    fs::create_directories(run.out);

    run.echo = cfg;
    run.echo["schema_version"] = schema_version;
    if (run.seed) {
      run.echo["seed"] = *run.seed;
    }
    // Only the active sections are validated; the worker count does not change results, so it is not echoed.
    run.echo.erase("workers");
    root.finish();
    int code = exit_ok;
    try {
      code = it->second(root, run);
    } catch (Rejection const &e) {
      log << "rejected: " << e.what() << '\n';
      code = exit_rejected;
    }
    write_manifest(run, started);
    return code;
  } catch (ConfigError const &e) {
    log << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (std::exception const &e) {
    log << "error: " << e.what() << '\n';
    return exit_internal;
  }
}

} // namespace pointer::cli
