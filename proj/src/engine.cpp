#include "spherediff/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "spherediff/errors.hpp"

namespace spherediff {

namespace {

constexpr double kPi = std::numbers::pi;
using cd = std::complex<double>;

double ball_volume(double R0) { return 4.0 / 3.0 * kPi * R0 * R0 * R0; }

}  // namespace

// ---------------------------------------------------------------------------
// PermeabilitySchedule

PermeabilitySchedule PermeabilitySchedule::constant(double gamma) {
  return piecewise({{-std::numeric_limits<double>::infinity(), gamma}});
}

PermeabilitySchedule PermeabilitySchedule::piecewise(std::vector<std::pair<double, double>> levels) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i].second >= 0.0) || !std::isfinite(levels[i].second)) {
      throw ConfigError("permeability: gamma must be finite and non-negative");
    }
    if (i > 0 && !(levels[i].first > levels[i - 1].first)) {
      throw ConfigError("permeability.schedule: t_from must be strictly increasing");
    }
  }
  PermeabilitySchedule out;
  out.levels_ = std::move(levels);
  return out;
}

double PermeabilitySchedule::at(double t) const {
  double gamma = 0.0;
  for (const auto& [t_from, g] : levels_) {
    if (t_from > t) break;
    gamma = g;
  }
  return gamma;
}

double PermeabilitySchedule::max_gamma() const {
  double out = 0.0;
  for (const auto& level : levels_) out = std::max(out, level.second);
  return out;
}

// ---------------------------------------------------------------------------
// Discretizer

Discretizer::Discretizer(ModeSet ms, const FeedbackMatrix* fb, double T) : ms_(std::move(ms)), T_(T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("sphere.T: must be positive");
  if (fb != nullptr) {
    if (fb->mode_set_id != ms_.id()) throw std::invalid_argument("Discretizer: feedback built for another mode set");
    partition_ = fb->matrix.blocks();
    has_feedback_.assign(partition_.size(), true);
  } else {
    for (ModeBlock& mb : ms_.blocks_by_order_degree()) partition_.push_back({mb.n, mb.m, std::move(mb.modes), nullptr});
    has_feedback_.assign(partition_.size(), false);
  }
  block_of_.assign(ms_.size(), -1);
  for (int b = 0; b < static_cast<int>(partition_.size()); ++b) {
    for (int mu : partition_[b].index) block_of_[mu] = b;
  }
}

Eigen::MatrixXd Discretizer::generator(int b, double gamma) const {
  const MatrixBlock& blk = partition_.at(b);
  const auto len = static_cast<Eigen::Index>(blk.index.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(len, len);
  for (Eigen::Index i = 0; i < len; ++i) G(i, i) = ms_[blk.index[i]].s;
  if (has_feedback_[b] && gamma != 0.0) G -= gamma * *blk.values;
  return G;
}

std::shared_ptr<const Eigen::MatrixXd> Discretizer::transition(int b, double gamma) const {
  const MatrixBlock& blk = partition_.at(b);
  const bool coupled = has_feedback_[b] && gamma != 0.0;
  // Blocks with equal generators share one exponential: full-sphere blocks
  // of equal order, or uncoupled diagonal blocks of equal order.
  const auto key = std::make_tuple(coupled ? static_cast<const void*>(blk.values.get()) : nullptr,
                                   blk.n >= 0 ? blk.n : -1 - b, coupled ? gamma : 0.0);
  {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Eigen::MatrixXd A;
  if (coupled) {
    A = (generator(b, gamma) * T_).exp();
  } else {
    const auto len = static_cast<Eigen::Index>(blk.index.size());
    A = Eigen::MatrixXd::Zero(len, len);
    for (Eigen::Index i = 0; i < len; ++i) A(i, i) = std::exp(ms_[blk.index[i]].s * T_);
  }
  if (!A.allFinite()) {
    std::ostringstream msg;
    msg << "discretize: non-finite transition block (n = " << blk.n << ", m = " << blk.m << ", size "
        << blk.index.size() << ") for gamma = " << gamma << ", T = " << T_;
    throw NumericalError(msg.str());
  }
  auto value = std::make_shared<const Eigen::MatrixXd>(std::move(A));
  std::lock_guard lock(mutex_);
  return cache_.emplace(key, std::move(value)).first->second;
}

BlockMatrix discretize(const ModeSet& ms, const FeedbackMatrix* fb, double gamma, double T) {
  if (!(gamma >= 0.0)) throw ConfigError("permeability: gamma must be non-negative");
  const Discretizer disc(ms, fb, T);
  std::vector<MatrixBlock> blocks;
  blocks.reserve(disc.partition().size());
  for (int b = 0; b < static_cast<int>(disc.partition().size()); ++b) {
    const MatrixBlock& p = disc.partition()[b];
    blocks.push_back({p.n, p.m, p.index, disc.transition(b, gamma)});
  }
  return BlockMatrix(ms.size(), std::move(blocks));
}

Eigen::VectorXcd step(const Eigen::VectorXcd& state, const BlockMatrix& A_d, const Eigen::VectorXcd& f,
                      const Eigen::VectorXcd& phi, double T) {
  if (f.size() != state.size() || phi.size() != state.size()) {
    throw std::invalid_argument("step: dimension mismatch");
  }
  return A_d.apply(state) + T * f + T * phi;
}

double total_mass(const ModeSet& ms, const Eigen::VectorXcd& state) {
  const auto w = ms.mass_weights();
  double mass = 0.0;
  for (int mu = 0; mu < ms.size(); ++mu) {
    if (w[mu] != 0.0) mass += w[mu] / ms[mu].N * state[mu].real();
  }
  return mass;
}

FieldVector reconstruct(const ModeSet& ms, const Eigen::VectorXcd& state, const SphericalPoint& x, double* imag_p) {
  cd p = 0.0, ir = 0.0, it = 0.0, ip = 0.0;
  for (const ModeIndex& mode : ms.modes()) {
    const cd y = state[mode.mu];
    if (y == 0.0) continue;
    const cd c = y / mode.N;
    p += c * ms.eval_K1(mode, x);
    const FluxKernel flux = ms.eval_K_flux(mode, x);
    ir += c * flux.radial;
    it += c * flux.theta;
    ip += c * flux.phi;
  }
  if (imag_p != nullptr) *imag_p = p.imag();
  return {p.real(), ir.real(), it.real(), ip.real()};
}

std::vector<BlockSpectrum> closed_loop_spectrum(const ModeSet& ms, const FeedbackMatrix* fb, double gamma) {
  const Discretizer disc(ms, fb, 1.0);
  std::map<std::pair<const void*, int>, Eigen::VectorXcd> shared;
  std::vector<BlockSpectrum> out;
  for (int b = 0; b < static_cast<int>(disc.partition().size()); ++b) {
    const MatrixBlock& blk = disc.partition()[b];
    const bool coupled = fb != nullptr && gamma != 0.0;
    const auto key = std::make_pair(coupled ? static_cast<const void*>(blk.values.get()) : nullptr,
                                    blk.n >= 0 ? blk.n : -1 - b);
    auto it = shared.find(key);
    if (it == shared.end()) {
      const Eigen::MatrixXd G = disc.generator(b, gamma);
      Eigen::VectorXcd ev;
      if (coupled) {
        Eigen::EigenSolver<Eigen::MatrixXd> solver(G, false);
        if (solver.info() != Eigen::Success) throw NumericalError("closed_loop_spectrum: eigensolver failed");
        ev = solver.eigenvalues();
      } else {
        ev = G.diagonal().cast<cd>();
      }
      std::vector<cd> sorted(ev.data(), ev.data() + ev.size());
      std::sort(sorted.begin(), sorted.end(), [](cd a, cd c) { return a.real() > c.real(); });
      ev = Eigen::Map<Eigen::VectorXcd>(sorted.data(), static_cast<Eigen::Index>(sorted.size()));
      it = shared.emplace(key, std::move(ev)).first;
    }
    out.push_back({blk.n, blk.m, blk.index, it->second});
  }
  return out;
}

double dominant_eigenvalue(const ModeSet& ms, const FeedbackMatrix* fb, double gamma) {
  const Discretizer disc(ms, fb, 1.0);
  const int b = disc.block_of(0);
  const Eigen::MatrixXd G = disc.generator(b, gamma);
  Eigen::VectorXcd ev;
  if (fb != nullptr && gamma != 0.0) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(G, false);
    if (solver.info() != Eigen::Success) throw NumericalError("dominant_eigenvalue: eigensolver failed");
    ev = solver.eigenvalues();
  } else {
    ev = G.diagonal().cast<cd>();
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const cd& v : ev) {
    if (gamma == 0.0 && std::abs(v) < 1e-14) continue;
    best = std::max(best, v.real());
  }
  return best;
}

// ---------------------------------------------------------------------------
// Scenario validation

void validate_scenario(const Scenario& sc) {
  if (sc.spheres.empty() || sc.spheres.size() > 2) throw ConfigError("sphere: one or two spheres required");
  if (sc.spheres.size() == 2 && !sc.connection) throw ConfigError("network: two spheres need a connection");
  if (sc.connection && sc.spheres.size() != 2) throw ConfigError("network: connection needs two spheres");
  if (!(sc.T > 0.0) || !std::isfinite(sc.T)) throw ConfigError("sphere.T: must be positive");
  if (!(sc.horizon > 0.0) || !std::isfinite(sc.horizon)) throw ConfigError("horizon: must be positive");
  const double steps = sc.horizon / sc.T;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw ConfigError("horizon: must be an integer multiple of sphere.T");
  }
  const double R0 = sc.spheres.front().modes.radius();
  for (std::size_t i = 0; i < sc.observe.size(); ++i) {
    const ObservationPoint& op = sc.observe[i];
    const std::string path = "observe[" + std::to_string(i) + "]";
    if (op.sphere < 0 || op.sphere >= static_cast<int>(sc.spheres.size())) {
      throw ConfigError(path + ".sphere: no such sphere");
    }
    if (!(op.x.r >= 0.0) || op.x.r > R0) throw ConfigError(path + ".r: point outside the sphere");
    if (!(op.x.theta >= 0.0 && op.x.theta <= kPi)) throw ConfigError(path + ".theta: must lie in [0, pi]");
    if (!(op.x.phi >= -kPi && op.x.phi <= kPi)) throw ConfigError(path + ".phi: must lie in [-pi, pi]");
  }
  for (std::size_t i = 0; i < sc.sources.events().size(); ++i) {
    try {
      validate_event(sc.sources.events()[i], R0);
    } catch (const ConfigError& e) {
      throw ConfigError("releases[" + std::to_string(i) + "]: " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

struct PointState {
  SphericalPoint x;
  std::vector<cd> k1, fr, ft, fp;  // kernels divided by N, aligned with mu
  std::vector<int> mu;
};

class SphereRun {
 public:
  SphereRun(const SphereModel& model, double T)
      : disc_(model.modes, model.feedback ? &*model.feedback : nullptr, T),
        gamma_(model.gamma),
        y_(Eigen::VectorXcd::Zero(model.modes.size())),
        active_(disc_.partition().size(), false),
        cached_(disc_.partition().size()),
        cached_gamma_(disc_.partition().size(), std::numeric_limits<double>::quiet_NaN()) {}

  const ModeSet& modes() const { return disc_.modes(); }
  const Eigen::VectorXcd& state() const { return y_; }
  const std::vector<int>& active_blocks() const { return active_list_; }
  const std::vector<MatrixBlock>& partition() const { return disc_.partition(); }
  double gamma_at(double t) const { return gamma_.at(t); }

  void add_point(const SphericalPoint& x) { points_.push_back({x, {}, {}, {}, {}, {}}); }

  void advance(double gamma) {
    Eigen::VectorXd re, im, out_re, out_im;
    for (int b : active_list_) {
      if (cached_gamma_[b] != gamma) {
        cached_[b] = disc_.transition(b, gamma);
        cached_gamma_[b] = gamma;
      }
      const std::vector<int>& idx = disc_.partition()[b].index;
      const auto len = static_cast<Eigen::Index>(idx.size());
      re.resize(len);
      im.resize(len);
      for (Eigen::Index i = 0; i < len; ++i) {
        re[i] = y_[idx[i]].real();
        im[i] = y_[idx[i]].imag();
      }
      out_re.noalias() = *cached_[b] * re;
      if (im.isZero(0.0)) {
        out_im.setZero(len);
      } else {
        out_im.noalias() = *cached_[b] * im;
      }
      for (Eigen::Index i = 0; i < len; ++i) y_[idx[i]] = {out_re[i], out_im[i]};
    }
  }

  void add_input(int mu, cd value) {
    if (value == 0.0) return;
    activate(disc_.block_of(mu));
    y_[mu] += value;
  }

  double mass() const {
    double m = 0.0;
    for (const auto& [mu, w] : mass_terms_) m += w * y_[mu].real();
    return m;
  }

  FieldVector field(int p, double* imag) const {
    const PointState& ps = points_[p];
    cd sp = 0.0, sr = 0.0, st = 0.0, sf = 0.0;
    for (std::size_t i = 0; i < ps.mu.size(); ++i) {
      const cd y = y_[ps.mu[i]];
      sp += y * ps.k1[i];
      sr += y * ps.fr[i];
      st += y * ps.ft[i];
      sf += y * ps.fp[i];
    }
    *imag = sp.imag();
    return {sp.real(), sr.real(), st.real(), sf.real()};
  }

  int point_count() const { return static_cast<int>(points_.size()); }

 private:
  void activate(int b) {
    if (active_[b]) return;
    active_[b] = true;
    active_list_.push_back(b);
    const ModeSet& ms = disc_.modes();
    const auto weights = ms.mass_weights();
    for (int mu : disc_.partition()[b].index) {
      const ModeIndex& mode = ms[mu];
      if (weights[mu] != 0.0) mass_terms_.emplace_back(mu, weights[mu] / mode.N);
      for (PointState& ps : points_) {
        const FluxKernel flux = ms.eval_K_flux(mode, ps.x);
        ps.mu.push_back(mu);
        ps.k1.push_back(ms.eval_K1(mode, ps.x) / mode.N);
        ps.fr.push_back(flux.radial / mode.N);
        ps.ft.push_back(flux.theta / mode.N);
        ps.fp.push_back(flux.phi / mode.N);
      }
    }
  }

  Discretizer disc_;
  PermeabilitySchedule gamma_;
  Eigen::VectorXcd y_;
  std::vector<bool> active_;
  std::vector<int> active_list_;
  std::vector<std::shared_ptr<const Eigen::MatrixXd>> cached_;
  std::vector<double> cached_gamma_;
  std::vector<std::pair<int, double>> mass_terms_;
  std::vector<PointState> points_;
};

SimulationResult run(const Scenario& sc) {
  validate_scenario(sc);
  const int steps = static_cast<int>(std::llround(sc.horizon / sc.T));
  const int n_spheres = static_cast<int>(sc.spheres.size());

  std::deque<SphereRun> runs;
  for (const SphereModel& model : sc.spheres) runs.emplace_back(model, sc.T);

  // Observation point i lives at local index local_index[i] of its sphere.
  std::vector<int> local_index(sc.observe.size());
  for (std::size_t i = 0; i < sc.observe.size(); ++i) {
    SphereRun& r = runs[sc.observe[i].sphere];
    local_index[i] = r.point_count();
    r.add_point(sc.observe[i].x);
  }

  SimulationResult res;
  res.injected_mass = sc.sources.total_mass();
  res.saturation = res.injected_mass / ball_volume(sc.spheres.front().modes.radius());
  res.times.reserve(steps + 1);
  res.fields.assign(sc.observe.size(), {});
  for (auto& f : res.fields) f.reserve(steps + 1);
  res.mass.assign(n_spheres, {});

  auto record = [&](double t) {
    res.times.push_back(t);
    for (std::size_t i = 0; i < sc.observe.size(); ++i) {
      double imag = 0.0;
      const FieldVector fv = runs[sc.observe[i].sphere].field(local_index[i], &imag);
      if (!std::isfinite(fv.p)) throw NumericalError("simulate: non-finite concentration at t = " + std::to_string(t));
      if (std::abs(imag) > 1e-15) res.max_imag_ratio = std::max(res.max_imag_ratio, std::abs(imag) / (std::abs(fv.p) + 1e-300));
      res.fields[i].push_back(fv);
    }
    for (int s = 0; s < n_spheres; ++s) res.mass[s].push_back(runs[s].mass());
  };

  const ModeSet& ms1 = runs[0].modes();
  record(0.0);
  for (int k = 0; k < steps; ++k) {
    const double t_k = k * sc.T;
    const double t_next = (k + 1) * sc.T;

    // S2 input uses the state of S1 before its update.
    Eigen::VectorXcd phi2;
    if (sc.connection) phi2 = -sc.connection->matrix.apply(runs[0].state());

    runs[0].advance(runs[0].gamma_at(t_k));
    for (const auto& [mu, v] : sc.sources.input_at(ms1, t_next)) runs[0].add_input(mu, sc.T * v);

    if (sc.connection) {
      runs[1].advance(runs[1].gamma_at(t_k));
      for (Eigen::Index mu = 0; mu < phi2.size(); ++mu) runs[1].add_input(static_cast<int>(mu), sc.T * phi2[mu]);
    }
    record(t_next);
  }

  for (const SphereRun& r : runs) {
    res.active_blocks.push_back(static_cast<int>(r.active_blocks().size()));
    res.final_states.push_back(r.state());
  }

  if (sc.normalized && res.saturation > 0.0) {
    for (auto& series : res.fields) {
      for (FieldVector& fv : series) {
        fv.p /= res.saturation;
        fv.i_r /= res.saturation;
        fv.i_theta /= res.saturation;
        fv.i_phi /= res.saturation;
      }
    }
    for (auto& series : res.mass) {
      for (double& m : series) m /= res.injected_mass;
    }
  }
  return res;
}

}  // namespace

SimulationResult simulate(const Scenario& sc) { return run(sc); }

SimulationResult simulate_network(const Scenario& sc) {
  if (!sc.connection || sc.spheres.size() != 2) throw ConfigError("network: two spheres and a connection required");
  return run(sc);
}

}  // namespace spherediff
