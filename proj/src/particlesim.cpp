#include "spherediff/particlesim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "spherediff/errors.hpp"
#include "spherediff/quadrature.hpp"

namespace spherediff {

namespace {

constexpr double kPi = std::numbers::pi;
// Free-space steps are drawn exactly; their per-axis spread is kept below
// 1/5 of the distance to the wall.
constexpr double kWallSigmas = 5.0;
// Spread of the coarsest step taken next to a reflective wall, in units of R0.
constexpr double kReflectiveSpread = 0.01;
// Angular margin around a cap inside which the membrane step is used.
constexpr double kCapMargin = 0.1;
constexpr double kTransferInset = 1e-6;
constexpr double kTimeSlack = 1e-12;

Eigen::Vector3d to_cartesian(const SphericalPoint& x) {
  return {x.r * std::sin(x.theta) * std::cos(x.phi), x.r * std::sin(x.theta) * std::sin(x.phi),
          x.r * std::cos(x.theta)};
}

bool in_region(const BoundaryRegion& region, const Eigen::Vector3d& unit) {
  return region.kind == BoundaryRegion::Kind::full || unit.z() >= std::cos(region.theta0);
}

Eigen::Vector3d gaussian3(std::mt19937_64& rng, std::normal_distribution<double>& normal) {
  const double x = normal(rng);
  const double y = normal(rng);
  const double z = normal(rng);
  return {x, y, z};
}

bool advance_impl(Particle& p, double dt, const BoundaryRules& rules, std::mt19937_64& rng,
                  std::normal_distribution<double>& normal, std::uniform_real_distribution<double>& unif) {
  const double R = rules.R0;
  const Eigen::Vector3d x0 = p.position;
  const Eigen::Vector3d delta = std::sqrt(2.0 * rules.D * dt) * gaussian3(rng, normal);
  const Eigen::Vector3d x1 = x0 + delta;
  if (x1.squaredNorm() <= R * R) {
    p.position = x1;
    return false;
  }
  // Straight-line intersection with the wall.
  const double a = delta.squaredNorm();
  const double b = 2.0 * x0.dot(delta);
  const double c = std::min(0.0, x0.squaredNorm() - R * R);
  const double s = (-b + std::sqrt(std::max(0.0, b * b - 4.0 * a * c))) / (2.0 * a);
  const Eigen::Vector3d hit = x0 + s * delta;
  const Eigen::Vector3d normal_dir = hit.normalized();

  bool clamped = false;
  if (p.sphere == 0 && rules.region && rules.gamma > 0.0 && in_region(*rules.region, normal_dir)) {
    const double p_cross = crossing_probability(rules.gamma, dt, rules.D, &clamped);
    if (unif(rng) < p_cross) {
      if (rules.gamma_s2 && unif(rng) < std::min(1.0, *rules.gamma_s2)) {
        p.sphere = 1;
        p.position = normal_dir * R * (1.0 - kTransferInset);
      } else {
        p.alive = false;
      }
      return clamped;
    }
  }
  // Specular reflection about the tangent plane at the hit point.
  const Eigen::Vector3d rest = x1 - hit;
  Eigen::Vector3d x2 = hit + rest - 2.0 * rest.dot(normal_dir) * normal_dir;
  const double r2 = x2.norm();
  if (r2 > R) x2 *= (2.0 * R - r2) / r2;  // curvature overshoot: radial mirror
  p.position = x2;
  return clamped;
}

}  // namespace

void validate_oracle_config(const OracleConfig& cfg, double R0, double D) {
  if (!(cfg.dt > 0.0)) throw ConfigError("oracle.dt: must be positive");
  if (std::sqrt(2.0 * D * cfg.dt) > R0 / 20.0) throw ConfigError("oracle.dt: sqrt(2 D dt) must not exceed R0/20");
  if (cfg.n_particles < 1) throw ConfigError("oracle.n_particles: must be >= 1");
  if (!(cfg.kernel_radius > 0.0) || cfg.kernel_radius > R0 / 5.0) {
    throw ConfigError("oracle.kernel_radius: must lie in (0, R0/5]");
  }
  if (!(cfg.sample_interval > 0.0)) throw ConfigError("oracle.sample_interval: must be positive");
  if (cfg.threads < 0) throw ConfigError("threads: must be non-negative");
}

std::mt19937_64 particle_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::vector<long> allocate_particles(const SourceSchedule& sched, long n) {
  const auto& events = sched.events();
  std::vector<long> out(events.size(), 0);
  const double total = sched.total_mass();
  if (events.empty() || !(total > 0.0)) return out;
  // Largest-remainder rounding of n * mass_i / total.
  std::vector<std::pair<double, std::size_t>> remainders;
  long assigned = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double exact = n * event_mass(events[i]) / total;
    out[i] = static_cast<long>(std::floor(exact));
    assigned += out[i];
    remainders.emplace_back(exact - out[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++out[remainders[k % remainders.size()].second];
  return out;
}

Release sample_release(const ReleaseEvent& ev, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Release out;
  for (;;) {
    const double t = ev.t_start + ev.t0 * unif(rng);
    if (unif(rng) < temporal_profile(t, ev)) {
      out.time = t;
      break;
    }
  }
  double r = 0.0;
  for (;;) {
    r = ev.r0 * std::cbrt(unif(rng));
    if (unif(rng) < spatial_profile(r, ev)) break;
  }
  Eigen::Vector3d dir;
  do {
    dir = gaussian3(rng, normal);
  } while (dir.squaredNorm() < 1e-24);
  out.position = r * dir.normalized();
  return out;
}

namespace {

int event_of(const std::vector<long>& cumulative, long i) {
  return static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), i) - cumulative.begin());
}

std::vector<long> cumulative_allocation(const SourceSchedule& sched, long n) {
  std::vector<long> cum = allocate_particles(sched, n);
  for (std::size_t i = 1; i < cum.size(); ++i) cum[i] += cum[i - 1];
  return cum;
}

}  // namespace

std::vector<Release> inject(const SourceSchedule& sched, long n, std::uint64_t seed) {
  const std::vector<long> cum = cumulative_allocation(sched, n);
  std::vector<Release> out;
  if (cum.empty()) return out;
  out.reserve(n);
  for (long i = 0; i < n; ++i) {
    std::mt19937_64 rng = particle_stream(seed, static_cast<std::uint64_t>(i));
    out.push_back(sample_release(sched.events()[event_of(cum, i)], rng));
  }
  return out;
}

double crossing_probability(double gamma, double dt, double D, bool* clamped) {
  const double raw = gamma * std::sqrt(kPi * dt / D);
  if (clamped != nullptr) *clamped = raw > 1.0;
  return std::min(1.0, raw);
}

bool advance(Particle& p, double dt, const BoundaryRules& rules, std::mt19937_64& rng) {
  if (!p.alive) return false;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return advance_impl(p, dt, rules, rng, normal, unif);
}

double lens_volume(double c, double h, double R) {
  c = std::abs(c);
  if (c + h <= R) return 4.0 / 3.0 * kPi * h * h * h;
  if (h >= R + c) return 4.0 / 3.0 * kPi * R * R * R;
  if (c >= R + h) return 0.0;
  const double d = c;
  const double t = R + h - d;
  return kPi * t * t * (d * d + 2.0 * d * h - 3.0 * h * h + 2.0 * d * R + 6.0 * h * R - 3.0 * R * R) / (12.0 * d);
}

bool spherically_symmetric(const OracleProblem& problem) {
  return !problem.gamma_s2 && (!problem.region || problem.region->kind == BoundaryRegion::Kind::full);
}

double orbit_volume(const SphericalPoint& x, double h, double R, bool spherical) {
  if (spherical) {
    const double lo = std::max(0.0, x.r - h);
    const double hi = std::min(R, x.r + h);
    return hi > lo ? 4.0 / 3.0 * kPi * (hi * hi * hi - lo * lo * lo) : 0.0;
  }
  // Solid of revolution of the disc |(rho, z) - (rho_p, z_p)| <= h, rho >= 0,
  // clipped to the ball: 2 pi * integral of rho over the clipped disc.
  const double rho_p = x.r * std::sin(x.theta);
  const double z_p = x.r * std::cos(x.theta);
  auto slice = [&](double z) {
    const double w2 = h * h - (z - z_p) * (z - z_p);
    const double c2 = R * R - z * z;
    if (w2 <= 0.0 || c2 <= 0.0) return 0.0;
    const double w = std::sqrt(w2);
    const double a = std::max(0.0, rho_p - w);
    const double b = std::min(std::sqrt(c2), rho_p + w);
    return b > a ? kPi * (b * b - a * a) : 0.0;
  };
  const double z_lo = std::max(-R, z_p - h);
  const double z_hi = std::min(R, z_p + h);
  return z_hi > z_lo ? integrate_adaptive(slice, z_lo, z_hi, 1e-10) : 0.0;
}

namespace {

ConcentrationEstimate make_estimate(long count, long n_injected, double M_total, double volume) {
  ConcentrationEstimate e;
  e.count = count;
  if (n_injected <= 0 || volume <= 0.0) return e;
  const double unit = M_total / static_cast<double>(n_injected) / volume;
  const double q = static_cast<double>(count) / static_cast<double>(n_injected);
  e.value = count * unit;
  e.sigma = std::sqrt(n_injected * q * (1.0 - q)) * unit;
  return e;
}

}  // namespace

std::vector<ConcentrationEstimate> estimate_concentration(const std::vector<Particle>& particles,
                                                          const std::vector<ObservationPoint>& points,
                                                          double kernel_radius, long n_injected, double M_total,
                                                          double R0) {
  std::vector<ConcentrationEstimate> out;
  out.reserve(points.size());
  const double h2 = kernel_radius * kernel_radius;
  for (const ObservationPoint& op : points) {
    const Eigen::Vector3d c = to_cartesian(op.x);
    long count = 0;
    for (const Particle& p : particles) {
      if (p.alive && p.sphere == op.sphere && (p.position - c).squaredNorm() <= h2) ++count;
    }
    out.push_back(make_estimate(count, n_injected, M_total, lens_volume(op.x.r, kernel_radius, R0)));
  }
  return out;
}

OracleResult run_oracle(const OracleProblem& problem, const OracleConfig& cfg) {
  validate_oracle_config(cfg, problem.R0, problem.D);
  if (problem.sources.empty()) throw ConfigError("releases: at least one release required");
  if (!(problem.horizon > 0.0)) throw ConfigError("horizon: must be positive");
  if (problem.region) validate_region(*problem.region);

  const double R0 = problem.R0;
  const double D = problem.D;
  const long n = cfg.n_particles;
  const int n_samples = static_cast<int>(std::floor(problem.horizon / cfg.sample_interval + 1e-9)) + 1;
  const int n_points = static_cast<int>(problem.observe.size());
  const int n_spheres = problem.gamma_s2 ? 2 : 1;
  const std::vector<long> cum = cumulative_allocation(problem.sources, n);

  const bool spherical = spherically_symmetric(problem);
  const bool orbit = cfg.kernel == KernelShape::orbit;
  std::vector<Eigen::Vector3d> centers;
  for (const ObservationPoint& op : problem.observe) {
    if (op.sphere < 0 || op.sphere >= n_spheres) throw ConfigError("observe: no such sphere");
    centers.push_back(to_cartesian(op.x));
  }
  const double h = cfg.kernel_radius;
  const double h2 = h * h;
  auto inside = [&](const Eigen::Vector3d& x, int k) {
    const Eigen::Vector3d& c = centers[k];
    if (!orbit) return (x - c).squaredNorm() <= h2;
    if (spherical) return std::abs(x.norm() - problem.observe[k].x.r) <= h;
    const double d_rho = std::hypot(x.x(), x.y()) - std::hypot(c.x(), c.y());
    const double d_z = x.z() - c.z();
    return d_rho * d_rho + d_z * d_z <= h2;
  };
  const bool permeable = problem.region && problem.gamma.max_gamma() > 0.0;
  const double reflective_dt = std::max(cfg.dt, std::pow(kReflectiveSpread * R0, 2) / (2.0 * D));
  const double cap_cos = problem.region && problem.region->kind == BoundaryRegion::Kind::cap
                             ? std::cos(std::min(kPi, problem.region->theta0 + kCapMargin))
                             : -2.0;

  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<long>(threads, n));

  struct Tally {
    std::vector<long> counts;     // [point * n_samples + j]
    std::vector<long> survivors;  // [sphere * n_samples + j]
    long clamped = 0;
  };
  std::vector<Tally> tallies(threads);

  auto worker = [&](int w) {
    Tally& tally = tallies[w];
    tally.counts.assign(static_cast<std::size_t>(n_points) * n_samples, 0);
    tally.survivors.assign(static_cast<std::size_t>(n_spheres) * n_samples, 0);
    const long begin = n * w / threads;
    const long end = n * (w + 1) / threads;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    BoundaryRules rules{R0, D, problem.region, 0.0, problem.gamma_s2};
    for (long i = begin; i < end; ++i) {
      std::mt19937_64 rng = particle_stream(cfg.seed, static_cast<std::uint64_t>(i));
      normal.reset();
      const Release rel = sample_release(problem.sources.events()[event_of(cum, i)], rng);
      Particle p{rel.position, 0, true};
      double t = rel.time;
      int j = static_cast<int>(std::ceil(t / cfg.sample_interval - kTimeSlack));
      while (j < n_samples && p.alive) {
        const double t_j = j * cfg.sample_interval;
        while (t_j - t > kTimeSlack && p.alive) {
          const double dist = R0 - p.position.norm();
          double floor_dt = reflective_dt;
          if (permeable && p.sphere == 0 && p.position.z() >= cap_cos * p.position.norm()) floor_dt = cfg.dt;
          const double natural = std::pow(dist / kWallSigmas, 2) / (2.0 * D);
          const double h = std::min(std::max(floor_dt, natural), t_j - t);
          rules.gamma = problem.gamma.at(t);
          if (advance_impl(p, h, rules, rng, normal, unif)) ++tally.clamped;
          t += h;
        }
        if (!p.alive) break;
        t = t_j;
        ++tally.survivors[static_cast<std::size_t>(p.sphere) * n_samples + j];
        for (int k = 0; k < n_points; ++k) {
          if (problem.observe[k].sphere == p.sphere && inside(p.position, k)) {
            ++tally.counts[static_cast<std::size_t>(k) * n_samples + j];
          }
        }
        ++j;
      }
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (std::thread& th : pool) th.join();
  }

  OracleResult res;
  res.injected_mass = problem.sources.total_mass();
  res.saturation = res.injected_mass / (4.0 / 3.0 * kPi * R0 * R0 * R0);
  res.n_particles = n;
  for (int j = 0; j < n_samples; ++j) res.times.push_back(j * cfg.sample_interval);
  res.estimates.assign(n_points, std::vector<ConcentrationEstimate>(n_samples));
  res.mass.assign(n_spheres, std::vector<double>(n_samples, 0.0));
  for (const Tally& tally : tallies) res.clamped_crossings += tally.clamped;
  for (int k = 0; k < n_points; ++k) {
    const double volume = orbit ? orbit_volume(problem.observe[k].x, h, R0, spherical)
                                : lens_volume(problem.observe[k].x.r, h, R0);
    for (int j = 0; j < n_samples; ++j) {
      long count = 0;
      for (const Tally& tally : tallies) count += tally.counts[static_cast<std::size_t>(k) * n_samples + j];
      res.estimates[k][j] = make_estimate(count, n, res.injected_mass, volume);
    }
  }
  for (int s = 0; s < n_spheres; ++s) {
    for (int j = 0; j < n_samples; ++j) {
      long count = 0;
      for (const Tally& tally : tallies) count += tally.survivors[static_cast<std::size_t>(s) * n_samples + j];
      res.mass[s][j] = count * res.injected_mass / static_cast<double>(n);
    }
  }
  if (res.clamped_crossings > 0) {
    std::ostringstream msg;
    msg << "crossing probability exceeded 1 in " << res.clamped_crossings
        << " collisions and was clamped; use a smaller oracle.dt";
    res.warnings.push_back(msg.str());
  }
  return res;
}

}  // namespace spherediff
