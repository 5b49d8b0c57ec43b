#include "spherediff/sources.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spherediff/errors.hpp"
#include "spherediff/quadrature.hpp"
#include "spherediff/specfun.hpp"

namespace spherediff {

namespace {
constexpr double kPi = std::numbers::pi;
}

void validate_event(const ReleaseEvent& ev, double R0) {
  if (!(ev.t0 > 0.0)) throw ConfigError("release: t0 must be positive");
  if (!(ev.r0 > 0.0) || ev.r0 > R0) throw ConfigError("release: r0 must lie in (0, R0]");
  if (!(ev.amount_scale >= 0.0)) throw ConfigError("release: amount_scale must be non-negative");
  if (!std::isfinite(ev.t_start)) throw ConfigError("release: t_start must be finite");
}

double temporal_profile(double t, const ReleaseEvent& ev) {
  const double u = t - ev.t_start;
  if (u < 0.0 || u > ev.t0) return 0.0;
  return 0.5 * (1.0 - std::cos(2.0 * kPi * u / ev.t0));
}

double spatial_profile(double r, const ReleaseEvent& ev) {
  if (r < 0.0 || r > ev.r0) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * r / ev.r0));
}

double spatial_mass(const ReleaseEvent& ev) {
  return ev.amount_scale * 2.0 * kPi * ev.r0 * ev.r0 * ev.r0 * (1.0 / 3.0 - 2.0 / (kPi * kPi));
}

double event_mass(const ReleaseEvent& ev) { return spatial_mass(ev) * 0.5 * ev.t0; }

namespace {

SparseEntries unit_projection(const ModeSet& ms, double r0) {
  SparseEntries out;
  const ReleaseEvent shape{0.0, 1.0, r0, 1.0};
  for (const ModeIndex& mode : ms.modes()) {
    if (mode.n != 0) continue;
    const double k = mode.k;
    const double radial = integrate_adaptive(
        [&](double r) { return spherical_bessel_j(0, k * r) * spatial_profile(r, shape) * r * r; }, 0.0, r0, 1e-10);
    out.emplace_back(mode.mu, std::sqrt(4.0 * kPi) * radial);
  }
  return out;
}

}  // namespace

Eigen::VectorXcd project_source(const ModeSet& ms, const ReleaseEvent& ev) {
  validate_event(ev, ms.radius());
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(ms.size());
  for (const auto& [mu, v] : unit_projection(ms, ev.r0)) out[mu] = ev.amount_scale * v;
  return out;
}

SourceSchedule::SourceSchedule(std::vector<ReleaseEvent> events) : events_(std::move(events)) {
  std::stable_sort(events_.begin(), events_.end(),
                   [](const ReleaseEvent& a, const ReleaseEvent& b) { return a.t_start < b.t_start; });
}

double SourceSchedule::total_mass() const {
  double sum = 0.0;
  for (const ReleaseEvent& ev : events_) sum += event_mass(ev);
  return sum;
}

double SourceSchedule::end_time() const {
  double end = 0.0;
  for (const ReleaseEvent& ev : events_) end = std::max(end, ev.t_start + ev.t0);
  return end;
}

const SparseEntries& SourceSchedule::projection(const ModeSet& ms, double r0) const {
  const auto key = std::make_pair(ms.id(), r0);
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->entries.find(key);
    if (it != cache_->entries.end()) return *it->second;
  }
  auto computed = std::make_shared<const SparseEntries>(unit_projection(ms, r0));
  std::lock_guard lock(cache_->mutex);
  // A concurrent insert of the same key wins; both values are identical.
  auto [it, inserted] = cache_->entries.emplace(key, std::move(computed));
  return *it->second;
}

SparseEntries SourceSchedule::input_at(const ModeSet& ms, double t) const {
  SparseEntries out;
  for (const ReleaseEvent& ev : events_) {
    const double w = temporal_profile(t, ev) * ev.amount_scale;
    if (w == 0.0) continue;
    for (const auto& [mu, v] : projection(ms, ev.r0)) {
      auto it = std::find_if(out.begin(), out.end(), [mu = mu](const auto& e) { return e.first == mu; });
      if (it == out.end()) {
        out.emplace_back(mu, w * v);
      } else {
        it->second += w * v;
      }
    }
  }
  return out;
}

Eigen::VectorXcd source_vector_at(const SourceSchedule& sched, const ModeSet& ms, double t) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(ms.size());
  for (const auto& [mu, v] : sched.input_at(ms, t)) out[mu] += v;
  return out;
}

}  // namespace spherediff
