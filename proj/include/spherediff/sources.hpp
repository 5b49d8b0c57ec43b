#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spherediff/modes.hpp"

namespace spherediff {

/// One raised-cosine release centered at the origin.
struct ReleaseEvent {
  double t_start = 0.0;
  double t0 = 0.1;  // duration
  double r0 = 0.1;  // spatial radius
  double amount_scale = 1.0;
};

/// Throws ConfigError unless t0 > 0, 0 < r0 <= R0 and amount_scale >= 0.
void validate_event(const ReleaseEvent& ev, double R0);

/// 1/2 (1 - cos(2 pi (t - t_start) / t0)) inside the event window, else 0.
double temporal_profile(double t, const ReleaseEvent& ev);

/// 1/2 (1 + cos(pi r / r0)) for r <= r0, else 0.
double spatial_profile(double r, const ReleaseEvent& ev);

/// Volume integral of the spatial profile times amount_scale:
/// 2 pi r0^3 (1/3 - 2/pi^2) amount_scale.
double spatial_mass(const ReleaseEvent& ev);

/// Total amount released by one event: spatial_mass * t0 / 2.
double event_mass(const ReleaseEvent& ev);

/// Modal projection of the spatial profile. Only n = m = 0 entries are
/// nonzero; they equal sqrt(4 pi) * amount_scale * integral of
/// j_0(k r) f_x(r) r^2 over [0, r0].
Eigen::VectorXcd project_source(const ModeSet& ms, const ReleaseEvent& ev);

/// Nonzero entries of a modal vector.
using SparseEntries = std::vector<std::pair<int, std::complex<double>>>;

/// Time-sorted set of releases. Modal projections are cached per (r0, mode
/// set); the cache is safe to populate from several threads.
class SourceSchedule {
 public:
  SourceSchedule() = default;
  explicit SourceSchedule(std::vector<ReleaseEvent> events);

  const std::vector<ReleaseEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }

  /// Sum of event_mass over all events.
  double total_mass() const;
  /// End of the last release window.
  double end_time() const;

  /// Unit-scale projection of a profile with radius r0 onto ms, as
  /// nonzero entries.
  const SparseEntries& projection(const ModeSet& ms, double r0) const;

  /// Sum over events of temporal_profile(t) * amount_scale * projection.
  SparseEntries input_at(const ModeSet& ms, double t) const;

 private:
  std::vector<ReleaseEvent> events_;
  struct Cache {
    std::mutex mutex;
    std::map<std::pair<std::uint64_t, double>, std::shared_ptr<const SparseEntries>> entries;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// Dense form of SourceSchedule::input_at.
Eigen::VectorXcd source_vector_at(const SourceSchedule& sched, const ModeSet& ms, double t);

}  // namespace spherediff
