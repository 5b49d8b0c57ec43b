#include "spherediff/modes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "spherediff/errors.hpp"
#include "spherediff/quadrature.hpp"
#include "spherediff/specfun.hpp"

namespace spherediff {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNormalizationCheckTol = 1e-9;

std::atomic<std::uint64_t> next_mode_set_id{1};

struct Multiplet {
  int n;
  int nu;
  double k;
};

// Every (n, nu) with k <= k_max, sorted by (k, n).
std::vector<Multiplet> multiplets_upto(double k_max, double R0) {
  std::vector<Multiplet> out;
  for (int n = 0;; ++n) {
    // The first positive Neumann root of order n exceeds n / R0.
    if (n > 0 && n > k_max * R0) break;
    const RootList roots = bessel_prime_roots_upto(n, k_max, R0);
    if (n > 0 && roots.roots.empty()) break;
    for (int nu = 0; nu < static_cast<int>(roots.roots.size()); ++nu) out.push_back({n, nu, roots.roots[nu]});
  }
  std::sort(out.begin(), out.end(), [](const Multiplet& a, const Multiplet& b) {
    return a.k != b.k ? a.k < b.k : a.n < b.n;
  });
  return out;
}

}  // namespace

struct ModeSet::Impl {
  double R0 = 1.0;
  double D = 1.0;
  int Q = 1;
  std::uint64_t id = 0;
  std::vector<ModeIndex> modes;
  std::vector<double> boundary_values;
  std::vector<double> mass_weights;
};

ModeSet::ModeSet(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

ModeSet ModeSet::enumerate(double R0, double D, int Q) {
  if (!(R0 > 0.0) || !std::isfinite(R0)) throw std::domain_error("enumerate_modes: R0 must be positive");
  if (!(D > 0.0) || !std::isfinite(D)) throw std::domain_error("enumerate_modes: D must be positive");
  if (Q < 1) throw std::domain_error("enumerate_modes: Q must be >= 1");

  // Weyl's law: about 2 (k R0)^3 / (9 pi) modes lie below k. Grow the
  // search bound until Q modes fit strictly inside it.
  double k_max = (std::cbrt(4.5 * kPi * Q) * 1.2 + 6.0) / R0;
  std::vector<Multiplet> chosen;
  for (;;) {
    const std::vector<Multiplet> all = multiplets_upto(k_max, R0);
    chosen.clear();
    int count = 0;
    for (const Multiplet& mp : all) {
      if (count >= Q) break;
      chosen.push_back(mp);
      count += 2 * mp.n + 1;
    }
    if (count >= Q && chosen.back().k < k_max) break;
    k_max *= 1.5;
  }

  auto impl = std::make_shared<Impl>();
  impl->R0 = R0;
  impl->D = D;
  impl->Q = Q;
  impl->id = next_mode_set_id.fetch_add(1);

  // Multiplets are already sorted by (k, n); expanding m ascending keeps the
  // (|s|, n, m) order.
  for (const Multiplet& mp : chosen) {
    ModeIndex proto;
    proto.n = mp.n;
    proto.nu = mp.nu;
    proto.k = mp.k;
    proto.s = -D * mp.k * mp.k;
    proto.N = normalization(proto, R0);
    if (!(proto.N > 0.0)) {
      std::ostringstream msg;
      msg << "enumerate_modes: non-positive normalization for (n, nu) = (" << mp.n << ", " << mp.nu << ")";
      throw std::logic_error(msg.str());
    }
    const double quad = normalization_quadrature(mp.n, mp.k, R0);
    if (std::abs(quad - proto.N) > kNormalizationCheckTol * proto.N) {
      std::ostringstream msg;
      msg << "enumerate_modes: normalization mismatch for (n, nu) = (" << mp.n << ", " << mp.nu
          << "): closed form " << proto.N << ", quadrature " << quad;
      throw std::logic_error(msg.str());
    }
    const double jR = spherical_bessel_j(mp.n, mp.k * R0);
    double mass_weight = 0.0;
    if (mp.n == 0) {
      const double k = mp.k;
      mass_weight = std::sqrt(4.0 * kPi) *
                    integrate_adaptive([k](double r) { return spherical_bessel_j(0, k * r) * r * r; }, 0.0, R0, 1e-12);
    }
    for (int m = -mp.n; m <= mp.n; ++m) {
      ModeIndex mode = proto;
      mode.m = m;
      mode.mu = static_cast<int>(impl->modes.size());
      impl->modes.push_back(mode);
      impl->boundary_values.push_back(jR);
      impl->mass_weights.push_back(m == 0 ? mass_weight : 0.0);
    }
  }
  return ModeSet(std::move(impl));
}

double ModeSet::radius() const { return impl_->R0; }
double ModeSet::diffusion() const { return impl_->D; }
int ModeSet::requested() const { return impl_->Q; }
int ModeSet::size() const { return static_cast<int>(impl_->modes.size()); }
std::uint64_t ModeSet::id() const { return impl_->id; }
std::span<const ModeIndex> ModeSet::modes() const { return impl_->modes; }
const ModeIndex& ModeSet::operator[](int mu) const { return impl_->modes.at(mu); }
double ModeSet::max_decay_rate() const { return -impl_->modes.back().s; }
std::span<const double> ModeSet::boundary_values() const { return impl_->boundary_values; }
std::span<const double> ModeSet::mass_weights() const { return impl_->mass_weights; }

std::vector<ModeBlock> ModeSet::blocks_by_order_degree() const {
  std::map<std::pair<int, int>, ModeBlock> blocks;
  for (const ModeIndex& mode : impl_->modes) {
    ModeBlock& b = blocks[{mode.n, mode.m}];
    b.n = mode.n;
    b.m = mode.m;
    b.modes.push_back(mode.mu);
  }
  std::vector<ModeBlock> out;
  out.reserve(blocks.size());
  for (auto& [key, b] : blocks) out.push_back(std::move(b));
  return out;
}

std::vector<ModeBlock> ModeSet::blocks_by_degree() const {
  std::map<int, ModeBlock> blocks;
  for (const ModeIndex& mode : impl_->modes) {
    ModeBlock& b = blocks[mode.m];
    b.m = mode.m;
    b.modes.push_back(mode.mu);
  }
  std::vector<ModeBlock> out;
  out.reserve(blocks.size());
  for (auto& [key, b] : blocks) out.push_back(std::move(b));
  return out;
}

namespace {

void check_point(const SphericalPoint& x, double R0) {
  if (!(x.r >= 0.0)) throw std::domain_error("mode evaluation: negative radius");
  if (x.r > R0 * (1.0 + 1e-12)) throw std::domain_error("mode evaluation: point outside the sphere");
}

// j_n(k r) / r with its r -> 0 limit.
double bessel_over_r(int n, double k, double r) {
  if (r > 0.0) return spherical_bessel_j(n, k * r) / r;
  return n == 1 ? k / 3.0 : 0.0;
}

}  // namespace

std::complex<double> ModeSet::eval_K1(const ModeIndex& mode, const SphericalPoint& x) const {
  check_point(x, impl_->R0);
  return spherical_bessel_j(mode.n, mode.k * x.r) * spherical_harmonic(mode.n, mode.m, x.theta, x.phi);
}

std::complex<double> ModeSet::eval_K4_adjoint(const ModeIndex& mode, const SphericalPoint& x) const {
  return std::conj(eval_K1(mode, x));
}

FluxKernel ModeSet::eval_K_flux(const ModeIndex& mode, const SphericalPoint& x) const {
  check_point(x, impl_->R0);
  const double D = impl_->D;
  FluxKernel out;
  if (mode.k == 0.0) return out;
  const std::complex<double> y = spherical_harmonic(mode.n, mode.m, x.theta, x.phi);
  out.radial = -D * mode.k * spherical_bessel_j_prime(mode.n, mode.k * x.r) * y;
  if (mode.n == 0) return out;
  const double jr = bessel_over_r(mode.n, mode.k, x.r);
  out.theta = -D * jr * spherical_harmonic_dtheta(mode.n, mode.m, x.theta, x.phi);
  if (mode.m != 0) {
    out.phi = -D * jr * std::complex<double>(0.0, mode.m) *
              spherical_harmonic_over_sin(mode.n, mode.m, x.theta, x.phi);
  }
  return out;
}

double normalization(const ModeIndex& mode, double R0) {
  if (mode.k == 0.0) return R0 * R0 * R0 / 3.0;
  const double u = mode.k * R0;
  const double j = spherical_bessel_j(mode.n, u);
  return 0.5 * R0 * R0 * R0 * j * j * (1.0 - mode.n * (mode.n + 1.0) / (u * u));
}

double normalization_quadrature(int n, double k, double R0) {
  if (k == 0.0) {
    return n == 0 ? integrate_adaptive([](double r) { return r * r; }, 0.0, R0) : 0.0;
  }
  auto f = [n, k](double r) {
    const double j = spherical_bessel_j(n, k * r);
    return j * j * r * r;
  };
  return integrate_adaptive(f, 0.0, R0, 1e-13);
}

}  // namespace spherediff
