#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hopf/bzgrid.hpp"
#include "hopf/common.hpp"
#include "hopf/model.hpp"

namespace hopf {

/// Peak control amplitude, 2pi x 20.83 MHz, in rad/s.
inline constexpr double kMaxRabi = kTwoPi * 20.83e6;
inline constexpr double kSegmentDuration = 500e-9;
/// AWG sample spacing at 8 GS/s.
inline constexpr double kSampleSpacing = 0.125e-9;
inline constexpr long kPhotonsPerSite = 93000;

struct ScheduleOptions {
  double max_rabi = kMaxRabi;
  double segment_duration = kSegmentDuration;
  double sample_spacing = kSampleSpacing;
};

/// Rotating-frame control H/hbar = amplitude (cos(phase) sx + sin(phase) sy) + detuning sz.
struct Control {
  double amplitude = 0.0;  // |Omega|, rad/s
  double phase = 0.0;      // rad
  double detuning = 0.0;   // Delta, rad/s

  [[nodiscard]] Vec3 field() const {
    return {amplitude * std::cos(phase), amplitude * std::sin(phase), detuning};
  }
};

/// Piecewise-linear control waveform sampled on a uniform grid; segment
/// boundaries fall on samples, so linear interpolation between samples
/// reproduces the waveform exactly.
struct RampSchedule {
  double sample_spacing = kSampleSpacing;
  std::vector<Control> samples;
  /// Segment end times (transverse ramp-up, detuning ramp, transverse ramp-down).
  std::array<double, 3> boundaries{};
  Control target;

  [[nodiscard]] double duration() const {
    return samples.empty() ? 0.0 : sample_spacing * double(samples.size() - 1);
  }

  [[nodiscard]] Control at(double t) const {
    require(!samples.empty(), "empty schedule");
    if (t <= 0.0) return samples.front();
    const double x = t / sample_spacing;
    const auto i = std::size_t(std::floor(x));
    if (i + 1 >= samples.size()) return samples.back();
    const double w = x - double(i);
    const Control& a = samples[i];
    const Control& b = samples[i + 1];
    return {a.amplitude + w * (b.amplitude - a.amplitude), a.phase + w * (b.phase - a.phase),
            a.detuning + w * (b.detuning - a.detuning)};
  }
};

/// Final control for momentum k: u(k) scaled so max(|u_perp|, |u_z|) hits max_rabi.
inline Control target_control(const MomentumPoint& k, const HopfParams& p, double max_rabi = kMaxRabi) {
  const CoeffVector u = u_of_k(k, p);
  if (!(u.norm() >= kGapTolerance)) fail(ErrorKind::GaplessPoint, "gap closes at " + describe(k));
  const double transverse = std::hypot(u.x(), u.y());
  const double scale = max_rabi / std::max(transverse, std::abs(u.z()));
  return {scale * transverse, std::atan2(u.y(), u.x()), scale * u.z()};
}

/// Three 500 ns linear ramps starting from the spin-up ground state of
/// -max_rabi sz: transverse amplitude 0 -> max at the target phase, then
/// detuning -max -> target, then amplitude max -> target.
inline RampSchedule build_schedule(const MomentumPoint& k, const HopfParams& p, const ScheduleOptions& opt = {}) {
  require(opt.max_rabi > 0.0 && opt.segment_duration >= 0.0 && opt.sample_spacing > 0.0, "invalid schedule options");
  const Control fin = target_control(k, p, opt.max_rabi);
  const auto per_segment = std::size_t(std::llround(opt.segment_duration / opt.sample_spacing));
  require(std::abs(double(per_segment) * opt.sample_spacing - opt.segment_duration) <= 1e-6 * opt.sample_spacing,
          "segment duration must be a multiple of the sample spacing");

  RampSchedule s;
  s.sample_spacing = opt.sample_spacing;
  s.target = fin;
  s.boundaries = {opt.segment_duration, 2 * opt.segment_duration, 3 * opt.segment_duration};
  s.samples.reserve(3 * per_segment + 1);
  const double top = opt.max_rabi;
  const double start_detuning = -opt.max_rabi;
  s.samples.push_back({0.0, fin.phase, start_detuning});
  for (std::size_t i = 1; i <= per_segment; ++i) {
    const double w = double(i) / double(per_segment);
    s.samples.push_back({w * top, fin.phase, start_detuning});
  }
  for (std::size_t i = 1; i <= per_segment; ++i) {
    const double w = double(i) / double(per_segment);
    s.samples.push_back({top, fin.phase, start_detuning + w * (fin.detuning - start_detuning)});
  }
  for (std::size_t i = 1; i <= per_segment; ++i) {
    const double w = double(i) / double(per_segment);
    s.samples.push_back({top + w * (fin.amplitude - top), fin.phase, fin.detuning});
  }
  return s;
}

/// exp(-i dt (b . sigma)) applied to psi.
inline Spinor apply_precession(const Vec3& b, double dt, const Spinor& psi) {
  const double mag = b.norm();
  const double angle = mag * dt;
  const double c = std::cos(angle);
  const double sinc = mag > 0.0 ? std::sin(angle) / mag : dt;
  const complex mi(0.0, -1.0);
  const complex a = psi(0), d = psi(1);
  Spinor out;
  out(0) = c * a + mi * sinc * (b.z() * a + complex(b.x(), -b.y()) * d);
  out(1) = c * d + mi * sinc * (complex(b.x(), b.y()) * a - b.z() * d);
  return out;
}

/// Piecewise-constant propagation with the midpoint Hamiltonian per step
/// and the exact 2x2 exponential. The step is dt shrunk to divide the duration.
inline Spinor evolve(const RampSchedule& s, const Spinor& initial, double dt = kSampleSpacing) {
  require(dt > 0.0 && dt <= kSampleSpacing * (1.0 + 1e-12), "time step must be positive and at most 0.125 ns");
  require(std::abs(initial.norm() - 1.0) <= 1e-10, "initial state must be normalized");
  const double T = s.duration();
  if (T <= 0.0) return initial;
  const auto steps = std::size_t(std::ceil(T / dt - 1e-9));
  const double h = T / double(steps);
  Spinor psi = initial;
  for (std::size_t i = 0; i < steps; ++i) {
    psi = apply_precession(s.at((double(i) + 0.5) * h).field(), h, psi);
  }
  return psi;
}

inline double state_fidelity(const Spinor& ideal, const Spinor& actual) { return std::norm(ideal.dot(actual)); }
inline double state_fidelity(const Spinor& ideal, const DensityMatrix& rho) {
  return (ideal.adjoint() * rho * ideal)(0, 0).real();
}

/// Photon budget split across the x, y, z Pauli bases.
struct Allocation {
  std::array<double, 3> fractions{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  /// Floors each share; leftover photons go to z.
  [[nodiscard]] std::array<long, 3> split(long photons) const {
    std::array<long, 3> shots{};
    long used = 0;
    for (int b = 0; b < 3; ++b) {
      shots[b] = long(std::floor(fractions[b] * double(photons)));
      used += shots[b];
    }
    shots[2] += photons - used;
    return shots;
  }
};

struct MeasurementRecord {
  std::array<long, 3> shots{};
  std::array<long, 3> successes{};
  std::uint64_t seed = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Stream seed for one site of a campaign; independent of processing order.
inline std::uint64_t site_seed(std::uint64_t campaign_seed, std::size_t site) {
  return splitmix64(campaign_seed ^ splitmix64(0xC0FFEEull + site));
}

/// Binomial projection noise: success probability (1 + <sigma_b>)/2 per basis.
inline MeasurementRecord simulate_measurements(const BlochVector& expectation, long photons, const Allocation& split,
                                               std::uint64_t seed) {
  require(photons >= 3, "need at least 3 photons");
  MeasurementRecord m;
  m.seed = seed;
  m.shots = split.split(photons);
  std::mt19937_64 rng(seed);
  for (int b = 0; b < 3; ++b) {
    const double prob = std::clamp(0.5 * (1.0 + expectation(b)), 0.0, 1.0);
    std::binomial_distribution<long> draw(m.shots[b], prob);
    m.successes[b] = draw(rng);
  }
  return m;
}

inline MeasurementRecord simulate_measurements(const Spinor& state, long photons, const Allocation& split,
                                               std::uint64_t seed) {
  return simulate_measurements(bloch_vector(state), photons, split, seed);
}

struct TomographyResult {
  DensityMatrix rho;
  BlochVector bloch;
  double fidelity = 1.0;
  double photons = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
};

namespace detail {

/// Binomial log-likelihood of one basis, dropping terms with zero weight.
inline double basis_loglik(double success, double shots, double r) {
  double ll = 0.0;
  if (success > 0.0) ll += success * std::log(0.5 * (1.0 + r));
  if (shots - success > 0.0) ll += (shots - success) * std::log(0.5 * (1.0 - r));
  return ll;
}

/// argmax over r in [-1, 1] of basis_loglik(r) - lambda r^2 / 2.
inline double penalized_component(double success, double shots, double lambda) {
  const double fail_count = shots - success;
  auto slope = [&](double r) {
    double g = -lambda * r;
    if (success > 0.0) g += success / (1.0 + r);
    if (fail_count > 0.0) g -= fail_count / (1.0 - r);
    return g;
  };
  if (fail_count <= 0.0 && slope(1.0) >= 0.0) return 1.0;
  if (success <= 0.0 && slope(-1.0) <= 0.0) return -1.0;
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (slope(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline double log_likelihood(const std::array<double, 3>& success, const std::array<double, 3>& shots,
                             const BlochVector& r) {
  double ll = 0.0;
  for (int b = 0; b < 3; ++b) ll += detail::basis_loglik(success[b], shots[b], r(b));
  return ll;
}

/// Maximum-likelihood state on the Bloch ball. The likelihood is concave in
/// the Bloch vector, so the linear-inversion estimate is optimal when it is
/// physical; otherwise the optimum sits on the sphere and solves the KKT
/// system grad L = lambda r, found by bisection on lambda.
inline TomographyResult mle_from_counts(const std::array<double, 3>& success, const std::array<double, 3>& shots) {
  for (int b = 0; b < 3; ++b) {
    require(shots[b] > 0.0, "every basis needs at least one shot");
    require(success[b] >= 0.0 && success[b] <= shots[b], "successes must lie in [0, shots]");
  }
  TomographyResult out;
  out.photons = shots[0] + shots[1] + shots[2];
  BlochVector r;
  for (int b = 0; b < 3; ++b) r(b) = 2.0 * success[b] / shots[b] - 1.0;

  if (r.squaredNorm() > 1.0) {
    auto solve = [&](double lambda) {
      BlochVector v;
      for (int b = 0; b < 3; ++b) v(b) = detail::penalized_component(success[b], shots[b], lambda);
      return v;
    };
    double lo = 0.0;
    double hi = 1.0;
    int doublings = 0;
    while (solve(hi).squaredNorm() > 1.0) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 200) fail(ErrorKind::NonConvergence, "no bracket for the likelihood multiplier");
    }
    BlochVector best = solve(hi);
    double prev_ll = log_likelihood(success, shots, best / std::max(1.0, best.norm()));
    int it = 0;
    for (; it < 300; ++it) {
      const double mid = 0.5 * (lo + hi);
      const BlochVector v = solve(mid);
      if (v.squaredNorm() > 1.0) lo = mid;
      else {
        hi = mid;
        best = v;
      }
      const double ll = log_likelihood(success, shots, best / std::max(1.0, best.norm()));
      if (hi - lo <= 1e-15 * std::max(1.0, hi) || (it > 60 && std::abs(ll - prev_ll) < 1e-12)) break;
      prev_ll = ll;
    }
    out.iterations = it + 1;
    r = best.normalized();
  }
  out.bloch = r;
  out.rho = density_from_bloch(r);
  out.log_likelihood = log_likelihood(success, shots, r);
  return out;
}

inline TomographyResult mle_tomography(const MeasurementRecord& m) {
  return mle_from_counts({double(m.successes[0]), double(m.successes[1]), double(m.successes[2])},
                         {double(m.shots[0]), double(m.shots[1]), double(m.shots[2])});
}

/// Infinite-shot limit: exact Pauli frequencies with unit weight per basis.
inline TomographyResult mle_from_expectations(const BlochVector& expectation) {
  std::array<double, 3> success{}, shots{1.0, 1.0, 1.0};
  for (int b = 0; b < 3; ++b) success[b] = std::clamp(0.5 * (1.0 + expectation(b)), 0.0, 1.0);
  return mle_from_counts(success, shots);
}

struct FidelityStats {
  double mean = 0.0;
  double median = 0.0;
  /// 2.5% and 97.5% quantiles.
  std::array<double, 2> ci95{};
  double min = 0.0;
  std::vector<double> histogram_edges;
  std::vector<long> histogram_counts;
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) fail(ErrorKind::EmptyInput, "quantile of empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const auto i = std::size_t(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - double(i)) * (v[i + 1] - v[i]);
}

inline FidelityStats fidelity_stats(const std::vector<double>& f, int bins = 50) {
  if (f.empty()) fail(ErrorKind::EmptyInput, "no fidelities");
  FidelityStats s;
  double total = 0.0;
  for (double x : f) total += x;
  s.mean = total / double(f.size());
  s.median = quantile(f, 0.5);
  s.ci95 = {quantile(f, 0.025), quantile(f, 0.975)};
  s.min = *std::min_element(f.begin(), f.end());
  const double lo = std::min(s.min, 1.0 - 1e-6);
  const double hi = 1.0;
  s.histogram_edges.resize(std::size_t(bins) + 1);
  for (int i = 0; i <= bins; ++i) s.histogram_edges[i] = lo + (hi - lo) * i / bins;
  s.histogram_counts.assign(std::size_t(bins), 0);
  for (double x : f) {
    int b = int(std::floor((x - lo) / (hi - lo) * bins));
    s.histogram_counts[std::size_t(std::clamp(b, 0, bins - 1))] += 1;
  }
  return s;
}

struct CampaignOptions {
  /// Photons per site; 0 selects the noiseless infinite-shot idealization.
  long photons_per_site = kPhotonsPerSite;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double dt = kSampleSpacing;
  ScheduleOptions schedule;
  Allocation allocation;
};

struct SiteFailure {
  std::size_t site;
  std::string message;
};

/// Adiabatically prepared state and the analytic ground state it aims at.
struct PreparedSite {
  Spinor prepared;
  Spinor ideal;
  bool ok = true;
  std::string error;
};

inline std::vector<PreparedSite> prepare_states(const HopfParams& p, const MeshSpec& mesh,
                                                const CampaignOptions& opt = {}) {
  p.validate();
  std::vector<PreparedSite> out(mesh.sites());
  const Spinor up(complex(1.0, 0.0), complex(0.0, 0.0));
  parallel_for(mesh.sites(), opt.threads, [&](std::size_t i) {
    const MomentumPoint k = mesh.momentum(i);
    try {
      const RampSchedule s = build_schedule(k, p, opt.schedule);
      out[i].prepared = evolve(s, up, opt.dt);
      out[i].ideal = ground_state(k, p);
    } catch (const Error& e) {
      out[i].ok = false;
      out[i].error = e.what();
      out[i].prepared = up;
      out[i].ideal = up;
    }
  });
  return out;
}

struct CampaignResult {
  StateField field;
  std::vector<double> fidelities;
  FidelityStats stats;
  std::vector<SiteFailure> failures;
  long photons_per_site = 0;
  std::uint64_t seed = 0;
};

/// Measurement + reconstruction for already-prepared sites. Failed sites
/// hold the maximally mixed state, are excluded from the statistics, and
/// are listed in `failures`.
inline CampaignResult reconstruct_campaign(const HopfParams& p, const MeshSpec& mesh,
                                           const std::vector<PreparedSite>& prepared,
                                           const CampaignOptions& opt = {}) {
  require(prepared.size() == mesh.sites(), "prepared state count does not match mesh");
  std::vector<DensityMatrix> rhos(mesh.sites());
  std::vector<double> fid(mesh.sites(), 0.0);
  std::vector<std::string> errors(mesh.sites());
  parallel_for(mesh.sites(), opt.threads, [&](std::size_t i) {
    const PreparedSite& site = prepared[i];
    if (!site.ok) {
      rhos[i] = DensityMatrix::Identity() * 0.5;
      errors[i] = site.error;
      return;
    }
    try {
      const TomographyResult t =
          opt.photons_per_site == 0
              ? mle_from_expectations(bloch_vector(site.prepared))
              : mle_tomography(simulate_measurements(site.prepared, opt.photons_per_site, opt.allocation,
                                                     site_seed(opt.seed, i)));
      rhos[i] = t.rho;
      fid[i] = state_fidelity(site.ideal, t.rho);
    } catch (const Error& e) {
      rhos[i] = DensityMatrix::Identity() * 0.5;
      errors[i] = e.what();
    }
  });
  std::vector<double> good;
  std::vector<SiteFailure> failures;
  for (std::size_t i = 0; i < mesh.sites(); ++i) {
    if (errors[i].empty()) good.push_back(fid[i]);
    else failures.push_back({i, errors[i]});
  }
  CampaignResult r{StateField(mesh, p, Provenance::SimulatedExperiment, std::move(rhos)),
                   std::move(fid),
                   {},
                   std::move(failures),
                   opt.photons_per_site,
                   opt.seed};
  if (!good.empty()) r.stats = fidelity_stats(good);
  return r;
}

/// build_schedule -> evolve -> simulate_measurements -> mle_tomography on every site.
inline CampaignResult run_campaign(const HopfParams& p, const MeshSpec& mesh, const CampaignOptions& opt = {}) {
  return reconstruct_campaign(p, mesh, prepare_states(p, mesh, opt), opt);
}

}  // namespace hopf
