// DDIM scheduling, the clean-latent prediction map and single-channel sampling.
//
// Alphas are cumulative (the DDPM "alpha bar"). The schedule stores alpha_0 = 1
// so that the last reverse step returns the clean prediction exactly.
#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/image.hpp"
#include "mosaic/noise.hpp"

namespace mosaic {

enum class ScheduleKind { kLinear, kCosine };

inline ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "linear") return ScheduleKind::kLinear;
  if (s == "cosine") return ScheduleKind::kCosine;
  throw std::invalid_argument("unknown schedule kind '" + s + "'");
}

class DdimSchedule {
 public:
  /// alphas and sigmas are indexed 0..T; entry 0 is the clean end (alpha 1, sigma 0).
  DdimSchedule(std::vector<double> alphas, std::vector<double> sigmas, double eta)
      : alphas_(std::move(alphas)), sigmas_(std::move(sigmas)), eta_(eta) {
    validate();
  }

  int num_steps() const { return static_cast<int>(alphas_.size()) - 1; }
  double eta() const { return eta_; }
  double alpha(int t) const { return alphas_.at(static_cast<std::size_t>(t)); }
  double sigma(int t) const { return sigmas_.at(static_cast<std::size_t>(t)); }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& sigmas() const { return sigmas_; }

  void require_step(int t, const char* what) const {
    if (t < 1 || t > num_steps()) {
      throw std::out_of_range(std::string(what) + ": timestep " + std::to_string(t) +
                              " outside [1, " + std::to_string(num_steps()) + "]");
    }
  }

  /// Coefficient of the predicted-noise direction in the reverse update.
  double direction_coefficient(int t) const {
    const double v = 1.0 - alpha(t - 1) - sigma(t) * sigma(t);
    return v > 0.0 ? std::sqrt(v) : 0.0;
  }

 private:
  void validate() const {
    if (alphas_.size() < 2 || sigmas_.size() != alphas_.size()) {
      throw std::invalid_argument("DdimSchedule: need T >= 1 and matching sigma vector");
    }
    if (alphas_[0] != 1.0) throw std::invalid_argument("DdimSchedule: alpha_0 must be 1");
    for (std::size_t t = 1; t < alphas_.size(); ++t) {
      if (!(alphas_[t] > 0.0 && alphas_[t] <= 1.0)) {
        throw std::invalid_argument("DdimSchedule: alpha_t must lie in (0, 1]");
      }
      if (t >= 2 && !(alphas_[t] < alphas_[t - 1])) {
        throw std::invalid_argument("DdimSchedule: alphas must be strictly decreasing");
      }
      if (!(sigmas_[t] >= 0.0)) throw std::invalid_argument("DdimSchedule: negative sigma");
      if (1.0 - alphas_[t - 1] - sigmas_[t] * sigmas_[t] < -1e-15) {
        throw std::invalid_argument("DdimSchedule: sigma_" + std::to_string(t) +
                                    " makes the direction coefficient imaginary");
      }
    }
  }

  std::vector<double> alphas_;
  std::vector<double> sigmas_;
  double eta_;
};

struct ScheduleRange {
  double alpha_max = 0.9999;
  double alpha_min = 1e-4;
};

/// sigma_t(eta) interpolating deterministic DDIM (eta = 0) and ancestral DDPM (eta = 1).
inline double ddim_sigma(double alpha_t, double alpha_prev, double eta) {
  if (alpha_t >= 1.0) return 0.0;
  return eta * std::sqrt((1.0 - alpha_prev) / (1.0 - alpha_t)) *
         std::sqrt(1.0 - alpha_t / alpha_prev);
}

inline DdimSchedule make_schedule(int num_steps, ScheduleKind kind, double eta,
                                  ScheduleRange range = {}) {
  if (num_steps < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  if (!(eta >= 0.0)) throw std::invalid_argument("make_schedule: eta must be >= 0");
  const auto T = static_cast<std::size_t>(num_steps);
  std::vector<double> alphas(T + 1, 1.0);
  if (kind == ScheduleKind::kLinear) {
    for (std::size_t t = 1; t <= T; ++t) {
      const double frac = T == 1 ? 1.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
      alphas[t] = range.alpha_max - (range.alpha_max - range.alpha_min) * frac;
    }
  } else {
    constexpr double s = 0.008;
    const auto f = [&](double u) {
      const double c = std::cos((u + s) / (1.0 + s) * std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0.0);
    for (std::size_t t = 1; t <= T; ++t) {
      double a = f(static_cast<double>(t) / static_cast<double>(T)) / f0;
      if (a > range.alpha_max) a = range.alpha_max;
      // the terminal cosine value is 0; keep it positive and strictly decreasing
      if (!(a >= range.alpha_min * 1e-3) || (t >= 2 && !(a < alphas[t - 1]))) a = alphas[t - 1] * 0.5;
      alphas[t] = a;
    }
  }
  std::vector<double> sigmas(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    sigmas[t] = ddim_sigma(alphas[t], alphas[t - 1], eta);
    if (1.0 - alphas[t - 1] - sigmas[t] * sigmas[t] < -1e-15) {
      throw std::invalid_argument("make_schedule: eta " + std::to_string(eta) +
                                  " yields 1 - alpha_{t-1} - sigma_t^2 < 0 at t = " +
                                  std::to_string(t));
    }
  }
  return DdimSchedule(std::move(alphas), std::move(sigmas), eta);
}

/// z0 = (z_t - sqrt(1 - a_t) eps) / sqrt(a_t), with a_t given directly.
inline LatentImage predict_z0_alpha(const LatentImage& z_t, const LatentImage& eps_hat, double alpha) {
  require_same_shape(z_t, eps_hat, "predict_z0");
  LatentImage out(z_t.height(), z_t.width(), z_t.channels());
  const double a = std::sqrt(alpha);
  const double b = std::sqrt(1.0 - alpha);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (z_t[i] - b * eps_hat[i]) / a;
  return out;
}

inline LatentImage predict_z0(const LatentImage& z_t, const LatentImage& eps_hat, int t,
                              const DdimSchedule& sched) {
  sched.require_step(t, "predict_z0");
  return predict_z0_alpha(z_t, eps_hat, sched.alpha(t));
}

inline LatentImage eps_from_z0_alpha(const LatentImage& z_t, const LatentImage& z0_hat, double alpha) {
  require_same_shape(z_t, z0_hat, "eps_from_z0");
  if (!(alpha < 1.0)) throw std::invalid_argument("eps_from_z0: alpha_t = 1 has no noise to recover");
  LatentImage out(z_t.height(), z_t.width(), z_t.channels());
  const double a = std::sqrt(alpha);
  const double b = std::sqrt(1.0 - alpha);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (z_t[i] - a * z0_hat[i]) / b;
  return out;
}

inline LatentImage eps_from_z0(const LatentImage& z_t, const LatentImage& z0_hat, int t,
                               const DdimSchedule& sched) {
  sched.require_step(t, "eps_from_z0");
  return eps_from_z0_alpha(z_t, z0_hat, sched.alpha(t));
}

/// One reverse step z_t -> z_{t-1}. `noise` is only read when sigma_t > 0.
inline LatentImage ddim_step(const LatentImage& z_t, const LatentImage& z0_hat, int t,
                             const DdimSchedule& sched, const LatentImage& noise) {
  sched.require_step(t, "ddim_step");
  require_same_shape(z_t, z0_hat, "ddim_step");
  const double sigma = sched.sigma(t);
  if (sigma > 0.0) require_same_shape(z_t, noise, "ddim_step noise");
  const double alpha_t = sched.alpha(t);
  const double keep = std::sqrt(sched.alpha(t - 1));
  const double dir = sched.direction_coefficient(t);
  const double a = std::sqrt(alpha_t);
  const double b = std::sqrt(1.0 - alpha_t);
  LatentImage out(z_t.height(), z_t.width(), z_t.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double eps = b > 0.0 ? (z_t[i] - a * z0_hat[i]) / b : 0.0;
    double v = keep * z0_hat[i] + dir * eps;
    if (sigma > 0.0) v += sigma * noise[i];
    out[i] = v;
  }
  return out;
}

/// Conditioning payload requirements shared by every denoiser.
template <typename C>
concept LatentCondition = requires(const C& c) {
  { c.latent_height() } -> std::convertible_to<int>;
  { c.latent_width() } -> std::convertible_to<int>;
  { c.latent_channels() } -> std::convertible_to<int>;
  { c.view_id } -> std::convertible_to<int>;
};

template <typename D, typename C>
concept NoisePredictor = LatentCondition<C> &&
    requires(const D& d, const LatentImage& z, int t, const C& c, const DdimSchedule& s) {
      { d.predict_eps(z, t, c, s) } -> std::same_as<LatentImage>;
    };

template <LatentCondition C>
LatentImage initial_latent(const C& cond, std::uint64_t seed, const DdimSchedule& sched) {
  return keyed_normal(cond.latent_height(), cond.latent_width(), cond.latent_channels(), seed,
                      cond.view_id, sched.num_steps(), NoiseStream::kInitial);
}

/// Reverse step of a single channel, drawing its noise from the keyed stream.
template <typename D, typename C>
  requires NoisePredictor<D, C>
LatentImage denoise_step(const D& denoiser, const C& cond, const LatentImage& z_t, int t,
                         const DdimSchedule& sched, std::uint64_t seed) {
  const LatentImage eps = denoiser.predict_eps(z_t, t, cond, sched);
  const LatentImage z0 = predict_z0(z_t, eps, t, sched);
  if (sched.sigma(t) > 0.0) {
    const LatentImage noise =
        keyed_normal(z_t.height(), z_t.width(), z_t.channels(), seed, cond.view_id, t, NoiseStream::kStep);
    return ddim_step(z_t, z0, t, sched, noise);
  }
  return ddim_step(z_t, z0, t, sched, LatentImage{});
}

/// Baseline per-view sampler with no cross-view coupling.
template <typename D, typename C>
  requires NoisePredictor<D, C>
LatentImage sample_independent(const D& denoiser, const C& cond, const DdimSchedule& sched,
                               std::uint64_t seed) {
  LatentImage z = initial_latent(cond, seed, sched);
  for (int t = sched.num_steps(); t >= 1; --t) z = denoise_step(denoiser, cond, z, t, sched, seed);
  return z;
}

}  // namespace mosaic
