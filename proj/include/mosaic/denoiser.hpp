// Depth-conditioned Gaussian-mixture denoiser.
//
// The clean latent of a view is modelled as a K-component isotropic mixture
// whose means are palette renderings of that view's depth map. Under the
// forward marginal z_t = sqrt(a) z_0 + sqrt(1 - a) eps the posterior mean
// E[z_0 | z_t] is available in closed form, which gives an exact noise
// predictor and an exact Jacobian.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/camera.hpp"
#include "mosaic/ddim.hpp"
#include "mosaic/image.hpp"

namespace mosaic {

/// Piecewise-linear lookup from normalised shading in [0, 1] to channel values.
/// Stops are evenly spaced over [0, 1].
struct Palette {
  std::string name;
  std::vector<std::vector<double>> stops;

  int channels() const { return stops.empty() ? 0 : static_cast<int>(stops.front().size()); }

  void validate() const {
    if (stops.empty()) throw std::invalid_argument("Palette '" + name + "': needs at least one stop");
    for (const auto& s : stops) {
      if (s.empty() || s.size() != stops.front().size()) {
        throw std::invalid_argument("Palette '" + name + "': stops must share a non-zero channel count");
      }
      for (double v : s) {
        if (!std::isfinite(v)) throw std::invalid_argument("Palette '" + name + "': non-finite value");
      }
    }
  }

  void evaluate(double shading, std::span<double> out) const {
    const std::size_t n = stops.size();
    if (n == 1) {
      std::copy(stops[0].begin(), stops[0].end(), out.begin());
      return;
    }
    const double pos = std::clamp(shading, 0.0, 1.0) * static_cast<double>(n - 1);
    std::size_t i = static_cast<std::size_t>(std::floor(pos));
    if (i >= n - 1) i = n - 2;
    const double f = pos - static_cast<double>(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1.0 - f) * stops[i][c] + f * stops[i + 1][c];
  }
};

/// Named presets. The four default palettes form one orbit under channel
/// reversal and sign flip, so they have equal norms and a standard normal
/// initial latent favours none of them.
inline std::map<std::string, Palette> palette_presets() {
  const std::vector<double> a0{0.80, 0.30, -0.60};
  const std::vector<double> a1{0.55, 0.15, -0.75};
  auto rev = [](std::vector<double> v) {
    std::reverse(v.begin(), v.end());
    return v;
  };
  auto neg = [](std::vector<double> v) {
    for (double& x : v) x = -x;
    return v;
  };
  std::map<std::string, Palette> p;
  p["ember"] = {"ember", {a0, a1}};
  p["glacier"] = {"glacier", {rev(a0), rev(a1)}};
  p["ink"] = {"ink", {neg(a0), neg(a1)}};
  p["moss"] = {"moss", {neg(rev(a0)), neg(rev(a1))}};
  p["gray"] = {"gray", {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}}};
  return p;
}

inline std::vector<Palette> default_palette_set() {
  const auto presets = palette_presets();
  return {presets.at("ember"), presets.at("glacier"), presets.at("ink"), presets.at("moss")};
}

inline LatentImage palette_render(const DepthMap& depth, const Palette& palette) {
  palette.validate();
  constexpr double kNormEps = 1e-6;
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!depth.valid(i)) continue;
    dmin = std::min(dmin, depth.depth(i));
    dmax = std::max(dmax, depth.depth(i));
  }
  LatentImage out(depth.height(), depth.width(), palette.channels());
  const int nc = palette.channels();
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double shading = depth.valid(i) ? (depth.depth(i) - dmin) / (dmax - dmin + kNormEps) : 0.0;
    palette.evaluate(shading, out.data().subspan(i * nc, static_cast<std::size_t>(nc)));
  }
  return out;
}

/// Per-view conditioning: latent-resolution depth plus the palette set. The
/// palette renderings (mixture means) are computed once at construction.
class Condition {
 public:
  Condition(DepthMap depth, std::vector<Palette> palettes, int id)
      : view_id(id), depth_(std::move(depth)), palettes_(std::move(palettes)) {
    if (palettes_.empty()) throw std::invalid_argument("Condition: palette set must be non-empty");
    for (const auto& p : palettes_) {
      p.validate();
      if (p.channels() != palettes_.front().channels()) {
        throw std::invalid_argument("Condition: palettes disagree on channel count");
      }
    }
    for (std::size_t i = 0; i < depth_.size(); ++i) {
      if (depth_.valid(i) && !(depth_.depth(i) > 0.0)) {
        throw std::invalid_argument("Condition: valid depth must be positive");
      }
    }
    means_.reserve(palettes_.size());
    for (const auto& p : palettes_) means_.push_back(palette_render(depth_, p));
  }

  int view_id;

  int latent_height() const { return depth_.height(); }
  int latent_width() const { return depth_.width(); }
  int latent_channels() const { return palettes_.front().channels(); }
  const DepthMap& depth() const { return depth_; }
  const std::vector<Palette>& palettes() const { return palettes_; }
  const std::vector<LatentImage>& means() const { return means_; }

 private:
  DepthMap depth_;
  std::vector<Palette> palettes_;
  std::vector<LatentImage> means_;
};

struct GmmPrior {
  std::vector<double> weights;
  std::vector<LatentImage> means;
  double component_std = 0.25;

  void validate() const {
    if (weights.empty() || weights.size() != means.size()) {
      throw std::invalid_argument("GmmPrior: need one weight per mean and K >= 1");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw std::invalid_argument("GmmPrior: weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("GmmPrior: weights must sum to 1");
    if (!(component_std > 0.0)) throw std::invalid_argument("GmmPrior: component std must be positive");
    for (const auto& m : means) require_same_shape(m, means.front(), "GmmPrior means");
  }
};

namespace detail {

struct MixtureView {
  std::span<const double> weights;
  std::span<const LatentImage> means;
  double s;
};

inline std::vector<double> responsibilities(const LatentImage& z, double alpha, const MixtureView& m) {
  const double sa = std::sqrt(alpha);
  const double var = alpha * m.s * m.s + 1.0 - alpha;
  const std::size_t K = m.means.size();
  std::vector<double> logit(K);
  for (std::size_t k = 0; k < K; ++k) {
    require_same_shape(z, m.means[k], "gmm");
    const auto& mu = m.means[k];
    double sq = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double d = z[i] - sa * mu[i];
      sq += d * d;
    }
    logit[k] = std::log(m.weights[k]) - sq / (2.0 * var);
  }
  const double mx = *std::max_element(logit.begin(), logit.end());
  double norm = 0.0;
  for (double& l : logit) {
    l = std::exp(l - mx);
    norm += l;
  }
  for (double& l : logit) l /= norm;
  return logit;
}

inline LatentImage posterior_mean(const LatentImage& z, double alpha, const MixtureView& m) {
  const auto r = responsibilities(z, alpha, m);
  const double sa = std::sqrt(alpha);
  const double s2 = m.s * m.s;
  const double var = alpha * s2 + 1.0 - alpha;
  LatentImage out(z.height(), z.width(), z.channels());
  for (std::size_t i = 0; i < z.size(); ++i) {
    double mu_bar = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) mu_bar += r[k] * m.means[k][i];
    out[i] = (sa * s2 * z[i] + (1.0 - alpha) * mu_bar) / var;
  }
  return out;
}

// J v with J = c I + (sqrt(a) (1 - a) / var^2) sum_k r_k mu_k (mu_k - mu_bar)^T.
// J is symmetric, so this is also the vector-Jacobian product.
inline LatentImage posterior_mean_jvp(const LatentImage& z, double alpha, const MixtureView& m,
                                      const LatentImage& v) {
  require_same_shape(z, v, "posterior_mean_jvp");
  const auto r = responsibilities(z, alpha, m);
  const double sa = std::sqrt(alpha);
  const double s2 = m.s * m.s;
  const double var = alpha * s2 + 1.0 - alpha;
  const double c = sa * s2 / var;
  const double g = sa * (1.0 - alpha) / (var * var);
  const std::size_t K = r.size();
  // <mu_k - mu_bar, v> = <mu_k, v> - sum_j r_j <mu_j, v>
  std::vector<double> dot(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < v.size(); ++i) dot[k] += m.means[k][i] * v[i];
  }
  double dot_bar = 0.0;
  for (std::size_t k = 0; k < K; ++k) dot_bar += r[k] * dot[k];
  std::vector<double> coef(K);
  for (std::size_t k = 0; k < K; ++k) coef[k] = g * r[k] * (dot[k] - dot_bar);
  LatentImage out(z.height(), z.width(), z.channels());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double acc = c * v[i];
    for (std::size_t k = 0; k < K; ++k) acc += coef[k] * m.means[k][i];
    out[i] = acc;
  }
  return out;
}

}  // namespace detail

inline std::vector<double> gmm_responsibilities(const LatentImage& z_t, double alpha, const GmmPrior& prior) {
  prior.validate();
  return detail::responsibilities(z_t, alpha, {prior.weights, prior.means, prior.component_std});
}

/// E[z_0 | z_t] at cumulative noise level alpha.
inline LatentImage gmm_posterior_mean(const LatentImage& z_t, double alpha, const GmmPrior& prior) {
  prior.validate();
  return detail::posterior_mean(z_t, alpha, {prior.weights, prior.means, prior.component_std});
}

inline LatentImage gmm_posterior_mean(const LatentImage& z_t, int t, const GmmPrior& prior,
                                      const DdimSchedule& sched) {
  sched.require_step(t, "gmm_posterior_mean");
  return gmm_posterior_mean(z_t, sched.alpha(t), prior);
}

inline LatentImage posterior_mean_jacobian_vecprod(const LatentImage& z_t, double alpha,
                                                   const GmmPrior& prior, const LatentImage& v) {
  prior.validate();
  return detail::posterior_mean_jvp(z_t, alpha, {prior.weights, prior.means, prior.component_std}, v);
}

inline LatentImage posterior_mean_jacobian_vecprod(const LatentImage& z_t, int t, const GmmPrior& prior,
                                                   const DdimSchedule& sched, const LatentImage& v) {
  sched.require_step(t, "posterior_mean_jacobian_vecprod");
  return posterior_mean_jacobian_vecprod(z_t, sched.alpha(t), prior, v);
}

/// Exact noise predictor for the palette mixture prior. Immutable after
/// construction and safe to share between channels.
class GmmDenoiser {
 public:
  static constexpr bool exact_jacobian = true;

  GmmDenoiser(std::vector<double> weights, double component_std)
      : weights_(std::move(weights)), s_(component_std) {
    if (weights_.empty()) throw std::invalid_argument("GmmDenoiser: K must be >= 1");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0)) throw std::invalid_argument("GmmDenoiser: weights must be positive");
      total += w;
    }
    for (double& w : weights_) w /= total;
    if (!(s_ > 0.0)) throw std::invalid_argument("GmmDenoiser: component std must be positive");
  }

  static GmmDenoiser uniform(int k, double component_std) {
    return GmmDenoiser(std::vector<double>(static_cast<std::size_t>(k), 1.0), component_std);
  }

  const std::vector<double>& weights() const { return weights_; }
  double component_std() const { return s_; }

  GmmPrior prior(const Condition& cond) const {
    check(cond);
    return {weights_, cond.means(), s_};
  }

  LatentImage predict_eps(const LatentImage& z_t, int t, const Condition& cond,
                          const DdimSchedule& sched) const {
    sched.require_step(t, "GmmDenoiser::predict_eps");
    return eps_from_z0_alpha(z_t, posterior_mean(z_t, sched.alpha(t), cond), sched.alpha(t));
  }

  LatentImage posterior_mean(const LatentImage& z_t, double alpha, const Condition& cond) const {
    check(cond);
    return detail::posterior_mean(z_t, alpha, view(cond));
  }

  /// d z0_hat / d z_t applied to v, at timestep t.
  LatentImage z0_jacobian_vecprod(const LatentImage& z_t, int t, const Condition& cond,
                                  const DdimSchedule& sched, const LatentImage& v) const {
    sched.require_step(t, "GmmDenoiser::z0_jacobian_vecprod");
    check(cond);
    return detail::posterior_mean_jvp(z_t, sched.alpha(t), view(cond), v);
  }

 private:
  void check(const Condition& cond) const {
    if (cond.means().size() != weights_.size()) {
      throw std::invalid_argument("GmmDenoiser: condition has " + std::to_string(cond.means().size()) +
                                  " palettes but the prior has K = " + std::to_string(weights_.size()));
    }
  }
  detail::MixtureView view(const Condition& cond) const { return {weights_, cond.means(), s_}; }

  std::vector<double> weights_;
  double s_;
};

template <typename D, typename C>
concept ExactJacobianDenoiser = NoisePredictor<D, C> &&
    requires(const D& d, const LatentImage& z, int t, const C& c, const DdimSchedule& s) {
      { d.z0_jacobian_vecprod(z, t, c, s, z) } -> std::same_as<LatentImage>;
    };

}  // namespace mosaic
