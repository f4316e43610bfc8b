// Repeat-to-repeat variance of fused canvases for nested view sets.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/canvas.hpp"

namespace mosaic {

struct VarianceSetResult {
  double trace = 0.0;  // mean over region cells of the summed per-channel variance
  double se = 0.0;     // jackknife standard error over repeats
};

struct VarianceReport {
  std::vector<VarianceSetResult> sets;
  // decrease[s] = trace[s - 1] - trace[s] for s >= 1, with the jackknife error
  // of the paired difference (repeat r of every set shares its seed)
  std::vector<double> decrease;
  std::vector<double> decrease_se;
  std::size_t region_cells = 0;
  int repeats = 0;
  bool degenerate = false;     // every trace is zero
  bool few_repeats = false;    // fewer than 50 repeats
};

namespace detail {

// Sample variance traces of one set, in full and with each repeat left out.
struct TraceSamples {
  double full = 0.0;
  std::vector<double> leave_one_out;
};

inline TraceSamples trace_samples(const std::vector<std::vector<double>>& x, std::size_t cells) {
  const std::size_t r = x.size();
  const std::size_t m = x.front().size();
  // sums are taken about the first repeat, so constant elements give exactly 0
  const std::vector<double>& x0 = x.front();
  std::vector<double> s1(m, 0.0), s2(m, 0.0);
  for (const auto& row : x) {
    for (std::size_t e = 0; e < m; ++e) {
      const double d = row[e] - x0[e];
      s1[e] += d;
      s2[e] += d * d;
    }
  }
  const double rn = static_cast<double>(r);
  TraceSamples out;
  double full = 0.0;
  for (std::size_t e = 0; e < m; ++e) full += std::max(0.0, s2[e] - s1[e] * s1[e] / rn) / (rn - 1.0);
  out.full = full / static_cast<double>(cells);
  if (r < 3) return out;
  out.leave_one_out.resize(r);
  for (std::size_t k = 0; k < r; ++k) {
    double acc = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      const double d = x[k][e] - x0[e];
      const double a = s1[e] - d;
      const double b = s2[e] - d * d;
      acc += std::max(0.0, b - a * a / (rn - 1.0)) / (rn - 2.0);
    }
    out.leave_one_out[k] = acc / static_cast<double>(cells);
  }
  return out;
}

inline double jackknife_se(const std::vector<double>& loo) {
  const std::size_t r = loo.size();
  if (r < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double v : loo) mean += v;
  mean /= static_cast<double>(r);
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return std::sqrt(ss * (static_cast<double>(r) - 1.0) / static_cast<double>(r));
}

}  // namespace detail

/// run(set, repeat) returns the fused canvas of view set `set` sampled with
/// the repeat's seed. Sets must be nested, so the region (cells covered by the
/// smallest set) is covered by every canvas.
template <typename Run>
VarianceReport variance_experiment(std::size_t num_sets, int repeats, Run&& run) {
  if (repeats < 2) throw std::invalid_argument("variance_experiment: repeats must be >= 2");
  if (num_sets == 0) throw std::invalid_argument("variance_experiment: no view sets");
  VarianceReport rep;
  rep.repeats = repeats;
  rep.few_repeats = repeats < 50;

  std::vector<std::size_t> region;
  int nc = 0;
  // values[set][repeat][region cell * nc + channel]
  std::vector<std::vector<std::vector<double>>> values(num_sets);
  for (std::size_t s = 0; s < num_sets; ++s) {
    for (int r = 0; r < repeats; ++r) {
      const SceneCanvas canvas = run(s, r);
      if (region.empty()) {
        for (std::size_t k = 0; k < canvas.cells(); ++k) {
          if (canvas.covered(k)) region.push_back(k);
        }
        if (region.empty()) throw std::runtime_error("variance_experiment: smallest view set covers no surface");
        nc = canvas.channels;
      }
      std::vector<double> row;
      row.reserve(region.size() * static_cast<std::size_t>(nc));
      for (std::size_t k : region) {
        if (k >= canvas.cells() || !canvas.covered(k)) {
          throw std::runtime_error("variance_experiment: set " + std::to_string(s) +
                                   " does not cover the smallest set's region (sets must be nested)");
        }
        for (int c = 0; c < nc; ++c) row.push_back(canvas.value(k, c));
      }
      values[s].push_back(std::move(row));
    }
  }
  rep.region_cells = region.size();

  std::vector<detail::TraceSamples> samples;
  for (const auto& x : values) {
    samples.push_back(detail::trace_samples(x, region.size()));
    rep.sets.push_back({samples.back().full, detail::jackknife_se(samples.back().leave_one_out)});
  }
  for (std::size_t s = 1; s < num_sets; ++s) {
    rep.decrease.push_back(samples[s - 1].full - samples[s].full);
    std::vector<double> diff;
    for (std::size_t k = 0; k < samples[s].leave_one_out.size(); ++k) {
      diff.push_back(samples[s - 1].leave_one_out[k] - samples[s].leave_one_out[k]);
    }
    rep.decrease_se.push_back(detail::jackknife_se(diff));
  }
  rep.degenerate = true;
  for (const auto& s : rep.sets) rep.degenerate = rep.degenerate && s.trace == 0.0;
  return rep;
}

}  // namespace mosaic
