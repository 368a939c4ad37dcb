// Copyright 2026 The ARMKit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "armkit/errors.hpp"
#include "armkit/experiments.hpp"

namespace armkit {

double alias_frequency(double signal_hz, double sample_rate_hz) {
  const double r = std::fmod(signal_hz, sample_rate_hz);
  return r > sample_rate_hz / 2.0 ? sample_rate_hz - r : r;
}

namespace {

// Single-sided amplitude spectrum, bins 0..N/2.
std::vector<double> amplitude_spectrum(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> amp(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n first so the angle stays small and exact.
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      re += x[t] * std::cos(ang);
      im += x[t] * std::sin(ang);
    }
    const double scale = (k == 0 || 2 * k == n) ? 1.0 : 2.0;
    amp[k] = scale * std::hypot(re, im) / static_cast<double>(n);
  }
  return amp;
}

std::vector<double> circular_gaussian(const std::vector<double>& x, double sigma_samples) {
  const long n = static_cast<long>(x.size());
  const long radius = std::min(n / 2, static_cast<long>(std::ceil(4.0 * sigma_samples)));
  std::vector<double> w;
  double total = 0.0;
  for (long d = -radius; d <= radius; ++d) {
    w.push_back(std::exp(-0.5 * static_cast<double>(d * d) / (sigma_samples * sigma_samples)));
    total += w.back();
  }
  for (double& v : w) v /= total;
  std::vector<double> y(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long d = -radius; d <= radius; ++d) acc += w[static_cast<std::size_t>(d + radius)] * x[static_cast<std::size_t>(((i + d) % n + n) % n)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

}  // namespace

AliasReport alias_demo_1d(double signal_hz, double sample_rate_hz, std::optional<double> prefilter_sigma_s,
                          double duration_s) {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw ConfigError("alias_demo: sample rate must be positive, got " + std::to_string(sample_rate_hz));
  }
  if (!(signal_hz > 0.0) || !std::isfinite(signal_hz)) {
    throw ConfigError("alias_demo: signal frequency must be positive, got " + std::to_string(signal_hz));
  }
  if (!(duration_s > 0.0)) throw ConfigError("alias_demo: duration must be positive");
  if (prefilter_sigma_s && !(*prefilter_sigma_s > 0.0)) throw ConfigError("alias_demo: prefilter sigma must be positive");

  const std::size_t n = static_cast<std::size_t>(std::llround(sample_rate_hz * duration_s));
  if (n < 4) throw ConfigError("alias_demo: fewer than 4 samples; raise the rate or the duration");
  const std::size_t m =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(8.0 * std::max(signal_hz, sample_rate_hz) / sample_rate_hz)));
  const double fine_rate = sample_rate_hz * static_cast<double>(m);

  std::vector<double> fine(n * m);
  for (std::size_t i = 0; i < fine.size(); ++i) {
    fine[i] = std::sin(2.0 * std::numbers::pi * signal_hz * static_cast<double>(i) / fine_rate);
  }
  if (prefilter_sigma_s) fine = circular_gaussian(fine, *prefilter_sigma_s * fine_rate);
  std::vector<double> sampled(n);
  for (std::size_t i = 0; i < n; ++i) sampled[i] = fine[i * m];

  const std::vector<double> amp = amplitude_spectrum(sampled);
  AliasReport r;
  r.signal_hz = signal_hz;
  r.sample_rate_hz = sample_rate_hz;
  r.nyquist_hz = sample_rate_hz / 2.0;
  r.expected_hz = alias_frequency(signal_hz, sample_rate_hz);
  r.aliased = signal_hz > r.nyquist_hz;
  const double bin_hz = sample_rate_hz / static_cast<double>(n);
  std::size_t best = 0;
  for (std::size_t k = 0; k < amp.size(); ++k) {
    r.spectrum.push_back({static_cast<double>(k) * bin_hz, amp[k]});
    if (amp[k] > amp[best]) best = k;
  }
  r.dominant_hz = static_cast<double>(best) * bin_hz;

  const long centre = std::lround(r.expected_hz / bin_hz);
  double energy = 0.0;
  for (long k = centre - 1; k <= centre + 1; ++k) {
    if (k < 0 || k >= static_cast<long>(amp.size())) continue;
    r.peak_magnitude = std::max(r.peak_magnitude, amp[static_cast<std::size_t>(k)]);
    energy += amp[static_cast<std::size_t>(k)] * amp[static_cast<std::size_t>(k)] / 2.0;
  }
  // A unit sine carries energy 1/2.
  r.aliased_energy_ratio = r.aliased ? energy / 0.5 : 0.0;
  return r;
}

double attenuation_db(const AliasReport& unfiltered, const AliasReport& filtered) {
  return 20.0 * std::log10(unfiltered.peak_magnitude / filtered.peak_magnitude);
}

std::string spectrum_csv(const AliasReport& report) {
  std::string out = "bin_hz,magnitude\n";
  char buf[64];
  for (const SpectrumBin& b : report.spectrum) {
    std::snprintf(buf, sizeof buf, "%.6g,%.9g\n", b.hz, b.magnitude);
    out += buf;
  }
  return out;
}

}  // namespace armkit
