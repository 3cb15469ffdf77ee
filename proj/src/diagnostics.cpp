#include "kanlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <numeric>
#include <tuple>

#include <fftw3.h>

#include "kanlab/error.hpp"

namespace kanlab {

namespace {

// Accumulates log|R_ii| from a QR of `frame` and replaces it with the
// orthonormal factor, signs chosen so that R has a positive diagonal.
void reorthonormalize(Mat& frame, std::vector<double>& log_sums) {
  const Eigen::Index d = frame.cols();
  Eigen::HouseholderQR<Mat> qr(frame);
  Mat q = qr.householderQ() * Mat::Identity(frame.rows(), d);
  const Mat& packed = qr.matrixQR();
  for (Eigen::Index i = 0; i < d; ++i) {
    const double r = packed(i, i);
    if (!(std::abs(r) > 0.0) || !std::isfinite(r)) {
      throw NumericalDegeneracyError("tangent frame collapsed during QR");
    }
    if (r < 0.0) q.col(i) = -q.col(i);
    log_sums[i] += std::log(std::abs(r));
  }
  frame = std::move(q);
}

Mat starting_frame(const std::optional<Mat>& given, Eigen::Index d) {
  if (!given) return Mat::Identity(d, d);
  if (given->rows() != d || given->cols() != d) {
    throw ShapeError("initial tangent frame must be " + std::to_string(d) + "x" +
                     std::to_string(d));
  }
  return *given;
}

LyapunovSpectrum finish(std::vector<double> sums, double scale, ExponentUnits units,
                        std::size_t steps) {
  LyapunovSpectrum spec;
  for (auto& s : sums) s *= scale;
  std::sort(sums.begin(), sums.end(), std::greater<>());
  spec.exponents = std::move(sums);
  spec.units = units;
  spec.steps = steps;
  return spec;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* plan) const { fftw_destroy_plan(plan); }
};

}  // namespace

std::string to_string(ExponentUnits units) {
  return units == ExponentUnits::per_iterate ? "per-iterate" : "per-unit-time";
}

double LyapunovSpectrum::sum() const {
  return std::accumulate(exponents.begin(), exponents.end(), 0.0);
}

LyapunovSpectrum lyapunov_map(const JacobianFn& jacobian, std::span<const Vec> orbit,
                              const std::optional<Mat>& initial_frame) {
  if (orbit.empty()) throw InvalidInputError("Lyapunov estimate needs a nonempty orbit");
  const Eigen::Index d = orbit.front().size();
  Mat frame = starting_frame(initial_frame, d);
  std::vector<double> sums(d, 0.0);
  for (const auto& x : orbit) {
    frame = jacobian(x) * frame;
    reorthonormalize(frame, sums);
  }
  return finish(std::move(sums), 1.0 / static_cast<double>(orbit.size()),
                ExponentUnits::per_iterate, orbit.size());
}

LyapunovSpectrum lyapunov_flow(const StateFn& rhs, const JacobianFn& jacobian,
                               const Vec& x0, const FlowLyapunovOptions& options) {
  if (!(options.dt > 0.0) || !(options.total_time > 0.0) || options.qr_interval < 1) {
    throw InvalidInputError("flow Lyapunov options need positive time, step and QR interval");
  }
  const Eigen::Index d = x0.size();
  const double h = options.dt;
  Vec x = x0;
  if (options.transient > 0.0) {
    const long n = static_cast<long>(std::ceil(options.transient / h - 1e-9));
    for (long i = 0; i < n; ++i) x = rk4_step(rhs, x, h);
  }

  Mat frame = starting_frame(options.initial_frame, d);
  std::vector<double> sums(d, 0.0);
  const long steps = static_cast<long>(std::llround(options.total_time / h));
  for (long i = 1; i <= steps; ++i) {
    const Vec k1 = rhs(x);
    const Mat m1 = jacobian(x) * frame;
    const Vec x2 = x + 0.5 * h * k1;
    const Mat f2 = frame + 0.5 * h * m1;
    const Vec k2 = rhs(x2);
    const Mat m2 = jacobian(x2) * f2;
    const Vec x3 = x + 0.5 * h * k2;
    const Mat f3 = frame + 0.5 * h * m2;
    const Vec k3 = rhs(x3);
    const Mat m3 = jacobian(x3) * f3;
    const Vec x4 = x + h * k3;
    const Mat f4 = frame + h * m3;
    const Vec k4 = rhs(x4);
    const Mat m4 = jacobian(x4) * f4;
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    frame += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
    if (!x.allFinite()) throw IntegrationError("variational integration diverged");
    if (i % options.qr_interval == 0 || i == steps) reorthonormalize(frame, sums);
  }
  return finish(std::move(sums), 1.0 / (static_cast<double>(steps) * h),
                ExponentUnits::per_unit_time, static_cast<std::size_t>(steps));
}

LyapunovSpectrum per_unit_time(const LyapunovSpectrum& map_spectrum, double dt) {
  if (!(dt > 0.0)) throw InvalidInputError("sampling interval must be positive");
  LyapunovSpectrum out = map_spectrum;
  for (auto& e : out.exponents) e /= dt;
  out.units = ExponentUnits::per_unit_time;
  return out;
}

Histogram invariant_histogram(std::span<const Vec> states, std::span<const double> lo,
                              std::span<const double> hi, std::span<const int> bins,
                              double smoothing) {
  if (states.empty()) throw InvalidInputError("histogram needs at least one state");
  const std::size_t d = bins.size();
  if (lo.size() != d || hi.size() != d || d == 0) {
    throw ShapeError("histogram bounds and bins must have one entry per dimension");
  }
  std::size_t cells = 1;
  for (std::size_t k = 0; k < d; ++k) {
    if (bins[k] < 1 || !(lo[k] < hi[k])) {
      throw InvalidInputError("histogram needs positive bin counts and lo < hi");
    }
    cells *= static_cast<std::size_t>(bins[k]);
  }

  std::vector<double> counts(cells, 0.0);
  for (const auto& x : states) {
    if (static_cast<std::size_t>(x.size()) != d) throw ShapeError("state dimension mismatch");
    std::size_t index = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const double u = (x[k] - lo[k]) / (hi[k] - lo[k]) * bins[k];
      const long b = std::clamp(static_cast<long>(std::floor(u)), 0L,
                                static_cast<long>(bins[k]) - 1);
      index = index * bins[k] + static_cast<std::size_t>(b);
    }
    counts[index] += 1.0;
  }

  Histogram h;
  h.lo.assign(lo.begin(), lo.end());
  h.hi.assign(hi.begin(), hi.end());
  h.bins.assign(bins.begin(), bins.end());
  h.smoothing = smoothing;
  h.probs.resize(cells);
  const double n = static_cast<double>(states.size());
  const double norm = 1.0 + smoothing * static_cast<double>(cells);
  for (std::size_t i = 0; i < cells; ++i) h.probs[i] = (counts[i] / n + smoothing) / norm;
  return h;
}

double kl_divergence(const Histogram& p, const Histogram& q) {
  if (p.bins != q.bins || p.lo != q.lo || p.hi != q.hi || p.probs.size() != q.probs.size()) {
    throw ShapeError("KL divergence needs histograms on the same grid");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    if (p.probs[i] > 0.0) kl += p.probs[i] * std::log(p.probs[i] / q.probs[i]);
  }
  return std::max(kl, 0.0);
}

std::pair<std::vector<double>, std::vector<double>> padded_bounds(
    std::span<const Vec> states, double pad) {
  if (states.empty()) throw InvalidInputError("bounds need at least one state");
  Vec lo = states.front();
  Vec hi = states.front();
  for (const auto& x : states) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  std::vector<double> out_lo(lo.size());
  std::vector<double> out_hi(hi.size());
  for (Eigen::Index k = 0; k < lo.size(); ++k) {
    double margin = pad * (hi[k] - lo[k]);
    if (!(margin > 0.0)) margin = std::max(1e-9, 1e-9 * std::abs(lo[k]));
    out_lo[k] = lo[k] - margin;
    out_hi[k] = hi[k] + margin;
  }
  return {out_lo, out_hi};
}

std::vector<double> correlation_sums(std::span<const Vec> states,
                                     std::span<const double> radii) {
  const std::size_t n = states.size();
  if (n < 2) throw InvalidInputError("correlation sum needs at least two points");
  std::vector<std::size_t> order(radii.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
  std::vector<double> r2(radii.size());
  for (std::size_t k = 0; k < order.size(); ++k) r2[k] = radii[order[k]] * radii[order[k]];

  // hist[k] counts pairs whose squared distance falls in [r2[k-1], r2[k]).
  std::vector<unsigned long long> hist(r2.size() + 1, 0);
  const Eigen::Index d = states.front().size();
  Mat pts(d, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (states[i].size() != d) throw ShapeError("states differ in dimension");
    pts.col(static_cast<Eigen::Index>(i)) = states[i];
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double* a = pts.col(static_cast<Eigen::Index>(i)).data();
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* b = pts.col(static_cast<Eigen::Index>(j)).data();
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
      const auto k = static_cast<std::size_t>(
          std::upper_bound(r2.begin(), r2.end(), d2) - r2.begin());
      ++hist[k];
    }
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  std::vector<double> sums(radii.size());
  unsigned long long running = 0;
  for (std::size_t k = 0; k < r2.size(); ++k) {
    running += hist[k];
    sums[order[k]] = static_cast<double>(running) / pairs;
  }
  return sums;
}

double correlation_dimension(std::span<const Vec> states, std::span<const double> radii) {
  const std::vector<double> sums = correlation_sums(states, radii);
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (sums[k] > 0.0 && radii[k] > 0.0) {
      lx.push_back(std::log(radii[k]));
      ly.push_back(std::log(sums[k]));
    }
  }
  if (lx.size() < 2) {
    throw InvalidInputError("correlation dimension needs two radii with nonzero counts");
  }
  const double m = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  if (!(sxx > 0.0)) throw InvalidInputError("correlation radii must be distinct");
  return sxy / sxx;
}

std::vector<double> default_radii(std::span<const Vec> states, int count,
                                  std::size_t subsample) {
  if (states.size() < 2 || count < 2) {
    throw InvalidInputError("default radii need two points and two radii");
  }
  const std::size_t stride = std::max<std::size_t>(1, (states.size() + subsample - 1) / subsample);
  std::vector<Vec> pts;
  for (std::size_t i = 0; i < states.size(); i += stride) pts.push_back(states[i]);
  std::vector<double> dist;
  dist.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) dist.push_back((pts[i] - pts[j]).norm());
  }
  auto percentile = [&](double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(dist.size() - 1));
    std::nth_element(dist.begin(), dist.begin() + k, dist.end());
    return dist[k];
  };
  const double r_lo = percentile(0.01);
  const double r_hi = percentile(0.50);
  if (!(r_lo > 0.0) || !(r_hi > r_lo)) {
    throw InvalidInputError("degenerate pairwise distances; cannot choose radii");
  }
  std::vector<double> radii(count);
  const double step = std::log(r_hi / r_lo) / (count - 1);
  for (int k = 0; k < count; ++k) radii[k] = r_lo * std::exp(step * k);
  return radii;
}

PowerSpectrum power_spectrum(std::span<const double> series, double dt, int segments) {
  if (series.size() < 256) throw InvalidInputError("power spectrum needs at least 256 samples");
  if (segments < 1 || !(dt > 0.0)) throw InvalidInputError("invalid Welch settings");
  const std::size_t n = series.size();
  const auto len = static_cast<std::size_t>(2 * n / (segments + 1));
  const std::size_t hop = len / 2;

  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  std::vector<double> window(len);
  double window_power = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(len));
    window_power += window[i] * window[i];
  }

  const std::size_t n_freq = len / 2 + 1;
  std::vector<double> buffer(len);
  std::vector<std::complex<double>> spectrum(n_freq);
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(fftw_plan_dft_r2c_1d(
      static_cast<int>(len), buffer.data(), reinterpret_cast<fftw_complex*>(spectrum.data()),
      FFTW_ESTIMATE));

  PowerSpectrum out;
  out.powers.assign(n_freq, 0.0);
  out.frequencies.resize(n_freq);
  out.resolution = 1.0 / (static_cast<double>(len) * dt);
  for (std::size_t k = 0; k < n_freq; ++k) out.frequencies[k] = out.resolution * k;

  const double scale = dt / window_power;
  for (int s = 0; s < segments; ++s) {
    const std::size_t start = s * hop;
    for (std::size_t i = 0; i < len; ++i) buffer[i] = (series[start + i] - mean) * window[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < n_freq; ++k) {
      double p = std::norm(spectrum[k]) * scale;
      const bool edge = k == 0 || (len % 2 == 0 && k == n_freq - 1);
      if (!edge) p *= 2.0;
      out.powers[k] += p / segments;
    }
  }
  return out;
}

std::vector<SpectralPeak> spectral_peaks(const PowerSpectrum& spectrum, std::size_t count) {
  std::vector<SpectralPeak> peaks;
  const auto& p = spectrum.powers;
  for (std::size_t k = 1; k < p.size(); ++k) {
    const bool left = p[k] > p[k - 1];
    const bool right = k + 1 == p.size() || p[k] >= p[k + 1];
    if (left && right && p[k] > 0.0) peaks.push_back({k, spectrum.frequencies[k], p[k]});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const SpectralPeak& a, const SpectralPeak& b) { return a.power > b.power; });
  if (peaks.size() > count) peaks.resize(count);
  return peaks;
}

std::vector<Vec> strided_subsample(std::span<const Vec> states, std::size_t count) {
  if (count == 0 || states.size() <= count) return {states.begin(), states.end()};
  std::vector<Vec> out;
  out.reserve(count);
  const double stride = static_cast<double>(states.size()) / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(states[static_cast<std::size_t>(stride * static_cast<double>(i))]);
  }
  return out;
}

DiagnosticsReport compare_orbits(std::span<const Vec> reference, std::span<const Vec> model,
                                 double dt, const CompareOptions& options) {
  if (reference.empty() || model.empty()) {
    throw InvalidInputError("comparison needs two nonempty orbits");
  }
  const auto d = static_cast<std::size_t>(reference.front().size());
  if (static_cast<std::size_t>(model.front().size()) != d) {
    throw ShapeError("reference and model orbits differ in dimension");
  }
  DiagnosticsReport r;
  r.reference_points = reference.size();
  r.model_points = model.size();

  if (options.bins.size() == 1) {
    r.histogram_bins.assign(d, options.bins.front());
  } else if (options.bins.size() == d) {
    r.histogram_bins = options.bins;
  } else {
    throw ShapeError("bins must have one entry or one per dimension");
  }
  if (options.lo.empty() && options.hi.empty()) {
    std::tie(r.histogram_lo, r.histogram_hi) = padded_bounds(reference, options.pad);
  } else {
    if (options.lo.size() != d || options.hi.size() != d) {
      throw ShapeError("histogram bounds must have one entry per dimension");
    }
    r.histogram_lo = options.lo;
    r.histogram_hi = options.hi;
  }
  r.smoothing = options.smoothing;
  const Histogram p = invariant_histogram(reference, r.histogram_lo, r.histogram_hi,
                                          r.histogram_bins, options.smoothing);
  const Histogram q = invariant_histogram(model, r.histogram_lo, r.histogram_hi,
                                          r.histogram_bins, options.smoothing);
  r.kl = kl_divergence(p, q);

  const auto ref_sub = strided_subsample(reference, options.corr_points);
  const auto model_sub = strided_subsample(model, options.corr_points);
  r.radii = default_radii(ref_sub, options.radii_count);
  r.corr_dim_true = correlation_dimension(ref_sub, r.radii);
  r.corr_dim_model = correlation_dimension(model_sub, r.radii);

  if (options.spectrum_component < 0 || static_cast<std::size_t>(options.spectrum_component) >= d) {
    throw InvalidInputError("spectrum component out of range");
  }
  r.spectrum_component = options.spectrum_component;
  const std::size_t len = std::min(reference.size(), model.size());
  auto series = [&](std::span<const Vec> orbit) {
    std::vector<double> out(len);
    for (std::size_t i = 0; i < len; ++i) out[i] = orbit[i][options.spectrum_component];
    return out;
  };
  const PowerSpectrum ps_true = power_spectrum(series(reference), dt, options.spectrum_segments);
  const PowerSpectrum ps_model = power_spectrum(series(model), dt, options.spectrum_segments);
  r.spectral_resolution = ps_true.resolution;
  r.true_peaks = spectral_peaks(ps_true, options.peak_count);
  r.model_peaks = spectral_peaks(ps_model, options.peak_count);
  return r;
}

}  // namespace kanlab
