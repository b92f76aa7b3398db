#pragma once

// Windowed-sinc resampling and FIR lowpass. One kernel family serves audio
// ingestion, the resample attack, and pitch scaling; the autodiff op in
// autodiff.hpp reuses the same tap generator so training and evaluation
// paths stay numerically aligned.

#include <cmath>
#include <vector>

#include "syncguard/common.hpp"

namespace syncguard {

namespace sinc_detail {

constexpr int kZeroCrossings = 32;  // half-width of the sinc, in zero crossings

inline double blackman(double v) {
  // v in [-1, 1]
  if (v < -1.0 || v > 1.0) return 0.0;
  return 0.42 + 0.5 * std::cos(M_PI * v) + 0.08 * std::cos(2.0 * M_PI * v);
}

inline double sinc(double t) {
  if (std::abs(t) < 1e-12) return 1.0;
  double a = M_PI * t;
  return std::sin(a) / a;
}

// Tap weights for one output sample at fractional source position `center`.
// cutoff scale c = min(1, ratio) keeps downsampling alias-free; at integer
// centers with c == 1 the kernel reduces to a unit impulse.
struct TapWindow {
  long start = 0;
  std::vector<double> w;
};

inline TapWindow taps_at(double center, double cutoff_scale, long in_len) {
  TapWindow tw;
  const double c = cutoff_scale;
  const double half = kZeroCrossings / c;
  long lo = long(std::ceil(center - half));
  long hi = long(std::floor(center + half));
  if (lo < 0) lo = 0;
  if (hi > in_len - 1) hi = in_len - 1;
  if (hi < lo) {
    tw.start = 0;
    return tw;
  }
  tw.start = lo;
  tw.w.resize(size_t(hi - lo + 1));
  for (long t = lo; t <= hi; ++t) {
    double d = double(t) - center;
    tw.w[size_t(t - lo)] = c * sinc(c * d) * blackman(d / half);
  }
  return tw;
}

}  // namespace sinc_detail

// Resample to an explicit output length; the implied ratio is
// out_len / in_len. Output sample j reads source position j * in/out.
inline std::vector<float> resample_to_length(const std::vector<float>& x,
                                             long out_len) {
  require(!x.empty(), ErrorKind::degenerate_input, "resample: empty input");
  require(out_len >= 1, ErrorKind::parameter, "resample: bad output length");
  const long in_len = long(x.size());
  const double step = double(in_len) / double(out_len);
  const double c = step > 1.0 ? 1.0 / step : 1.0;
  std::vector<float> y(size_t(out_len), 0.0f);
  for (long j = 0; j < out_len; ++j) {
    auto tw = sinc_detail::taps_at(double(j) * step, c, in_len);
    double acc = 0.0;
    for (size_t k = 0; k < tw.w.size(); ++k)
      acc += tw.w[k] * double(x[size_t(tw.start) + k]);
    y[size_t(j)] = float(acc);
  }
  return y;
}

// Resample by ratio (output length = round(ratio * M)).
inline std::vector<float> resample_by_ratio(const std::vector<float>& x,
                                            double ratio) {
  require(ratio >= 0.25 && ratio <= 4.0, ErrorKind::parameter,
          "resample ratio out of [0.25, 4]");
  long out_len = lround64(ratio * double(x.size()));
  if (out_len < 1) out_len = 1;
  return resample_to_length(x, out_len);
}

// Symmetric FIR lowpass kernel (Blackman-windowed sinc), DC gain 1.
inline std::vector<double> fir_lowpass_kernel(double cutoff_hz, int sample_rate,
                                              int half_taps = 64) {
  require(cutoff_hz > 0 && cutoff_hz < sample_rate / 2.0, ErrorKind::parameter,
          "lowpass cutoff must be below Nyquist");
  const double fc = cutoff_hz / double(sample_rate);  // cycles per sample
  std::vector<double> h(size_t(2 * half_taps + 1));
  double sum = 0.0;
  for (int k = -half_taps; k <= half_taps; ++k) {
    double v = 2.0 * fc * sinc_detail::sinc(2.0 * fc * k) *
               sinc_detail::blackman(double(k) / half_taps);
    h[size_t(k + half_taps)] = v;
    sum += v;
  }
  for (auto& v : h) v /= sum;
  return h;
}

// 'same' convolution with zero padding.
inline std::vector<float> fir_apply(const std::vector<float>& x,
                                    const std::vector<double>& h) {
  const long n = long(x.size());
  const long half = long(h.size()) / 2;
  std::vector<float> y(x.size(), 0.0f);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    long lo = std::max<long>(0, i - half);
    long hi = std::min<long>(n - 1, i + half);
    for (long t = lo; t <= hi; ++t) acc += h[size_t(half + i - t)] * double(x[size_t(t)]);
    y[size_t(i)] = float(acc);
  }
  return y;
}

}  // namespace syncguard
