#pragma once

// Iterative radix-2 FFT with cached twiddles. Everything spectral in the
// library (STFT, ISTFT, and their autodiff adjoints) is built on this one
// transform, so sizes must be powers of two.

#include <complex>
#include <unordered_map>
#include <vector>

#include "syncguard/common.hpp"

namespace syncguard {

inline bool is_pow2(long n) { return n > 0 && (n & (n - 1)) == 0; }

namespace fft_detail {

template <typename T>
struct Plan {
  std::vector<int> bitrev;
  std::vector<std::complex<T>> tw_fwd;  // e^{-2pi i k / n}, k < n/2
  std::vector<std::complex<T>> tw_inv;  // e^{+2pi i k / n}
};

template <typename T>
const Plan<T>& plan_for(int n) {
  static std::unordered_map<int, Plan<T>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Plan<T> p;
  p.bitrev.resize(size_t(n));
  int log2n = 0;
  while ((1 << log2n) < n) ++log2n;
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < log2n; ++b)
      if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
    p.bitrev[size_t(i)] = r;
  }
  p.tw_fwd.resize(size_t(n / 2));
  p.tw_inv.resize(size_t(n / 2));
  for (int k = 0; k < n / 2; ++k) {
    double a = -2.0 * M_PI * k / n;
    p.tw_fwd[size_t(k)] = std::complex<T>(T(std::cos(a)), T(std::sin(a)));
    p.tw_inv[size_t(k)] = std::complex<T>(T(std::cos(a)), T(-std::sin(a)));
  }
  return cache.emplace(n, std::move(p)).first->second;
}

template <typename T>
void transform(std::complex<T>* a, int n, bool inverse) {
  const Plan<T>& p = plan_for<T>(n);
  for (int i = 0; i < n; ++i) {
    int j = p.bitrev[size_t(i)];
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& tw = inverse ? p.tw_inv : p.tw_fwd;
  for (int len = 2; len <= n; len <<= 1) {
    int half = len >> 1;
    int stride = n / len;
    for (int i = 0; i < n; i += len) {
      for (int k = 0; k < half; ++k) {
        std::complex<T> w = tw[size_t(k * stride)];
        std::complex<T> u = a[i + k];
        std::complex<T> v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

}  // namespace fft_detail

// In-place forward DFT, convention X_h = sum_j x_j e^{-2pi i h j / n}.
template <typename T>
void fft(std::vector<std::complex<T>>& a) {
  require(is_pow2(long(a.size())), ErrorKind::contract, "fft size not a power of two");
  fft_detail::transform(a.data(), int(a.size()), false);
}

// In-place inverse DFT without the 1/n factor: sum_h c_h e^{+2pi i h j / n}.
template <typename T>
void ifft_unscaled(std::vector<std::complex<T>>& a) {
  require(is_pow2(long(a.size())), ErrorKind::contract, "fft size not a power of two");
  fft_detail::transform(a.data(), int(a.size()), true);
}

// Real forward transform: fills re/im with the first n/2+1 bins.
template <typename T>
void rfft(const T* x, int n, T* re, T* im) {
  std::vector<std::complex<T>> buf(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) buf[size_t(j)] = std::complex<T>(x[j], T(0));
  fft_detail::transform(buf.data(), n, false);
  const int h = n / 2 + 1;
  for (int k = 0; k < h; ++k) {
    re[k] = buf[size_t(k)].real();
    im[k] = buf[size_t(k)].imag();
  }
}

// Real inverse of a half-spectrum (Hermitian completion + 1/n scaling).
template <typename T>
void irfft(const T* re, const T* im, int n, T* x) {
  const int h = n / 2 + 1;
  std::vector<std::complex<T>> buf(static_cast<size_t>(n));
  for (int k = 0; k < h; ++k) buf[size_t(k)] = std::complex<T>(re[k], im[k]);
  for (int k = h; k < n; ++k) {
    buf[size_t(k)] = std::conj(buf[size_t(n - k)]);
  }
  fft_detail::transform(buf.data(), n, true);
  const T inv = T(1) / T(n);
  for (int j = 0; j < n; ++j) x[j] = buf[size_t(j)].real() * inv;
}

}  // namespace syncguard
