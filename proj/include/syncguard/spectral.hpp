#pragma once

// Differentiable STFT magnitude analysis and phase-reusing ISTFT synthesis.
// Phase is treated as a constant of the graph: it is computed in the forward
// pass and reused verbatim in synthesis, but gradients flow only through
// magnitudes (and through the frame samples on the analysis side). The
// adjoints are expressed with the same radix-2 FFT as the forward transform:
//
//   analysis adjoint:   g_frame = Re{ ifft_unscaled(zero-padded g_re + i g_im) }
//   synthesis adjoint:  g_re_h = (w_h / N) fft(g_frame).re,  w_h = 2 except at
//                       DC and Nyquist, matching the Hermitian completion.

#include <complex>
#include <memory>
#include <vector>

#include "syncguard/autodiff.hpp"
#include "syncguard/stft.hpp"

namespace syncguard::ad {

template <typename T>
struct SpecVar {
  VarPtr<T> mag;  // [T, H]
  std::shared_ptr<std::vector<double>> phase;  // [T*H], row-major, (-pi, pi]
  long frames = 0;
  int bins = 0;
};

// Analysis of a rank-1 sample Var. Gradients flow to the samples through the
// windowed frames; the returned phase is detached.
template <typename T>
SpecVar<T> var_stft(const VarPtr<T>& x, const StftConfig& cfg) {
  cfg.validate();
  require(x->val.rank() == 1, ErrorKind::contract, "var_stft expects rank-1 samples");
  const long m = x->val.numel();
  require(m >= cfg.window_length, ErrorKind::input_too_short,
          "clip shorter than one analysis window");
  const long frames = cfg.frames_for(m);
  const int n = cfg.fft_size;
  const int h = cfg.bins();

  auto window = std::make_shared<std::vector<double>>(stft_detail::analysis_window(cfg));
  auto idx = std::make_shared<std::vector<long>>(stft_detail::frame_index_map(m, cfg, frames));

  Tensor<T> mag({frames, long(h)});
  auto phase = std::make_shared<std::vector<double>>(size_t(frames) * h);
  {
    std::vector<T> buf(static_cast<size_t>(n)), re(static_cast<size_t>(h)),
        im(static_cast<size_t>(h));
    for (long t = 0; t < frames; ++t) {
      for (int j = 0; j < n; ++j)
        buf[size_t(j)] = x->val[(*idx)[size_t(t) * n + j]] * T((*window)[size_t(j)]);
      rfft(buf.data(), n, re.data(), im.data());
      for (int k = 0; k < h; ++k) {
        mag.at(t, k) = std::hypot(re[size_t(k)], im[size_t(k)]);
        double p = std::atan2(double(im[size_t(k)]), double(re[size_t(k)]));
        if (p <= -M_PI) p += 2.0 * M_PI;
        (*phase)[size_t(t) * h + k] = p;
      }
    }
  }

  auto node = x->tape->make(std::move(mag), x->needs_grad);
  if (node->needs_grad) {
    Node<T>*nx = x.get(), *no = node.get();
    node->backward = [nx, no, window, idx, phase, frames, n, h] {
      Tensor<T>& gx = nx->grad_buf();
      std::vector<std::complex<T>> c(static_cast<size_t>(n));
      for (long t = 0; t < frames; ++t) {
        std::fill(c.begin(), c.end(), std::complex<T>(0, 0));
        for (int k = 0; k < h; ++k) {
          const T g = no->grad.at(t, k);
          const double p = (*phase)[size_t(t) * h + k];
          c[size_t(k)] = std::complex<T>(T(double(g) * std::cos(p)), T(double(g) * std::sin(p)));
        }
        ifft_unscaled(c);
        for (int j = 0; j < n; ++j)
          gx[(*idx)[size_t(t) * n + j]] +=
              c[size_t(j)].real() * T((*window)[size_t(j)]);
      }
    };
  }

  SpecVar<T> out;
  out.mag = node;
  out.phase = phase;
  out.frames = frames;
  out.bins = h;
  return out;
}

// Synthesis from a magnitude Var and a detached phase.
template <typename T>
VarPtr<T> var_istft(const VarPtr<T>& mag, std::shared_ptr<std::vector<double>> phase,
                    const StftConfig& cfg, long length) {
  cfg.validate();
  require(mag->val.rank() == 2 && mag->val.dim(1) == cfg.bins(), ErrorKind::contract,
          "var_istft expects [T, bins] magnitude");
  const long frames = mag->val.dim(0);
  const int n = cfg.fft_size;
  const int h = cfg.bins();
  require(long(phase->size()) == frames * h, ErrorKind::contract,
          "phase shape inconsistent with magnitude");
  require(length >= 1 && length <= frames * cfg.hop_length, ErrorKind::contract,
          "length out of range");

  auto window = std::make_shared<std::vector<double>>(stft_detail::analysis_window(cfg));
  auto norm = std::make_shared<std::vector<double>>(stft_detail::ola_norm(frames, cfg, *window));
  const long pad = n / 2;

  Tensor<T> out({length});
  {
    const long padded = long(norm->size());
    std::vector<double> ola(size_t(padded), 0.0);
    std::vector<T> re(static_cast<size_t>(h)), im(static_cast<size_t>(h)),
        buf(static_cast<size_t>(n));
    for (long t = 0; t < frames; ++t) {
      for (int k = 0; k < h; ++k) {
        const double p = (*phase)[size_t(t) * h + k];
        re[size_t(k)] = T(double(mag->val.at(t, k)) * std::cos(p));
        im[size_t(k)] = T(double(mag->val.at(t, k)) * std::sin(p));
      }
      irfft(re.data(), im.data(), n, buf.data());
      const long base = t * cfg.hop_length;
      for (int j = 0; j < n; ++j)
        ola[size_t(base + j)] += double(buf[size_t(j)]) * (*window)[size_t(j)];
    }
    for (long i = 0; i < length; ++i) {
      double d = std::max((*norm)[size_t(pad + i)], stft_detail::kNormFloor);
      out[i] = T(ola[size_t(pad + i)] / d);
    }
  }

  auto node = mag->tape->make(std::move(out), mag->needs_grad);
  if (node->needs_grad) {
    Node<T>*nm = mag.get(), *no = node.get();
    node->backward = [nm, no, window, norm, phase, frames, n, h, pad, length,
                      hop = long(cfg.hop_length)] {
      Tensor<T>& gm = nm->grad_buf();
      const long padded = long(norm->size());
      std::vector<double> gola(size_t(padded), 0.0);
      for (long i = 0; i < length; ++i) {
        double d = std::max((*norm)[size_t(pad + i)], stft_detail::kNormFloor);
        gola[size_t(pad + i)] = double(no->grad[i]) / d;
      }
      std::vector<std::complex<T>> c(static_cast<size_t>(n));
      for (long t = 0; t < frames; ++t) {
        const long base = t * hop;
        for (int j = 0; j < n; ++j)
          c[size_t(j)] = std::complex<T>(
              T(gola[size_t(base + j)] * (*window)[size_t(j)]), T(0));
        fft(c);
        for (int k = 0; k < h; ++k) {
          const double wk = (k == 0 || k == n / 2) ? 1.0 : 2.0;
          const double g_re = wk / n * double(c[size_t(k)].real());
          const double g_im = wk / n * double(c[size_t(k)].imag());
          const double p = (*phase)[size_t(t) * h + k];
          gm.at(t, k) += T(g_re * std::cos(p) + g_im * std::sin(p));
        }
      }
    };
  }
  return node;
}

// Magnitude tensor of a plain spectrogram, for feeding constants into a tape.
template <typename T>
Tensor<T> mag_tensor(const SpectroPair& spec) {
  Tensor<T> t({spec.frames, long(spec.bins)});
  for (long i = 0; i < t.numel(); ++i) t[i] = T(spec.magnitude[size_t(i)]);
  return t;
}

}  // namespace syncguard::ad
