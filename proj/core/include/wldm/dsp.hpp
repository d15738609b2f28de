#pragma once

#include <vector>

#include "wldm/tensor.hpp"

namespace wldm::dsp {

/// In-place iterative radix-2 complex FFT, double precision, cached twiddle
/// tables. sign = -1 for the forward transform, +1 for the inverse kernel.
/// Never normalizes; callers apply 1/n when they want a true inverse.
void fft_inplace(std::vector<double>& re, std::vector<double>& im, int sign);

/// Periodic Hann window of length n: 0.5 * (1 - cos(2*pi*k/n)).
std::vector<float> hann_periodic(int n);

/// Short-time Fourier transform as one differentiable primitive.
/// x is (B, N); output is (B, 2, bins, frames) holding the real part at
/// channel 0 and the imaginary part at channel 1, bins = n_fft/2 + 1,
/// frames = 1 + floor(N / hop). Frames are centered: the signal is reflect
/// padded by n_fft/2 on both sides and windowed with a periodic Hann.
/// win_length must equal n_fft.
Tensor stft(const Tensor& x, int n_fft, int win_length, int hop);

/// Magnitude spectrogram (B, bins, frames) = sqrt(re^2 + im^2 + 1e-12); the
/// small additive term keeps the gradient finite at empty bins.
Tensor stft_magnitude(const Tensor& x, int n_fft, int win_length, int hop);

/// Mel scale: mel = 2595 * log10(1 + f/700) and its inverse.
double hz_to_mel(double f);
double mel_to_hz(double m);

/// Triangular mel filterbank on that scale, unnormalized peaks, spanning
/// [fmin, fmax]. Returns a row-major (n_mel, bins) matrix and fails if any
/// filter would be identically zero at this FFT resolution.
std::vector<float> mel_filterbank(int n_mel, int n_fft, float sample_rate,
                                  float fmin, float fmax);

/// Log mel spectrogram: ln(max(filterbank @ magnitude, floor_val)).
/// magnitude is (B, bins, frames); result is (B, n_mel, frames).
Tensor log_mel(const Tensor& magnitude, const std::vector<float>& filterbank,
               int n_mel, float floor_val);

/// Plain numeric magnitude spectrogram for evaluation paths that never need
/// gradients. Same framing conventions as stft(). Output is row-major
/// (bins, frames) in double.
void stft_magnitude_data(const std::vector<float>& x, int n_fft, int hop,
                         std::vector<double>& mag, int& bins, int& frames);

}  // namespace wldm::dsp
