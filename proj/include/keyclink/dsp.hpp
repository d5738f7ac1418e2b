#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace keyclink {

std::size_t next_pow2(std::size_t n);

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false);

// Forward FFT of a real signal zero-padded to next_pow2(n).
std::vector<std::complex<double>> fft_real(const std::vector<double>& x);

// Magnitude of bins 1..N/2 of the zero-padded spectrum (DC dropped).
std::vector<double> fft_magnitude(const std::vector<double>& x);

// Orthonormality is not needed downstream; plain DCT-II:
// y[k] = sum_n x[n] * cos(pi/N * (n + 0.5) * k)
std::vector<double> dct2(const std::vector<double>& x, std::size_t n_out);

std::vector<double> hann_window(std::size_t n);

} // namespace keyclink
