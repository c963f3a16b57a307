#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace auscult {

using cplx = std::complex<double>;

std::size_t next_pow2(std::size_t n);

// In-place iterative radix-2 transform; size must be a power of two.
void fft_pow2(std::vector<cplx>& a, bool inverse);

// Transform of arbitrary length (Bluestein fallback for non powers of two).
std::vector<cplx> fft(std::vector<cplx> a, bool inverse = false);

// Forward transform of a real series, full complex output of the same length.
std::vector<cplx> fft_real(const std::vector<double>& x, std::size_t n = 0);

// Analytic signal x + i*H{x}: the magnitude is the instantaneous amplitude.
std::vector<cplx> analytic_signal(const std::vector<double>& x);

} // namespace auscult
