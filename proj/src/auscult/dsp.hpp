#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "auscult/signal.hpp"

namespace auscult {

// Linear-phase FIR low-pass: symmetric taps, unit DC gain.
struct FirFilter {
    std::vector<double> taps;
    double cutoff_hz = 0.0;
    double design_rate_hz = 0.0;
};

// One-sided Welch power spectral density. sum(density) * df ~ signal variance.
struct PowerSpectrum {
    std::vector<double> freqs_hz;
    std::vector<double> density;

    double total_power() const;
};

// Hamming-windowed sinc design. num_taps must be odd and >= 11.
FirFilter design_lowpass_fir(double cutoff_hz, int num_taps, double rate_hz);

// Difference of two low-pass designs; symmetric taps, ~unit passband gain.
std::vector<double> design_bandpass_taps(double lo_hz, double hi_hz, int num_taps,
                                         double rate_hz);

// Odd tap count giving a transition band of roughly cutoff_hz width.
int taps_for_cutoff(double cutoff_hz, double rate_hz, int min_taps = 11);

// Same-length convolution with group-delay compensation (zero-padded edges).
// Switches to an FFT overlap path automatically when the direct cost is high.
std::vector<double> convolve_same(const std::vector<double>& x,
                                  const std::vector<double>& taps);

Signal filter_signal(const Signal& s, const FirFilter& f);

// Rational-ratio resampling with a built-in anti-alias low-pass at
// 0.45 * min(source, target). target == source returns the input unchanged.
Signal resample(const Signal& s, double target_rate_hz);

// Hann-windowed averaged periodogram, per-segment mean removal.
PowerSpectrum welch_psd(const Signal& s, std::size_t segment_len, double overlap);

// Trapezoidal integral of the density over [lo, hi]; edge bins apportioned.
double band_power(const PowerSpectrum& p, double lo_hz, double hi_hz);

double dominant_frequency(const PowerSpectrum& p, double lo_hz, double hi_hz);
double spectral_centroid(const PowerSpectrum& p);

// |analytic signal| smoothed by a low-pass FIR at smooth_cutoff_hz.
Signal amplitude_envelope(const Signal& s, double smooth_cutoff_hz);

// Frame-wise mel cepstra: Hann window, magnitude spectrum, triangular HTK mel
// bank, log (floored), orthonormal DCT-II. Rows are frames.
std::vector<std::vector<double>> mfcc(const Signal& s, int n_mels, int n_coeffs,
                                      std::size_t frame_len, std::size_t hop);

// Debug export: two-column (freq, density) delimited text.
void write_spectrum(std::ostream& out, const PowerSpectrum& p);

} // namespace auscult
