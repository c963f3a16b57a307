#pragma once

// Shared generators and independent oracles for the test suites. Everything
// here must stay independent of the implementation paths it checks.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "auscult/rng.hpp"
#include "auscult/signal.hpp"

namespace testsupport {

inline auscult::Signal make_tone(double freq_hz, double rate_hz, double duration_s,
                                 double amplitude = 1.0, double phase = 0.0) {
    auscult::Signal s;
    s.rate_hz = rate_hz;
    const std::size_t n = static_cast<std::size_t>(rate_hz * duration_s);
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.samples[i] =
            amplitude * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate_hz + phase);
    return s;
}

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed,
                                       double stddev = 1.0) {
    auscult::Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal(0.0, stddev);
    return x;
}

// |H(f)| of an FIR by direct DFT of the taps — the frequency-response oracle.
inline double fir_response(const std::vector<double>& taps, double freq_hz, double rate_hz) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t n = 0; n < taps.size(); ++n) {
        const double w = -2.0 * M_PI * freq_hz * static_cast<double>(n) / rate_hz;
        acc += taps[n] * std::complex<double>(std::cos(w), std::sin(w));
    }
    return std::abs(acc);
}

// Amplitude of a known-frequency sinusoid by quadrature correlation over the
// interior of the signal (edges excluded).
inline double fit_sine_amplitude(const auscult::Signal& s, double freq_hz,
                                 double edge_skip_s = 0.25) {
    const std::size_t skip = static_cast<std::size_t>(edge_skip_s * s.rate_hz);
    if (s.samples.size() <= 2 * skip + 16) return 0.0;
    std::complex<double> acc(0.0, 0.0);
    std::size_t count = 0;
    for (std::size_t i = skip; i + skip < s.samples.size(); ++i) {
        const double w = 2.0 * M_PI * freq_hz * static_cast<double>(i) / s.rate_hz;
        acc += s.samples[i] * std::complex<double>(std::cos(w), -std::sin(w));
        ++count;
    }
    return 2.0 * std::abs(acc) / static_cast<double>(count);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

// Brute-force pairwise AUC: P(score+ > score-) + 0.5 P(equal).
inline double brute_force_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return pairs ? wins / static_cast<double>(pairs) : 0.0;
}

} // namespace testsupport
