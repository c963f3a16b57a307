#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "auscult/errors.hpp"

namespace auscult {

// A uniformly sampled real-valued signal.
struct Signal {
    std::vector<double> samples;
    double rate_hz = 0.0;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return rate_hz > 0 ? samples.size() / rate_hz : 0.0; }
};

inline void validate_signal(const Signal& s) {
    if (s.rate_hz <= 0.0)
        raise(Errc::invalid_signal, "sample rate must be positive");
    if (s.samples.empty())
        raise(Errc::invalid_signal, "signal has no samples");
    for (double v : s.samples)
        if (!std::isfinite(v))
            raise(Errc::invalid_signal, "signal contains non-finite samples");
}

inline double signal_mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

// Population variance.
inline double signal_variance(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    const double m = signal_mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

inline double signal_rms(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

inline double relative_l2_error(const std::vector<double>& approx,
                                const std::vector<double>& reference) {
    double num = 0.0, den = 0.0;
    const std::size_t n = std::min(approx.size(), reference.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double d = approx[i] - reference[i];
        num += d * d;
        den += reference[i] * reference[i];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
    return std::sqrt(num / den);
}

} // namespace auscult
