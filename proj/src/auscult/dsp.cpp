#include "auscult/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "auscult/fft.hpp"

namespace auscult {

namespace {

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = M_PI * x;
    return std::sin(px) / px;
}

std::vector<double> windowed_sinc(double cutoff_hz, int num_taps, double rate_hz) {
    std::vector<double> taps(static_cast<std::size_t>(num_taps));
    const int mid = (num_taps - 1) / 2;
    const double fc = cutoff_hz / rate_hz;
    double sum = 0.0;
    for (int n = 0; n < num_taps; ++n) {
        const double hamming =
            0.54 - 0.46 * std::cos(2.0 * M_PI * n / static_cast<double>(num_taps - 1));
        taps[static_cast<std::size_t>(n)] = 2.0 * fc * sinc(2.0 * fc * (n - mid)) * hamming;
        sum += taps[static_cast<std::size_t>(n)];
    }
    for (auto& t : taps) t /= sum;
    // enforce exact symmetry against rounding drift
    for (int n = 0; n < mid; ++n) {
        const double avg = 0.5 * (taps[static_cast<std::size_t>(n)] +
                                  taps[static_cast<std::size_t>(num_taps - 1 - n)]);
        taps[static_cast<std::size_t>(n)] = avg;
        taps[static_cast<std::size_t>(num_taps - 1 - n)] = avg;
    }
    return taps;
}

std::vector<double> hann_periodic(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                     static_cast<double>(n)));
    return w;
}

} // namespace

double PowerSpectrum::total_power() const {
    if (freqs_hz.size() < 2) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < freqs_hz.size(); ++i)
        acc += 0.5 * (density[i] + density[i + 1]) * (freqs_hz[i + 1] - freqs_hz[i]);
    return acc;
}

FirFilter design_lowpass_fir(double cutoff_hz, int num_taps, double rate_hz) {
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0))
        raise(Errc::invalid_cutoff, "cutoff must be in (0, rate/2)");
    if (num_taps % 2 == 0)
        raise(Errc::even_tap_count, "tap count must be odd");
    if (num_taps < 11)
        raise(Errc::even_tap_count, "tap count must be >= 11");
    FirFilter f;
    f.taps = windowed_sinc(cutoff_hz, num_taps, rate_hz);
    f.cutoff_hz = cutoff_hz;
    f.design_rate_hz = rate_hz;
    return f;
}

std::vector<double> design_bandpass_taps(double lo_hz, double hi_hz, int num_taps,
                                         double rate_hz) {
    if (!(lo_hz >= 0.0) || !(lo_hz < hi_hz) || !(hi_hz < rate_hz / 2.0))
        raise(Errc::invalid_cutoff, "band must satisfy 0 <= lo < hi < rate/2");
    if (num_taps % 2 == 0) ++num_taps;
    std::vector<double> hi = windowed_sinc(hi_hz, num_taps, rate_hz);
    if (lo_hz <= 0.0) return hi;
    std::vector<double> lo = windowed_sinc(lo_hz, num_taps, rate_hz);
    for (std::size_t i = 0; i < hi.size(); ++i) hi[i] -= lo[i];
    return hi;
}

int taps_for_cutoff(double cutoff_hz, double rate_hz, int min_taps) {
    int n = static_cast<int>(std::ceil(4.0 * rate_hz / cutoff_hz));
    n = std::max(n, min_taps);
    if (n % 2 == 0) ++n;
    return n;
}

std::vector<double> convolve_same(const std::vector<double>& x,
                                  const std::vector<double>& taps) {
    const std::size_t n = x.size();
    const std::size_t t = taps.size();
    if (n == 0 || t == 0) return {};
    const std::size_t mid = (t - 1) / 2;
    std::vector<double> y(n, 0.0);

    if (n * t <= std::size_t(1) << 23) {
        for (std::size_t i = 0; i < n; ++i) {
            // full-convolution index i + mid
            const std::size_t j = i + mid;
            const std::size_t k_lo = j >= n - 1 ? j - (n - 1) : 0;
            const std::size_t k_hi = std::min(j, t - 1);
            double acc = 0.0;
            for (std::size_t k = k_lo; k <= k_hi; ++k) acc += taps[k] * x[j - k];
            y[i] = acc;
        }
        return y;
    }

    // FFT path for long filters
    const std::size_t m = next_pow2(n + t - 1);
    std::vector<cplx> fx(m, cplx(0, 0)), ft(m, cplx(0, 0));
    for (std::size_t i = 0; i < n; ++i) fx[i] = cplx(x[i], 0.0);
    for (std::size_t i = 0; i < t; ++i) ft[i] = cplx(taps[i], 0.0);
    fft_pow2(fx, false);
    fft_pow2(ft, false);
    for (std::size_t i = 0; i < m; ++i) fx[i] *= ft[i];
    fft_pow2(fx, true);
    for (std::size_t i = 0; i < n; ++i) y[i] = fx[i + mid].real();
    return y;
}

Signal filter_signal(const Signal& s, const FirFilter& f) {
    validate_signal(s);
    if (std::abs(f.design_rate_hz - s.rate_hz) > 1e-9 * s.rate_hz)
        raise(Errc::rate_mismatch, "filter designed for a different sample rate");
    return Signal{convolve_same(s.samples, f.taps), s.rate_hz};
}

Signal resample(const Signal& s, double target_rate_hz) {
    validate_signal(s);
    if (!(target_rate_hz > 0.0))
        raise(Errc::invalid_signal, "target rate must be positive");
    if (std::abs(target_rate_hz - s.rate_hz) <= 1e-9 * s.rate_hz)
        return s;

    const long long src = std::llround(s.rate_hz);
    const long long tgt = std::llround(target_rate_hz);
    if (src <= 0 || tgt <= 0 || std::abs(s.rate_hz - static_cast<double>(src)) > 1e-6 ||
        std::abs(target_rate_hz - static_cast<double>(tgt)) > 1e-6)
        raise(Errc::invalid_signal, "resampling requires integer sample rates");

    const long long g = std::gcd(src, tgt);
    const long long up = tgt / g;     // L
    const long long down = src / g;   // M

    // Prototype low-pass at the upsampled rate. Tap count scales with the
    // larger of L and M so the transition width tracks the lower rate.
    const double cutoff = 0.45 * static_cast<double>(std::min(src, tgt));
    long long proto_len = 101 * std::max(up, down);
    if (proto_len % 2 == 0) ++proto_len;
    const FirFilter proto = design_lowpass_fir(
        cutoff, static_cast<int>(proto_len),
        static_cast<double>(src) * static_cast<double>(up));

    const long long in_len = static_cast<long long>(s.samples.size());
    const long long out_len = std::max<long long>(1, (in_len * up + down / 2) / down);
    const long long center = (proto_len - 1) / 2;

    std::vector<double> out(static_cast<std::size_t>(out_len), 0.0);
    const double gain = static_cast<double>(up);
    const std::vector<double>& h = proto.taps;
    for (long long n = 0; n < out_len; ++n) {
        const long long j = n * down + center;
        const long long phase = j % up;
        const long long base = j / up;
        double acc = 0.0;
        for (long long k = phase, i = base; k < proto_len && i >= 0; k += up, --i) {
            if (i < in_len) acc += h[static_cast<std::size_t>(k)] *
                                   s.samples[static_cast<std::size_t>(i)];
        }
        out[static_cast<std::size_t>(n)] = gain * acc;
    }
    return Signal{std::move(out), static_cast<double>(tgt)};
}

PowerSpectrum welch_psd(const Signal& s, std::size_t segment_len, double overlap) {
    validate_signal(s);
    if (segment_len == 0 || segment_len > s.samples.size())
        raise(Errc::segment_too_long, "segment exceeds signal length");
    if (!(overlap >= 0.0) || !(overlap < 1.0))
        raise(Errc::invalid_signal, "overlap must be in [0, 1)");

    const std::size_t hop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(segment_len) *
                                                 (1.0 - overlap))));
    const std::size_t nfft = next_pow2(segment_len);
    const std::vector<double> win = hann_periodic(segment_len);
    double win_power = 0.0;
    for (double w : win) win_power += w * w;

    const std::size_t n_bins = nfft / 2 + 1;
    std::vector<double> acc(n_bins, 0.0);
    std::size_t n_segments = 0;
    std::vector<double> buf(segment_len);
    for (std::size_t start = 0; start + segment_len <= s.samples.size(); start += hop) {
        double mean = 0.0;
        for (std::size_t i = 0; i < segment_len; ++i) mean += s.samples[start + i];
        mean /= static_cast<double>(segment_len);
        for (std::size_t i = 0; i < segment_len; ++i)
            buf[i] = (s.samples[start + i] - mean) * win[i];
        const std::vector<cplx> spec = fft_real(buf, nfft);
        for (std::size_t k = 0; k < n_bins; ++k) acc[k] += std::norm(spec[k]);
        ++n_segments;
    }

    PowerSpectrum p;
    p.freqs_hz.resize(n_bins);
    p.density.resize(n_bins);
    const double scale = 1.0 / (static_cast<double>(n_segments) * s.rate_hz * win_power);
    for (std::size_t k = 0; k < n_bins; ++k) {
        p.freqs_hz[k] = static_cast<double>(k) * s.rate_hz / static_cast<double>(nfft);
        const bool edge = (k == 0) || (k == nfft / 2);
        p.density[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
    }
    return p;
}

double band_power(const PowerSpectrum& p, double lo_hz, double hi_hz) {
    if (!(lo_hz >= 0.0) || !(lo_hz < hi_hz))
        raise(Errc::invalid_signal, "band must satisfy 0 <= lo < hi");
    if (p.freqs_hz.size() < 2) return 0.0;

    const auto value_at = [&p](double f) {
        // linear interpolation inside the tabulated range
        const auto it = std::upper_bound(p.freqs_hz.begin(), p.freqs_hz.end(), f);
        if (it == p.freqs_hz.begin() || it == p.freqs_hz.end()) return 0.0;
        const std::size_t k = static_cast<std::size_t>(it - p.freqs_hz.begin());
        const double f0 = p.freqs_hz[k - 1], f1 = p.freqs_hz[k];
        const double u = (f - f0) / (f1 - f0);
        return p.density[k - 1] * (1.0 - u) + p.density[k] * u;
    };

    const double fmax = p.freqs_hz.back();
    const double a = std::max(lo_hz, 0.0);
    const double b = std::min(hi_hz, fmax);
    if (a >= b) return 0.0;

    double acc = 0.0;
    double prev_f = a;
    double prev_v = (a == 0.0) ? p.density.front() : value_at(a);
    for (std::size_t k = 0; k < p.freqs_hz.size(); ++k) {
        const double f = p.freqs_hz[k];
        if (f <= a) continue;
        if (f >= b) break;
        acc += 0.5 * (prev_v + p.density[k]) * (f - prev_f);
        prev_f = f;
        prev_v = p.density[k];
    }
    const double end_v = (b == fmax) ? p.density.back() : value_at(b);
    acc += 0.5 * (prev_v + end_v) * (b - prev_f);
    return acc;
}

double dominant_frequency(const PowerSpectrum& p, double lo_hz, double hi_hz) {
    std::size_t best = p.freqs_hz.size();
    double best_v = 0.0;
    for (std::size_t k = 0; k < p.freqs_hz.size(); ++k) {
        if (p.freqs_hz[k] < lo_hz || p.freqs_hz[k] > hi_hz) continue;
        if (best == p.freqs_hz.size() || p.density[k] > best_v) {
            best = k;
            best_v = p.density[k];
        }
    }
    if (best == p.freqs_hz.size() || best_v <= 0.0)
        return std::numeric_limits<double>::quiet_NaN();

    // parabolic refinement around the peak bin
    if (best > 0 && best + 1 < p.density.size()) {
        const double y0 = p.density[best - 1], y1 = p.density[best], y2 = p.density[best + 1];
        const double denom = y0 - 2.0 * y1 + y2;
        if (denom < 0.0) {
            const double delta = 0.5 * (y0 - y2) / denom;
            if (std::abs(delta) <= 1.0) {
                const double df = p.freqs_hz[1] - p.freqs_hz[0];
                return p.freqs_hz[best] + delta * df;
            }
        }
    }
    return p.freqs_hz[best];
}

double spectral_centroid(const PowerSpectrum& p) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < p.freqs_hz.size(); ++k) {
        num += p.freqs_hz[k] * p.density[k];
        den += p.density[k];
    }
    if (den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return num / den;
}

Signal amplitude_envelope(const Signal& s, double smooth_cutoff_hz) {
    validate_signal(s);
    if (!(smooth_cutoff_hz > 0.0) || !(smooth_cutoff_hz < s.rate_hz / 2.0))
        raise(Errc::invalid_cutoff, "smoothing cutoff must be in (0, rate/2)");

    const std::vector<cplx> an = analytic_signal(s.samples);
    std::vector<double> mag(an.size());
    for (std::size_t i = 0; i < an.size(); ++i) mag[i] = std::abs(an[i]);

    const int n_taps = taps_for_cutoff(smooth_cutoff_hz, s.rate_hz);
    const FirFilter smoother = design_lowpass_fir(smooth_cutoff_hz, n_taps, s.rate_hz);
    return Signal{convolve_same(mag, smoother.taps), s.rate_hz};
}

std::vector<std::vector<double>> mfcc(const Signal& s, int n_mels, int n_coeffs,
                                      std::size_t frame_len, std::size_t hop) {
    validate_signal(s);
    if (frame_len == 0 || frame_len > s.samples.size())
        raise(Errc::frame_too_long, "frame exceeds signal length");
    if (hop == 0) raise(Errc::invalid_signal, "hop must be positive");
    if (n_coeffs > n_mels)
        raise(Errc::invalid_signal, "coefficient count exceeds mel band count");

    const std::size_t n_frames = (s.samples.size() - frame_len) / hop + 1;
    const std::size_t nfft = next_pow2(frame_len);
    const std::size_t n_bins = nfft / 2 + 1;
    const std::vector<double> win = hann_periodic(frame_len);

    // HTK mel scale filterbank
    const auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    const auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    const double mel_hi = hz_to_mel(s.rate_hz / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (std::size_t j = 0; j < edges.size(); ++j)
        edges[j] = mel_to_hz(mel_hi * static_cast<double>(j) /
                             static_cast<double>(n_mels + 1));
    std::vector<std::vector<double>> bank(static_cast<std::size_t>(n_mels),
                                          std::vector<double>(n_bins, 0.0));
    for (int m = 0; m < n_mels; ++m) {
        const double fl = edges[static_cast<std::size_t>(m)];
        const double fc = edges[static_cast<std::size_t>(m) + 1];
        const double fr = edges[static_cast<std::size_t>(m) + 2];
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * s.rate_hz / static_cast<double>(nfft);
            double w = 0.0;
            if (f > fl && f < fc) w = (f - fl) / (fc - fl);
            else if (f >= fc && f < fr) w = (fr - f) / (fr - fc);
            bank[static_cast<std::size_t>(m)][k] = w;
        }
    }

    std::vector<std::vector<double>> out(n_frames,
                                         std::vector<double>(static_cast<std::size_t>(n_coeffs)));
    std::vector<double> buf(frame_len);
    std::vector<double> log_energy(static_cast<std::size_t>(n_mels));
    for (std::size_t fr = 0; fr < n_frames; ++fr) {
        const std::size_t start = fr * hop;
        for (std::size_t i = 0; i < frame_len; ++i)
            buf[i] = s.samples[start + i] * win[i];
        const std::vector<cplx> spec = fft_real(buf, nfft);
        for (int m = 0; m < n_mels; ++m) {
            double e = 0.0;
            const auto& w = bank[static_cast<std::size_t>(m)];
            for (std::size_t k = 0; k < n_bins; ++k) e += w[k] * std::abs(spec[k]);
            log_energy[static_cast<std::size_t>(m)] = std::log(std::max(e, 1e-10));
        }
        for (int c = 0; c < n_coeffs; ++c) {
            double acc = 0.0;
            for (int m = 0; m < n_mels; ++m)
                acc += log_energy[static_cast<std::size_t>(m)] *
                       std::cos(M_PI * c * (2.0 * m + 1.0) / (2.0 * n_mels));
            const double norm = (c == 0) ? std::sqrt(1.0 / n_mels) : std::sqrt(2.0 / n_mels);
            out[fr][static_cast<std::size_t>(c)] = norm * acc;
        }
    }
    return out;
}

void write_spectrum(std::ostream& out, const PowerSpectrum& p) {
    char line[80];
    for (std::size_t k = 0; k < p.freqs_hz.size(); ++k) {
        std::snprintf(line, sizeof(line), "%.17g\t%.17g\n", p.freqs_hz[k], p.density[k]);
        out << line;
    }
}

} // namespace auscult
