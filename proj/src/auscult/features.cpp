#include "auscult/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "auscult/dsp.hpp"

namespace auscult {

namespace {

constexpr double k_analysis_rate_hz = 100.0; // texture measures run near this rate
constexpr int k_embed_dim = 2;
constexpr int k_embed_delay = 1;
constexpr double k_tolerance_factor = 0.2;
constexpr int k_subwindows = 5;
constexpr int k_mfcc_coeffs = 13;
constexpr int k_mfcc_mels = 26;
constexpr double k_mfcc_frame_s = 0.025;
constexpr double k_mfcc_hop_s = 0.010;
constexpr double k_heart_min_rate_hz = 0.7;
constexpr double k_heart_max_rate_hz = 3.0;
constexpr double k_breath_min_rate_hz = 0.1;
constexpr double k_breath_max_rate_hz = 1.5;

double population_std(const std::vector<double>& x) { return std::sqrt(signal_variance(x)); }

// linear-interpolated quantile, q in [0,1]
double quantile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

std::optional<double> finite_or_absent(double v) {
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<double> first_difference(const std::vector<double>& x) {
    std::vector<double> d(x.size() > 0 ? x.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
    return d;
}

int zero_crossing_count(const std::vector<double>& x) { return count_zero_crossings(x); }

// block-mean coarse graining to roughly the analysis rate
Signal coarse_grain(const Signal& w) {
    const int factor =
        std::max(1, static_cast<int>(std::lround(w.rate_hz / k_analysis_rate_hz)));
    if (factor == 1) return w;
    const std::size_t out_n = w.samples.size() / static_cast<std::size_t>(factor);
    Signal out;
    out.rate_hz = w.rate_hz / factor;
    out.samples.resize(out_n);
    for (std::size_t i = 0; i < out_n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < factor; ++j)
            acc += w.samples[i * static_cast<std::size_t>(factor) +
                             static_cast<std::size_t>(j)];
        out.samples[i] = acc / factor;
    }
    return out;
}

} // namespace

std::vector<Signal> segment_windows(const Signal& s, const WindowPlan& plan,
                                    std::vector<std::string>* warnings) {
    validate_signal(s);
    const std::size_t win_len =
        static_cast<std::size_t>(std::llround(plan.length_s * s.rate_hz));
    const std::size_t step =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(plan.step_s * s.rate_hz)));
    std::vector<Signal> out;
    if (win_len == 0 || s.samples.size() < win_len) {
        if (warnings)
            warnings->push_back("signal shorter than one window (" +
                                std::to_string(s.duration_s()) + "s < " +
                                std::to_string(plan.length_s) + "s)");
        return out;
    }
    const std::size_t count = (s.samples.size() - win_len) / step + 1;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Signal w;
        w.rate_hz = s.rate_hz;
        w.samples.assign(s.samples.begin() + static_cast<std::ptrdiff_t>(i * step),
                         s.samples.begin() + static_cast<std::ptrdiff_t>(i * step + win_len));
        out.push_back(std::move(w));
    }
    return out;
}

NamedValues stat_features(const Signal& w) {
    const std::vector<double>& x = w.samples;
    const std::size_t n = x.size();
    NamedValues out;
    out.reserve(14);

    const double mean = signal_mean(x);
    const double sd = population_std(x);
    const auto [min_it, max_it] = std::minmax_element(x.begin(), x.end());
    const double mn = n ? *min_it : 0.0;
    const double mx = n ? *max_it : 0.0;

    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());

    double energy = 0.0;
    for (double v : x) energy += v * v;

    // least-squares slope against time in seconds
    double slope = 0.0;
    if (n >= 2) {
        const double tm = (static_cast<double>(n) - 1.0) / 2.0 / w.rate_hz;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / w.rate_hz - tm;
            num += t * (x[i] - mean);
            den += t * t;
        }
        slope = den > 0.0 ? num / den : 0.0;
    }

    std::optional<double> autocorr;
    if (n >= 2 && sd > 0.0) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = x[i] - mean;
            den += c * c;
            if (i + 1 < n) num += c * (x[i + 1] - mean);
        }
        autocorr = num / den;
    }

    std::optional<double> sub_mean_mean, sub_std_mean;
    if (n >= k_subwindows) {
        double mm = 0.0, sm = 0.0;
        for (int k = 0; k < k_subwindows; ++k) {
            const std::size_t a = n * static_cast<std::size_t>(k) / k_subwindows;
            const std::size_t b = n * static_cast<std::size_t>(k + 1) / k_subwindows;
            std::vector<double> part(x.begin() + static_cast<std::ptrdiff_t>(a),
                                     x.begin() + static_cast<std::ptrdiff_t>(b));
            mm += signal_mean(part);
            sm += population_std(part);
        }
        sub_mean_mean = mm / k_subwindows;
        sub_std_mean = sm / k_subwindows;
    }

    out.push_back({"mean", finite_or_absent(mean)});
    out.push_back({"min", finite_or_absent(mn)});
    out.push_back({"max", finite_or_absent(mx)});
    out.push_back({"std", finite_or_absent(sd)});
    out.push_back({"dynamic_range", finite_or_absent(mx - mn)});
    out.push_back({"snr", sd > 0.0 ? finite_or_absent(mean / sd) : std::nullopt});
    out.push_back({"median", n ? finite_or_absent(quantile(sorted, 0.5)) : std::nullopt});
    out.push_back({"q1", n ? finite_or_absent(quantile(sorted, 0.25)) : std::nullopt});
    out.push_back({"q3", n ? finite_or_absent(quantile(sorted, 0.75)) : std::nullopt});
    out.push_back({"slope_per_s", finite_or_absent(slope)});
    out.push_back({"energy", finite_or_absent(energy)});
    out.push_back({"autocorr_lag1", autocorr});
    out.push_back({"subwin_mean_mean", sub_mean_mean});
    out.push_back({"subwin_std_mean", sub_std_mean});
    return out;
}

NamedValues spectral_features(const Signal& w) {
    NamedValues out;
    out.reserve(9);
    const std::size_t segment = std::min<std::size_t>(
        w.samples.size(), static_cast<std::size_t>(std::llround(4.0 * w.rate_hz)));

    std::optional<PowerSpectrum> psd;
    if (segment >= 8) {
        try {
            psd = welch_psd(w, segment, 0.5);
        } catch (const Error&) {
            psd.reset();
        }
    }

    const auto band_or_absent = [&](double lo, double hi) -> FeatureValue {
        if (!psd) return std::nullopt;
        if (lo >= w.rate_hz / 2.0) return 0.0; // entirely above Nyquist
        return finite_or_absent(band_power(*psd, lo, hi));
    };

    out.push_back({"total_power", psd ? finite_or_absent(psd->total_power()) : std::nullopt});
    static const char* band_names[] = {"band_power_0p1_1p5", "band_power_1_5",
                                       "band_power_5_10",    "band_power_10_20",
                                       "band_power_20_100",  "band_power_250_1000"};
    for (std::size_t b = 0; b < physio_bands.size(); ++b)
        out.push_back({band_names[b],
                       band_or_absent(physio_bands[b].lo_hz, physio_bands[b].hi_hz)});
    out.push_back(
        {"spectral_centroid", psd ? finite_or_absent(spectral_centroid(*psd)) : std::nullopt});
    out.push_back({"dominant_freq_hz",
                   psd ? finite_or_absent(dominant_frequency(*psd, 0.0, w.rate_hz / 2.0))
                       : std::nullopt});
    return out;
}

std::optional<double> katz_fd(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 3) return std::nullopt;
    double length = 0.0, dist = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        length += std::abs(x[i] - x[i - 1]);
        dist = std::max(dist, std::abs(x[i] - x[0]));
    }
    if (length <= 0.0 || dist <= 0.0) return std::nullopt;
    const double steps = std::log10(static_cast<double>(n - 1));
    return finite_or_absent(steps / (steps + std::log10(dist / length)));
}

std::optional<double> higuchi_fd(const std::vector<double>& x, int k_max) {
    const int n = static_cast<int>(x.size());
    if (n < 3 * k_max) return std::nullopt;
    std::vector<double> log_k, log_l;
    for (int k = 1; k <= k_max; ++k) {
        double lk = 0.0;
        int terms = 0;
        for (int m = 0; m < k; ++m) {
            const int n_m = (n - 1 - m) / k;
            if (n_m < 1) continue;
            double acc = 0.0;
            for (int i = 1; i <= n_m; ++i)
                acc += std::abs(x[static_cast<std::size_t>(m + i * k)] -
                                x[static_cast<std::size_t>(m + (i - 1) * k)]);
            lk += acc * (static_cast<double>(n - 1) / (static_cast<double>(n_m) * k)) / k;
            ++terms;
        }
        if (terms == 0 || lk <= 0.0) return std::nullopt;
        log_k.push_back(std::log(static_cast<double>(k)));
        log_l.push_back(std::log(lk / terms));
    }
    // least-squares slope of log L(k) against log k
    const double mk = signal_mean(log_k), ml = signal_mean(log_l);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < log_k.size(); ++i) {
        num += (log_k[i] - mk) * (log_l[i] - ml);
        den += (log_k[i] - mk) * (log_k[i] - mk);
    }
    if (den <= 0.0) return std::nullopt;
    return finite_or_absent(-num / den);
}

std::optional<double> petrosian_fd(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 3) return std::nullopt;
    const std::vector<double> d = first_difference(x);
    int sign_changes = 0;
    for (std::size_t i = 1; i < d.size(); ++i)
        if (d[i] * d[i - 1] < 0.0) ++sign_changes;
    const double logn = std::log10(static_cast<double>(n));
    const double denom =
        logn + std::log10(static_cast<double>(n) /
                          (static_cast<double>(n) + 0.4 * sign_changes));
    if (denom == 0.0) return std::nullopt;
    return finite_or_absent(logn / denom);
}

std::optional<double> dfa_alpha(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 16) return std::nullopt;
    const double mean = signal_mean(x);
    std::vector<double> profile(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] - mean;
        profile[i] = acc;
    }

    // log-spaced box sizes in [4, n/4]
    std::vector<std::size_t> sizes;
    const double lo = std::log(4.0), hi = std::log(static_cast<double>(n) / 4.0);
    const int n_sizes = 12;
    for (int i = 0; i < n_sizes; ++i) {
        const double v = std::exp(lo + (hi - lo) * i / (n_sizes - 1));
        const std::size_t s = static_cast<std::size_t>(std::llround(v));
        if (sizes.empty() || s > sizes.back()) sizes.push_back(s);
    }

    std::vector<double> log_s, log_f;
    for (std::size_t s : sizes) {
        const std::size_t n_boxes = n / s;
        if (n_boxes < 2) continue;
        double total_sq = 0.0;
        for (std::size_t b = 0; b < n_boxes; ++b) {
            const std::size_t off = b * s;
            // linear detrend within the box
            const double tm = (static_cast<double>(s) - 1.0) / 2.0;
            double sy = 0.0, sty = 0.0, stt = 0.0;
            for (std::size_t i = 0; i < s; ++i) {
                const double t = static_cast<double>(i) - tm;
                sy += profile[off + i];
                sty += t * profile[off + i];
                stt += t * t;
            }
            const double intercept = sy / static_cast<double>(s);
            const double slope = stt > 0.0 ? sty / stt : 0.0;
            for (std::size_t i = 0; i < s; ++i) {
                const double fit = intercept + slope * (static_cast<double>(i) - tm);
                const double r = profile[off + i] - fit;
                total_sq += r * r;
            }
        }
        const double f = std::sqrt(total_sq / static_cast<double>(n_boxes * s));
        if (f <= 0.0) continue;
        log_s.push_back(std::log(static_cast<double>(s)));
        log_f.push_back(std::log(f));
    }
    if (log_s.size() < 3) return std::nullopt;
    const double ms = signal_mean(log_s), mf = signal_mean(log_f);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < log_s.size(); ++i) {
        num += (log_s[i] - ms) * (log_f[i] - mf);
        den += (log_s[i] - ms) * (log_s[i] - ms);
    }
    if (den <= 0.0) return std::nullopt;
    return finite_or_absent(num / den);
}

NamedValues fractal_features(const Signal& w) {
    NamedValues out;
    out.reserve(8);
    const std::vector<double>& x = w.samples;
    const bool usable = x.size() >= 128;

    out.push_back({"katz_fd", usable ? katz_fd(x) : std::nullopt});
    out.push_back({"higuchi_fd", usable ? higuchi_fd(x) : std::nullopt});
    out.push_back({"petrosian_fd", usable ? petrosian_fd(x) : std::nullopt});
    out.push_back({"dfa_alpha", usable ? dfa_alpha(x) : std::nullopt});

    std::array<std::optional<double>, 4> sub_means;
    if (usable && x.size() >= static_cast<std::size_t>(k_subwindows) * 64) {
        std::array<double, 4> acc{0.0, 0.0, 0.0, 0.0};
        std::array<int, 4> good{0, 0, 0, 0};
        for (int k = 0; k < k_subwindows; ++k) {
            const std::size_t a = x.size() * static_cast<std::size_t>(k) / k_subwindows;
            const std::size_t b = x.size() * static_cast<std::size_t>(k + 1) / k_subwindows;
            const std::vector<double> part(x.begin() + static_cast<std::ptrdiff_t>(a),
                                           x.begin() + static_cast<std::ptrdiff_t>(b));
            const std::array<std::optional<double>, 4> vals = {
                katz_fd(part), higuchi_fd(part), petrosian_fd(part), dfa_alpha(part)};
            for (std::size_t f = 0; f < 4; ++f)
                if (vals[f]) {
                    acc[f] += *vals[f];
                    ++good[f];
                }
        }
        for (std::size_t f = 0; f < 4; ++f)
            if (good[f] == k_subwindows) sub_means[f] = acc[f] / k_subwindows;
    }
    out.push_back({"katz_fd_subwin", sub_means[0]});
    out.push_back({"higuchi_fd_subwin", sub_means[1]});
    out.push_back({"petrosian_fd_subwin", sub_means[2]});
    out.push_back({"dfa_alpha_subwin", sub_means[3]});
    return out;
}

std::optional<double> permutation_entropy(const std::vector<double>& x) {
    if (x.size() < 3) return std::nullopt;
    std::array<long long, 6> counts{};
    for (std::size_t i = 0; i + 2 < x.size(); ++i) {
        // rank pattern of (x[i], x[i+1], x[i+2]); ties resolved by index
        std::array<int, 3> idx{0, 1, 2};
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return x[i + static_cast<std::size_t>(a)] <
                                                    x[i + static_cast<std::size_t>(b)]; });
        const int code = idx[0] * 2 + (idx[1] > idx[2] ? 1 : 0);
        counts[static_cast<std::size_t>(code)] += 1;
    }
    const double total = static_cast<double>(x.size() - 2);
    double h = 0.0;
    for (long long c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log(p);
    }
    return h / std::log(6.0);
}

namespace {

// Shared match counting for the entropy pair, Chebyshev distance.
long long count_template_pairs(const std::vector<double>& x, int m, double r,
                               std::size_t n_templates) {
    long long count = 0;
    for (std::size_t i = 0; i + 1 < n_templates; ++i) {
        for (std::size_t j = i + 1; j < n_templates; ++j) {
            bool match = true;
            for (int k = 0; k < m; ++k) {
                if (std::abs(x[i + static_cast<std::size_t>(k)] -
                             x[j + static_cast<std::size_t>(k)]) > r) {
                    match = false;
                    break;
                }
            }
            if (match) ++count;
        }
    }
    return count;
}

} // namespace

std::optional<double> sample_entropy(const std::vector<double>& x, int m, double r) {
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(m) + 2 || r <= 0.0) return std::nullopt;
    const std::size_t n_templates = n - static_cast<std::size_t>(m); // both lengths share this
    const long long b = count_template_pairs(x, m, r, n_templates);
    const long long a = count_template_pairs(x, m + 1, r, n_templates);
    if (a == 0 || b == 0) return std::nullopt;
    return -std::log(static_cast<double>(a) / static_cast<double>(b));
}

std::optional<double> approximate_entropy(const std::vector<double>& x, int m, double r) {
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(m) + 2 || r <= 0.0) return std::nullopt;

    const auto phi = [&](int mm) {
        const std::size_t nt = n - static_cast<std::size_t>(mm) + 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            long long c = 0;
            for (std::size_t j = 0; j < nt; ++j) {
                bool match = true;
                for (int k = 0; k < mm; ++k) {
                    if (std::abs(x[i + static_cast<std::size_t>(k)] -
                                 x[j + static_cast<std::size_t>(k)]) > r) {
                        match = false;
                        break;
                    }
                }
                if (match) ++c;
            }
            acc += std::log(static_cast<double>(c) / static_cast<double>(nt));
        }
        return acc / static_cast<double>(nt);
    };
    return finite_or_absent(phi(m) - phi(m + 1));
}

NamedValues entropy_features(const Signal& w) {
    NamedValues out;
    out.reserve(11);
    const std::vector<double>& x = w.samples;
    const std::size_t n = x.size();
    const bool usable = n >= 128;
    const double sd = population_std(x);
    const double r = k_tolerance_factor * sd;

    std::optional<double> spec_entropy;
    if (usable) {
        const std::size_t segment = std::min<std::size_t>(n, 256);
        try {
            const PowerSpectrum psd = welch_psd(w, segment, 0.5);
            double total = 0.0;
            for (double d : psd.density) total += d;
            if (total > 0.0) {
                double h = 0.0;
                for (double d : psd.density) {
                    if (d <= 0.0) continue;
                    const double p = d / total;
                    h -= p * std::log(p);
                }
                spec_entropy = h / std::log(static_cast<double>(psd.density.size()));
            }
        } catch (const Error&) {
        }
    }

    const std::vector<double> d = first_difference(x);
    const double var_x = signal_variance(x);
    const double var_d = signal_variance(d);
    std::optional<double> mobility, complexity;
    if (var_x > 0.0) {
        mobility = std::sqrt(var_d / var_x);
        if (var_d > 0.0) {
            const std::vector<double> dd = first_difference(d);
            const double var_dd = signal_variance(dd);
            const double mob_d = std::sqrt(var_dd / var_d);
            if (*mobility > 0.0) complexity = mob_d / *mobility;
        }
    }

    out.push_back({"perm_entropy", usable ? permutation_entropy(x) : std::nullopt});
    out.push_back({"spectral_entropy", spec_entropy});
    out.push_back(
        {"approx_entropy", usable ? approximate_entropy(x, k_embed_dim, r) : std::nullopt});
    out.push_back(
        {"sample_entropy", usable ? sample_entropy(x, k_embed_dim, r) : std::nullopt});
    out.push_back({"hjorth_activity", finite_or_absent(var_x)});
    out.push_back({"hjorth_mobility", mobility});
    out.push_back({"hjorth_complexity", complexity});
    out.push_back({"zero_crossings", static_cast<double>(zero_crossing_count(x))});
    out.push_back({"embed_tolerance", sd > 0.0 ? finite_or_absent(r) : std::nullopt});
    out.push_back({"embed_dim", static_cast<double>(k_embed_dim)});
    out.push_back({"embed_delay", static_cast<double>(k_embed_delay)});
    return out;
}

NamedValues mfcc_features(const Signal& w) {
    NamedValues out;
    out.reserve(2 * k_mfcc_coeffs);
    const std::size_t frame_len =
        static_cast<std::size_t>(std::llround(k_mfcc_frame_s * w.rate_hz));
    const std::size_t hop = static_cast<std::size_t>(std::llround(k_mfcc_hop_s * w.rate_hz));

    std::vector<std::vector<double>> frames;
    if (frame_len >= 8 && hop >= 1 && frame_len <= w.samples.size())
        frames = mfcc(w, k_mfcc_mels, k_mfcc_coeffs, frame_len, hop);

    for (int c = 0; c < k_mfcc_coeffs; ++c) {
        std::optional<double> mean, sd;
        if (!frames.empty()) {
            std::vector<double> col(frames.size());
            for (std::size_t f = 0; f < frames.size(); ++f)
                col[f] = frames[f][static_cast<std::size_t>(c)];
            mean = finite_or_absent(signal_mean(col));
            sd = finite_or_absent(population_std(col));
        }
        out.push_back({"mfcc" + std::to_string(c) + "_mean", mean});
        out.push_back({"mfcc" + std::to_string(c) + "_std", sd});
    }
    return out;
}

BeatSeries detect_beats(const Signal& env_window, double min_rate_hz, double max_rate_hz) {
    validate_signal(env_window);
    (void)min_rate_hz; // plausibility bound applied by callers to the intervals
    const std::vector<double>& x = env_window.samples;
    const std::size_t n = x.size();

    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double median = quantile(sorted, 0.5);
    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    const double threshold = median + 0.5 * iqr;

    struct Peak {
        std::size_t pos;
        double value;
    };
    std::vector<Peak> candidates;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (x[i] <= threshold) continue;
        if (x[i] > x[i - 1] && x[i] >= x[i + 1]) candidates.push_back({i, x[i]});
    }

    // greedy suppression: strongest peaks first, minimum spacing 1/max_rate
    const double min_dist = env_window.rate_hz / max_rate_hz;
    std::stable_sort(candidates.begin(), candidates.end(), [](const Peak& a, const Peak& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.pos < b.pos;
    });
    std::vector<std::size_t> accepted;
    for (const Peak& p : candidates) {
        bool ok = true;
        for (std::size_t q : accepted) {
            if (std::abs(static_cast<double>(p.pos) - static_cast<double>(q)) < min_dist) {
                ok = false;
                break;
            }
        }
        if (ok) accepted.push_back(p.pos);
    }
    std::sort(accepted.begin(), accepted.end());

    if (accepted.size() < 4)
        raise(Errc::too_few_beats,
              "found " + std::to_string(accepted.size()) + " peaks, need at least 4");

    BeatSeries beats;
    beats.peak_times_s.reserve(accepted.size());
    for (std::size_t pos : accepted)
        beats.peak_times_s.push_back(static_cast<double>(pos) / env_window.rate_hz);
    beats.ibi_ms.reserve(accepted.size() - 1);
    for (std::size_t i = 1; i < accepted.size(); ++i)
        beats.ibi_ms.push_back(
            (beats.peak_times_s[i] - beats.peak_times_s[i - 1]) * 1000.0);
    return beats;
}

NamedValues hrv_features(const BeatSeries& beats) {
    NamedValues out;
    out.reserve(30);
    const std::vector<double>& ibi = beats.ibi_ms;
    const bool time_ok = beats.peak_times_s.size() >= 4 && ibi.size() >= 3;

    const auto absent = [&out](const char* name) { out.push_back({name, std::nullopt}); };

    if (!time_ok) {
        static const char* names[] = {
            "hr_mean_bpm", "hr_min_bpm",  "hr_max_bpm",  "hr_std_bpm", "ibi_mean_ms",
            "ibi_median_ms", "ibi_min_ms", "ibi_max_ms", "sdnn_ms",    "sdsd_ms",
            "rmssd_ms",    "ibi_cv",      "pnn20",       "pnn50",      "lf_power",
            "hf_power",    "lf_hf_ratio", "lf_norm",     "hf_norm",    "freq_total_power",
            "lf_peak_hz",  "hf_peak_hz",  "sd1_ms",      "sd2_ms",     "sd1_sd2_ratio",
            "ellipse_area", "csi",        "cvi",         "ibi_sampen", "ibi_apen"};
        for (const char* n : names) absent(n);
        return out;
    }

    std::vector<double> hr(ibi.size());
    for (std::size_t i = 0; i < ibi.size(); ++i) hr[i] = 60000.0 / ibi[i];
    std::vector<double> sorted_ibi = ibi;
    std::sort(sorted_ibi.begin(), sorted_ibi.end());

    const std::vector<double> diffs = first_difference(ibi);
    double rmssd_sq = 0.0;
    int over20 = 0, over50 = 0;
    for (double dv : diffs) {
        rmssd_sq += dv * dv;
        if (std::abs(dv) > 20.0) ++over20;
        if (std::abs(dv) > 50.0) ++over50;
    }
    const double rmssd = diffs.empty() ? 0.0 : std::sqrt(rmssd_sq / diffs.size());
    const double sdnn = population_std(ibi);
    const double sdsd = population_std(diffs);
    const double mean_ibi = signal_mean(ibi);

    out.push_back({"hr_mean_bpm", finite_or_absent(signal_mean(hr))});
    out.push_back({"hr_min_bpm", finite_or_absent(*std::min_element(hr.begin(), hr.end()))});
    out.push_back({"hr_max_bpm", finite_or_absent(*std::max_element(hr.begin(), hr.end()))});
    out.push_back({"hr_std_bpm", finite_or_absent(population_std(hr))});
    out.push_back({"ibi_mean_ms", finite_or_absent(mean_ibi)});
    out.push_back({"ibi_median_ms", finite_or_absent(quantile(sorted_ibi, 0.5))});
    out.push_back({"ibi_min_ms", finite_or_absent(sorted_ibi.front())});
    out.push_back({"ibi_max_ms", finite_or_absent(sorted_ibi.back())});
    out.push_back({"sdnn_ms", finite_or_absent(sdnn)});
    out.push_back({"sdsd_ms", finite_or_absent(sdsd)});
    out.push_back({"rmssd_ms", finite_or_absent(rmssd)});
    out.push_back({"ibi_cv", mean_ibi > 0.0 ? finite_or_absent(sdnn / mean_ibi) : std::nullopt});
    out.push_back({"pnn20", diffs.empty() ? FeatureValue{}
                                          : finite_or_absent(100.0 * over20 / diffs.size())});
    out.push_back({"pnn50", diffs.empty() ? FeatureValue{}
                                          : finite_or_absent(100.0 * over50 / diffs.size())});

    // spectral side needs a 30 s span; the series is resampled to 4 Hz
    const double span = beats.peak_times_s.back() - beats.peak_times_s.front();
    std::optional<double> lf, hf, lf_hf, lf_norm, hf_norm, tp, lf_peak, hf_peak;
    if (span >= 30.0) {
        const double grid_rate = 4.0;
        const std::size_t grid_n =
            static_cast<std::size_t>(std::floor(span * grid_rate)) + 1;
        Signal tach;
        tach.rate_hz = grid_rate;
        tach.samples.resize(grid_n);
        std::size_t seg = 0;
        for (std::size_t g = 0; g < grid_n; ++g) {
            const double t = beats.peak_times_s.front() + static_cast<double>(g) / grid_rate;
            while (seg + 2 < beats.peak_times_s.size() && beats.peak_times_s[seg + 1] < t)
                ++seg;
            const double t0 = beats.peak_times_s[seg], t1 = beats.peak_times_s[seg + 1];
            const double u = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
            // interval value attributed across [t0, t1]
            const double v0 = ibi[std::min(seg, ibi.size() - 1)];
            const double v1 = ibi[std::min(seg + 1, ibi.size() - 1)];
            tach.samples[g] = v0 * (1.0 - u) + v1 * u;
        }
        try {
            const PowerSpectrum psd = welch_psd(tach, tach.samples.size(), 0.0);
            const double lfv = band_power(psd, 0.04, 0.15);
            const double hfv = band_power(psd, 0.15, 0.4);
            lf = lfv;
            hf = hfv;
            tp = lfv + hfv;
            if (hfv > 0.0) lf_hf = lfv / hfv;
            if (lfv + hfv > 0.0) {
                lf_norm = lfv / (lfv + hfv);
                hf_norm = hfv / (lfv + hfv);
            }
            lf_peak = finite_or_absent(dominant_frequency(psd, 0.04, 0.15));
            hf_peak = finite_or_absent(dominant_frequency(psd, 0.15, 0.4));
        } catch (const Error&) {
        }
    }
    out.push_back({"lf_power", lf});
    out.push_back({"hf_power", hf});
    out.push_back({"lf_hf_ratio", lf_hf});
    out.push_back({"lf_norm", lf_norm});
    out.push_back({"hf_norm", hf_norm});
    out.push_back({"freq_total_power", tp});
    out.push_back({"lf_peak_hz", lf_peak});
    out.push_back({"hf_peak_hz", hf_peak});

    const double sd1 = rmssd / std::sqrt(2.0);
    const double sd2_sq = 2.0 * sdnn * sdnn - sd1 * sd1;
    const double sd2 = std::sqrt(std::max(0.0, sd2_sq));
    out.push_back({"sd1_ms", finite_or_absent(sd1)});
    out.push_back({"sd2_ms", finite_or_absent(sd2)});
    out.push_back({"sd1_sd2_ratio", sd2 > 0.0 ? finite_or_absent(sd1 / sd2) : std::nullopt});
    out.push_back({"ellipse_area", finite_or_absent(M_PI * sd1 * sd2)});
    out.push_back({"csi", sd1 > 0.0 ? finite_or_absent(sd2 / sd1) : std::nullopt});
    out.push_back({"cvi", sd1 > 0.0 && sd2 > 0.0
                              ? finite_or_absent(std::log10(16.0 * sd1 * sd2))
                              : std::nullopt});
    const double r = k_tolerance_factor * sdnn;
    out.push_back({"ibi_sampen", sample_entropy(ibi, k_embed_dim, r)});
    out.push_back({"ibi_apen", approximate_entropy(ibi, k_embed_dim, r)});
    return out;
}

NamedValues respiration_features(const Signal& w) {
    NamedValues out;
    out.reserve(6);
    const std::vector<double>& x = w.samples;

    std::optional<double> rate_bpm;
    try {
        const PowerSpectrum psd = welch_psd(w, w.samples.size(), 0.0);
        const double peak = dominant_frequency(psd, k_breath_min_rate_hz, k_breath_max_rate_hz);
        if (std::isfinite(peak)) rate_bpm = 60.0 * peak;
    } catch (const Error&) {
    }

    std::optional<double> interval_mean, interval_std, breath_count;
    try {
        const BeatSeries beats = detect_beats(w, k_breath_min_rate_hz, k_breath_max_rate_hz);
        std::vector<double> intervals(beats.ibi_ms.size());
        for (std::size_t i = 0; i < intervals.size(); ++i) intervals[i] = beats.ibi_ms[i] / 1000.0;
        interval_mean = finite_or_absent(signal_mean(intervals));
        interval_std = finite_or_absent(population_std(intervals));
        breath_count = static_cast<double>(beats.peak_times_s.size());
    } catch (const Error&) {
    }

    std::optional<double> skewness;
    const double sd = population_std(x);
    if (sd > 0.0) {
        const double mean = signal_mean(x);
        double m3 = 0.0;
        for (double v : x) m3 += (v - mean) * (v - mean) * (v - mean);
        m3 /= static_cast<double>(x.size());
        skewness = finite_or_absent(m3 / (sd * sd * sd));
    }

    double depth = 0.0;
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (*mx + *mn != 0.0) depth = (*mx - *mn) / (*mx + *mn);

    out.push_back({"breathing_rate_bpm", rate_bpm});
    out.push_back({"breath_interval_mean_s", interval_mean});
    out.push_back({"breath_interval_std_s", interval_std});
    out.push_back({"envelope_skewness", skewness});
    out.push_back({"modulation_depth", finite_or_absent(depth)});
    out.push_back({"breath_count", breath_count});
    return out;
}

const char* source_signal_token(SourceSignal src) {
    switch (src) {
    case SourceSignal::respiration_env: return "respiration_env";
    case SourceSignal::cardiac_env: return "cardiac_env";
    case SourceSignal::imf_heart: return "imf_heart";
    case SourceSignal::imf_mid1: return "imf_mid1";
    case SourceSignal::imf_mid2: return "imf_mid2";
    case SourceSignal::acoustic: return "acoustic";
    }
    return "?";
}

namespace {

const std::vector<std::string>& family_names(FeatureFamily family) {
    static const std::vector<std::string> stat = {
        "mean", "min", "max", "std", "dynamic_range", "snr", "median", "q1", "q3",
        "slope_per_s", "energy", "autocorr_lag1", "subwin_mean_mean", "subwin_std_mean"};
    static const std::vector<std::string> spectral = {
        "total_power",      "band_power_0p1_1p5", "band_power_1_5", "band_power_5_10",
        "band_power_10_20", "band_power_20_100",  "band_power_250_1000",
        "spectral_centroid", "dominant_freq_hz"};
    static const std::vector<std::string> fractal = {
        "katz_fd",        "higuchi_fd",        "petrosian_fd",        "dfa_alpha",
        "katz_fd_subwin", "higuchi_fd_subwin", "petrosian_fd_subwin", "dfa_alpha_subwin"};
    static const std::vector<std::string> entropy = {
        "perm_entropy",   "spectral_entropy", "approx_entropy",    "sample_entropy",
        "hjorth_activity", "hjorth_mobility", "hjorth_complexity", "zero_crossings",
        "embed_tolerance", "embed_dim",       "embed_delay"};
    static const std::vector<std::string> mfcc_names = [] {
        std::vector<std::string> v;
        for (int c = 0; c < k_mfcc_coeffs; ++c) {
            v.push_back("mfcc" + std::to_string(c) + "_mean");
            v.push_back("mfcc" + std::to_string(c) + "_std");
        }
        return v;
    }();
    static const std::vector<std::string> hrv = {
        "hr_mean_bpm", "hr_min_bpm",  "hr_max_bpm",  "hr_std_bpm", "ibi_mean_ms",
        "ibi_median_ms", "ibi_min_ms", "ibi_max_ms", "sdnn_ms",    "sdsd_ms",
        "rmssd_ms",    "ibi_cv",      "pnn20",       "pnn50",      "lf_power",
        "hf_power",    "lf_hf_ratio", "lf_norm",     "hf_norm",    "freq_total_power",
        "lf_peak_hz",  "hf_peak_hz",  "sd1_ms",      "sd2_ms",     "sd1_sd2_ratio",
        "ellipse_area", "csi",        "cvi",         "ibi_sampen", "ibi_apen"};
    static const std::vector<std::string> respiration = {
        "breathing_rate_bpm", "breath_interval_mean_s", "breath_interval_std_s",
        "envelope_skewness",  "modulation_depth",       "breath_count"};
    switch (family) {
    case FeatureFamily::stat: return stat;
    case FeatureFamily::spectral: return spectral;
    case FeatureFamily::fractal: return fractal;
    case FeatureFamily::entropy: return entropy;
    case FeatureFamily::mfcc: return mfcc_names;
    case FeatureFamily::hrv: return hrv;
    case FeatureFamily::respiration: return respiration;
    }
    return stat;
}

FeatureRegistry build_registry_v1() {
    FeatureRegistry reg;
    reg.version = "v1";
    static constexpr SourceSignal sources[] = {
        SourceSignal::respiration_env, SourceSignal::cardiac_env, SourceSignal::imf_heart,
        SourceSignal::imf_mid1,        SourceSignal::imf_mid2,    SourceSignal::acoustic};
    static constexpr FeatureFamily per_signal[] = {
        FeatureFamily::stat, FeatureFamily::spectral, FeatureFamily::fractal,
        FeatureFamily::entropy};
    const auto append = [&reg](SourceSignal src, FeatureFamily fam) {
        for (const std::string& name : family_names(fam))
            reg.entries.push_back(
                {std::string(source_signal_token(src)) + "." + name, src, fam});
    };
    for (SourceSignal src : sources)
        for (FeatureFamily fam : per_signal) append(src, fam);
    append(SourceSignal::acoustic, FeatureFamily::mfcc);
    append(SourceSignal::cardiac_env, FeatureFamily::hrv);
    append(SourceSignal::respiration_env, FeatureFamily::respiration);
    return reg;
}

} // namespace

const FeatureRegistry& feature_registry_v1() {
    static const FeatureRegistry reg = build_registry_v1();
    return reg;
}

std::vector<FeatureVector> extract_feature_matrix(const BiosignalSet& bset,
                                                  const WindowPlan& plan,
                                                  const FeatureRegistry& registry,
                                                  int patient_id,
                                                  const std::string& recording_id) {
    const Signal* signals[n_source_signals] = {
        &bset.respiration_env, &bset.cardiac_env, &bset.imf_heart,
        &bset.imf_mid1,        &bset.imf_mid2,    &bset.acoustic};

    std::vector<std::vector<Signal>> windows(n_source_signals);
    for (int s = 0; s < n_source_signals; ++s)
        windows[static_cast<std::size_t>(s)] =
            segment_windows(*signals[static_cast<std::size_t>(s)], plan);

    std::size_t n_windows = windows[0].size();
    for (const auto& w : windows) n_windows = std::min(n_windows, w.size());

    std::vector<FeatureVector> out;
    out.reserve(n_windows);
    for (std::size_t wi = 0; wi < n_windows; ++wi) {
        FeatureVector fv;
        fv.patient_id = patient_id;
        fv.recording_id = recording_id;
        fv.window_index = static_cast<int>(wi);
        fv.values.reserve(registry.size());

        // per-source caches for this window index
        std::array<NamedValues, n_source_signals> stat, spectral, fractal, entropy;
        NamedValues mfcc_vals, hrv_vals, resp_vals;
        for (int s = 0; s < n_source_signals; ++s) {
            const Signal& w = windows[static_cast<std::size_t>(s)][wi];
            const Signal coarse = coarse_grain(w);
            stat[static_cast<std::size_t>(s)] = stat_features(w);
            spectral[static_cast<std::size_t>(s)] = spectral_features(w);
            fractal[static_cast<std::size_t>(s)] = fractal_features(coarse);
            entropy[static_cast<std::size_t>(s)] = entropy_features(coarse);
        }
        mfcc_vals =
            mfcc_features(windows[static_cast<std::size_t>(SourceSignal::acoustic)][wi]);
        {
            const Signal& cw =
                windows[static_cast<std::size_t>(SourceSignal::cardiac_env)][wi];
            BeatSeries beats;
            bool have_beats = false;
            try {
                beats = detect_beats(cw, k_heart_min_rate_hz, k_heart_max_rate_hz);
                std::vector<double> sorted = beats.ibi_ms;
                std::sort(sorted.begin(), sorted.end());
                const double median_s = quantile(sorted, 0.5) / 1000.0;
                have_beats = median_s >= 1.0 / k_heart_max_rate_hz &&
                             median_s <= 1.0 / k_heart_min_rate_hz;
            } catch (const Error&) {
            }
            hrv_vals = have_beats ? hrv_features(beats) : hrv_features(BeatSeries{});
        }
        resp_vals = respiration_features(
            windows[static_cast<std::size_t>(SourceSignal::respiration_env)][wi]);

        std::array<std::size_t, n_source_signals> stat_i{}, spectral_i{}, fractal_i{},
            entropy_i{};
        std::size_t mfcc_i = 0, hrv_i = 0, resp_i = 0;
        for (const auto& entry : registry.entries) {
            const std::size_t s = static_cast<std::size_t>(entry.source);
            switch (entry.family) {
            case FeatureFamily::stat: fv.values.push_back(stat[s][stat_i[s]++].value); break;
            case FeatureFamily::spectral:
                fv.values.push_back(spectral[s][spectral_i[s]++].value);
                break;
            case FeatureFamily::fractal:
                fv.values.push_back(fractal[s][fractal_i[s]++].value);
                break;
            case FeatureFamily::entropy:
                fv.values.push_back(entropy[s][entropy_i[s]++].value);
                break;
            case FeatureFamily::mfcc: fv.values.push_back(mfcc_vals[mfcc_i++].value); break;
            case FeatureFamily::hrv: fv.values.push_back(hrv_vals[hrv_i++].value); break;
            case FeatureFamily::respiration:
                fv.values.push_back(resp_vals[resp_i++].value);
                break;
            }
        }
        out.push_back(std::move(fv));
    }
    return out;
}

} // namespace auscult
