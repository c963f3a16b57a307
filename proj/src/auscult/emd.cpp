#include "auscult/emd.hpp"

#include <algorithm>
#include <cmath>

#include "auscult/dsp.hpp"

namespace auscult {

namespace {

struct Extrema {
    std::vector<int> pos;
    std::vector<double> val;
};

// Strict local extrema with ties resolved to the first sample of a plateau.
// Endpoints are never extrema.
template <typename Greater>
Extrema find_extrema(const std::vector<double>& x, Greater greater) {
    Extrema e;
    const int n = static_cast<int>(x.size());
    if (n < 3) return e;
    bool rising = false;
    int candidate = -1;
    for (int i = 1; i < n; ++i) {
        if (greater(x[i], x[i - 1])) {
            rising = true;
            candidate = i;
        } else if (x[i] != x[i - 1]) {
            if (rising && candidate > 0) {
                e.pos.push_back(candidate);
                e.val.push_back(x[candidate]);
            }
            rising = false;
        }
    }
    return e;
}

Extrema find_maxima(const std::vector<double>& x) {
    return find_extrema(x, [](double a, double b) { return a > b; });
}

Extrema find_minima(const std::vector<double>& x) {
    return find_extrema(x, [](double a, double b) { return a < b; });
}

// Natural cubic spline evaluated on the integer grid [0, n).
std::vector<double> spline_on_grid(const std::vector<double>& xs,
                                   const std::vector<double>& ys, int n) {
    const std::size_t m = xs.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    if (m == 1) {
        std::fill(out.begin(), out.end(), ys[0]);
        return out;
    }
    if (m == 2) {
        const double slope = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = ys[0] + slope * (i - xs[0]);
        return out;
    }

    // second derivatives via the Thomas algorithm, natural end conditions
    std::vector<double> m2(m, 0.0), diag(m, 0.0), rhs(m, 0.0), upper(m, 0.0);
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double h0 = xs[i] - xs[i - 1];
        const double h1 = xs[i + 1] - xs[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for (std::size_t i = 2; i + 1 < m; ++i) {
        const double w = (xs[i] - xs[i - 1]) / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = m - 2; i >= 1; --i) {
        m2[i] = (rhs[i] - upper[i] * m2[i + 1]) / diag[i];
        if (i == 1) break;
    }

    std::size_t seg = 0;
    for (int q = 0; q < n; ++q) {
        const double x = static_cast<double>(q);
        while (seg + 2 < m && xs[seg + 1] < x) ++seg;
        const double h = xs[seg + 1] - xs[seg];
        const double a = (xs[seg + 1] - x) / h;
        const double b = 1.0 - a;
        out[static_cast<std::size_t>(q)] =
            a * ys[seg] + b * ys[seg + 1] +
            ((a * a * a - a) * m2[seg] + (b * b * b - b) * m2[seg + 1]) * h * h / 6.0;
    }
    return out;
}

// Extends an extrema list by reflecting up to two points across each end.
void mirror_extrema(const Extrema& e, int n, std::vector<double>& xs,
                    std::vector<double>& ys) {
    xs.clear();
    ys.clear();
    const std::size_t k = e.pos.size();
    const std::size_t mirror = std::min<std::size_t>(2, k);
    for (std::size_t i = mirror; i >= 1; --i) {
        xs.push_back(-static_cast<double>(e.pos[i - 1]));
        ys.push_back(e.val[i - 1]);
    }
    for (std::size_t i = 0; i < k; ++i) {
        xs.push_back(static_cast<double>(e.pos[i]));
        ys.push_back(e.val[i]);
    }
    const double right = 2.0 * (n - 1);
    for (std::size_t i = 0; i < mirror; ++i) {
        xs.push_back(right - static_cast<double>(e.pos[k - 1 - i]));
        ys.push_back(e.val[k - 1 - i]);
    }
}

// One sifting pass: subtract the mean of the two spline envelopes.
// Returns false when the component has no usable extrema.
bool sift_once(const std::vector<double>& h, std::vector<double>& out) {
    const Extrema maxima = find_maxima(h);
    const Extrema minima = find_minima(h);
    if (maxima.pos.empty() || minima.pos.empty()) return false;

    const int n = static_cast<int>(h.size());
    std::vector<double> xs, ys;
    mirror_extrema(maxima, n, xs, ys);
    const std::vector<double> upper = spline_on_grid(xs, ys, n);
    mirror_extrema(minima, n, xs, ys);
    const std::vector<double> lower = spline_on_grid(xs, ys, n);

    out.resize(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        out[i] = h[i] - 0.5 * (upper[i] + lower[i]);
    return true;
}

double sift_sd(const std::vector<double>& prev, const std::vector<double>& next) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const double d = prev[i] - next[i];
        num += d * d;
        den += prev[i] * prev[i];
    }
    if (den == 0.0) return 0.0;
    return num / den;
}

} // namespace

int count_extrema(const std::vector<double>& x) {
    return static_cast<int>(find_maxima(x).pos.size() + find_minima(x).pos.size());
}

int count_zero_crossings(const std::vector<double>& x) {
    int crossings = 0;
    int last_sign = 0;
    for (double v : x) {
        const int sign = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
        if (sign != 0) {
            if (last_sign != 0 && sign != last_sign) ++crossings;
            last_sign = sign;
        }
    }
    return crossings;
}

bool satisfies_imf_property(const std::vector<double>& x) {
    return std::abs(count_extrema(x) - count_zero_crossings(x)) <= 1;
}

ImfSet emd_decompose(const Signal& s, int max_imfs, const SiftConfig& cfg) {
    validate_signal(s);
    ImfSet result;
    result.residual = s;
    if (s.samples.size() < 16 || max_imfs <= 0) return result;

    std::vector<double> residual = s.samples;
    std::vector<double> h, sifted;
    while (static_cast<int>(result.imfs.size()) < max_imfs) {
        if (count_extrema(residual) < 2) break;

        h = residual;
        bool extracted = false;
        for (int iter = 0; iter < cfg.max_sift_iters; ++iter) {
            if (!sift_once(h, sifted)) break;
            const double sd = sift_sd(h, sifted);
            h.swap(sifted);
            extracted = true;
            if (sd < cfg.sd_threshold && satisfies_imf_property(h)) break;
        }
        if (!extracted) break;

        for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= h[i];
        result.imfs.push_back(Signal{h, s.rate_hz});
    }
    result.residual = Signal{std::move(residual), s.rate_hz};
    return result;
}

BandSelection select_imfs_by_band(const ImfSet& set, const std::vector<Band>& bands,
                                  double min_fraction) {
    BandSelection sel;
    sel.bands = bands;
    sel.imf_index.assign(bands.size(), -1);
    sel.in_band_fraction.assign(bands.size(), 0.0);
    if (set.imfs.empty()) return sel;

    // fraction of each component's power inside each band
    std::vector<std::vector<double>> fraction(set.imfs.size(),
                                              std::vector<double>(bands.size(), 0.0));
    for (std::size_t i = 0; i < set.imfs.size(); ++i) {
        const Signal& imf = set.imfs[i];
        const std::size_t segment = std::min<std::size_t>(
            imf.samples.size(),
            static_cast<std::size_t>(std::llround(8.0 * imf.rate_hz)));
        if (segment < 8) continue;
        const PowerSpectrum psd = welch_psd(imf, segment, 0.5);
        const double total = psd.total_power();
        if (total <= 0.0) continue;
        for (std::size_t b = 0; b < bands.size(); ++b)
            fraction[i][b] = band_power(psd, bands[b].lo_hz, bands[b].hi_hz) / total;
    }

    struct Candidate {
        double fraction;
        std::size_t band;
        std::size_t imf;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < set.imfs.size(); ++i)
        for (std::size_t b = 0; b < bands.size(); ++b)
            if (fraction[i][b] >= min_fraction)
                candidates.push_back({fraction[i][b], b, i});
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& c) {
        if (a.fraction != c.fraction) return a.fraction > c.fraction;
        if (a.band != c.band) return a.band < c.band;
        return a.imf < c.imf;
    });

    std::vector<bool> imf_taken(set.imfs.size(), false);
    for (const Candidate& c : candidates) {
        if (sel.imf_index[c.band] >= 0 || imf_taken[c.imf]) continue;
        sel.imf_index[c.band] = static_cast<int>(c.imf);
        sel.in_band_fraction[c.band] = c.fraction;
        imf_taken[c.imf] = true;
    }
    return sel;
}

namespace {

Signal fit_length(Signal s, std::size_t n) {
    s.samples.resize(n, 0.0);
    return s;
}

// Fallback when no component meets the band threshold: zero-phase Hamming
// band-pass of the source signal over that band.
Signal bandpass_fallback(const Signal& src, const Band& band) {
    const double hi = std::min(band.hi_hz, 0.999 * src.rate_hz / 2.0);
    int taps = taps_for_cutoff(std::max(band.lo_hz, 0.25 * (hi - band.lo_hz)),
                               src.rate_hz, 101);
    const int cap = 2 * static_cast<int>(src.samples.size()) + 1;
    taps = std::min(taps, cap);
    if (taps % 2 == 0) ++taps;
    const std::vector<double> bp = design_bandpass_taps(band.lo_hz, hi, taps, src.rate_hz);
    return Signal{convolve_same(src.samples, bp), src.rate_hz};
}

} // namespace

BiosignalSet derive_biosignals(const Signal& s, const BiosignalConfig& cfg) {
    validate_signal(s);

    const std::size_t n = s.samples.size();

    // High-rate decomposition feeds the two envelope bands.
    const ImfSet high = emd_decompose(s, cfg.max_imfs, cfg.sift);

    // Sub-20 Hz bands come from a decimated copy; their scales survive the
    // lower rate and sifting cost drops with length.
    Signal low_input = s.rate_hz > cfg.low_rate_hz ? resample(s, cfg.low_rate_hz) : s;
    const ImfSet low = emd_decompose(low_input, cfg.max_imfs, cfg.sift);

    if (high.imfs.empty() && low.imfs.empty())
        raise(Errc::decomposition_degenerate, "no oscillatory components extracted");

    const std::vector<Band> low_bands(physio_bands.begin(), physio_bands.begin() + 4);
    const std::vector<Band> high_bands(physio_bands.begin() + 4, physio_bands.end());
    const BandSelection low_sel = select_imfs_by_band(low, low_bands);
    const BandSelection high_sel = select_imfs_by_band(high, high_bands);

    const auto low_band_signal = [&](std::size_t band_idx) {
        const int idx = low_sel.imf_index[band_idx];
        Signal src = idx >= 0 ? low.imfs[static_cast<std::size_t>(idx)]
                              : bandpass_fallback(low_input, low_bands[band_idx]);
        if (src.rate_hz != s.rate_hz) src = resample(src, s.rate_hz);
        return fit_length(std::move(src), n);
    };
    const auto high_band_signal = [&](std::size_t band_idx) {
        const int idx = high_sel.imf_index[band_idx];
        Signal src = idx >= 0 ? high.imfs[static_cast<std::size_t>(idx)]
                              : bandpass_fallback(s, high_bands[band_idx]);
        return fit_length(std::move(src), n);
    };

    Signal mid_band = high_band_signal(0);   // 20-100 Hz
    Signal audible_band = high_band_signal(1); // 250-1000 Hz

    const Signal& resp_src = cfg.swap_envelope_roles ? audible_band : mid_band;
    const Signal& card_src = cfg.swap_envelope_roles ? mid_band : audible_band;

    BiosignalSet out;
    out.respiration_env =
        fit_length(amplitude_envelope(resp_src, cfg.respiration_smooth_hz), n);
    out.cardiac_env = fit_length(amplitude_envelope(card_src, cfg.cardiac_smooth_hz), n);
    out.imf_heart = low_band_signal(1); // 1-5 Hz
    out.imf_mid1 = low_band_signal(2);  // 5-10 Hz
    out.imf_mid2 = low_band_signal(3);  // 10-20 Hz
    out.acoustic = s;
    return out;
}

} // namespace auscult
