#pragma once

#include <array>
#include <optional>
#include <vector>

#include "auscult/signal.hpp"

namespace auscult {

struct SiftConfig {
    double sd_threshold = 0.2; // Cauchy criterion on successive sift passes
    int max_sift_iters = 100;
};

// Decomposition result: components ordered highest frequency first; the
// residual is whatever sifting could not reduce further. Sum of imfs plus
// residual reconstructs the input exactly up to float rounding.
struct ImfSet {
    std::vector<Signal> imfs;
    Signal residual;
};

struct Band {
    double lo_hz = 0.0;
    double hi_hz = 0.0;
};

// Physiological target bands, lowest first; the last two feed the envelopes.
inline constexpr std::array<Band, 6> physio_bands{{
    {0.1, 1.5}, {1.0, 5.0}, {5.0, 10.0}, {10.0, 20.0}, {20.0, 100.0}, {250.0, 1000.0}}};

struct BandSelection {
    std::vector<Band> bands;
    std::vector<int> imf_index;            // -1 when unassigned
    std::vector<double> in_band_fraction;  // fraction for the chosen component
};

// The six per-recording analysis signals, all at the input rate and length.
struct BiosignalSet {
    Signal respiration_env;
    Signal cardiac_env;
    Signal imf_heart; // 1-5 Hz component
    Signal imf_mid1;  // 5-10 Hz
    Signal imf_mid2;  // 10-20 Hz
    Signal acoustic;  // the preprocessed recording itself
};

struct BiosignalConfig {
    SiftConfig sift;
    int max_imfs = 12;
    double low_rate_hz = 200.0;  // decomposition rate for the sub-20 Hz bands
    double respiration_smooth_hz = 1.5;
    double cardiac_smooth_hz = 5.0;
    // The two envelope descriptions in circulation disagree on which band
    // carries respiration; this flips the pairing.
    bool swap_envelope_roles = false;
};

int count_extrema(const std::vector<double>& x);
int count_zero_crossings(const std::vector<double>& x);
bool satisfies_imf_property(const std::vector<double>& x);

ImfSet emd_decompose(const Signal& s, int max_imfs = 12, const SiftConfig& cfg = {});

// In-band Welch power fraction assignment, one component per band at most,
// requiring a fraction of at least `min_fraction`.
BandSelection select_imfs_by_band(const ImfSet& set, const std::vector<Band>& bands,
                                  double min_fraction = 0.3);

BiosignalSet derive_biosignals(const Signal& s, const BiosignalConfig& cfg = {});

} // namespace auscult
