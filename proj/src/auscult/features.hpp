#pragma once

#include <optional>
#include <string>
#include <vector>

#include "auscult/emd.hpp"
#include "auscult/signal.hpp"

namespace auscult {

struct WindowPlan {
    double length_s = 10.0;
    double step_s = 1.0;
};

// Windows start at 0, step, 2*step, ...; a signal shorter than one window
// yields no windows (and a warning when a sink is provided).
std::vector<Signal> segment_windows(const Signal& s, const WindowPlan& plan,
                                    std::vector<std::string>* warnings = nullptr);

using FeatureValue = std::optional<double>;

struct NamedValue {
    std::string name;
    FeatureValue value;
};
using NamedValues = std::vector<NamedValue>;

NamedValues stat_features(const Signal& w);
NamedValues spectral_features(const Signal& w);
NamedValues fractal_features(const Signal& w);
NamedValues entropy_features(const Signal& w);
NamedValues mfcc_features(const Signal& w);

struct BeatSeries {
    std::vector<double> peak_times_s; // strictly ascending
    std::vector<double> ibi_ms;       // successive differences
};

// Envelope peak picking: local maxima above median + 0.5*IQR with a minimum
// spacing of 1/max_rate_hz. Throws TooFewBeats below 4 peaks. min_rate_hz is
// the plausibility bound callers apply to the resulting intervals.
BeatSeries detect_beats(const Signal& env_window, double min_rate_hz, double max_rate_hz);

NamedValues hrv_features(const BeatSeries& beats);
NamedValues respiration_features(const Signal& resp_env_window);

// Standalone fractal estimators (exposed for direct verification).
std::optional<double> katz_fd(const std::vector<double>& x);
std::optional<double> higuchi_fd(const std::vector<double>& x, int k_max = 10);
std::optional<double> petrosian_fd(const std::vector<double>& x);
std::optional<double> dfa_alpha(const std::vector<double>& x);
std::optional<double> sample_entropy(const std::vector<double>& x, int m, double r);
std::optional<double> approximate_entropy(const std::vector<double>& x, int m, double r);
std::optional<double> permutation_entropy(const std::vector<double>& x);

enum class SourceSignal {
    respiration_env,
    cardiac_env,
    imf_heart,
    imf_mid1,
    imf_mid2,
    acoustic,
};
inline constexpr int n_source_signals = 6;
const char* source_signal_token(SourceSignal src);

enum class FeatureFamily { stat, spectral, fractal, entropy, mfcc, hrv, respiration };

struct FeatureRegistry {
    struct Entry {
        std::string name; // "<source>.<feature>"
        SourceSignal source;
        FeatureFamily family;
    };
    std::string version;
    std::vector<Entry> entries;

    std::size_t size() const { return entries.size(); }
};

// Frozen registry: stat/spectral/fractal/entropy on all six signals, MFCC on
// the acoustic signal, HRV on the cardiac envelope, breathing descriptors on
// the respiration envelope.
const FeatureRegistry& feature_registry_v1();

// Recorded arity of registry v1; asserted by the acceptance suite.
inline constexpr std::size_t feature_registry_v1_size = 314;

struct FeatureVector {
    int patient_id = 0;
    std::string recording_id;
    int window_index = 0;
    std::vector<FeatureValue> values; // aligned to registry order
};

// One FeatureVector per window. Per-feature failures become absent values;
// nothing is imputed here.
std::vector<FeatureVector> extract_feature_matrix(const BiosignalSet& bset,
                                                  const WindowPlan& plan,
                                                  const FeatureRegistry& registry,
                                                  int patient_id,
                                                  const std::string& recording_id);

} // namespace auscult
