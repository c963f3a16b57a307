#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "auscult/features.hpp"
#include "support.hpp"

using namespace auscult;
using namespace testsupport;

namespace {

std::map<std::string, FeatureValue> as_map(const NamedValues& values) {
    std::map<std::string, FeatureValue> out;
    for (const NamedValue& v : values) out[v.name] = v.value;
    return out;
}

} // namespace

TEST_CASE("window segmentation counts") {
    CHECK(segment_windows(make_tone(5.0, 100.0, 30.0), {}).size() == 21);
    CHECK(segment_windows(make_tone(5.0, 100.0, 10.0), {}).size() == 1);
    std::vector<std::string> warnings;
    CHECK(segment_windows(make_tone(5.0, 100.0, 9.0), {}, &warnings).empty());
    CHECK(warnings.size() == 1);

    const auto windows = segment_windows(make_tone(5.0, 100.0, 30.0), {});
    CHECK(windows[0].samples.size() == 1000);
    CHECK(windows[1].samples[0] == windows[0].samples[100]); // 1 s shift
}

TEST_CASE("stat features on hand-computable inputs") {
    Signal constant;
    constant.rate_hz = 100.0;
    constant.samples.assign(500, 2.0);
    auto m = as_map(stat_features(constant));
    CHECK(m["mean"] == 2.0);
    CHECK(m["std"] == 0.0);
    CHECK(m["dynamic_range"] == 0.0);
    CHECK_FALSE(m["snr"].has_value());
    CHECK(m["slope_per_s"] == 0.0);

    Signal tiny;
    tiny.rate_hz = 1.0;
    tiny.samples = {1.0, 2.0, 3.0, 4.0};
    m = as_map(stat_features(tiny));
    CHECK(*m["mean"] == doctest::Approx(2.5));
    CHECK(*m["dynamic_range"] == doctest::Approx(3.0));
    CHECK(*m["energy"] == doctest::Approx(30.0));
    CHECK(*m["median"] == doctest::Approx(2.5));

    const Signal sine = make_tone(5.0, 100.0, 10.0); // whole periods
    m = as_map(stat_features(sine));
    CHECK(std::abs(*m["mean"]) < 1e-9);
    CHECK(*m["energy"] == doctest::Approx(sine.samples.size() / 2.0).epsilon(0.01));
}

TEST_CASE("spectral features") {
    auto m = as_map(spectral_features(make_tone(3.0, 100.0, 20.0)));
    CHECK(*m["dominant_freq_hz"] == doctest::Approx(3.0).epsilon(0.1));
    CHECK(*m["band_power_1_5"] / *m["total_power"] >= 0.9);

    Signal noise;
    noise.rate_hz = 100.0;
    noise.samples = white_noise(8000, 5);
    m = as_map(spectral_features(noise));
    CHECK(*m["spectral_centroid"] == doctest::Approx(25.0).epsilon(0.10));

    Signal zeros;
    zeros.rate_hz = 100.0;
    zeros.samples.assign(2000, 0.0);
    m = as_map(spectral_features(zeros));
    CHECK(*m["total_power"] == 0.0);
    CHECK_FALSE(m["spectral_centroid"].has_value());
    CHECK_FALSE(m["dominant_freq_hz"].has_value());
}

TEST_CASE("fractal estimators against canonical series") {
    // straight line: path length equals max distance, dimension exactly 1
    std::vector<double> line(512);
    for (std::size_t i = 0; i < line.size(); ++i) line[i] = static_cast<double>(i);
    CHECK(*katz_fd(line) == 1.0);

    const std::vector<double> noise = white_noise(4096, 31);
    CHECK(*dfa_alpha(noise) == doctest::Approx(0.5).epsilon(0.2));
    CHECK(std::abs(*dfa_alpha(noise) - 0.5) <= 0.1);

    std::vector<double> brownian(noise.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < noise.size(); ++i) {
        acc += noise[i];
        brownian[i] = acc;
    }
    CHECK(std::abs(*dfa_alpha(brownian) - 1.5) <= 0.15);

    CHECK(std::abs(*higuchi_fd(noise) - 2.0) <= 0.15);
    CHECK(*petrosian_fd(noise) > 1.0);
}

TEST_CASE("entropy features") {
    Signal constant;
    constant.rate_hz = 100.0;
    constant.samples.assign(512, 1.5);
    auto m = as_map(entropy_features(constant));
    CHECK_FALSE(m["sample_entropy"].has_value());
    CHECK(*m["zero_crossings"] == 0.0);
    CHECK(*m["hjorth_activity"] == 0.0);

    std::vector<double> ramp(512);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
    CHECK(*permutation_entropy(ramp) == 0.0);

    const int k = 10;
    // k full periods; the phase offset keeps zeros away from the endpoints
    const Signal sine = make_tone(double(k) / 4.0, 128.0, 4.0, 1.0, 0.3);
    m = as_map(entropy_features(sine));
    CHECK(*m["zero_crossings"] == 2 * k);

    Signal noise;
    noise.rate_hz = 128.0;
    noise.samples = white_noise(512, 8);
    const auto se_noise = sample_entropy(noise.samples, 2, 0.2 * std::sqrt(signal_variance(noise.samples)));
    const auto se_sine = sample_entropy(sine.samples, 2, 0.2 * std::sqrt(signal_variance(sine.samples)));
    REQUIRE(se_noise.has_value());
    REQUIRE(se_sine.has_value());
    CHECK(*se_noise > *se_sine);
}

TEST_CASE("amplitude scaling leaves shape descriptors unchanged") {
    Signal noise;
    noise.rate_hz = 100.0;
    noise.samples = white_noise(1024, 99);
    Signal doubled = noise;
    for (double& v : doubled.samples) v *= 2.0;

    const auto f1 = as_map(fractal_features(noise)), f2 = as_map(fractal_features(doubled));
    for (const char* name : {"katz_fd", "higuchi_fd", "petrosian_fd", "dfa_alpha"})
        CHECK(std::abs(*f1.at(name) - *f2.at(name)) <= 1e-9);

    const auto e1 = as_map(entropy_features(noise)), e2 = as_map(entropy_features(doubled));
    CHECK(std::abs(*e1.at("perm_entropy") - *e2.at("perm_entropy")) <= 1e-9);
    CHECK(*e1.at("zero_crossings") == *e2.at("zero_crossings"));
    // activity is amplitude-sensitive by definition
    CHECK(*e2.at("hjorth_activity") == doctest::Approx(4.0 * *e1.at("hjorth_activity")));
}

TEST_CASE("mfcc summary features") {
    Signal noise;
    noise.rate_hz = 4000.0;
    noise.samples = white_noise(40000, 21, 0.2);
    const NamedValues vals = mfcc_features(noise);
    CHECK(vals.size() == 26);

    Signal doubled = noise;
    for (double& v : doubled.samples) v *= 2.0;
    const auto m1 = as_map(vals), m2 = as_map(mfcc_features(doubled));
    CHECK(*m1.at("mfcc0_mean") != doctest::Approx(*m2.at("mfcc0_mean")).epsilon(1e-9));
    for (int c = 1; c < 13; ++c) {
        const std::string name = "mfcc" + std::to_string(c) + "_mean";
        CHECK(std::abs(*m1.at(name) - *m2.at(name)) < 1e-6);
    }
}

namespace {

Signal bump_train(double interval_s, double duration_s, double rate) {
    Signal env;
    env.rate_hz = rate;
    env.samples.assign(static_cast<std::size_t>(duration_s * rate), 0.1);
    const double sigma = 0.05;
    for (double center = interval_s / 2.0; center < duration_s; center += interval_s) {
        for (std::size_t i = 0; i < env.samples.size(); ++i) {
            const double t = static_cast<double>(i) / rate - center;
            env.samples[i] += std::exp(-t * t / (2 * sigma * sigma));
        }
    }
    return env;
}

} // namespace

TEST_CASE("beat detection on bump trains") {
    const Signal env = bump_train(0.8, 10.0, 100.0);
    const BeatSeries beats = detect_beats(env, 0.7, 3.0);
    CHECK(beats.peak_times_s.size() >= 12);
    CHECK(beats.peak_times_s.size() <= 13);
    for (double ibi : beats.ibi_ms) CHECK(std::abs(ibi - 800.0) <= 20.0);

    Signal flat;
    flat.rate_hz = 100.0;
    flat.samples.assign(1000, 0.5);
    CHECK_THROWS_AS(detect_beats(flat, 0.7, 3.0), Error);

    // sparse train is detected but lands outside the plausible heart range
    const Signal slow = bump_train(3.0, 20.0, 100.0);
    const BeatSeries slow_beats = detect_beats(slow, 0.7, 3.0);
    REQUIRE(slow_beats.ibi_ms.size() >= 3);
    for (double ibi : slow_beats.ibi_ms) CHECK(ibi > 1000.0 / 0.7);
}

TEST_CASE("hrv features: closed forms") {
    BeatSeries constant;
    for (int i = 0; i < 10; ++i) constant.peak_times_s.push_back(0.8 * i);
    for (int i = 1; i < 10; ++i) constant.ibi_ms.push_back(800.0);
    auto m = as_map(hrv_features(constant));
    CHECK(*m["hr_mean_bpm"] == doctest::Approx(75.0).epsilon(1e-9));
    CHECK(*m["sdnn_ms"] == 0.0);
    CHECK(*m["rmssd_ms"] == 0.0);
    CHECK(*m["pnn50"] == 0.0);

    BeatSeries alternating;
    double t = 0.0;
    alternating.peak_times_s.push_back(0.0);
    for (int i = 0; i < 9; ++i) {
        const double ibi = (i % 2 == 0) ? 800.0 : 860.0;
        t += ibi / 1000.0;
        alternating.peak_times_s.push_back(t);
        alternating.ibi_ms.push_back(ibi);
    }
    m = as_map(hrv_features(alternating));
    CHECK(*m["rmssd_ms"] == doctest::Approx(60.0).epsilon(1e-9));
    CHECK(*m["pnn50"] == doctest::Approx(100.0).epsilon(1e-9));

    // SD1 equals the RMS distance of Poincare points from the identity line
    Rng rng(7);
    BeatSeries random;
    random.peak_times_s.push_back(0.0);
    t = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double ibi = 800.0 + 100.0 * rng.uniform01();
        t += ibi / 1000.0;
        random.peak_times_s.push_back(t);
        random.ibi_ms.push_back(ibi);
    }
    m = as_map(hrv_features(random));
    double scatter = 0.0;
    for (std::size_t i = 0; i + 1 < random.ibi_ms.size(); ++i) {
        const double d = (random.ibi_ms[i + 1] - random.ibi_ms[i]) / std::sqrt(2.0);
        scatter += d * d;
    }
    scatter = std::sqrt(scatter / static_cast<double>(random.ibi_ms.size() - 1));
    CHECK(std::abs(*m["sd1_ms"] - scatter) <= 1e-9);

    // too few beats: everything absent
    BeatSeries few;
    few.peak_times_s = {0.0, 0.8, 1.6};
    few.ibi_ms = {800.0, 800.0};
    for (const NamedValue& v : hrv_features(few)) CHECK_FALSE(v.value.has_value());
}

TEST_CASE("hrv frequency side appears only with a 30 s span") {
    Rng rng(11);
    BeatSeries beats;
    beats.peak_times_s.push_back(0.0);
    double t = 0.0;
    while (t < 60.0) {
        const double ibi = 800.0 + 60.0 * std::sin(2.0 * M_PI * 0.1 * t) + 10.0 * rng.normal();
        t += ibi / 1000.0;
        beats.peak_times_s.push_back(t);
        beats.ibi_ms.push_back(ibi);
    }
    const auto m = as_map(hrv_features(beats));
    CHECK(m.at("lf_power").has_value());
    CHECK(m.at("hf_power").has_value());
    CHECK(*m.at("lf_power") > *m.at("hf_power")); // 0.1 Hz modulation sits in LF
}

TEST_CASE("respiration features") {
    Signal env;
    env.rate_hz = 100.0;
    env.samples.resize(1000);
    for (std::size_t i = 0; i < env.samples.size(); ++i)
        env.samples[i] = 1.0 + 0.5 * std::sin(2.0 * M_PI * 0.25 * (double(i) / 100.0));
    auto m = as_map(respiration_features(env));
    CHECK(std::abs(*m["breathing_rate_bpm"] - 15.0) <= 2.0);
    CHECK(std::abs(*m["envelope_skewness"]) <= 0.1);
    CHECK(*m["modulation_depth"] == doctest::Approx(0.5).epsilon(0.05));

    Signal constant;
    constant.rate_hz = 100.0;
    constant.samples.assign(1000, 0.7);
    m = as_map(respiration_features(constant));
    CHECK_FALSE(m["breathing_rate_bpm"].has_value());
    CHECK(*m["modulation_depth"] == 0.0);
}

TEST_CASE("registry v1 is frozen and matches the family emitters") {
    const FeatureRegistry& reg = feature_registry_v1();
    CHECK(reg.version == "v1");
    CHECK(reg.size() == feature_registry_v1_size);

    std::set<std::string> names;
    for (const auto& e : reg.entries) CHECK(names.insert(e.name).second);

    // emitted names align with the registry, family by family
    const Signal probe = make_tone(3.0, 100.0, 12.0);
    const auto check_family = [&reg](SourceSignal src, FeatureFamily fam,
                                     const NamedValues& vals) {
        std::vector<std::string> expected;
        for (const auto& e : reg.entries)
            if (e.source == src && e.family == fam) expected.push_back(e.name);
        REQUIRE(expected.size() == vals.size());
        const std::string prefix = std::string(source_signal_token(src)) + ".";
        for (std::size_t i = 0; i < vals.size(); ++i)
            CHECK(expected[i] == prefix + vals[i].name);
    };
    check_family(SourceSignal::acoustic, FeatureFamily::stat, stat_features(probe));
    check_family(SourceSignal::acoustic, FeatureFamily::spectral, spectral_features(probe));
    check_family(SourceSignal::acoustic, FeatureFamily::fractal, fractal_features(probe));
    check_family(SourceSignal::acoustic, FeatureFamily::entropy, entropy_features(probe));
    check_family(SourceSignal::acoustic, FeatureFamily::mfcc, mfcc_features(probe));
    check_family(SourceSignal::cardiac_env, FeatureFamily::hrv, hrv_features(BeatSeries{}));
    check_family(SourceSignal::respiration_env, FeatureFamily::respiration,
                 respiration_features(probe));
}

namespace {

BiosignalSet tiny_bioset(double duration_s, double rate) {
    BiosignalSet b;
    const auto fill = [&](double f, double offset) {
        Signal s;
        s.rate_hz = rate;
        s.samples.resize(static_cast<std::size_t>(duration_s * rate));
        for (std::size_t i = 0; i < s.samples.size(); ++i)
            s.samples[i] = offset + std::sin(2.0 * M_PI * f * (double(i) / rate));
        return s;
    };
    b.respiration_env = fill(0.25, 1.0);
    b.cardiac_env = fill(1.2, 1.0);
    b.imf_heart = fill(2.0, 0.0);
    b.imf_mid1 = fill(7.0, 0.0);
    b.imf_mid2 = fill(15.0, 0.0);
    b.acoustic = fill(300.0, 0.0);
    return b;
}

} // namespace

TEST_CASE("feature matrix extraction: shape, determinism, trailing samples") {
    const FeatureRegistry& reg = feature_registry_v1();
    const BiosignalSet bset = tiny_bioset(30.0, 400.0);
    const auto rows = extract_feature_matrix(bset, {}, reg, 42, "rec1");
    CHECK(rows.size() == 21);
    for (const FeatureVector& fv : rows) {
        CHECK(fv.values.size() == reg.size());
        CHECK(fv.patient_id == 42);
        for (const FeatureValue& v : fv.values)
            if (v) CHECK(std::isfinite(*v));
    }

    const auto again = extract_feature_matrix(bset, {}, reg, 42, "rec1");
    for (std::size_t r = 0; r < rows.size(); ++r)
        CHECK(rows[r].values == again[r].values);

    // appending less than one step of samples must not change any window
    BiosignalSet padded = tiny_bioset(30.0, 400.0);
    const auto pad = [](Signal& s) {
        const std::size_t extra = static_cast<std::size_t>(0.5 * s.rate_hz);
        for (std::size_t i = 0; i < extra; ++i) s.samples.push_back(0.123);
    };
    pad(padded.respiration_env);
    pad(padded.cardiac_env);
    pad(padded.imf_heart);
    pad(padded.imf_mid1);
    pad(padded.imf_mid2);
    pad(padded.acoustic);
    const auto padded_rows = extract_feature_matrix(padded, {}, reg, 42, "rec1");
    REQUIRE(padded_rows.size() == rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        CHECK(padded_rows[r].values == rows[r].values);
}
