#include <doctest.h>

#include <cmath>

#include "auscult/dsp.hpp"
#include "auscult/emd.hpp"
#include "support.hpp"

using namespace auscult;
using namespace testsupport;

TEST_CASE("constant signal yields no components") {
    Signal s;
    s.rate_hz = 100.0;
    s.samples.assign(512, 2.5);
    const ImfSet set = emd_decompose(s);
    CHECK(set.imfs.empty());
    CHECK(set.residual.samples == s.samples);
}

TEST_CASE("single tone is captured by the first component") {
    const Signal tone = make_tone(5.0, 100.0, 60.0);
    const ImfSet set = emd_decompose(tone);
    REQUIRE(!set.imfs.empty());
    CHECK(pearson(set.imfs[0].samples, tone.samples) >= 0.99);

    double residual_l2 = 0.0, input_l2 = 0.0;
    for (std::size_t i = 0; i < tone.samples.size(); ++i) {
        residual_l2 += set.residual.samples[i] * set.residual.samples[i];
        input_l2 += tone.samples[i] * tone.samples[i];
    }
    CHECK(std::sqrt(residual_l2 / input_l2) <= 0.05);
}

TEST_CASE("well separated tones land in separate components") {
    Signal mix;
    mix.rate_hz = 1000.0;
    mix.samples.resize(8000);
    std::vector<double> hi(8000), lo(8000);
    for (std::size_t i = 0; i < mix.samples.size(); ++i) {
        const double t = static_cast<double>(i) / 1000.0;
        hi[i] = std::sin(2.0 * M_PI * 50.0 * t);
        lo[i] = std::sin(2.0 * M_PI * 5.0 * t);
        mix.samples[i] = hi[i] + lo[i];
    }
    const ImfSet set = emd_decompose(mix);
    REQUIRE(set.imfs.size() >= 2);
    CHECK(pearson(set.imfs[0].samples, hi) >= 0.95);
    double best_lo = 0.0;
    for (std::size_t k = 1; k < set.imfs.size(); ++k)
        best_lo = std::max(best_lo, pearson(set.imfs[k].samples, lo));
    CHECK(best_lo >= 0.95);
}

TEST_CASE("reconstruction, component property, ordering, determinism") {
    Signal s;
    s.rate_hz = 500.0;
    s.samples.resize(5000);
    const std::vector<double> noise = white_noise(s.samples.size(), 42, 0.1);
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        const double t = static_cast<double>(i) / 500.0;
        s.samples[i] = std::sin(2.0 * M_PI * 60.0 * t) +
                       0.7 * std::sin(2.0 * M_PI * 8.0 * t) + noise[i];
    }
    const ImfSet set = emd_decompose(s);
    REQUIRE(!set.imfs.empty());

    std::vector<double> sum = set.residual.samples;
    for (const Signal& imf : set.imfs)
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += imf.samples[i];
    CHECK(relative_l2_error(sum, s.samples) <= 1e-6);

    for (const Signal& imf : set.imfs) CHECK(satisfies_imf_property(imf.samples));

    for (std::size_t k = 0; k + 1 < set.imfs.size(); ++k) {
        const int zc_hi = count_zero_crossings(set.imfs[k].samples);
        const int zc_lo = count_zero_crossings(set.imfs[k + 1].samples);
        CHECK(zc_hi >= zc_lo);
    }

    const ImfSet again = emd_decompose(s);
    REQUIRE(again.imfs.size() == set.imfs.size());
    for (std::size_t k = 0; k < set.imfs.size(); ++k)
        CHECK(again.imfs[k].samples == set.imfs[k].samples);
    CHECK(again.residual.samples == set.residual.samples);
}

TEST_CASE("band selection by in-band power fraction") {
    ImfSet set;
    set.imfs.push_back(make_tone(3.0, 100.0, 40.0));
    set.imfs.push_back(make_tone(0.5, 100.0, 40.0));
    set.residual.rate_hz = 100.0;
    set.residual.samples.assign(4000, 0.0);

    const std::vector<Band> bands(physio_bands.begin(), physio_bands.end());
    const BandSelection sel = select_imfs_by_band(set, bands);
    CHECK(sel.imf_index[1] == 0); // 3 Hz into (1, 5)
    CHECK(sel.imf_index[0] == 1); // 0.5 Hz into (0.1, 1.5)
    CHECK(sel.in_band_fraction[1] >= 0.9);

    // broadband noise concentrates in no physiological band
    ImfSet flat;
    Signal noise;
    noise.rate_hz = 8000.0;
    noise.samples = white_noise(32000, 9);
    flat.imfs.push_back(noise);
    flat.residual.rate_hz = 8000.0;
    flat.residual.samples.assign(noise.samples.size(), 0.0);
    const BandSelection flat_sel = select_imfs_by_band(flat, bands);
    for (std::size_t b = 0; b < bands.size(); ++b) CHECK(flat_sel.imf_index[b] == -1);
}

namespace {

// Lung-sound surrogate with known modulation rates: a respiration-band
// carrier AM-modulated by breathing plus cardiac tone bursts.
Signal surrogate(double breath_hz, double heart_hz, double rate, double duration_s) {
    Signal s;
    s.rate_hz = rate;
    s.samples.resize(static_cast<std::size_t>(rate * duration_s));
    Rng rng(2024);
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        const double breath = 1.0 + 0.8 * std::sin(2.0 * M_PI * breath_hz * t);
        s.samples[i] = 0.4 * breath * std::sin(2.0 * M_PI * 60.0 * t) + 0.01 * rng.normal();
    }
    const double sigma = 0.03;
    for (double beat = 0.5; beat < duration_s; beat += 1.0 / heart_hz) {
        const std::size_t lo =
            static_cast<std::size_t>(std::max(0.0, (beat - 4 * sigma) * rate));
        const std::size_t hi = std::min<std::size_t>(
            s.samples.size(), static_cast<std::size_t>((beat + 4 * sigma) * rate));
        for (std::size_t i = lo; i < hi; ++i) {
            const double t = static_cast<double>(i) / rate - beat;
            s.samples[i] += 0.5 * std::exp(-t * t / (2 * sigma * sigma)) *
                            std::sin(2.0 * M_PI * 600.0 * t);
        }
    }
    return s;
}

double dominant_modulation_hz(const Signal& env, double lo, double hi) {
    const PowerSpectrum psd = welch_psd(env, env.samples.size(), 0.0);
    return dominant_frequency(psd, lo, hi);
}

} // namespace

TEST_CASE("biosignal derivation recovers breathing and cardiac rates") {
    const Signal s = surrogate(0.25, 1.2, 4000.0, 30.0);
    BiosignalConfig cfg;
    const BiosignalSet bset = derive_biosignals(s, cfg);

    const Signal* all[] = {&bset.respiration_env, &bset.cardiac_env, &bset.imf_heart,
                           &bset.imf_mid1,        &bset.imf_mid2,    &bset.acoustic};
    for (const Signal* sig : all) {
        CHECK(sig->rate_hz == s.rate_hz);
        CHECK(sig->samples.size() == s.samples.size());
    }

    CHECK(std::abs(dominant_modulation_hz(bset.respiration_env, 0.1, 1.5) - 0.25) <= 0.1);
    CHECK(std::abs(dominant_modulation_hz(bset.cardiac_env, 0.5, 3.0) - 1.2) <= 0.2);

    // five physiological signals concentrate below 25 Hz
    const Signal* physio[] = {&bset.respiration_env, &bset.cardiac_env, &bset.imf_heart,
                              &bset.imf_mid1, &bset.imf_mid2};
    for (const Signal* sig : physio) {
        const std::size_t segment = std::min<std::size_t>(
            sig->samples.size(), static_cast<std::size_t>(8.0 * sig->rate_hz));
        const PowerSpectrum psd = welch_psd(*sig, segment, 0.5);
        const double total = psd.total_power();
        if (total <= 0.0) continue;
        CHECK(band_power(psd, 0.0, 25.0) / total >= 0.8);
    }
}

TEST_CASE("silence cannot be decomposed") {
    Signal zeros;
    zeros.rate_hz = 4000.0;
    zeros.samples.assign(40000, 0.0);
    CHECK_THROWS_AS(derive_biosignals(zeros), Error);
}
