#include <doctest.h>

#include <cmath>

#include "auscult/dsp.hpp"
#include "auscult/fft.hpp"
#include "support.hpp"

using namespace auscult;
using namespace testsupport;

TEST_CASE("fft round trip and known line") {
    Signal tone = make_tone(3.0, 100.0, 2.0);
    auto spec = fft_real(tone.samples);
    auto back = fft(spec, true);
    for (std::size_t i = 0; i < tone.samples.size(); ++i)
        CHECK(back[i].real() == doctest::Approx(tone.samples[i]).epsilon(1e-9));

    // non power of two goes through the Bluestein path
    std::vector<double> odd(101);
    for (std::size_t i = 0; i < odd.size(); ++i) odd[i] = std::sin(0.37 * double(i));
    auto spec_odd = fft_real(odd);
    auto back_odd = fft(spec_odd, true);
    for (std::size_t i = 0; i < odd.size(); ++i)
        CHECK(back_odd[i].real() == doctest::Approx(odd[i]).epsilon(1e-9));
}

TEST_CASE("lowpass design: symmetry, DC gain, stopband") {
    const FirFilter f = design_lowpass_fir(1800.0, 101, 8000.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < f.taps.size(); ++i) {
        CHECK(f.taps[i] == f.taps[f.taps.size() - 1 - i]);
        sum += f.taps[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
    CHECK(fir_response(f.taps, 0.0, 8000.0) == doctest::Approx(1.0).epsilon(1e-6));

    // stopband at least 40 dB down from 2200 Hz up
    for (double freq = 2200.0; freq <= 3900.0; freq += 100.0)
        CHECK(20.0 * std::log10(fir_response(f.taps, freq, 8000.0)) < -40.0);

    CHECK_THROWS_AS(design_lowpass_fir(4000.0, 101, 8000.0), Error);
    CHECK_THROWS_AS(design_lowpass_fir(1800.0, 100, 8000.0), Error);
}

TEST_CASE("filter_signal: impulse centering, tones, linearity") {
    const FirFilter f = design_lowpass_fir(1800.0, 101, 8000.0);

    Signal impulse;
    impulse.rate_hz = 8000.0;
    impulse.samples.assign(401, 0.0);
    impulse.samples[200] = 1.0;
    const Signal out = filter_signal(impulse, f);
    REQUIRE(out.samples.size() == impulse.samples.size());
    for (int k = -50; k <= 50; ++k)
        CHECK(out.samples[static_cast<std::size_t>(200 + k)] ==
              doctest::Approx(f.taps[static_cast<std::size_t>(50 + k)]).epsilon(1e-12));

    const Signal pass = filter_signal(make_tone(100.0, 8000.0, 2.0), f);
    CHECK(fit_sine_amplitude(pass, 100.0) == doctest::Approx(1.0).epsilon(0.01));

    const Signal stop = filter_signal(make_tone(3000.0, 8000.0, 2.0), f);
    CHECK(fit_sine_amplitude(stop, 3000.0) < 0.01); // >= 40 dB down

    // linearity
    Signal x = make_tone(200.0, 8000.0, 1.0);
    Signal y = make_tone(700.0, 8000.0, 1.0, 0.5);
    Signal combo = x;
    for (std::size_t i = 0; i < combo.samples.size(); ++i)
        combo.samples[i] = 2.0 * x.samples[i] + 3.0 * y.samples[i];
    const Signal fx = filter_signal(x, f), fy = filter_signal(y, f),
                 fc = filter_signal(combo, f);
    double max_rel = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < fc.samples.size(); ++i) {
        max_rel = std::max(max_rel,
                           std::abs(fc.samples[i] - 2.0 * fx.samples[i] - 3.0 * fy.samples[i]));
        scale = std::max(scale, std::abs(fc.samples[i]));
    }
    CHECK(max_rel <= 1e-9 * std::max(scale, 1.0));

    Signal wrong_rate = make_tone(10.0, 4000.0, 1.0);
    CHECK_THROWS_AS(filter_signal(wrong_rate, f), Error);
}

TEST_CASE("resample: rates, identity, tone fidelity, alias rejection") {
    const Signal in = make_tone(500.0, 44100.0, 2.0);
    const Signal out = resample(in, 4000.0);
    CHECK(out.rate_hz == 4000.0);
    const double expected = std::round(in.samples.size() * 4000.0 / 44100.0);
    CHECK(std::abs(static_cast<double>(out.samples.size()) - expected) <= 1.0);
    CHECK(fit_sine_amplitude(out, 500.0) == doctest::Approx(1.0).epsilon(0.05));

    const Signal same = resample(in, 44100.0);
    CHECK(same.samples == in.samples);

    const Signal alias_in = make_tone(2500.0, 44100.0, 2.0);
    const Signal alias_out = resample(alias_in, 4000.0);
    double residual = 0.0;
    const std::size_t skip = alias_out.samples.size() / 10;
    for (std::size_t i = skip; i + skip < alias_out.samples.size(); ++i)
        residual = std::max(residual, std::abs(alias_out.samples[i]));
    CHECK(20.0 * std::log10(std::max(residual, 1e-12)) < -40.0);
}

TEST_CASE("resample round trip preserves a mid-band tone") {
    const Signal in = make_tone(300.0, 4000.0, 2.0);
    const Signal back = resample(resample(in, 3000.0), 4000.0);
    CHECK(fit_sine_amplitude(back, 300.0) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("welch psd: spectral line, Parseval, noise variance") {
    const Signal tone = make_tone(3.0, 100.0, 10.0);
    const PowerSpectrum psd = welch_psd(tone, 400, 0.5);
    std::size_t peak = 0;
    for (std::size_t k = 1; k < psd.density.size(); ++k)
        if (psd.density[k] > psd.density[peak]) peak = k;
    CHECK(psd.freqs_hz[peak] == doctest::Approx(3.0).epsilon(0.05));
    CHECK(psd.total_power() == doctest::Approx(0.5).epsilon(0.05));
    CHECK(psd.freqs_hz.front() == 0.0);
    CHECK(psd.freqs_hz.back() == doctest::Approx(50.0));
    for (double d : psd.density) CHECK(d >= 0.0);

    Signal noise;
    noise.rate_hz = 100.0;
    noise.samples = white_noise(6000, 77);
    const PowerSpectrum npsd = welch_psd(noise, 400, 0.5);
    CHECK(npsd.total_power() == doctest::Approx(1.0).epsilon(0.10));

    CHECK_THROWS_AS(welch_psd(tone, tone.samples.size() + 1, 0.5), Error);
}

TEST_CASE("band power: line capture, Nyquist clamp, leakage bound") {
    const Signal tone = make_tone(3.0, 100.0, 10.0);
    const PowerSpectrum psd = welch_psd(tone, 400, 0.5);
    const double total = psd.total_power();
    CHECK(band_power(psd, 1.0, 5.0) / total >= 0.95);
    CHECK(band_power(psd, 60.0, 80.0) == 0.0);
    CHECK(band_power(psd, 0.1, 1.5) / total <= 0.05);
}

TEST_CASE("amplitude envelope recovers AM and flat tones") {
    const double rate = 2000.0;
    Signal am;
    am.rate_hz = rate;
    am.samples.resize(static_cast<std::size_t>(rate * 6.0));
    for (std::size_t i = 0; i < am.samples.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        am.samples[i] = std::sin(2.0 * M_PI * 300.0 * t) *
                        (1.0 + 0.5 * std::sin(2.0 * M_PI * 1.0 * t));
    }
    const Signal env = amplitude_envelope(am, 5.0);
    REQUIRE(env.samples.size() == am.samples.size());
    double max_err = 0.0;
    const std::size_t skip = static_cast<std::size_t>(rate); // 1 s edges
    for (std::size_t i = skip; i + skip < env.samples.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        const double expected = 1.0 + 0.5 * std::sin(2.0 * M_PI * 1.0 * t);
        max_err = std::max(max_err, std::abs(env.samples[i] - expected));
    }
    CHECK(max_err <= 0.05);

    Signal zeros;
    zeros.rate_hz = rate;
    zeros.samples.assign(4000, 0.0);
    const Signal zero_env = amplitude_envelope(zeros, 5.0);
    for (double v : zero_env.samples) CHECK(v == 0.0);

    const Signal pure = make_tone(300.0, rate, 4.0);
    const Signal pure_env = amplitude_envelope(pure, 5.0);
    for (std::size_t i = skip; i + skip < pure_env.samples.size(); ++i)
        CHECK(std::abs(pure_env.samples[i] - 1.0) <= 0.02);
}

TEST_CASE("mfcc: frame count, determinism, scaling shifts only c0") {
    Signal noise;
    noise.rate_hz = 4000.0;
    noise.samples = white_noise(8000, 1234, 0.3);

    const std::size_t frame = 100, hop = 40;
    const auto coeffs = mfcc(noise, 26, 13, frame, hop);
    CHECK(coeffs.size() == (noise.samples.size() - frame) / hop + 1);
    CHECK(coeffs[0].size() == 13);

    // hop-periodic content puts identical samples in successive frames
    Signal rep;
    rep.rate_hz = 4000.0;
    rep.samples.resize(frame + hop * 2);
    for (std::size_t i = 0; i < rep.samples.size(); ++i)
        rep.samples[i] = std::sin(2.0 * M_PI * static_cast<double>(i % hop) / hop);
    const auto rep_coeffs = mfcc(rep, 26, 13, frame, hop);
    REQUIRE(rep_coeffs.size() >= 2);
    for (std::size_t c = 0; c < 13; ++c)
        CHECK(rep_coeffs[0][c] == doctest::Approx(rep_coeffs[1][c]).epsilon(1e-12));

    Signal doubled = noise;
    for (double& v : doubled.samples) v *= 2.0;
    const auto coeffs2 = mfcc(doubled, 26, 13, frame, hop);
    for (std::size_t f = 0; f < coeffs.size(); ++f) {
        CHECK(coeffs2[f][0] != doctest::Approx(coeffs[f][0]).epsilon(1e-9));
        for (std::size_t c = 1; c < 13; ++c)
            CHECK(std::abs(coeffs2[f][c] - coeffs[f][c]) < 1e-6);
    }

    // stationary noise: frame scatter small relative to mean c0
    std::vector<double> c0(coeffs.size());
    for (std::size_t f = 0; f < coeffs.size(); ++f) c0[f] = coeffs[f][0];
    const double mean_c0 = signal_mean(c0);
    const double sd_c0 = std::sqrt(signal_variance(c0));
    CHECK(sd_c0 / std::abs(mean_c0) <= 0.2);

    CHECK_THROWS_AS(mfcc(noise, 26, 13, noise.samples.size() + 1, hop), Error);
}
