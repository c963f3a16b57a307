#include "auscult/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "auscult/errors.hpp"
#include "auscult/rng.hpp"
#include "auscult/signal.hpp"
#include "auscult/wav.hpp"

namespace auscult {

namespace {

constexpr double k_rate_hz = 4000.0;
constexpr double k_duration_s = 32.0;
constexpr int k_first_patient = 501;

struct SubjectParams {
    bool diseased = false;
    double breath_hz = 0.0;
    double heart_hz = 0.0;
    double carrier_hz = 0.0;   // respiration-band carrier, 20-100 Hz
    double pip_hz = 0.0;       // cardiac burst tone, 250-1000 Hz
    double wheeze_hz = 0.0;    // 0 = none
    double crackle_rate_hz = 0.0;
    double heart_jitter = 0.0; // fractional beat interval jitter
    double age = 0.0;
    double bmi = 0.0;
    bool male = false;
};

SubjectParams draw_params(int index, Rng& rng) {
    SubjectParams p;
    p.diseased = index % 2 == 1;
    if (!p.diseased) {
        p.breath_hz = rng.uniform(0.18, 0.24);
        p.heart_hz = rng.uniform(1.00, 1.25);
        p.carrier_hz = rng.uniform(55.0, 70.0);
        p.pip_hz = rng.uniform(540.0, 640.0);
        p.wheeze_hz = 0.0;
        p.crackle_rate_hz = 0.0;
        p.heart_jitter = 0.06;
        p.age = rng.uniform(25.0, 45.0);
        p.bmi = rng.uniform(20.0, 26.0);
    } else {
        p.breath_hz = rng.uniform(0.40, 0.50);
        p.heart_hz = rng.uniform(1.70, 2.00);
        p.carrier_hz = rng.uniform(35.0, 50.0);
        p.pip_hz = rng.uniform(700.0, 820.0);
        p.wheeze_hz = rng.uniform(380.0, 430.0);
        p.crackle_rate_hz = 8.0;
        p.heart_jitter = 0.02;
        p.age = rng.uniform(55.0, 80.0);
        p.bmi = rng.uniform(26.0, 34.0);
    }
    p.male = (index / 2) % 2 == 0;
    return p;
}

Signal synthesize(const SubjectParams& p, Rng& rng) {
    const std::size_t n = static_cast<std::size_t>(k_rate_hz * k_duration_s);
    Signal s;
    s.rate_hz = k_rate_hz;
    s.samples.assign(n, 0.0);

    const double breath_phase = rng.uniform(0.0, 2.0 * M_PI);

    // respiration-band carrier, amplitude-modulated by breathing
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / k_rate_hz;
        const double am = 1.0 + 0.8 * std::sin(2.0 * M_PI * p.breath_hz * t + breath_phase);
        s.samples[i] += 0.28 * am * std::sin(2.0 * M_PI * p.carrier_hz * t);
    }

    // cardiac pips: gaussian-windowed tone bursts with slightly jittered beats
    const double sigma_s = 0.030;
    double beat_t = rng.uniform(0.0, 1.0 / p.heart_hz);
    while (beat_t < k_duration_s) {
        const std::size_t lo = static_cast<std::size_t>(
            std::max(0.0, (beat_t - 4.0 * sigma_s) * k_rate_hz));
        const std::size_t hi = std::min<std::size_t>(
            n, static_cast<std::size_t>((beat_t + 4.0 * sigma_s) * k_rate_hz));
        for (std::size_t i = lo; i < hi; ++i) {
            const double t = static_cast<double>(i) / k_rate_hz - beat_t;
            s.samples[i] += 0.5 * std::exp(-t * t / (2.0 * sigma_s * sigma_s)) *
                            std::sin(2.0 * M_PI * p.pip_hz * t);
        }
        const double interval = (1.0 / p.heart_hz) *
                                (1.0 + p.heart_jitter * (2.0 * rng.uniform01() - 1.0));
        beat_t += interval;
    }

    // wheeze: continuous tone breathing-modulated (diseased class only)
    if (p.wheeze_hz > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / k_rate_hz;
            const double am =
                1.0 + 0.8 * std::sin(2.0 * M_PI * p.breath_hz * t + breath_phase);
            s.samples[i] += 0.12 * am * std::sin(2.0 * M_PI * p.wheeze_hz * t);
        }
    }

    // crackles: sparse decaying wideband transients
    if (p.crackle_rate_hz > 0.0) {
        const std::size_t n_crackles =
            static_cast<std::size_t>(p.crackle_rate_hz * k_duration_s);
        for (std::size_t c = 0; c < n_crackles; ++c) {
            const std::size_t pos =
                static_cast<std::size_t>(rng.uniform01() * static_cast<double>(n - 64));
            const double amp = 0.15 + 0.1 * rng.uniform01();
            for (std::size_t j = 0; j < 48 && pos + j < n; ++j) {
                const double decay = std::exp(-static_cast<double>(j) / 8.0);
                s.samples[pos + j] += amp * decay * rng.normal();
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i) s.samples[i] += 0.01 * rng.normal();

    double peak = 0.0;
    for (double v : s.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
        for (double& v : s.samples) v *= 0.9 / peak;
    return s;
}

} // namespace

void generate_synthetic_dataset(const std::filesystem::path& out_dir, int n_subjects,
                                std::uint64_t seed) {
    if (n_subjects < 2)
        raise(Errc::config_error, "synthetic dataset needs at least 2 subjects");
    std::filesystem::create_directories(out_dir);

    std::ofstream diagnosis(out_dir / "synthetic_diagnosis.txt");
    std::ofstream demographics(out_dir / "synthetic_demographic_info.txt");
    if (!diagnosis || !demographics)
        raise(Errc::io_error, "cannot write metadata tables in " + out_dir.string());

    char buf[128];
    for (int i = 0; i < n_subjects; ++i) {
        const int pid = k_first_patient + i;
        Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(pid));
        const SubjectParams p = draw_params(i, rng);

        const Signal audio = synthesize(p, rng);
        const std::string stem = std::to_string(pid) + "_1b1_Al_sc_SynthScope";
        write_wav_pcm16(out_dir / (stem + ".wav"), audio);

        // cycle annotations at breath-period boundaries
        std::ofstream ann(out_dir / (stem + ".txt"));
        const double period = 1.0 / p.breath_hz;
        for (double t = 0.0; t + period <= k_duration_s; t += period) {
            std::snprintf(buf, sizeof(buf), "%.3f\t%.3f\t%d\t%d\n", t, t + period,
                          p.crackle_rate_hz > 0.0 ? 1 : 0, p.wheeze_hz > 0.0 ? 1 : 0);
            ann << buf;
        }

        diagnosis << pid << '\t' << (p.diseased ? "COPD" : "Healthy") << '\n';
        std::snprintf(buf, sizeof(buf), "%d\t%.1f\t%s\t%.1f\tNA\tNA\n", pid, p.age,
                      p.male ? "M" : "F", p.bmi);
        demographics << buf;
    }
}

} // namespace auscult
