#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "auscult/dataset.hpp"
#include "auscult/wav.hpp"
#include "support.hpp"

using namespace auscult;
using namespace testsupport;

TEST_CASE("recording filenames parse and round-trip") {
    const RecordingMeta m = parse_recording_filename("101_1b1_Al_sc_Meditron.wav");
    CHECK(m.patient_id == 101);
    CHECK(m.recording_index == "1b1");
    CHECK(m.chest_location == ChestLocation::Al);
    CHECK(m.acquisition_mode == AcquisitionMode::single_channel);
    CHECK(m.device == "Meditron");
    CHECK(format_recording_filename(m) == "101_1b1_Al_sc_Meditron.wav");

    const RecordingMeta m2 = parse_recording_filename("226_1b1_Pl_sc_LittC2SE.wav");
    CHECK(m2.patient_id == 226);
    CHECK(m2.chest_location == ChestLocation::Pl);
    CHECK(m2.device == "LittC2SE");
    CHECK(format_recording_filename(m2) == "226_1b1_Pl_sc_LittC2SE.wav");

    CHECK_THROWS_AS(parse_recording_filename("101_Al.wav"), Error);
    CHECK_THROWS_AS(parse_recording_filename("101_1b1_XX_sc_Meditron.wav"), Error);
    CHECK_THROWS_AS(parse_recording_filename("abc_1b1_Al_sc_Meditron.wav"), Error);
}

TEST_CASE("wav decoding: PCM16 scaling, float32 identity, failure modes") {
    // hand-built PCM16 container, all samples = 16384
    Signal half;
    half.rate_hz = 44100.0;
    half.samples.assign(44100, 16384.0 / 32767.0); // encoder clamps via 32767
    // build via encoder then patch the payload to exactly 16384
    std::vector<std::uint8_t> bytes = encode_wav_pcm16(half);
    for (std::size_t i = 44; i + 1 < bytes.size(); i += 2) {
        bytes[i] = 0x00;
        bytes[i + 1] = 0x40; // 16384 little-endian
    }
    const Signal decoded = decode_wav(bytes);
    CHECK(decoded.rate_hz == 44100.0);
    CHECK(decoded.samples.size() == 44100);
    for (double v : decoded.samples) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));

    // float32 decodes bit-exactly
    Signal quarter;
    quarter.rate_hz = 4000.0;
    quarter.samples.assign(100, 0.25);
    const Signal fdec = decode_wav(encode_wav_float32(quarter));
    for (double v : fdec.samples) CHECK(v == 0.25);

    // zero-length data chunk: empty signal, rejected by the invariant later
    Signal empty;
    empty.rate_hz = 4000.0;
    const std::vector<std::uint8_t> empty_bytes = encode_wav_float32(empty);
    const Signal edec = decode_wav(empty_bytes);
    CHECK(edec.samples.empty());
    CHECK_THROWS_AS(validate_signal(edec), Error);

    std::vector<std::uint8_t> garbage(16, 0x42);
    CHECK_THROWS_AS(decode_wav(garbage), Error);

    // unsupported codec id
    std::vector<std::uint8_t> alaw = encode_wav_pcm16(quarter);
    alaw[20] = 6; // format tag
    CHECK_THROWS_AS(decode_wav(alaw), Error);
}

TEST_CASE("cycle annotations") {
    const auto cycles = parse_cycle_annotations("0.036\t0.579\t0\t0");
    REQUIRE(cycles.size() == 1);
    CHECK(cycles[0].begin_s == doctest::Approx(0.036));
    CHECK(cycles[0].end_s == doctest::Approx(0.579));
    CHECK_FALSE(cycles[0].crackles);
    CHECK_FALSE(cycles[0].wheezes);

    CHECK_THROWS_AS(parse_cycle_annotations("1.0 0.5 0 0"), Error);
    CHECK_THROWS_AS(parse_cycle_annotations("0.1 0.5 2 0"), Error);
    CHECK(parse_cycle_annotations("").empty());

    const auto multi = parse_cycle_annotations("0.0 1.5 1 0\n1.5 3.2 0 1\n");
    REQUIRE(multi.size() == 2);
    CHECK(multi[0].crackles);
    CHECK(multi[1].wheezes);
}

TEST_CASE("metadata tables: diagnoses, child bmi, error modes") {
    const std::string diagnosis = "101\tHealthy\n150\tCOPD\n160\tURTI\n";
    const std::string demographics =
        "101 62.0 M 28.4 NA NA\n"
        "150 3.0 M NA 14.6 0.98\n"
        "160 70.0 F 33.0 NA NA\n";
    const auto info = parse_metadata_tables(diagnosis, demographics);
    REQUIRE(info.size() == 3);
    CHECK(info.at(101).diagnosis == Diagnosis::Healthy);
    CHECK(info.at(101).age_years == doctest::Approx(62.0));
    CHECK(info.at(101).sex == Sex::male);
    CHECK(info.at(101).bmi == doctest::Approx(28.4));
    CHECK(info.at(150).bmi == doctest::Approx(14.6 / (0.98 * 0.98)).epsilon(1e-9));
    CHECK(info.at(160).sex == Sex::female);

    CHECK_THROWS_AS(parse_metadata_tables("999 Flu\n", ""), Error);
    CHECK_THROWS_AS(parse_metadata_tables("1 Healthy\n1 COPD\n", ""), Error);
}

TEST_CASE("assemble_dataset builds subjects and the manifest") {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "auscult_test_ingest";
    fs::remove_all(root);
    fs::create_directories(root);

    const Signal tone = make_tone(100.0, 4000.0, 1.0, 0.5);
    write_wav_pcm16(root / "7_1b1_Al_sc_TestScope.wav", tone);
    write_wav_pcm16(root / "7_1b2_Pr_sc_TestScope.wav", tone);
    {
        std::ofstream ann(root / "7_1b1_Al_sc_TestScope.txt");
        ann << "0.0\t0.6\t0\t0\n0.6\t1.4\t1\t0\n"; // second cycle end past audio
        std::ofstream diag(root / "patient_diagnosis.txt");
        diag << "7\tCOPD\n";
        std::ofstream demo(root / "demographic_info.txt");
        demo << "7 55.0 F 31.0 NA NA\n";
    }

    IngestReport report;
    const Dataset ds = assemble_dataset(root, &report);
    REQUIRE(ds.subjects.size() == 1);
    CHECK(ds.subjects[0].patient_id == 7);
    CHECK(ds.subjects[0].diagnosis == Diagnosis::COPD);
    CHECK(ds.subjects[0].recordings.size() == 2);
    CHECK(ds.recording_count() == 2);
    REQUIRE(ds.subjects[0].recordings[0].cycles.size() == 2);
    CHECK(ds.subjects[0].recordings[0].cycles[1].end_s == doctest::Approx(1.0));
    CHECK(!report.warnings.empty()); // the clamp is reported

    std::ostringstream manifest;
    write_manifest(manifest, ds);
    CHECK(manifest.str().find("7\tCOPD\t55\tF\t31\t2") != std::string::npos);

    // no diagnosis table at all
    const fs::path bare = fs::temp_directory_path() / "auscult_test_bare";
    fs::remove_all(bare);
    fs::create_directories(bare);
    write_wav_pcm16(bare / "9_1b1_Al_sc_TestScope.wav", tone);
    CHECK_THROWS_AS(assemble_dataset(bare), Error);

    fs::remove_all(root);
    fs::remove_all(bare);
}

TEST_CASE("class labels across tasks") {
    const TaskSpec six{TaskKind::six_class, {}};
    const TaskSpec four{TaskKind::four_class, {}};
    const TaskSpec healthy{TaskKind::binary_healthy, {}};
    const TaskSpec copd{TaskKind::binary_copd, {}};

    CHECK(class_label(Diagnosis::COPD, six) == 3); // dense form of table label 4
    CHECK(class_label(Diagnosis::Pneumonia, six) == 0);
    CHECK(class_label(Diagnosis::LRTI, six) == 5);
    CHECK_FALSE(class_label(Diagnosis::Asthma, six).has_value());
    CHECK_FALSE(class_label(Diagnosis::Healthy, six).has_value());

    CHECK(class_label(Diagnosis::URTI, four) == class_label(Diagnosis::LRTI, four));
    CHECK(class_label(Diagnosis::Bronchiolitis, four) ==
          class_label(Diagnosis::Bronchiectasis, four));
    CHECK_FALSE(class_label(Diagnosis::Asthma, four).has_value());

    CHECK(class_label(Diagnosis::Healthy, healthy) == 0);
    CHECK(class_label(Diagnosis::Asthma, healthy) == 1);
    CHECK(class_label(Diagnosis::COPD, copd) == 1);
    CHECK(class_label(Diagnosis::URTI, copd) == 0);
    CHECK_FALSE(class_label(Diagnosis::Healthy, copd).has_value());

    // distinct diagnoses map to distinct labels within six_class
    std::set<int> seen;
    for (Diagnosis d : {Diagnosis::Pneumonia, Diagnosis::Bronchiolitis,
                        Diagnosis::Bronchiectasis, Diagnosis::COPD, Diagnosis::URTI,
                        Diagnosis::LRTI}) {
        const auto label = class_label(d, six);
        REQUIRE(label.has_value());
        CHECK(seen.insert(*label).second);
    }

    // targets: exclusions and missing demographics
    SubjectRecord s;
    s.patient_id = 223;
    s.diagnosis = Diagnosis::Healthy;
    CHECK_FALSE(task_target(s, TaskSpec{TaskKind::gender, {}}).has_value());
    s.sex = Sex::female;
    CHECK(task_target(s, TaskSpec{TaskKind::gender, {}}) == 1.0);
    CHECK_FALSE(task_target(s, TaskSpec{TaskKind::gender, {223}}).has_value());
    CHECK_FALSE(task_target(s, TaskSpec{TaskKind::age_regression, {}}).has_value());
    s.age_years = 34.0;
    CHECK(task_target(s, TaskSpec{TaskKind::age_regression, {}}) == 34.0);
}
