#include "auscult/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "auscult/parallel.hpp"
#include "auscult/wav.hpp"

namespace auscult {

namespace {

std::vector<std::string_view> split_tokens(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::optional<long> parse_int(std::string_view s) {
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_real(std::string_view s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(std::string(s), &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

bool is_na(std::string_view s) { return s == "NA" || s == "na" || s == "-" || s.empty(); }

std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

} // namespace

const char* chest_location_token(ChestLocation loc) {
    switch (loc) {
    case ChestLocation::Al: return "Al";
    case ChestLocation::Ar: return "Ar";
    case ChestLocation::Pl: return "Pl";
    case ChestLocation::Pr: return "Pr";
    case ChestLocation::Ll: return "Ll";
    case ChestLocation::Lr: return "Lr";
    case ChestLocation::Tc: return "Tc";
    }
    return "?";
}

RecordingMeta parse_recording_filename(std::string_view name) {
    std::string_view stem = name;
    if (const std::size_t dot = stem.rfind('.'); dot != std::string_view::npos)
        stem = stem.substr(0, dot);

    std::vector<std::string_view> tokens;
    std::size_t start = 0;
    while (true) {
        const std::size_t us = stem.find('_', start);
        tokens.push_back(stem.substr(start, us - start));
        if (us == std::string_view::npos) break;
        start = us + 1;
    }
    if (tokens.size() != 5)
        raise(Errc::malformed_filename,
              "expected 5 underscore-separated tokens in '" + std::string(name) + "'");

    RecordingMeta meta;
    const auto pid = parse_int(tokens[0]);
    if (!pid || *pid <= 0)
        raise(Errc::malformed_filename, "bad patient id in '" + std::string(name) + "'");
    meta.patient_id = static_cast<int>(*pid);
    meta.recording_index = std::string(tokens[1]);

    static constexpr ChestLocation locations[] = {
        ChestLocation::Al, ChestLocation::Ar, ChestLocation::Pl, ChestLocation::Pr,
        ChestLocation::Ll, ChestLocation::Lr, ChestLocation::Tc};
    bool found = false;
    for (ChestLocation loc : locations) {
        if (tokens[2] == chest_location_token(loc)) {
            meta.chest_location = loc;
            found = true;
            break;
        }
    }
    if (!found)
        raise(Errc::malformed_filename,
              "unknown chest location '" + std::string(tokens[2]) + "'");

    if (tokens[3] == "sc") meta.acquisition_mode = AcquisitionMode::single_channel;
    else if (tokens[3] == "mc") meta.acquisition_mode = AcquisitionMode::multi_channel;
    else
        raise(Errc::malformed_filename,
              "unknown acquisition mode '" + std::string(tokens[3]) + "'");

    meta.device = std::string(tokens[4]);
    return meta;
}

std::string format_recording_filename(const RecordingMeta& meta) {
    std::ostringstream out;
    out << meta.patient_id << '_' << meta.recording_index << '_'
        << chest_location_token(meta.chest_location) << '_'
        << (meta.acquisition_mode == AcquisitionMode::single_channel ? "sc" : "mc") << '_'
        << meta.device << ".wav";
    return out.str();
}

std::vector<CycleAnnotation> parse_cycle_annotations(std::string_view text) {
    std::vector<CycleAnnotation> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        const auto fail = [line_no](const std::string& why) {
            raise(Errc::malformed_line, "line " + std::to_string(line_no) + ": " + why);
        };
        if (tokens.size() != 4) fail("expected 4 columns");
        const auto begin = parse_real(tokens[0]);
        const auto end = parse_real(tokens[1]);
        if (!begin || !end) fail("bad time value");
        if (!(*begin >= 0.0) || !(*begin < *end)) fail("requires 0 <= begin < end");
        CycleAnnotation c;
        c.begin_s = *begin;
        c.end_s = *end;
        for (int f = 0; f < 2; ++f) {
            const std::string_view flag = tokens[static_cast<std::size_t>(2 + f)];
            if (flag != "0" && flag != "1") fail("flag must be 0 or 1");
            (f == 0 ? c.crackles : c.wheezes) = flag == "1";
        }
        out.push_back(c);
    }
    return out;
}

const char* diagnosis_name(Diagnosis d) {
    switch (d) {
    case Diagnosis::Healthy: return "Healthy";
    case Diagnosis::Pneumonia: return "Pneumonia";
    case Diagnosis::Bronchiolitis: return "Bronchiolitis";
    case Diagnosis::Bronchiectasis: return "Bronchiectasis";
    case Diagnosis::COPD: return "COPD";
    case Diagnosis::URTI: return "URTI";
    case Diagnosis::LRTI: return "LRTI";
    case Diagnosis::Asthma: return "Asthma";
    }
    return "?";
}

std::optional<Diagnosis> diagnosis_from_string(std::string_view s) {
    static constexpr Diagnosis all[] = {
        Diagnosis::Healthy, Diagnosis::Pneumonia,  Diagnosis::Bronchiolitis,
        Diagnosis::Bronchiectasis, Diagnosis::COPD, Diagnosis::URTI,
        Diagnosis::LRTI,    Diagnosis::Asthma};
    const std::string lower = lowercase(std::string(s));
    for (Diagnosis d : all)
        if (lower == lowercase(diagnosis_name(d))) return d;
    return std::nullopt;
}

std::map<int, SubjectInfo> parse_metadata_tables(std::string_view diagnosis_text,
                                                 std::string_view demographics_text) {
    std::map<int, SubjectInfo> out;

    std::istringstream diag{std::string(diagnosis_text)};
    std::string line;
    while (std::getline(diag, line)) {
        const auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        if (tokens.size() < 2)
            raise(Errc::malformed_line, "diagnosis row needs id and label: " + line);
        const auto pid = parse_int(tokens[0]);
        if (!pid) raise(Errc::malformed_line, "bad patient id: " + line);
        const auto d = diagnosis_from_string(tokens[1]);
        if (!d) raise(Errc::unknown_diagnosis, std::string(tokens[1]));
        if (out.count(static_cast<int>(*pid)))
            raise(Errc::duplicate_patient, "patient " + std::to_string(*pid));
        out[static_cast<int>(*pid)].diagnosis = *d;
    }

    std::istringstream demo{std::string(demographics_text)};
    while (std::getline(demo, line)) {
        const auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        if (tokens.size() < 6)
            raise(Errc::malformed_line, "demographics row needs 6 columns: " + line);
        const auto pid = parse_int(tokens[0]);
        if (!pid) raise(Errc::malformed_line, "bad patient id: " + line);
        const auto it = out.find(static_cast<int>(*pid));
        if (it == out.end()) continue; // demographics for unknown subjects are ignored
        SubjectInfo& info = it->second;
        if (!is_na(tokens[1])) info.age_years = parse_real(tokens[1]);
        if (tokens[2] == "M" || tokens[2] == "m") info.sex = Sex::male;
        else if (tokens[2] == "F" || tokens[2] == "f") info.sex = Sex::female;
        if (!is_na(tokens[3])) {
            info.bmi = parse_real(tokens[3]);
        } else if (!is_na(tokens[4]) && !is_na(tokens[5])) {
            const auto weight = parse_real(tokens[4]);
            auto height = parse_real(tokens[5]);
            if (weight && height && *height > 0.0) {
                // heights above 3 are centimetres, not metres
                if (*height > 3.0) *height /= 100.0;
                info.bmi = *weight / (*height * *height);
            }
        }
    }
    return out;
}

std::size_t Dataset::recording_count() const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += s.recordings.size();
    return n;
}

const SubjectRecord* Dataset::find(int patient_id) const {
    for (const auto& s : subjects)
        if (s.patient_id == patient_id) return &s;
    return nullptr;
}

namespace {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

} // namespace

Dataset assemble_dataset(const std::filesystem::path& root, IngestReport* report, int jobs) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;

    if (!std::filesystem::is_directory(root))
        raise(Errc::io_error, root.string() + " is not a directory");

    std::vector<std::filesystem::path> wavs;
    std::filesystem::path diagnosis_file, demographics_file;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = lowercase(entry.path().filename().string());
        if (name.size() > 4 && name.ends_with(".wav")) {
            wavs.push_back(entry.path());
        } else if (name.ends_with(".txt") || name.ends_with(".csv")) {
            if (name.find("diagnosis") != std::string::npos) diagnosis_file = entry.path();
            else if (name.find("demographic") != std::string::npos)
                demographics_file = entry.path();
        }
    }
    std::sort(wavs.begin(), wavs.end());

    if (diagnosis_file.empty())
        raise(Errc::missing_metadata, "no diagnosis table found under " + root.string());
    const std::string demographics_text =
        demographics_file.empty() ? std::string() : read_text_file(demographics_file);
    if (demographics_file.empty())
        rep.warnings.push_back("no demographics table found; age/sex/bmi unavailable");
    const std::map<int, SubjectInfo> info =
        parse_metadata_tables(read_text_file(diagnosis_file), demographics_text);

    struct Decoded {
        bool ok = false;
        Recording recording;
        std::string skip_reason;
        std::vector<std::string> warnings;
    };
    std::vector<Decoded> decoded(wavs.size());

    parallel_for(wavs.size(), jobs, [&](std::size_t i) {
        Decoded& d = decoded[i];
        const std::filesystem::path& path = wavs[i];
        try {
            d.recording.meta = parse_recording_filename(path.filename().string());
            if (!info.count(d.recording.meta.patient_id)) {
                d.skip_reason = path.filename().string() + ": no diagnosis row";
                return;
            }
            d.recording.audio = read_wav(path);
            validate_signal(d.recording.audio);

            std::filesystem::path ann = path;
            ann.replace_extension(".txt");
            if (std::filesystem::exists(ann)) {
                d.recording.cycles = parse_cycle_annotations(read_text_file(ann));
                const double dur = d.recording.audio.duration_s();
                auto& cycles = d.recording.cycles;
                for (auto it = cycles.begin(); it != cycles.end();) {
                    if (it->end_s > dur) {
                        d.warnings.push_back(path.filename().string() + ": cycle end " +
                                             std::to_string(it->end_s) + "s clamped to " +
                                             std::to_string(dur) + "s");
                        it->end_s = dur;
                    }
                    if (!(it->begin_s < it->end_s)) it = cycles.erase(it);
                    else ++it;
                }
            }
            d.ok = true;
        } catch (const Error& e) {
            d.skip_reason = path.filename().string() + ": " + e.what();
        }
    });

    std::map<int, SubjectRecord> subjects;
    for (auto& d : decoded) {
        for (auto& w : d.warnings) rep.warnings.push_back(std::move(w));
        if (!d.ok) {
            if (!d.skip_reason.empty()) rep.skipped.push_back(std::move(d.skip_reason));
            continue;
        }
        const int pid = d.recording.meta.patient_id;
        auto [it, inserted] = subjects.try_emplace(pid);
        if (inserted) {
            const SubjectInfo& si = info.at(pid);
            it->second.patient_id = pid;
            it->second.diagnosis = si.diagnosis;
            it->second.age_years = si.age_years;
            it->second.sex = si.sex;
            it->second.bmi = si.bmi;
        }
        it->second.recordings.push_back(std::move(d.recording));
    }

    Dataset ds;
    ds.subjects.reserve(subjects.size());
    for (auto& [pid, subject] : subjects) ds.subjects.push_back(std::move(subject));
    for (const auto& [pid, si] : info)
        if (!ds.find(pid))
            rep.warnings.push_back("patient " + std::to_string(pid) +
                                   " has a diagnosis row but no usable recording");
    if (ds.subjects.empty())
        raise(Errc::empty_dataset, "no usable recordings under " + root.string());
    return ds;
}

void write_manifest(std::ostream& out, const Dataset& ds) {
    out << "patient_id\tdiagnosis\tage\tsex\tbmi\tn_recordings\n";
    char buf[64];
    for (const auto& s : ds.subjects) {
        out << s.patient_id << '\t' << diagnosis_name(s.diagnosis) << '\t';
        if (s.age_years) {
            std::snprintf(buf, sizeof(buf), "%.17g", *s.age_years);
            out << buf;
        } else out << "NA";
        out << '\t' << (s.sex ? (*s.sex == Sex::male ? "M" : "F") : "NA") << '\t';
        if (s.bmi) {
            std::snprintf(buf, sizeof(buf), "%.17g", *s.bmi);
            out << buf;
        } else out << "NA";
        out << '\t' << s.recordings.size() << '\n';
    }
}

const char* task_name(TaskKind kind) {
    switch (kind) {
    case TaskKind::binary_healthy: return "binary_healthy";
    case TaskKind::binary_copd: return "binary_copd";
    case TaskKind::six_class: return "six_class";
    case TaskKind::four_class: return "four_class";
    case TaskKind::gender: return "gender";
    case TaskKind::age_regression: return "age_regression";
    case TaskKind::bmi_regression: return "bmi_regression";
    }
    return "?";
}

std::optional<TaskKind> task_from_string(std::string_view name) {
    static constexpr TaskKind all[] = {
        TaskKind::binary_healthy, TaskKind::binary_copd, TaskKind::six_class,
        TaskKind::four_class,     TaskKind::gender,      TaskKind::age_regression,
        TaskKind::bmi_regression};
    for (TaskKind k : all)
        if (name == task_name(k)) return k;
    return std::nullopt;
}

bool task_is_regression(TaskKind kind) {
    return kind == TaskKind::age_regression || kind == TaskKind::bmi_regression;
}

int task_class_count(TaskKind kind) {
    switch (kind) {
    case TaskKind::six_class: return 6;
    case TaskKind::four_class: return 4;
    case TaskKind::age_regression:
    case TaskKind::bmi_regression: return 0;
    default: return 2;
    }
}

std::vector<std::string> task_class_names(TaskKind kind) {
    switch (kind) {
    case TaskKind::binary_healthy: return {"healthy", "diseased"};
    case TaskKind::binary_copd: return {"other", "copd"};
    case TaskKind::six_class:
        return {"pneumonia", "bronchiolitis", "bronchiectasis", "copd", "urti", "lrti"};
    case TaskKind::four_class:
        return {"pneumonia", "bronchiolitis+bronchiectasis", "copd", "urti+lrti"};
    case TaskKind::gender: return {"male", "female"};
    default: return {};
    }
}

std::optional<int> class_label(Diagnosis d, const TaskSpec& task) {
    switch (task.kind) {
    case TaskKind::binary_healthy:
        return d == Diagnosis::Healthy ? 0 : 1;
    case TaskKind::binary_copd:
        if (d == Diagnosis::Healthy) return std::nullopt;
        return d == Diagnosis::COPD ? 1 : 0;
    case TaskKind::six_class:
        switch (d) {
        case Diagnosis::Pneumonia: return 0;
        case Diagnosis::Bronchiolitis: return 1;
        case Diagnosis::Bronchiectasis: return 2;
        case Diagnosis::COPD: return 3;
        case Diagnosis::URTI: return 4;
        case Diagnosis::LRTI: return 5;
        default: return std::nullopt; // Healthy and Asthma are outside the task
        }
    case TaskKind::four_class:
        switch (d) {
        case Diagnosis::Pneumonia: return 0;
        case Diagnosis::Bronchiolitis:
        case Diagnosis::Bronchiectasis: return 1;
        case Diagnosis::COPD: return 2;
        case Diagnosis::URTI:
        case Diagnosis::LRTI: return 3;
        default: return std::nullopt;
        }
    default:
        raise(Errc::task_error,
              std::string("class_label is undefined for task ") + task_name(task.kind));
    }
}

std::optional<double> task_target(const SubjectRecord& subject, const TaskSpec& task) {
    if (std::find(task.excluded_patients.begin(), task.excluded_patients.end(),
                  subject.patient_id) != task.excluded_patients.end())
        return std::nullopt;
    switch (task.kind) {
    case TaskKind::gender:
        if (!subject.sex) return std::nullopt;
        return *subject.sex == Sex::male ? 0.0 : 1.0;
    case TaskKind::age_regression:
        if (!subject.age_years) return std::nullopt;
        return *subject.age_years;
    case TaskKind::bmi_regression:
        if (!subject.bmi) return std::nullopt;
        return *subject.bmi;
    default: {
        const auto label = class_label(subject.diagnosis, task);
        if (!label) return std::nullopt;
        return static_cast<double>(*label);
    }
    }
}

} // namespace auscult
