#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "auscult/signal.hpp"

namespace auscult {

enum class ChestLocation { Al, Ar, Pl, Pr, Ll, Lr, Tc };
enum class AcquisitionMode { single_channel, multi_channel };

const char* chest_location_token(ChestLocation loc);

// Parsed from the distribution's five-token file names:
// <patient>_<index>_<location>_<mode>_<device>.wav
struct RecordingMeta {
    int patient_id = 0;
    std::string recording_index;
    ChestLocation chest_location = ChestLocation::Al;
    AcquisitionMode acquisition_mode = AcquisitionMode::single_channel;
    std::string device;
};

RecordingMeta parse_recording_filename(std::string_view name);
std::string format_recording_filename(const RecordingMeta& meta);

struct CycleAnnotation {
    double begin_s = 0.0;
    double end_s = 0.0;
    bool crackles = false;
    bool wheezes = false;
};

std::vector<CycleAnnotation> parse_cycle_annotations(std::string_view text);

struct Recording {
    RecordingMeta meta;
    Signal audio;
    std::vector<CycleAnnotation> cycles;
};

enum class Diagnosis {
    Healthy,
    Pneumonia,
    Bronchiolitis,
    Bronchiectasis,
    COPD,
    URTI,
    LRTI,
    Asthma,
};

const char* diagnosis_name(Diagnosis d);
std::optional<Diagnosis> diagnosis_from_string(std::string_view s);

enum class Sex { male, female };

struct SubjectRecord {
    int patient_id = 0;
    Diagnosis diagnosis = Diagnosis::Healthy;
    std::optional<double> age_years;
    std::optional<Sex> sex;
    std::optional<double> bmi;
    std::vector<Recording> recordings;
};

struct SubjectInfo {
    Diagnosis diagnosis = Diagnosis::Healthy;
    std::optional<double> age_years;
    std::optional<Sex> sex;
    std::optional<double> bmi;
};

// Diagnosis table: "<patient> <diagnosis>" per line. Demographics table:
// "<patient> <age> <sex> <adult bmi> <child weight> <child height>", NA for
// missing fields; child BMI is derived as weight / height^2 when needed.
std::map<int, SubjectInfo> parse_metadata_tables(std::string_view diagnosis_text,
                                                 std::string_view demographics_text);

struct Dataset {
    std::vector<SubjectRecord> subjects;

    std::size_t recording_count() const;
    const SubjectRecord* find(int patient_id) const;
};

struct IngestReport {
    std::vector<std::string> skipped;
    std::vector<std::string> warnings;
};

// Walks a distribution directory: WAV files, sibling .txt cycle annotations,
// a diagnosis table and an optional demographics table. Decoding may run on
// several threads.
Dataset assemble_dataset(const std::filesystem::path& root, IngestReport* report = nullptr,
                         int jobs = 1);

// Manifest: patient_id, diagnosis, age, sex, bmi, n_recordings (tab separated).
void write_manifest(std::ostream& out, const Dataset& ds);

enum class TaskKind {
    binary_healthy,
    binary_copd,
    six_class,
    four_class,
    gender,
    age_regression,
    bmi_regression,
};

const char* task_name(TaskKind kind);
std::optional<TaskKind> task_from_string(std::string_view name);
bool task_is_regression(TaskKind kind);
int task_class_count(TaskKind kind);
std::vector<std::string> task_class_names(TaskKind kind);

struct TaskSpec {
    TaskKind kind = TaskKind::binary_healthy;
    std::vector<int> excluded_patients;
};

// Dense label for a classification task, or nullopt when the diagnosis is
// outside the task (Asthma in the multi-class tasks, Healthy in the
// condition-only tasks).
std::optional<int> class_label(Diagnosis d, const TaskSpec& task);

// Per-subject target for any task kind: class label or regression value.
// nullopt means the subject is excluded from the task.
std::optional<double> task_target(const SubjectRecord& subject, const TaskSpec& task);

} // namespace auscult
