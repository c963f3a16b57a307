#include "auscult/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "auscult/dsp.hpp"
#include "auscult/parallel.hpp"
#include "auscult/wav.hpp"

namespace auscult {

namespace {

using json = nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json config_json_obj(const PipelineConfig& cfg) {
    json j;
    j["working_rate_hz"] = cfg.working_rate_hz;
    j["window"] = {{"length_s", cfg.window.length_s}, {"step_s", cfg.window.step_s}};
    j["emd"] = {{"max_imfs", cfg.biosignal.max_imfs},
                {"sd_threshold", cfg.biosignal.sift.sd_threshold},
                {"max_sift_iters", cfg.biosignal.sift.max_sift_iters},
                {"low_rate_hz", cfg.biosignal.low_rate_hz},
                {"respiration_smooth_hz", cfg.biosignal.respiration_smooth_hz},
                {"cardiac_smooth_hz", cfg.biosignal.cardiac_smooth_hz},
                {"swap_envelope_roles", cfg.biosignal.swap_envelope_roles}};
    j["registry_version"] = cfg.registry_version;
    j["tasks"] = cfg.tasks;
    j["seed"] = cfg.seed;
    j["cache_dir"] = cfg.cache_dir;
    j["jobs"] = cfg.jobs;
    if (cfg.model_override)
        j["model_override"] = model_kind_name(*cfg.model_override);
    j["forest"] = {{"n_trees", cfg.forest.n_trees},
                   {"max_depth", cfg.forest.max_depth},
                   {"per_split_features", cfg.forest.per_split_features},
                   {"bootstrap", cfg.forest.bootstrap}};
    j["gbm"] = {{"n_stages", cfg.gbm.n_stages},
                {"learning_rate", cfg.gbm.learning_rate},
                {"max_depth", cfg.gbm.max_depth},
                {"min_child_weight", cfg.gbm.min_child_weight},
                {"l2_reg", cfg.gbm.l2_reg}};
    return j;
}

} // namespace

std::string config_to_json(const PipelineConfig& cfg) { return config_json_obj(cfg).dump(2); }

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io_error, "cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(Errc::config_error, std::string("cannot parse config: ") + e.what());
    }

    PipelineConfig cfg;
    try {
        cfg.working_rate_hz = j.value("working_rate_hz", cfg.working_rate_hz);
        if (j.contains("window")) {
            cfg.window.length_s = j["window"].value("length_s", cfg.window.length_s);
            cfg.window.step_s = j["window"].value("step_s", cfg.window.step_s);
        }
        if (j.contains("emd")) {
            const json& e = j["emd"];
            cfg.biosignal.max_imfs = e.value("max_imfs", cfg.biosignal.max_imfs);
            cfg.biosignal.sift.sd_threshold =
                e.value("sd_threshold", cfg.biosignal.sift.sd_threshold);
            cfg.biosignal.sift.max_sift_iters =
                e.value("max_sift_iters", cfg.biosignal.sift.max_sift_iters);
            cfg.biosignal.low_rate_hz = e.value("low_rate_hz", cfg.biosignal.low_rate_hz);
            cfg.biosignal.respiration_smooth_hz =
                e.value("respiration_smooth_hz", cfg.biosignal.respiration_smooth_hz);
            cfg.biosignal.cardiac_smooth_hz =
                e.value("cardiac_smooth_hz", cfg.biosignal.cardiac_smooth_hz);
            cfg.biosignal.swap_envelope_roles =
                e.value("swap_envelope_roles", cfg.biosignal.swap_envelope_roles);
        }
        cfg.registry_version = j.value("registry_version", cfg.registry_version);
        cfg.tasks = j.value("tasks", cfg.tasks);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.cache_dir = j.value("cache_dir", cfg.cache_dir);
        cfg.jobs = j.value("jobs", cfg.jobs);
        if (j.contains("model_override")) {
            const std::string name = j["model_override"].get<std::string>();
            if (name == "forest") cfg.model_override = ModelKind::forest;
            else if (name == "gbm") cfg.model_override = ModelKind::gbm;
            else raise(Errc::config_error, "model_override must be 'forest' or 'gbm'");
        }
        if (j.contains("forest")) {
            const json& f = j["forest"];
            cfg.forest.n_trees = f.value("n_trees", cfg.forest.n_trees);
            cfg.forest.max_depth = f.value("max_depth", cfg.forest.max_depth);
            cfg.forest.per_split_features =
                f.value("per_split_features", cfg.forest.per_split_features);
            cfg.forest.bootstrap = f.value("bootstrap", cfg.forest.bootstrap);
        }
        if (j.contains("gbm")) {
            const json& g = j["gbm"];
            cfg.gbm.n_stages = g.value("n_stages", cfg.gbm.n_stages);
            cfg.gbm.learning_rate = g.value("learning_rate", cfg.gbm.learning_rate);
            cfg.gbm.max_depth = g.value("max_depth", cfg.gbm.max_depth);
            cfg.gbm.min_child_weight = g.value("min_child_weight", cfg.gbm.min_child_weight);
            cfg.gbm.l2_reg = g.value("l2_reg", cfg.gbm.l2_reg);
        }
    } catch (const json::exception& e) {
        raise(Errc::config_error, std::string("bad config field: ") + e.what());
    }
    if (cfg.registry_version != "v1")
        raise(Errc::config_error, "unknown registry version '" + cfg.registry_version + "'");
    return cfg;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL ^ seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot open " + path.string());
    std::uint64_t h = 14695981039346656037ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
        if (in.eof()) break;
    }
    return hash_hex(h);
}

std::string hash_string(const std::string& s) { return hash_hex(fnv1a(s.data(), s.size())); }

std::string feature_config_hash(const PipelineConfig& cfg) {
    json j;
    j["working_rate_hz"] = cfg.working_rate_hz;
    j["window"] = {{"length_s", cfg.window.length_s}, {"step_s", cfg.window.step_s}};
    j["emd"] = config_json_obj(cfg)["emd"];
    j["registry_version"] = cfg.registry_version;
    return hash_string(j.dump());
}

std::string eval_config_hash(const PipelineConfig& cfg, const std::string& task) {
    json j;
    j["task"] = task;
    j["seed"] = cfg.seed;
    if (cfg.model_override) j["model_override"] = model_kind_name(*cfg.model_override);
    j["forest"] = config_json_obj(cfg)["forest"];
    j["gbm"] = config_json_obj(cfg)["gbm"];
    return hash_string(j.dump());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) raise(Errc::io_error, "cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

Signal preprocess_recording(const Signal& audio, const PipelineConfig& cfg) {
    return resample(audio, cfg.working_rate_hz);
}

namespace {

std::string hash_signal(const Signal& s) {
    std::uint64_t h = fnv1a(&s.rate_hz, sizeof(s.rate_hz));
    h = fnv1a(s.samples.data(), s.samples.size() * sizeof(double), h);
    return hash_hex(h);
}

// One recording's cached feature rows: window_index + values, empty = absent.
std::string rows_to_text(const std::vector<FeatureVector>& rows) {
    std::ostringstream out;
    for (const FeatureVector& fv : rows) {
        out << fv.window_index;
        for (const FeatureValue& v : fv.values) {
            out << '\t';
            if (v) out << format_double(*v);
        }
        out << '\n';
    }
    return out.str();
}

std::vector<FeatureVector> rows_from_text(const std::string& text, std::size_t arity,
                                          int patient_id, const std::string& recording_id) {
    std::vector<FeatureVector> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        FeatureVector fv;
        fv.patient_id = patient_id;
        fv.recording_id = recording_id;
        fv.values.reserve(arity);
        std::size_t pos = 0;
        std::size_t field = 0;
        while (pos <= line.size()) {
            const std::size_t tab = line.find('\t', pos);
            const std::string token =
                line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos);
            if (field == 0) fv.window_index = std::stoi(token);
            else fv.values.push_back(token.empty() ? FeatureValue{}
                                                   : FeatureValue{std::stod(token)});
            ++field;
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fv.values.size() != arity)
            raise(Errc::io_error, "cached feature fragment has wrong arity");
        rows.push_back(std::move(fv));
    }
    return rows;
}

std::string read_whole_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

} // namespace

FeatureTable extract_dataset_features(const Dataset& ds, const PipelineConfig& cfg) {
    const FeatureRegistry& registry = feature_registry_v1();
    const std::string cfg_hash = feature_config_hash(cfg);

    struct Job {
        const SubjectRecord* subject;
        const Recording* recording;
        std::string recording_id;
    };
    std::vector<Job> jobs;
    for (const SubjectRecord& subject : ds.subjects)
        for (const Recording& recording : subject.recordings)
            jobs.push_back({&subject, &recording,
                            format_recording_filename(recording.meta)});

    const std::filesystem::path cache_root =
        std::filesystem::path(cfg.cache_dir) / "features";
    const bool use_cache = !cfg.cache_dir.empty();
    if (use_cache) std::filesystem::create_directories(cache_root);

    std::vector<std::vector<FeatureVector>> per_job(jobs.size());
    std::vector<std::uint8_t> was_hit(jobs.size(), 0);
    std::vector<std::string> audio_hashes(jobs.size());

    parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
        const Job& job = jobs[i];
        audio_hashes[i] = hash_signal(job.recording->audio);
        const std::string key =
            hash_string(audio_hashes[i] + ":" + cfg_hash + ":" + registry.version);
        const std::filesystem::path cache_file = cache_root / (key + ".tsv");
        if (use_cache && std::filesystem::exists(cache_file)) {
            per_job[i] = rows_from_text(read_whole_file(cache_file), registry.size(),
                                        job.subject->patient_id, job.recording_id);
            was_hit[i] = 1;
            return;
        }
        const Signal working = preprocess_recording(job.recording->audio, cfg);
        const BiosignalSet bset = derive_biosignals(working, cfg.biosignal);
        per_job[i] = extract_feature_matrix(bset, cfg.window, registry,
                                            job.subject->patient_id, job.recording_id);
        if (use_cache) write_file_atomic(cache_file, rows_to_text(per_job[i]));
    });

    FeatureTable table;
    table.registry_version = registry.version;
    table.config_hash = cfg_hash;
    table.seed = cfg.seed;
    for (const auto& e : registry.entries) table.matrix.feature_names.push_back(e.name);

    std::uint64_t upstream = 14695981039346656037ULL;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        upstream = fnv1a(audio_hashes[i].data(), audio_hashes[i].size(), upstream);
        table.cache_hits += was_hit[i];
        table.cache_misses += was_hit[i] ? 0 : 1;
        const Job& job = jobs[i];
        for (FeatureVector& fv : per_job[i]) {
            table.matrix.group_ids.push_back(job.subject->patient_id);
            table.matrix.recording_ids.push_back(job.recording_id);
            table.matrix.window_indices.push_back(fv.window_index);
            table.matrix.rows.push_back(std::move(fv.values));
            table.diagnosis.push_back(job.subject->diagnosis);
            table.age.push_back(job.subject->age_years);
            table.sex.push_back(job.subject->sex);
            table.bmi.push_back(job.subject->bmi);
        }
    }
    table.upstream_hash = hash_hex(upstream);
    return table;
}

void save_feature_table(const std::filesystem::path& path, const FeatureTable& table) {
    std::ostringstream out;
    out << "# auscult-features 1\n";
    out << "# registry_version: " << table.registry_version << '\n';
    out << "# config_hash: " << table.config_hash << '\n';
    out << "# upstream_hash: " << table.upstream_hash << '\n';
    out << "# seed: " << table.seed << '\n';
    out << "patient_id\trecording\twindow_index\tdiagnosis\tage\tsex\tbmi";
    for (const std::string& name : table.matrix.feature_names) out << '\t' << name;
    out << '\n';
    for (std::size_t r = 0; r < table.matrix.n_rows(); ++r) {
        out << table.matrix.group_ids[r] << '\t' << table.matrix.recording_ids[r] << '\t'
            << table.matrix.window_indices[r] << '\t'
            << diagnosis_name(table.diagnosis[r]) << '\t'
            << (table.age[r] ? format_double(*table.age[r]) : "") << '\t'
            << (table.sex[r] ? (*table.sex[r] == Sex::male ? "M" : "F") : "") << '\t'
            << (table.bmi[r] ? format_double(*table.bmi[r]) : "");
        for (const FeatureValue& v : table.matrix.rows[r]) {
            out << '\t';
            if (v) out << format_double(*v);
        }
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io_error, "cannot open " + path.string());
    FeatureTable table;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto grab = [&line](const char* key) -> std::optional<std::string> {
                const std::string k = std::string("# ") + key + ": ";
                if (line.rfind(k, 0) == 0) return line.substr(k.size());
                return std::nullopt;
            };
            if (auto v = grab("registry_version")) table.registry_version = *v;
            else if (auto h = grab("config_hash")) table.config_hash = *h;
            else if (auto u = grab("upstream_hash")) table.upstream_hash = *u;
            else if (auto s = grab("seed")) table.seed = std::stoull(*s);
            continue;
        }
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t tab = line.find('\t', pos);
            fields.push_back(
                line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (!header_seen) {
            if (fields.size() < 7 || fields[0] != "patient_id")
                raise(Errc::io_error, "not a feature table: " + path.string());
            for (std::size_t c = 7; c < fields.size(); ++c)
                table.matrix.feature_names.push_back(fields[c]);
            header_seen = true;
            continue;
        }
        if (fields.size() != 7 + table.matrix.feature_names.size())
            raise(Errc::io_error, "feature row width mismatch");
        table.matrix.group_ids.push_back(std::stoi(fields[0]));
        table.matrix.recording_ids.push_back(fields[1]);
        table.matrix.window_indices.push_back(std::stoi(fields[2]));
        const auto diag = diagnosis_from_string(fields[3]);
        if (!diag) raise(Errc::unknown_diagnosis, fields[3]);
        table.diagnosis.push_back(*diag);
        table.age.push_back(fields[4].empty() ? std::optional<double>{}
                                              : std::optional<double>{std::stod(fields[4])});
        table.sex.push_back(fields[5].empty()
                                ? std::optional<Sex>{}
                                : std::optional<Sex>{fields[5] == "M" ? Sex::male
                                                                      : Sex::female});
        table.bmi.push_back(fields[6].empty() ? std::optional<double>{}
                                              : std::optional<double>{std::stod(fields[6])});
        std::vector<FeatureValue> values;
        values.reserve(table.matrix.feature_names.size());
        for (std::size_t c = 7; c < fields.size(); ++c)
            values.push_back(fields[c].empty() ? FeatureValue{}
                                               : FeatureValue{std::stod(fields[c])});
        table.matrix.rows.push_back(std::move(values));
    }
    if (!header_seen) raise(Errc::io_error, "empty feature table: " + path.string());
    return table;
}

TaskSpec make_task(const std::string& name) {
    const auto kind = task_from_string(name);
    if (!kind) {
        std::string valid;
        for (const char* t : {"binary_healthy", "binary_copd", "six_class", "four_class",
                              "gender", "age_regression", "bmi_regression"}) {
            if (!valid.empty()) valid += ", ";
            valid += t;
        }
        raise(Errc::task_error, "unknown task '" + name + "' (valid: " + valid + ")");
    }
    return TaskSpec{*kind, {}};
}

FeatureMatrix bind_task(const FeatureTable& table, const TaskSpec& task) {
    FeatureMatrix out;
    out.feature_names = table.matrix.feature_names;
    for (std::size_t r = 0; r < table.matrix.n_rows(); ++r) {
        SubjectRecord subject;
        subject.patient_id = table.matrix.group_ids[r];
        subject.diagnosis = table.diagnosis[r];
        subject.age_years = table.age[r];
        subject.sex = table.sex[r];
        subject.bmi = table.bmi[r];
        const std::optional<double> target = task_target(subject, task);
        if (!target) continue;
        out.rows.push_back(table.matrix.rows[r]);
        out.group_ids.push_back(table.matrix.group_ids[r]);
        out.recording_ids.push_back(table.matrix.recording_ids[r]);
        out.window_indices.push_back(table.matrix.window_indices[r]);
        out.targets.push_back(*target);
    }
    if (out.rows.empty())
        raise(Errc::task_error,
              std::string("no rows eligible for task ") + task_name(task.kind));
    return out;
}

namespace {

json report_json_obj(const EvalReport& report) {
    json j;
    j["format"] = "auscult-report";
    j["format_version"] = 1;
    j["task"] = task_name(report.task.kind);
    j["regression"] = report.regression;
    j["n_classes"] = report.n_classes;
    j["metrics"] = report.metrics;
    j["confusion"] = report.confusion.counts;
    j["window_confusion"] = report.window_confusion.counts;
    j["subject_pairs"] = report.subject_pairs;
    j["window_pairs"] = report.window_pairs;
    j["roc"] = report.roc;
    json folds = json::array();
    for (const FoldOutcome& f : report.folds)
        folds.push_back({{"patient", f.patient},
                         {"seed", f.seed},
                         {"truth", f.truth},
                         {"predicted_class", f.predicted_class},
                         {"predicted_value", f.predicted_value},
                         {"mean_probs", f.mean_probs},
                         {"n_windows", f.n_windows}});
    j["folds"] = std::move(folds);
    j["warnings"] = report.warnings;
    return j;
}

} // namespace

std::string report_to_json(const EvalReport& report, const FeatureTable& table,
                           const PipelineConfig& cfg) {
    json j = report_json_obj(report);
    j["provenance"] = {{"registry_version", table.registry_version},
                       {"config_hash", table.config_hash},
                       {"upstream_hash", table.upstream_hash},
                       {"eval_config_hash",
                        eval_config_hash(cfg, task_name(report.task.kind))},
                       {"seed", cfg.seed}};
    return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(Errc::io_error, std::string("cannot parse report: ") + e.what());
    }
    if (j.value("format", "") != "auscult-report")
        raise(Errc::io_error, "not a report file");
    EvalReport report;
    const auto kind = task_from_string(j.at("task").get<std::string>());
    if (!kind) raise(Errc::task_error, "unknown task in report");
    report.task.kind = *kind;
    report.regression = j.at("regression").get<bool>();
    report.n_classes = j.at("n_classes").get<int>();
    report.metrics = j.at("metrics").get<std::map<std::string, double>>();
    report.confusion = ConfusionMatrix(report.n_classes);
    report.confusion.counts = j.at("confusion").get<std::vector<long long>>();
    report.window_confusion = ConfusionMatrix(report.n_classes);
    report.window_confusion.counts = j.at("window_confusion").get<std::vector<long long>>();
    report.subject_pairs =
        j.at("subject_pairs").get<std::vector<std::pair<double, double>>>();
    report.window_pairs = j.at("window_pairs").get<std::vector<std::pair<double, double>>>();
    report.roc =
        j.at("roc").get<std::vector<std::vector<std::pair<double, double>>>>();
    for (const json& f : j.at("folds")) {
        FoldOutcome fold;
        fold.patient = f.at("patient").get<int>();
        fold.seed = f.at("seed").get<std::uint64_t>();
        fold.truth = f.at("truth").get<double>();
        fold.predicted_class = f.at("predicted_class").get<int>();
        fold.predicted_value = f.at("predicted_value").get<double>();
        fold.mean_probs = f.at("mean_probs").get<std::vector<double>>();
        fold.n_windows = f.at("n_windows").get<std::size_t>();
        report.folds.push_back(std::move(fold));
    }
    report.warnings = j.at("warnings").get<std::vector<std::string>>();
    return report;
}

EvalReport evaluate_task(const FeatureTable& table, const TaskSpec& task,
                         const PipelineConfig& cfg, bool* cache_hit) {
    if (cache_hit) *cache_hit = false;
    const std::string key = hash_string(table.config_hash + ":" + table.upstream_hash + ":" +
                                        eval_config_hash(cfg, task_name(task.kind)));
    const std::filesystem::path cache_file =
        std::filesystem::path(cfg.cache_dir) / "eval" / (key + ".json");
    if (!cfg.cache_dir.empty() && std::filesystem::exists(cache_file)) {
        if (cache_hit) *cache_hit = true;
        return report_from_json(read_whole_file(cache_file));
    }

    const FeatureMatrix bound = bind_task(table, task);
    EvalConfig ec;
    ec.seed = cfg.seed;
    ec.jobs = cfg.jobs;
    ec.model_override = cfg.model_override;
    ec.forest = cfg.forest;
    ec.gbm = cfg.gbm;
    EvalReport report = run_task(bound, task, ec);

    if (!cfg.cache_dir.empty())
        write_file_atomic(cache_file, report_to_json(report, table, cfg));
    return report;
}

ModelBundle train_task(const FeatureTable& table, const TaskSpec& task,
                       const PipelineConfig& cfg) {
    FeatureMatrix bound = bind_task(table, task);
    ModelBundle bundle;
    bundle.task = task_name(task.kind);
    bundle.registry_version = table.registry_version;
    bundle.seed = cfg.seed;
    bundle.provenance = table.config_hash + ":" + table.upstream_hash;
    bundle.impute_means = column_valid_means(bound);

    bound = impute_missing(bound);
    bundle.scaler = fit_scaler(bound);
    bound = bundle.scaler.apply(bound);

    if (task_is_regression(task.kind)) {
        GbmConfig gc = cfg.gbm;
        gc.seed = cfg.seed;
        bundle.kind = "gbm_regressor";
        bundle.gbm = train_gbm_regressor(bound, gc);
    } else {
        const ModelKind kind =
            cfg.model_override ? *cfg.model_override : default_model_for(task.kind);
        if (kind == ModelKind::forest) {
            ForestConfig fc = cfg.forest;
            fc.seed = cfg.seed;
            bundle.kind = "forest";
            ForestModel model = train_random_forest(bound, fc);
            model.in_bag.clear(); // training metadata, not part of the artifact
            bundle.forest = std::move(model);
        } else {
            GbmConfig gc = cfg.gbm;
            gc.seed = cfg.seed;
            bundle.kind = "gbm_classifier";
            bundle.gbm = train_gbm_classifier(bound, gc);
        }
    }
    return bundle;
}

const ReferenceMetrics* reference_metrics_for(TaskKind kind) {
    // reference results published for this pipeline on the ICBHI benchmark
    static const ReferenceMetrics binary_healthy{0.8764, 0.9193, 0, 0, 0, 0};
    static const ReferenceMetrics binary_copd{0.8956, 0.9016, 0, 0, 0, 0};
    static const ReferenceMetrics four_class{0.7494, 0.6888, 0, 0, 0, 0};
    static const ReferenceMetrics six_class{0.7273, 0.6938, 0, 0, 0, 0};
    static const ReferenceMetrics gender{0.9111, 0.8942, 0, 0, 0, 0};
    static const ReferenceMetrics bmi{0, 0, 3.84, 3.14, 0.9475, 5.41};
    static const ReferenceMetrics age{0, 0, 7.89, 6.71, 0.6172, 10.44};
    switch (kind) {
    case TaskKind::binary_healthy: return &binary_healthy;
    case TaskKind::binary_copd: return &binary_copd;
    case TaskKind::four_class: return &four_class;
    case TaskKind::six_class: return &six_class;
    case TaskKind::gender: return &gender;
    case TaskKind::bmi_regression: return &bmi;
    case TaskKind::age_regression: return &age;
    }
    return nullptr;
}

namespace {

void metric_line(std::ostringstream& out, const EvalReport& report, const char* name,
                 double reference) {
    const auto it = report.metrics.find(name);
    if (it == report.metrics.end()) return;
    char buf[160];
    if (reference > 0.0)
        std::snprintf(buf, sizeof(buf), "  %-28s %10.4f   reference %8.4f   delta %+8.4f\n",
                      name, it->second, reference, it->second - reference);
    else
        std::snprintf(buf, sizeof(buf), "  %-28s %10.4f\n", name, it->second);
    out << buf;
}

} // namespace

std::string render_report_text(const EvalReport& report) {
    std::ostringstream out;
    out << "task: " << task_name(report.task.kind)
        << (report.regression ? " (regression)" : " (classification)") << '\n';
    out << "folds: " << report.folds.size() << '\n';
    out << "metrics:\n";
    const ReferenceMetrics* ref = reference_metrics_for(report.task.kind);
    if (report.regression) {
        metric_line(out, report, "mae", ref ? ref->mae : 0.0);
        metric_line(out, report, "mae_sd", ref ? ref->mae_sd : 0.0);
        metric_line(out, report, "rmse", ref ? ref->rmse : 0.0);
        metric_line(out, report, "r2", ref ? ref->r2 : 0.0);
        metric_line(out, report, "mae_window", 0.0);
        metric_line(out, report, "rmse_window", 0.0);
        metric_line(out, report, "r2_window", 0.0);
    } else {
        metric_line(out, report, "balanced_accuracy", ref ? ref->balanced_accuracy : 0.0);
        metric_line(out, report, "f1", ref ? ref->f1 : 0.0);
        metric_line(out, report, "balanced_accuracy_window", 0.0);
        metric_line(out, report, "f1_window", 0.0);
        metric_line(out, report, "roc_auc_window", 0.0);
        const std::vector<std::string> names = task_class_names(report.task.kind);
        out << "confusion (subject level, rows = truth):\n";
        for (int t = 0; t < report.n_classes; ++t) {
            out << "   ";
            for (int p = 0; p < report.n_classes; ++p) {
                char buf[16];
                std::snprintf(buf, sizeof(buf), "%6lld",
                              static_cast<long long>(report.confusion.at(t, p)));
                out << buf;
            }
            if (t < static_cast<int>(names.size())) out << "   " << names[static_cast<std::size_t>(t)];
            out << '\n';
        }
    }
    if (!report.warnings.empty()) {
        out << "warnings:\n";
        for (const std::string& w : report.warnings) out << "  - " << w << '\n';
    }
    return out.str();
}

void write_report_files(const std::filesystem::path& dir, const EvalReport& report,
                        const FeatureTable& table, const PipelineConfig& cfg) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "report.json", report_to_json(report, table, cfg));
    write_file_atomic(dir / "metrics.txt", render_report_text(report));

    for (std::size_t c = 0; c < report.roc.size(); ++c) {
        std::ostringstream out;
        out << "fpr\ttpr\n";
        for (const auto& [fpr, tpr] : report.roc[c])
            out << format_double(fpr) << '\t' << format_double(tpr) << '\n';
        write_file_atomic(dir / ("roc_class" + std::to_string(c) + ".tsv"), out.str());
    }

    std::ostringstream folds;
    folds << "patient\tseed\ttruth\tprediction\tn_windows\n";
    for (const FoldOutcome& f : report.folds) {
        folds << f.patient << '\t' << f.seed << '\t' << format_double(f.truth) << '\t';
        if (report.regression) folds << format_double(f.predicted_value);
        else folds << f.predicted_class;
        folds << '\t' << f.n_windows << '\n';
    }
    write_file_atomic(dir / "folds.tsv", folds.str());
}

std::string render_combined(const std::filesystem::path& reports_dir) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(reports_dir))
        for (const auto& entry : std::filesystem::recursive_directory_iterator(reports_dir))
            if (entry.is_regular_file() && entry.path().filename() == "report.json")
                files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        raise(Errc::io_error, "no report.json found under " + reports_dir.string());

    std::ostringstream out;
    out << "combined evaluation summary\n";
    out << "===========================\n";
    for (const auto& path : files) {
        const EvalReport report = report_from_json(read_whole_file(path));
        out << '\n' << render_report_text(report);
    }
    return out.str();
}

void export_biosignals(const Dataset& ds, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir, bool dump_imfs,
                       bool dump_psd) {
    struct Job {
        const Recording* recording;
        std::string id;
    };
    std::vector<Job> jobs;
    for (const SubjectRecord& subject : ds.subjects)
        for (const Recording& recording : subject.recordings) {
            const std::string name = format_recording_filename(recording.meta);
            jobs.push_back({&recording, name.substr(0, name.size() - 4)});
        }

    std::filesystem::create_directories(out_dir);
    parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
        const Job& job = jobs[i];
        const std::filesystem::path dir = out_dir / job.id;
        std::filesystem::create_directories(dir);
        const Signal working = preprocess_recording(job.recording->audio, cfg);
        const BiosignalSet bset = derive_biosignals(working, cfg.biosignal);
        const std::pair<const char*, const Signal*> signals[] = {
            {"respiration_env", &bset.respiration_env}, {"cardiac_env", &bset.cardiac_env},
            {"imf_heart", &bset.imf_heart},             {"imf_mid1", &bset.imf_mid1},
            {"imf_mid2", &bset.imf_mid2},               {"acoustic", &bset.acoustic}};
        for (const auto& [name, sig] : signals) {
            write_wav_float32(dir / (std::string(name) + ".wav"), *sig);
            if (dump_psd) {
                const std::size_t segment = std::min<std::size_t>(
                    sig->samples.size(),
                    static_cast<std::size_t>(std::llround(8.0 * sig->rate_hz)));
                if (segment >= 8) {
                    const PowerSpectrum psd = welch_psd(*sig, segment, 0.5);
                    std::ostringstream text;
                    write_spectrum(text, psd);
                    write_file_atomic(dir / (std::string(name) + "_psd.tsv"), text.str());
                }
            }
        }
        if (dump_imfs) {
            const ImfSet imfs =
                emd_decompose(working, cfg.biosignal.max_imfs, cfg.biosignal.sift);
            for (std::size_t k = 0; k < imfs.imfs.size(); ++k)
                write_wav_float32(dir / ("imf" + std::to_string(k + 1) + ".wav"),
                                  imfs.imfs[k]);
            write_wav_float32(dir / "imf_residual.wav", imfs.residual);
        }

        json meta;
        meta["source"] = job.id;
        meta["working_rate_hz"] = cfg.working_rate_hz;
        meta["config_hash"] = feature_config_hash(cfg);
        meta["audio_hash"] = hash_signal(job.recording->audio);
        write_file_atomic(dir / "bundle.json", meta.dump(2));
    });
}

} // namespace auscult
