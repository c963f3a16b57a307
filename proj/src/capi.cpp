#include "auscult/auscult.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "auscult/dataset.hpp"
#include "auscult/errors.hpp"
#include "auscult/pipeline.hpp"
#include "auscult/synth.hpp"

namespace {

thread_local std::string t_last_error;

ausc_status status_for(auscult::Errc code) {
    using auscult::Errc;
    switch (code) {
    case Errc::io_error:
        return AUSC_ERR_IO;
    case Errc::malformed_filename:
    case Errc::malformed_line:
    case Errc::unknown_diagnosis:
    case Errc::duplicate_patient:
    case Errc::unsupported_encoding:
    case Errc::corrupt_header:
        return AUSC_ERR_PARSE;
    case Errc::config_error:
        return AUSC_ERR_CONFIG;
    case Errc::task_error:
        return AUSC_ERR_TASK;
    case Errc::missing_metadata:
    case Errc::empty_dataset:
    case Errc::invalid_signal:
    case Errc::decomposition_degenerate:
    case Errc::empty_class:
    case Errc::one_class_only:
    case Errc::single_patient:
    case Errc::too_few_beats:
        return AUSC_ERR_DATA;
    case Errc::single_class_training:
    case Errc::too_few_rows:
    case Errc::non_finite_target:
    case Errc::arity_mismatch:
        return AUSC_ERR_TRAIN;
    case Errc::invalid_cutoff:
    case Errc::even_tap_count:
    case Errc::rate_mismatch:
    case Errc::segment_too_long:
    case Errc::frame_too_long:
        return AUSC_ERR_INVALID;
    case Errc::internal_error:
        return AUSC_ERR_INTERNAL;
    }
    return AUSC_ERR_INTERNAL;
}

template <typename Fn>
ausc_status guarded(Fn&& fn) {
    try {
        fn();
        return AUSC_OK;
    } catch (const auscult::Error& e) {
        t_last_error = e.what();
        return status_for(e.code());
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return AUSC_ERR_INTERNAL;
    } catch (...) {
        t_last_error = "unknown error";
        return AUSC_ERR_INTERNAL;
    }
}

ausc_status invalid_arg(const char* what) {
    t_last_error = what;
    return AUSC_ERR_INVALID;
}

} // namespace

struct ausc_config {
    auscult::PipelineConfig cfg;
};

struct ausc_dataset {
    auscult::Dataset ds;
    std::vector<std::string> notes;
};

struct ausc_features {
    auscult::FeatureTable table;
};

struct ausc_model {
    auscult::ModelBundle bundle;
};

struct ausc_report {
    auscult::EvalReport report;
    auscult::FeatureTable provenance; // matrix left empty; hashes only
    auscult::PipelineConfig cfg;
    bool cached = false;
};

extern "C" {

const char* ausc_version(void) { return "0.1.0"; }

const char* ausc_status_name(ausc_status status) {
    switch (status) {
    case AUSC_OK: return "ok";
    case AUSC_ERR_IO: return "io";
    case AUSC_ERR_PARSE: return "parse";
    case AUSC_ERR_CONFIG: return "config";
    case AUSC_ERR_TASK: return "task";
    case AUSC_ERR_DATA: return "data";
    case AUSC_ERR_TRAIN: return "train";
    case AUSC_ERR_INVALID: return "invalid";
    case AUSC_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* ausc_last_error(void) { return t_last_error.c_str(); }

ausc_config* ausc_config_create(void) { return new ausc_config(); }

void ausc_config_destroy(ausc_config* cfg) { delete cfg; }

ausc_status ausc_config_load(ausc_config* cfg, const char* path) {
    if (!cfg || !path) return invalid_arg("null argument");
    return guarded([&] { cfg->cfg = auscult::load_config(path); });
}

ausc_status ausc_config_set_seed(ausc_config* cfg, uint64_t seed) {
    if (!cfg) return invalid_arg("null config");
    cfg->cfg.seed = seed;
    return AUSC_OK;
}

ausc_status ausc_config_set_jobs(ausc_config* cfg, int jobs) {
    if (!cfg) return invalid_arg("null config");
    if (jobs < 1) return invalid_arg("jobs must be >= 1");
    cfg->cfg.jobs = jobs;
    return AUSC_OK;
}

ausc_status ausc_config_set_cache_dir(ausc_config* cfg, const char* dir) {
    if (!cfg) return invalid_arg("null config");
    cfg->cfg.cache_dir = dir ? dir : "";
    return AUSC_OK;
}

ausc_status ausc_config_set_model(ausc_config* cfg, const char* model) {
    if (!cfg) return invalid_arg("null config");
    if (!model) {
        cfg->cfg.model_override.reset();
        return AUSC_OK;
    }
    if (std::strcmp(model, "forest") == 0)
        cfg->cfg.model_override = auscult::ModelKind::forest;
    else if (std::strcmp(model, "gbm") == 0)
        cfg->cfg.model_override = auscult::ModelKind::gbm;
    else
        return invalid_arg("model must be 'forest' or 'gbm'");
    return AUSC_OK;
}

ausc_status ausc_dataset_open(const char* root_dir, const ausc_config* cfg,
                              ausc_dataset** out) {
    if (!root_dir || !out) return invalid_arg("null argument");
    return guarded([&] {
        auto ds = std::make_unique<ausc_dataset>();
        auscult::IngestReport report;
        ds->ds = auscult::assemble_dataset(root_dir, &report, cfg ? cfg->cfg.jobs : 1);
        for (auto& s : report.skipped) ds->notes.push_back("skipped: " + s);
        for (auto& w : report.warnings) ds->notes.push_back("warning: " + w);
        *out = ds.release();
    });
}

void ausc_dataset_destroy(ausc_dataset* ds) { delete ds; }

size_t ausc_dataset_subject_count(const ausc_dataset* ds) {
    return ds ? ds->ds.subjects.size() : 0;
}

size_t ausc_dataset_recording_count(const ausc_dataset* ds) {
    return ds ? ds->ds.recording_count() : 0;
}

ausc_status ausc_dataset_write_manifest(const ausc_dataset* ds, const char* path) {
    if (!ds || !path) return invalid_arg("null argument");
    return guarded([&] {
        std::ostringstream out;
        auscult::write_manifest(out, ds->ds);
        auscult::write_file_atomic(path, out.str());
    });
}

size_t ausc_dataset_note_count(const ausc_dataset* ds) { return ds ? ds->notes.size() : 0; }

const char* ausc_dataset_note(const ausc_dataset* ds, size_t index) {
    if (!ds || index >= ds->notes.size()) return nullptr;
    return ds->notes[index].c_str();
}

ausc_status ausc_synth_generate(const char* out_dir, int n_subjects, uint64_t seed) {
    if (!out_dir) return invalid_arg("null out_dir");
    return guarded([&] { auscult::generate_synthetic_dataset(out_dir, n_subjects, seed); });
}

ausc_status ausc_biosignals_export(const ausc_dataset* ds, const ausc_config* cfg,
                                   const char* out_dir, int dump_imfs, int dump_psd) {
    if (!ds || !out_dir) return invalid_arg("null argument");
    return guarded([&] {
        const auscult::PipelineConfig defaults;
        auscult::export_biosignals(ds->ds, cfg ? cfg->cfg : defaults, out_dir,
                                   dump_imfs != 0, dump_psd != 0);
    });
}

ausc_status ausc_features_extract(const ausc_dataset* ds, const ausc_config* cfg,
                                  ausc_features** out) {
    if (!ds || !out) return invalid_arg("null argument");
    return guarded([&] {
        auto ft = std::make_unique<ausc_features>();
        const auscult::PipelineConfig defaults;
        ft->table = auscult::extract_dataset_features(ds->ds, cfg ? cfg->cfg : defaults);
        *out = ft.release();
    });
}

ausc_status ausc_features_save(const ausc_features* ft, const char* path) {
    if (!ft || !path) return invalid_arg("null argument");
    return guarded([&] { auscult::save_feature_table(path, ft->table); });
}

ausc_status ausc_features_load(const char* path, ausc_features** out) {
    if (!path || !out) return invalid_arg("null argument");
    return guarded([&] {
        auto ft = std::make_unique<ausc_features>();
        ft->table = auscult::load_feature_table(path);
        *out = ft.release();
    });
}

void ausc_features_destroy(ausc_features* ft) { delete ft; }

size_t ausc_features_rows(const ausc_features* ft) {
    return ft ? ft->table.matrix.n_rows() : 0;
}

size_t ausc_features_arity(const ausc_features* ft) {
    return ft ? ft->table.matrix.arity() : 0;
}

const char* ausc_features_registry_version(const ausc_features* ft) {
    return ft ? ft->table.registry_version.c_str() : nullptr;
}

size_t ausc_features_cache_hits(const ausc_features* ft) {
    return ft ? ft->table.cache_hits : 0;
}

size_t ausc_features_cache_misses(const ausc_features* ft) {
    return ft ? ft->table.cache_misses : 0;
}

ausc_status ausc_train(const ausc_features* ft, const char* task, const ausc_config* cfg,
                       ausc_model** out) {
    if (!ft || !task || !out) return invalid_arg("null argument");
    return guarded([&] {
        auto model = std::make_unique<ausc_model>();
        const auscult::PipelineConfig defaults;
        model->bundle = auscult::train_task(ft->table, auscult::make_task(task),
                                            cfg ? cfg->cfg : defaults);
        *out = model.release();
    });
}

ausc_status ausc_model_save(const ausc_model* model, const char* path) {
    if (!model || !path) return invalid_arg("null argument");
    return guarded([&] {
        std::ostringstream out;
        auscult::save_model(out, model->bundle);
        auscult::write_file_atomic(path, out.str());
    });
}

ausc_status ausc_model_load(const char* path, ausc_model** out) {
    if (!path || !out) return invalid_arg("null argument");
    return guarded([&] {
        std::ifstream in(path);
        if (!in) auscult::raise(auscult::Errc::io_error, std::string("cannot open ") + path);
        auto model = std::make_unique<ausc_model>();
        model->bundle = auscult::load_model(in);
        *out = model.release();
    });
}

const char* ausc_model_kind(const ausc_model* model) {
    return model ? model->bundle.kind.c_str() : nullptr;
}

void ausc_model_destroy(ausc_model* model) { delete model; }

ausc_status ausc_evaluate(const ausc_features* ft, const char* task,
                          const ausc_config* cfg, ausc_report** out) {
    if (!ft || !task || !out) return invalid_arg("null argument");
    return guarded([&] {
        auto report = std::make_unique<ausc_report>();
        const auscult::PipelineConfig defaults;
        report->cfg = cfg ? cfg->cfg : defaults;
        bool hit = false;
        report->report = auscult::evaluate_task(ft->table, auscult::make_task(task),
                                                report->cfg, &hit);
        report->cached = hit;
        report->provenance.registry_version = ft->table.registry_version;
        report->provenance.config_hash = ft->table.config_hash;
        report->provenance.upstream_hash = ft->table.upstream_hash;
        report->provenance.seed = ft->table.seed;
        *out = report.release();
    });
}

void ausc_report_destroy(ausc_report* report) { delete report; }

ausc_status ausc_report_metric(const ausc_report* report, const char* name,
                               double* out_value) {
    if (!report || !name || !out_value) return invalid_arg("null argument");
    const auto it = report->report.metrics.find(name);
    if (it == report->report.metrics.end()) return invalid_arg("unknown metric");
    *out_value = it->second;
    return AUSC_OK;
}

ausc_status ausc_report_write(const ausc_report* report, const char* out_dir) {
    if (!report || !out_dir) return invalid_arg("null argument");
    return guarded([&] {
        auscult::write_report_files(out_dir, report->report, report->provenance,
                                    report->cfg);
    });
}

int ausc_report_was_cached(const ausc_report* report) {
    return report && report->cached ? 1 : 0;
}

ausc_status ausc_render_combined(const char* reports_dir, const char* out_path) {
    if (!reports_dir) return invalid_arg("null reports_dir");
    return guarded([&] {
        const std::string text = auscult::render_combined(reports_dir);
        if (out_path) auscult::write_file_atomic(out_path, text);
        else std::fputs(text.c_str(), stdout);
    });
}

} // extern "C"
