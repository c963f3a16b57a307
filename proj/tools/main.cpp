// auscult command-line driver. Links only the public C API.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "auscult/auscult.h"

namespace {

int fail(ausc_status status) {
    std::fprintf(stderr, "error (%s): %s\n", ausc_status_name(status), ausc_last_error());
    return static_cast<int>(status);
}

struct ConfigHandle {
    ausc_config* cfg = ausc_config_create();
    ~ConfigHandle() { ausc_config_destroy(cfg); }
};

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string cache_dir;
    int jobs = 0;
    std::string model;
};

int apply_common(const CommonOpts& opts, ausc_config* cfg) {
    if (!opts.config_path.empty()) {
        const ausc_status s = ausc_config_load(cfg, opts.config_path.c_str());
        if (s != AUSC_OK) return fail(s);
    }
    if (opts.seed_set) ausc_config_set_seed(cfg, opts.seed);
    if (!opts.cache_dir.empty()) ausc_config_set_cache_dir(cfg, opts.cache_dir.c_str());
    if (opts.jobs > 0) {
        const ausc_status s = ausc_config_set_jobs(cfg, opts.jobs);
        if (s != AUSC_OK) return fail(s);
    }
    if (!opts.model.empty()) {
        const ausc_status s = ausc_config_set_model(cfg, opts.model.c_str());
        if (s != AUSC_OK) return fail(s);
    }
    return 0;
}

int open_dataset(const std::string& root, const ausc_config* cfg, ausc_dataset** ds,
                 bool print_notes) {
    const ausc_status s = ausc_dataset_open(root.c_str(), cfg, ds);
    if (s != AUSC_OK) return fail(s);
    if (print_notes)
        for (size_t i = 0; i < ausc_dataset_note_count(*ds); ++i)
            std::fprintf(stderr, "%s\n", ausc_dataset_note(*ds, i));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"auscult — respiratory sound analysis pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "JSON pipeline configuration");
    app.add_option("--seed", common.seed, "random seed recorded in every artifact")
        ->each([&common](const std::string&) { common.seed_set = true; });
    app.add_option("--cache", common.cache_dir, "cache directory for intermediates");
    app.add_option("--jobs", common.jobs, "worker threads");
    app.add_option("--model", common.model, "override model kind: forest or gbm");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse a dataset and write its manifest");
    std::string ingest_root, ingest_out = "manifest.tsv";
    ingest->add_option("root", ingest_root, "dataset root directory")->required();
    ingest->add_option("--out", ingest_out, "manifest path");

    // biosignals
    auto* bios = app.add_subcommand("biosignals", "derive and export six-signal bundles");
    std::string bios_root, bios_out = "biosignals";
    bool bios_imfs = false, bios_psd = false;
    bios->add_option("root", bios_root, "dataset root directory")->required();
    bios->add_option("--out", bios_out, "output directory");
    bios->add_flag("--imfs", bios_imfs, "also dump raw decomposition components");
    bios->add_flag("--psd", bios_psd, "also dump per-signal spectra");

    // features
    auto* feat = app.add_subcommand("features", "extract the windowed feature matrix");
    std::string feat_root, feat_out = "features.tsv";
    feat->add_option("root", feat_root, "dataset root directory")->required();
    feat->add_option("--out", feat_out, "feature matrix path");

    // train
    auto* train = app.add_subcommand("train", "train a model on all eligible rows");
    std::string train_task, train_features, train_out = "model.json";
    train->add_option("--task", train_task, "task name")->required();
    train->add_option("--features", train_features, "feature matrix path")->required();
    train->add_option("--out", train_out, "model path");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "run leave-one-subject-out evaluation");
    std::string eval_task, eval_features, eval_out;
    eval->add_option("--task", eval_task, "task name")->required();
    eval->add_option("--features", eval_features, "feature matrix path")->required();
    eval->add_option("--out", eval_out, "report directory (default reports/<task>)");

    // report
    auto* report = app.add_subcommand("report", "render the combined metrics table");
    std::string report_dir = "reports", report_out;
    report->add_option("--reports", report_dir, "directory containing task reports");
    report->add_option("--out", report_out, "write the table here instead of stdout");

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic acceptance dataset");
    std::string synth_out = "synth-data";
    int synth_subjects = 24;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--subjects", synth_subjects, "number of subjects");

    CLI11_PARSE(app, argc, argv);

    ConfigHandle cfg;
    if (const int rc = apply_common(common, cfg.cfg); rc != 0) return rc;

    if (ingest->parsed()) {
        ausc_dataset* ds = nullptr;
        if (const int rc = open_dataset(ingest_root, cfg.cfg, &ds, true); rc != 0) return rc;
        const ausc_status s = ausc_dataset_write_manifest(ds, ingest_out.c_str());
        std::printf("subjects: %zu\nrecordings: %zu\nmanifest: %s\n",
                    ausc_dataset_subject_count(ds), ausc_dataset_recording_count(ds),
                    ingest_out.c_str());
        ausc_dataset_destroy(ds);
        return s == AUSC_OK ? 0 : fail(s);
    }

    if (bios->parsed()) {
        ausc_dataset* ds = nullptr;
        if (const int rc = open_dataset(bios_root, cfg.cfg, &ds, false); rc != 0) return rc;
        const ausc_status s = ausc_biosignals_export(ds, cfg.cfg, bios_out.c_str(),
                                                     bios_imfs ? 1 : 0, bios_psd ? 1 : 0);
        ausc_dataset_destroy(ds);
        if (s != AUSC_OK) return fail(s);
        std::printf("biosignal bundles written to %s\n", bios_out.c_str());
        return 0;
    }

    if (feat->parsed()) {
        ausc_dataset* ds = nullptr;
        if (const int rc = open_dataset(feat_root, cfg.cfg, &ds, false); rc != 0) return rc;
        ausc_features* ft = nullptr;
        ausc_status s = ausc_features_extract(ds, cfg.cfg, &ft);
        ausc_dataset_destroy(ds);
        if (s != AUSC_OK) return fail(s);
        s = ausc_features_save(ft, feat_out.c_str());
        std::printf("rows: %zu\nfeatures: %zu (registry %s)\ncache: %zu hits, %zu misses\n",
                    ausc_features_rows(ft), ausc_features_arity(ft),
                    ausc_features_registry_version(ft), ausc_features_cache_hits(ft),
                    ausc_features_cache_misses(ft));
        ausc_features_destroy(ft);
        return s == AUSC_OK ? 0 : fail(s);
    }

    if (train->parsed()) {
        ausc_features* ft = nullptr;
        ausc_status s = ausc_features_load(train_features.c_str(), &ft);
        if (s != AUSC_OK) return fail(s);
        ausc_model* model = nullptr;
        s = ausc_train(ft, train_task.c_str(), cfg.cfg, &model);
        ausc_features_destroy(ft);
        if (s != AUSC_OK) return fail(s);
        s = ausc_model_save(model, train_out.c_str());
        std::printf("model kind: %s\nmodel: %s\n", ausc_model_kind(model), train_out.c_str());
        ausc_model_destroy(model);
        return s == AUSC_OK ? 0 : fail(s);
    }

    if (eval->parsed()) {
        ausc_features* ft = nullptr;
        ausc_status s = ausc_features_load(eval_features.c_str(), &ft);
        if (s != AUSC_OK) return fail(s);
        ausc_report* rep = nullptr;
        s = ausc_evaluate(ft, eval_task.c_str(), cfg.cfg, &rep);
        ausc_features_destroy(ft);
        if (s != AUSC_OK) return fail(s);
        const std::string out_dir =
            eval_out.empty() ? "reports/" + eval_task : eval_out;
        s = ausc_report_write(rep, out_dir.c_str());
        if (ausc_report_was_cached(rep)) std::printf("(cache hit)\n");
        static const char* headline[] = {"balanced_accuracy", "f1", "roc_auc_window",
                                         "mae", "rmse", "r2"};
        for (const char* name : headline) {
            double value = 0.0;
            if (ausc_report_metric(rep, name, &value) == AUSC_OK)
                std::printf("%s: %.4f\n", name, value);
        }
        std::printf("report: %s\n", out_dir.c_str());
        ausc_report_destroy(rep);
        return s == AUSC_OK ? 0 : fail(s);
    }

    if (report->parsed()) {
        const ausc_status s = ausc_render_combined(
            report_dir.c_str(), report_out.empty() ? nullptr : report_out.c_str());
        return s == AUSC_OK ? 0 : fail(s);
    }

    if (synth->parsed()) {
        const ausc_status s =
            ausc_synth_generate(synth_out.c_str(), synth_subjects,
                                common.seed_set ? common.seed : 0);
        if (s != AUSC_OK) return fail(s);
        std::printf("synthetic dataset (%d subjects) written to %s\n", synth_subjects,
                    synth_out.c_str());
        return 0;
    }

    return 0;
}
