#pragma once

#include <stdexcept>
#include <string>

namespace auscult {

enum class Errc {
    // ingestion
    malformed_filename,
    unsupported_encoding,
    corrupt_header,
    malformed_line,
    unknown_diagnosis,
    duplicate_patient,
    missing_metadata,
    empty_dataset,
    // dsp
    invalid_cutoff,
    even_tap_count,
    rate_mismatch,
    segment_too_long,
    frame_too_long,
    invalid_signal,
    // emd
    decomposition_degenerate,
    // features
    too_few_beats,
    // models
    single_class_training,
    too_few_rows,
    non_finite_target,
    arity_mismatch,
    // eval
    single_patient,
    empty_class,
    one_class_only,
    // plumbing
    io_error,
    config_error,
    task_error,
    internal_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, std::string(errc_name(code)) + ": " + message);
}

} // namespace auscult
