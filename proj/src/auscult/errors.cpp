#include "auscult/errors.hpp"

namespace auscult {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::malformed_filename: return "MalformedFilename";
    case Errc::unsupported_encoding: return "UnsupportedEncoding";
    case Errc::corrupt_header: return "CorruptHeader";
    case Errc::malformed_line: return "MalformedLine";
    case Errc::unknown_diagnosis: return "UnknownDiagnosis";
    case Errc::duplicate_patient: return "DuplicatePatient";
    case Errc::missing_metadata: return "MissingMetadata";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::invalid_cutoff: return "InvalidCutoff";
    case Errc::even_tap_count: return "EvenTapCount";
    case Errc::rate_mismatch: return "RateMismatch";
    case Errc::segment_too_long: return "SegmentTooLong";
    case Errc::frame_too_long: return "FrameTooLong";
    case Errc::invalid_signal: return "InvalidSignal";
    case Errc::decomposition_degenerate: return "DecompositionDegenerate";
    case Errc::too_few_beats: return "TooFewBeats";
    case Errc::single_class_training: return "SingleClassTraining";
    case Errc::too_few_rows: return "TooFewRows";
    case Errc::non_finite_target: return "NonFiniteTarget";
    case Errc::arity_mismatch: return "ArityMismatch";
    case Errc::single_patient: return "SinglePatient";
    case Errc::empty_class: return "EmptyClass";
    case Errc::one_class_only: return "OneClassOnly";
    case Errc::io_error: return "IoError";
    case Errc::config_error: return "ConfigError";
    case Errc::task_error: return "TaskError";
    case Errc::internal_error: return "InternalError";
    }
    return "UnknownError";
}

} // namespace auscult
