#pragma once

#include <cstdint>
#include <filesystem>

namespace auscult {

// Writes a self-contained synthetic auscultation dataset in the distribution
// layout (WAV recordings, cycle annotations, diagnosis and demographics
// tables). Subjects split into two acoustic classes with distinct breathing
// and cardiac modulation rates and burst textures; labels alternate between
// Healthy and COPD so the binary task is balanced. Deterministic in the seed.
void generate_synthetic_dataset(const std::filesystem::path& out_dir, int n_subjects,
                                std::uint64_t seed);

} // namespace auscult
