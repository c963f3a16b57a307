#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "auscult/signal.hpp"

namespace auscult {

// Decodes a RIFF/WAVE container. PCM 16/32-bit integer and 32-bit float are
// supported; multi-channel data is reduced to channel 0. Integer samples are
// scaled to [-1, 1]. A zero-length data chunk yields an empty Signal.
Signal decode_wav(std::span<const std::uint8_t> bytes);

Signal read_wav(const std::filesystem::path& path);

// Debug/export encoder: mono 32-bit float.
std::vector<std::uint8_t> encode_wav_float32(const Signal& s);

void write_wav_float32(const std::filesystem::path& path, const Signal& s);

// Mono 16-bit PCM encoder, used by the synthetic dataset generator.
std::vector<std::uint8_t> encode_wav_pcm16(const Signal& s);

void write_wav_pcm16(const std::filesystem::path& path, const Signal& s);

} // namespace auscult
