#include "auscult/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace auscult {

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) |
           (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) |
           (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>(static_cast<std::uint32_t>(b[off]) |
                                      (static_cast<std::uint32_t>(b[off + 1]) << 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t off, const char* tag) {
    return std::memcmp(b.data() + off, tag, 4) == 0;
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
}

void append_tag(std::vector<std::uint8_t>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

std::vector<std::uint8_t> encode_header(std::uint16_t format, std::uint16_t bits,
                                        std::uint32_t rate, std::uint32_t data_bytes) {
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    append_tag(out, "RIFF");
    append_u32(out, 36 + data_bytes);
    append_tag(out, "WAVE");
    append_tag(out, "fmt ");
    append_u32(out, 16);
    append_u16(out, format);
    append_u16(out, 1); // mono
    append_u32(out, rate);
    append_u32(out, rate * bits / 8);
    append_u16(out, static_cast<std::uint16_t>(bits / 8));
    append_u16(out, bits);
    append_tag(out, "data");
    append_u32(out, data_bytes);
    return out;
}

} // namespace

Signal decode_wav(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
        raise(Errc::corrupt_header, "not a RIFF/WAVE container");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::size_t data_off = 0, data_len = 0;
    bool have_data = false;

    std::size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const std::size_t chunk_len = read_u32(bytes, off + 4);
        const std::size_t body = off + 8;
        if (tag_is(bytes, off, "fmt ")) {
            if (body + 16 > bytes.size())
                raise(Errc::corrupt_header, "truncated fmt chunk");
            format = read_u16(bytes, body);
            channels = read_u16(bytes, body + 2);
            rate = read_u32(bytes, body + 4);
            bits = read_u16(bytes, body + 14);
            have_fmt = true;
        } else if (tag_is(bytes, off, "data")) {
            data_off = body;
            data_len = std::min<std::size_t>(chunk_len, bytes.size() - body);
            have_data = true;
        }
        off = body + chunk_len + (chunk_len & 1); // chunks are word-aligned
    }

    if (!have_fmt || !have_data)
        raise(Errc::corrupt_header, "missing fmt or data chunk");
    if (channels == 0 || rate == 0)
        raise(Errc::corrupt_header, "invalid channel count or rate");

    const bool pcm16 = format == 1 && bits == 16;
    const bool pcm32 = format == 1 && bits == 32;
    const bool float32 = format == 3 && bits == 32;
    if (!pcm16 && !pcm32 && !float32)
        raise(Errc::unsupported_encoding,
              "only PCM16, PCM32 and float32 are supported (format " +
                  std::to_string(format) + ", " + std::to_string(bits) + " bits)");

    const std::size_t sample_bytes = bits / 8;
    const std::size_t frame_bytes = sample_bytes * channels;
    const std::size_t n_frames = frame_bytes == 0 ? 0 : data_len / frame_bytes;

    Signal s;
    s.rate_hz = static_cast<double>(rate);
    s.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        const std::size_t p = data_off + i * frame_bytes; // channel 0
        if (pcm16) {
            std::int16_t v;
            std::memcpy(&v, bytes.data() + p, 2);
            s.samples[i] = static_cast<double>(v) / 32768.0;
        } else if (pcm32) {
            std::int32_t v;
            std::memcpy(&v, bytes.data() + p, 4);
            s.samples[i] = static_cast<double>(v) / 2147483648.0;
        } else {
            float v;
            std::memcpy(&v, bytes.data() + p, 4);
            s.samples[i] = static_cast<double>(v);
        }
    }
    return s;
}

Signal read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav_float32(const Signal& s) {
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(s.samples.size() * 4);
    std::vector<std::uint8_t> out =
        encode_header(3, 32, static_cast<std::uint32_t>(std::llround(s.rate_hz)), data_bytes);
    for (double v : s.samples) {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        append_u32(out, u);
    }
    return out;
}

std::vector<std::uint8_t> encode_wav_pcm16(const Signal& s) {
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(s.samples.size() * 2);
    std::vector<std::uint8_t> out =
        encode_header(1, 16, static_cast<std::uint32_t>(std::llround(s.rate_hz)), data_bytes);
    for (double v : s.samples) {
        const double clamped = std::clamp(v, -1.0, 1.0);
        const int q = static_cast<int>(std::lround(clamped * 32767.0));
        append_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

} // namespace

void write_wav_float32(const std::filesystem::path& path, const Signal& s) {
    write_bytes(path, encode_wav_float32(s));
}

void write_wav_pcm16(const std::filesystem::path& path, const Signal& s) {
    write_bytes(path, encode_wav_pcm16(s));
}

} // namespace auscult
