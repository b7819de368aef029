#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "cvoam/corpus.hpp"
#include "cvoam/csv.hpp"

namespace cvoam {

namespace {

uint16_t read_u16(const std::vector<unsigned char>& b, size_t off) {
    return static_cast<uint16_t>(b[off] | (b[off + 1] << 8));
}

uint32_t read_u32(const std::vector<unsigned char>& b, size_t off) {
    return static_cast<uint32_t>(b[off]) | (static_cast<uint32_t>(b[off + 1]) << 8) |
           (static_cast<uint32_t>(b[off + 2]) << 16) | (static_cast<uint32_t>(b[off + 3]) << 24);
}

bool chunk_id_is(const std::vector<unsigned char>& b, size_t off, const char* id) {
    return std::memcmp(b.data() + off, id, 4) == 0;
}

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

}  // namespace

AudioClip load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrKind::MissingFile, path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || !chunk_id_is(bytes, 0, "RIFF") || !chunk_id_is(bytes, 8, "WAVE")) {
        fail(ErrKind::CorruptFile, path + ": not a RIFF/WAVE file");
    }

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    size_t data_off = 0, data_size = 0;
    bool have_data = false;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        uint32_t size = read_u32(bytes, pos + 4);
        size_t body = pos + 8;
        if (chunk_id_is(bytes, pos, "fmt ")) {
            if (size < 16 || body + 16 > bytes.size()) {
                fail(ErrKind::CorruptFile, path + ": truncated fmt chunk");
            }
            format = read_u16(bytes, body);
            channels = read_u16(bytes, body + 2);
            rate = read_u32(bytes, body + 4);
            bits = read_u16(bytes, body + 14);
            have_fmt = true;
        } else if (chunk_id_is(bytes, pos, "data")) {
            if (body + size > bytes.size()) {
                fail(ErrKind::CorruptFile, path + ": truncated data chunk");
            }
            data_off = body;
            data_size = size;
            have_data = true;
        }
        pos = body + size + (size & 1);
    }
    if (!have_fmt || !have_data) {
        fail(ErrKind::CorruptFile, path + ": missing fmt or data chunk");
    }
    if (format != 1) fail(ErrKind::UnsupportedFormat, path + ": not PCM (format tag " + std::to_string(format) + ")");
    if (channels != 1) fail(ErrKind::UnsupportedFormat, path + ": expected mono, got " + std::to_string(channels) + " channels");
    if (rate != 16000) fail(ErrKind::UnsupportedFormat, path + ": expected 16000 Hz, got " + std::to_string(rate));
    if (bits != 16) fail(ErrKind::UnsupportedFormat, path + ": expected 16-bit samples, got " + std::to_string(bits));
    if (data_size < 2) fail(ErrKind::CorruptFile, path + ": empty data chunk");

    AudioClip clip;
    clip.sample_rate_hz = 16000;
    size_t n = data_size / 2;
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        int16_t v = static_cast<int16_t>(read_u16(bytes, data_off + 2 * i));
        clip.samples[i] = static_cast<double>(v) / 32768.0;
    }
    return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
    if (clip.sample_rate_hz != 16000) {
        fail(ErrKind::UnsupportedFormat, "write_wav only emits 16 kHz audio");
    }
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_bytes = n * 2;

    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, 1);              // PCM
    put_u16(out, 1);              // mono
    put_u32(out, 16000);          // sample rate
    put_u32(out, 16000 * 2);      // byte rate
    put_u16(out, 2);              // block align
    put_u16(out, 16);             // bits per sample
    out += "data";
    put_u32(out, data_bytes);
    for (uint32_t i = 0; i < n; ++i) {
        double scaled = std::lround(clip.samples[i] * 32768.0);
        if (scaled > 32767.0) scaled = 32767.0;
        if (scaled < -32768.0) scaled = -32768.0;
        put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(scaled)));
    }
    write_file_atomic(path, out);
}

}  // namespace cvoam
