#include "keyclink/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace keyclink {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
    return std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8;
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
}

} // namespace

AudioRecording load_wav(const std::string& path) {
    std::ifstream fin(path, std::ios::binary);
    if (!fin.good()) {
        throw NotWav(path + " (cannot open)");
    }
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(fin)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
        std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
        throw NotWav(path);
    }

    // chunk walk: find fmt and data
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;
    std::size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const char* id = reinterpret_cast<const char*>(buf.data() + pos);
        std::uint32_t len = read_u32(buf.data() + pos + 4);
        if (pos + 8 + len > buf.size()) {
            len = static_cast<std::uint32_t>(buf.size() - pos - 8); // tolerate truncated final chunk
        }
        if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
            const unsigned char* f = buf.data() + pos + 8;
            format = read_u16(f);
            channels = read_u16(f + 2);
            rate = read_u32(f + 4);
            bits = read_u16(f + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = buf.data() + pos + 8;
            data_len = len;
        }
        pos += 8 + len + (len & 1); // chunks are word-aligned
    }
    if (format == 0) {
        throw NotWav(path + " (no fmt chunk)");
    }
    if (channels < 1 || channels > 2) {
        throw UnsupportedEncoding(std::to_string(channels) + " channels");
    }
    const bool is_float = format == 3;
    if (!(format == 1 || is_float)) {
        throw UnsupportedEncoding("format tag " + std::to_string(format));
    }
    if (is_float ? bits != 32 : (bits != 8 && bits != 16 && bits != 24)) {
        throw UnsupportedEncoding(std::to_string(bits) + "-bit " + (is_float ? "float" : "PCM"));
    }
    if (rate < static_cast<std::uint32_t>(kMinSampleRate)) {
        throw UnsupportedEncoding("sample rate " + std::to_string(rate) + " Hz below 8 kHz");
    }
    if (data == nullptr || data_len == 0) {
        throw EmptyAudio(path);
    }

    const std::size_t bytes_per = bits / 8;
    const std::size_t frames = data_len / (bytes_per * channels);
    if (frames == 0) {
        throw EmptyAudio(path);
    }

    AudioRecording rec;
    rec.sample_rate = static_cast<int>(rate);
    rec.source_id = path;
    rec.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (unsigned c = 0; c < channels; ++c) {
            const unsigned char* p = data + (i * channels + c) * bytes_per;
            double v = 0.0;
            if (is_float) {
                float f;
                std::memcpy(&f, p, 4);
                v = f;
            } else if (bits == 8) {
                v = (static_cast<int>(p[0]) - 128) / 128.0; // 8-bit WAV is unsigned
            } else if (bits == 16) {
                std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
                v = s / 32768.0;
            } else { // 24
                std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
                if (s & 0x800000) s |= ~0xFFFFFF;
                v = s / 8388608.0;
            }
            acc += v;
        }
        rec.samples[i] = acc / channels;
    }
    return rec;
}

void save_wav(const std::string& path, const AudioRecording& rec) {
    if (rec.samples.empty()) {
        throw EmptyAudio(path + " (nothing to write)");
    }
    const std::uint32_t n = static_cast<std::uint32_t>(rec.samples.size());
    std::vector<unsigned char> out;
    out.reserve(44 + 2 * n);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + 2 * n);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, 1); // PCM
    put_u16(out, 1); // mono
    put_u32(out, static_cast<std::uint32_t>(rec.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(rec.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, 2 * n);
    for (double s : rec.samples) {
        double c = std::clamp(s, -1.0, 1.0);
        // same 1/32768 scale as the reader keeps the round trip within
        // half an LSB (one LSB at the clipped positive end)
        int v = static_cast<int>(std::lrint(c * 32768.0));
        v = std::clamp(v, -32768, 32767);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    }
    std::ofstream fout(path, std::ios::binary);
    if (!fout.good()) {
        throw Error("cannot write " + path);
    }
    fout.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

AudioRecording peak_normalize(const AudioRecording& rec) {
    double peak = 0.0;
    for (double s : rec.samples) peak = std::max(peak, std::fabs(s));
    if (peak <= 0.0) {
        return rec;
    }
    AudioRecording out = rec;
    for (double& s : out.samples) s /= peak;
    return out;
}

} // namespace keyclink
