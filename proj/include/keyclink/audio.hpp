#pragma once

#include "keyclink/error.hpp"

#include <string>
#include <vector>

namespace keyclink {

// Mono sample buffer, the root of the DSP pipeline. Samples live in
// [-1, 1] once loaded/normalized; values are immutable by convention
// (all operations return new recordings).
struct AudioRecording {
    std::vector<double> samples;
    int sample_rate = 0; // Hz, >= kMinSampleRate
    std::string source_id;

    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

inline constexpr int kMinSampleRate = 8000;

struct NotWav : Error {
    explicit NotWav(const std::string& msg) : Error("not a WAV file: " + msg) {}
};
struct UnsupportedEncoding : Error {
    explicit UnsupportedEncoding(const std::string& msg) : Error("unsupported WAV encoding: " + msg) {}
};
struct EmptyAudio : Error {
    explicit EmptyAudio(const std::string& msg) : Error("empty audio: " + msg) {}
};

// Load a RIFF/WAV file. Accepts PCM int 8/16/24 bit and IEEE float 32,
// mono or stereo. Stereo is down-mixed by channel average; integer
// samples are scaled to [-1, 1]. Sample rates below 8 kHz are rejected
// (keystroke spectral content extends well above 4 kHz).
AudioRecording load_wav(const std::string& path);

// Write 16-bit PCM mono WAV. Samples are clamped to [-1, 1] first.
void save_wav(const std::string& path, const AudioRecording& rec);

// Scale so the peak |sample| is 1. The zero signal is returned unchanged.
AudioRecording peak_normalize(const AudioRecording& rec);

} // namespace keyclink
