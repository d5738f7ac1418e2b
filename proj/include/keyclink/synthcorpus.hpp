#pragma once

#include "keyclink/audio.hpp"
#include "keyclink/clustering.hpp"
#include "keyclink/demodulation.hpp"
#include "keyclink/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace keyclink {

struct RolloverRequested : Error {
    RolloverRequested(double gap_ms, double needed_ms)
        : Error("inter-key gap " + std::to_string(gap_ms) + " ms would overlap keystrokes (needs > " +
                std::to_string(needed_ms) + " ms)") {}
};

struct SyntheticSample {
    AudioRecording recording;
    std::vector<std::string> passphrase;
    std::string key_sequence; // typed characters, single spaces between words
    std::vector<std::size_t> onsets;
    std::string labels; // ground-truth key per keystroke (== key_sequence)
    std::uint64_t seed = 0;
    std::uint64_t kit_seed = 0;
    double snr_db = 0.0;
};

struct KeyJitter {
    double timing_ms = 2.0;
    double amplitude = 0.1; // attenuation-only: gain drawn from [1 - amplitude, 1]
};

// Press click lasts 30 ms; the release click starts 90 ms after the
// press and lasts 30 ms, so a full keystroke template covers 120 ms.
inline constexpr double kPressMs = 30.0;
inline constexpr double kReleaseDelayMs = 90.0;
inline constexpr double kReleaseMs = 30.0;
inline constexpr double kTemplateMs = kReleaseDelayMs + kReleaseMs;

std::vector<std::string> gen_passphrase(const Wordlist& wl, std::size_t n_words, Rng& rng);

// Deterministic per (key, kit_seed): 2-4 damped sinusoids on a
// key-specific frequency slot in 400-8000 Hz, press + release clicks,
// peak amplitude 1.
std::vector<double> key_signature(char key, std::uint64_t kit_seed, int sample_rate = 44100);

// snr_db may be +infinity for a noiseless recording. Jitters are drawn
// first (per keystroke, in order), then noise samples; equal seeds give
// equal onsets/gains across different SNRs.
SyntheticSample synth_recording(const std::vector<std::string>& passphrase,
                                std::uint64_t kit_seed, double snr_db, double inter_key_ms,
                                const KeyJitter& jitter, std::uint64_t seed,
                                int sample_rate = 44100);

Clustering corrupt_clustering(const Clustering& c, double error_rate, Rng& rng);

// Key -> cluster id ('a'..'z' -> 0..25, space -> 26); the ground-truth
// clustering all oracle experiments start from.
int key_to_id(char key);
char id_to_key(int id);
Clustering truth_clustering(const std::string& key_sequence, int k = kDefaultK);

// Fixed 30-passphrase generation preset (the `--preset appendix` list).
const std::vector<std::vector<std::string>>& appendix_passphrases();

// truth-file round trip for synthetic corpora on disk
void save_truth(const std::string& path, const SyntheticSample& s);
SyntheticSample load_truth(const std::string& path); // recording left empty

} // namespace keyclink
