#pragma once

#include "keyclink/audio.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace keyclink {

// Keystroke span: press click only, or press plus the release click.
enum class Span { P, PR };

std::string span_name(Span s);
Span span_from_name(const std::string& name);

// Short-time energy per frame of the source recording.
struct EnergySeries {
    std::vector<double> values; // sum of squared samples per frame
    std::size_t frame_len = 0;  // samples
    std::size_t hop = 0;        // samples
    int sample_rate = 0;        // carried over from the recording
};

// Fixed-size window of audio attributed to one keystroke. All segments
// cut from one recording share the same length so that FFT and
// cross-correlation features line up.
struct KeystrokeSegment {
    std::vector<double> samples;
    std::size_t onset_index = 0; // sample offset into the source recording
    Span span = Span::P;
    double press_window_ms = 0.0;
    double release_window_ms = 0.0;
    int sample_rate = 0;
};

struct BadFraming : Error {
    explicit BadFraming(const std::string& msg) : Error("bad framing: " + msg) {}
};
struct TooFewKeystrokes : Error {
    TooFewKeystrokes(std::size_t found_, std::size_t expected_)
        : Error("too few keystrokes: found " + std::to_string(found_) + ", expected " +
                std::to_string(expected_)),
          found(found_),
          expected(expected_) {}
    std::size_t found;
    std::size_t expected;
};

struct SegmentationParams {
    double frame_ms = 5.0;
    double hop_ms = 1.0;
    double threshold_factor = 8.0; // relative to median frame energy
    double min_gap_ms = 60.0;
    double press_window_ms = 30.0;
    double release_window_ms = 90.0;
};

// Milliseconds to whole samples, truncating.
std::size_t ms_to_samples(double ms, int sample_rate);

EnergySeries short_time_energy(const AudioRecording& rec, std::size_t frame_len, std::size_t hop);

// Peak picking over the energy series. Peaks must exceed
// threshold_factor x median(energy) and be separated by min_gap_ms;
// when two candidates collide, the higher peak wins. If expected_count
// is given, the expected_count highest peaks are kept (TooFewKeystrokes
// if fewer were found). Returned onsets are sample indices, ascending.
std::vector<std::size_t> detect_keystrokes(const EnergySeries& energy, double threshold_factor,
                                           double min_gap_ms,
                                           std::optional<std::size_t> expected_count);

// Cut one window per onset. P spans cover [onset, onset + press);
// PR spans cover [onset, onset + press + release). Windows running past
// the end of the recording are zero-padded to the uniform length.
std::vector<KeystrokeSegment> extract_spans(const AudioRecording& rec,
                                            const std::vector<std::size_t>& onsets, Span span,
                                            double press_window_ms, double release_window_ms);

// energy -> detect -> extract, with the defaults above.
std::vector<KeystrokeSegment> segment_recording(const AudioRecording& rec,
                                                const SegmentationParams& params, Span span,
                                                std::optional<std::size_t> expected_count);

// segments.json (External Interface)
struct SegmentFile {
    std::string source_id;
    int sample_rate = 0;
    Span span = Span::P;
    double press_window_ms = 0.0;
    double release_window_ms = 0.0;
    std::vector<std::size_t> onsets;
    std::size_t segment_len = 0;
};

void save_segments(const std::string& path, const SegmentFile& f);
SegmentFile load_segments(const std::string& path);
SegmentFile describe_segments(const AudioRecording& rec, const std::vector<KeystrokeSegment>& segs);

} // namespace keyclink
