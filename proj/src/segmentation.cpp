#include "keyclink/segmentation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace keyclink {

std::string span_name(Span s) { return s == Span::P ? "P" : "PR"; }

Span span_from_name(const std::string& name) {
    if (name == "P" || name == "p") return Span::P;
    if (name == "PR" || name == "pr") return Span::PR;
    throw Error("unknown span: " + name);
}

std::size_t ms_to_samples(double ms, int sample_rate) {
    if (ms < 0.0) throw BadFraming("negative duration");
    return static_cast<std::size_t>(ms * sample_rate / 1000.0);
}

EnergySeries short_time_energy(const AudioRecording& rec, std::size_t frame_len, std::size_t hop) {
    if (frame_len == 0 || hop == 0) throw BadFraming("frame_len and hop must be positive");
    if (rec.samples.size() < frame_len)
        throw BadFraming("recording shorter than one frame");
    const std::size_t n_frames = (rec.samples.size() - frame_len) / hop + 1;
    EnergySeries es;
    es.frame_len = frame_len;
    es.hop = hop;
    es.sample_rate = rec.sample_rate;
    es.values.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        const double* p = rec.samples.data() + i * hop;
        for (std::size_t j = 0; j < frame_len; ++j) acc += p[j] * p[j];
        es.values[i] = acc;
    }
    return es;
}

static double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::size_t> detect_keystrokes(const EnergySeries& energy, double threshold_factor,
                                           double min_gap_ms,
                                           std::optional<std::size_t> expected_count) {
    if (energy.values.empty()) throw BadFraming("empty energy series");
    const double threshold = threshold_factor * median_of(energy.values);
    const std::size_t min_gap = ms_to_samples(min_gap_ms, energy.sample_rate);

    // Candidate frames above threshold, strongest first so that when two
    // candidates fall within min_gap the higher one survives.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < energy.values.size(); ++i)
        if (energy.values[i] > threshold) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return energy.values[a] > energy.values[b];
    });

    std::vector<std::size_t> accepted; // sample onsets
    std::vector<double> heights;
    for (std::size_t frame : order) {
        const std::size_t onset = frame * energy.hop;
        bool clash = false;
        for (std::size_t prior : accepted) {
            const std::size_t gap = prior > onset ? prior - onset : onset - prior;
            if (gap < min_gap) {
                clash = true;
                break;
            }
        }
        if (!clash) {
            accepted.push_back(onset);
            heights.push_back(energy.values[frame]);
        }
    }

    if (expected_count) {
        if (accepted.size() < *expected_count)
            throw TooFewKeystrokes(accepted.size(), *expected_count);
        // accepted is already ordered by height descending.
        accepted.resize(*expected_count);
    }
    std::sort(accepted.begin(), accepted.end());
    return accepted;
}

std::vector<KeystrokeSegment> extract_spans(const AudioRecording& rec,
                                            const std::vector<std::size_t>& onsets, Span span,
                                            double press_window_ms, double release_window_ms) {
    double total_ms = press_window_ms;
    if (span == Span::PR) total_ms += release_window_ms;
    const std::size_t len = ms_to_samples(total_ms, rec.sample_rate);
    if (len == 0) throw BadFraming("zero-length span window");

    std::vector<KeystrokeSegment> out;
    out.reserve(onsets.size());
    for (std::size_t onset : onsets) {
        KeystrokeSegment seg;
        seg.onset_index = onset;
        seg.span = span;
        seg.press_window_ms = press_window_ms;
        seg.release_window_ms = span == Span::PR ? release_window_ms : 0.0;
        seg.sample_rate = rec.sample_rate;
        seg.samples.assign(len, 0.0);
        for (std::size_t j = 0; j < len; ++j) {
            const std::size_t idx = onset + j;
            if (idx >= rec.samples.size()) break;
            seg.samples[j] = rec.samples[idx];
        }
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<KeystrokeSegment> segment_recording(const AudioRecording& rec,
                                                const SegmentationParams& params, Span span,
                                                std::optional<std::size_t> expected_count) {
    const std::size_t frame = ms_to_samples(params.frame_ms, rec.sample_rate);
    const std::size_t hop = ms_to_samples(params.hop_ms, rec.sample_rate);
    EnergySeries es = short_time_energy(rec, frame, hop);
    auto onsets =
        detect_keystrokes(es, params.threshold_factor, params.min_gap_ms, expected_count);
    return extract_spans(rec, onsets, span, params.press_window_ms, params.release_window_ms);
}

void save_segments(const std::string& path, const SegmentFile& f) {
    nlohmann::json j;
    j["source_id"] = f.source_id;
    j["sample_rate"] = f.sample_rate;
    j["span"] = span_name(f.span);
    j["window_ms"] = {{"press", f.press_window_ms}, {"release", f.release_window_ms}};
    j["onsets"] = f.onsets;
    j["segment_len"] = f.segment_len;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

SegmentFile load_segments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    SegmentFile f;
    try {
        f.source_id = j.at("source_id").get<std::string>();
        f.sample_rate = j.at("sample_rate").get<int>();
        f.span = span_from_name(j.at("span").get<std::string>());
        f.press_window_ms = j.at("window_ms").at("press").get<double>();
        f.release_window_ms = j.at("window_ms").at("release").get<double>();
        f.onsets = j.at("onsets").get<std::vector<std::size_t>>();
        f.segment_len = j.at("segment_len").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    if (!std::is_sorted(f.onsets.begin(), f.onsets.end()))
        throw Error(path + ": onsets not ascending");
    return f;
}

SegmentFile describe_segments(const AudioRecording& rec,
                              const std::vector<KeystrokeSegment>& segs) {
    SegmentFile f;
    f.source_id = rec.source_id;
    f.sample_rate = rec.sample_rate;
    if (!segs.empty()) {
        f.span = segs.front().span;
        f.press_window_ms = segs.front().press_window_ms;
        f.release_window_ms = segs.front().release_window_ms;
        f.segment_len = segs.front().samples.size();
        for (const auto& s : segs) f.onsets.push_back(s.onset_index);
    }
    return f;
}

} // namespace keyclink
