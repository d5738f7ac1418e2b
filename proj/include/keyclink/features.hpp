#pragma once

#include "keyclink/segmentation.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace keyclink {

enum class Provenance { RAW, FFT, MFCC, FFT_MFCC, XCORR };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

struct FeatureMatrix {
    std::vector<std::vector<double>> rows; // row i <-> keystroke i
    std::size_t dim = 0;
    Provenance provenance = Provenance::RAW;
    // applied transforms
    std::size_t smoothing_window = 0; // 0/1 = none
    bool scaled = false;
    std::size_t pca_components = 0; // 0 = none
    bool degenerate_rows = false;   // xcorr met an all-constant row
};

struct WindowTooLarge : Error {
    WindowTooLarge(std::size_t window, std::size_t len)
        : Error("smoothing window " + std::to_string(window) + " exceeds segment length " +
                std::to_string(len)) {}
};
struct SegmentTooShort : Error {
    explicit SegmentTooShort(const std::string& msg) : Error("segment too short: " + msg) {}
};
struct RowMismatch : Error {
    RowMismatch(std::size_t a, std::size_t b)
        : Error("row count mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};
struct TooManyComponents : Error {
    TooManyComponents(std::size_t d, std::size_t limit)
        : Error("pca components " + std::to_string(d) + " exceed limit " +
                std::to_string(limit)) {}
};

struct MfccParams {
    std::size_t n_coeffs = 36;
    double frame_ms = 10.0;
    double hop_ms = 5.0;
    std::size_t n_mels = 40;
    double pre_emphasis = 0.97;
    double log_floor = 1e-10;
};

// Boxcar moving average; same-length output by treating samples outside
// the segment as zero. window = 1 is the identity.
KeystrokeSegment smooth(const KeystrokeSegment& segment, std::size_t window);

// Magnitude spectrum of the segment zero-padded to the next power of
// two; bins 1..N/2 (DC dropped).
std::vector<double> fft_feature(const KeystrokeSegment& segment);

// Flattened per-frame cepstral coefficients; dim = n_coeffs x frame_count.
std::vector<double> mfcc_feature(const KeystrokeSegment& segment, const MfccParams& params);

FeatureMatrix raw_matrix(const std::vector<KeystrokeSegment>& segments);
FeatureMatrix fft_matrix(const std::vector<KeystrokeSegment>& segments);
FeatureMatrix mfcc_matrix(const std::vector<KeystrokeSegment>& segments, const MfccParams& params);

FeatureMatrix concat_features(const FeatureMatrix& a, const FeatureMatrix& b);

// Square matrix of max-over-lags normalized cross-correlations; each
// row doubles as that keystroke's feature vector. All-constant rows are
// degenerate: their correlations are 0 and the flag is set.
FeatureMatrix xcorr_similarity(const FeatureMatrix& m);

// Per-column z-score with population variance; zero-variance columns
// become zero.
FeatureMatrix standardize(const FeatureMatrix& m);

// Project centered rows onto the top-d principal directions. Component
// sign is fixed by making the largest-magnitude loading positive.
FeatureMatrix pca_reduce(const FeatureMatrix& m, std::size_t d);

void save_features(const std::string& path, const FeatureMatrix& m);
FeatureMatrix load_features(const std::string& path);

} // namespace keyclink
