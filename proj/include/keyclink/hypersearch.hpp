#pragma once

#include "keyclink/clustering.hpp"
#include "keyclink/synthcorpus.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace keyclink {

enum class ModelType { KMEANS, XCORR };

std::string model_type_name(ModelType m);
ModelType model_type_from_name(const std::string& name);

// One point in the hyperparameter space. RAW is legal only for XCORR;
// FFT_MFCC only for KMEANS. pca_components ranges 1..20 (KMEANS) or
// 1..12 (XCORR).
struct PipelineConfig {
    ModelType model_type = ModelType::KMEANS;
    Provenance feature = Provenance::FFT;
    bool smoothing = false;
    std::size_t smoothing_window = 5; // 5..300 samples
    bool scaling = false;
    bool pca = false;
    std::size_t pca_components = 1;
    Span span = Span::P;
    MfccParams mfcc;
    int k = kDefaultK;

    void validate() const; // throws Error on an illegal combination
    std::string summary() const;
    std::uint64_t hash() const;
    std::map<std::string, std::string> to_kv() const; // config-file keys
    static PipelineConfig from_kv(const std::map<std::string, std::string>& kv);
};

struct PipelineFailure : Error {
    PipelineFailure(const std::string& sample_id, const std::string& stage,
                    const std::string& why)
        : Error("pipeline failed on " + sample_id + " at " + stage + ": " + why) {}
};

// Everything evaluate_config needs from one synthetic sample: the audio
// plus ground-truth onsets/labels (search isolates clustering quality
// from segmentation noise).
struct EvalSample {
    AudioRecording recording;
    std::vector<std::size_t> onsets;
    std::string labels;
};

EvalSample to_eval_sample(const SyntheticSample& s);

// segments (per config span/smoothing) -> features -> optional scaling
// and PCA. The returned matrix is ready for kmeans. PCA component count
// is clamped to its feasible maximum, k to the segment count.
FeatureMatrix pipeline_features(const PipelineConfig& cfg,
                                const std::vector<KeystrokeSegment>& segments);

Clustering pipeline_cluster(const PipelineConfig& cfg, const EvalSample& sample,
                            std::uint64_t seed);

struct SearchSpace {
    std::vector<ModelType> model_types = {ModelType::KMEANS, ModelType::XCORR};
    std::size_t window_lo = 5, window_hi = 300;
    std::size_t pca_hi_kmeans = 20, pca_hi_xcorr = 12;
    std::vector<Span> spans = {Span::P, Span::PR};
    MfccParams mfcc;
    int k = kDefaultK;
};

PipelineConfig sample_config(const SearchSpace& space, Rng& rng);

ScoreSummary evaluate_config(const PipelineConfig& cfg, const std::vector<EvalSample>& samples,
                             std::uint64_t seed = 0);

struct SearchEntry {
    PipelineConfig config;
    ScoreSummary score;
};

struct SearchReport {
    std::vector<SearchEntry> entries; // median desc, mean desc, hash
    std::size_t trials = 0;
    std::vector<std::string> sample_ids;
};

SearchReport search(const SearchSpace& space, std::size_t trials,
                    const std::vector<EvalSample>& samples, std::uint64_t seed,
                    unsigned workers = 0); // 0 = hardware concurrency

void save_search_report(const std::string& path, const SearchReport& r);

// TOML-like key/value config file mirroring PipelineConfig field names.
PipelineConfig parse_config_file(const std::string& path);
PipelineConfig apply_config_line(PipelineConfig cfg, const std::string& key,
                                 const std::string& value);

} // namespace keyclink
