#include "keyclink/hypersearch.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace keyclink {

std::string model_type_name(ModelType m) {
    return m == ModelType::KMEANS ? "KMEANS" : "XCORR";
}

ModelType model_type_from_name(const std::string& name) {
    std::string up = name;
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
    if (up == "KMEANS") return ModelType::KMEANS;
    if (up == "XCORR") return ModelType::XCORR;
    throw Error("unknown model type: " + name);
}

void PipelineConfig::validate() const {
    if (model_type == ModelType::KMEANS) {
        if (feature == Provenance::RAW)
            throw Error("RAW feature is legal only for the XCORR model");
        if (feature == Provenance::XCORR) throw Error("XCORR is not an input feature");
        if (pca_components < 1 || pca_components > 20)
            throw Error("KMEANS pca_components outside 1..20");
    } else {
        if (feature == Provenance::FFT_MFCC)
            throw Error("FFT_MFCC feature is legal only for the KMEANS model");
        if (feature == Provenance::XCORR) throw Error("XCORR is not an input feature");
        if (pca_components < 1 || pca_components > 12)
            throw Error("XCORR pca_components outside 1..12");
    }
    if (smoothing_window < 5 || smoothing_window > 300)
        throw Error("smoothing_window outside 5..300");
    if (k < 1) throw Error("k must be >= 1");
    if (mfcc.n_coeffs < 1 || mfcc.n_coeffs > mfcc.n_mels)
        throw Error("mfcc n_coeffs outside 1..n_mels");
}

static std::string fmt_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

std::string PipelineConfig::summary() const {
    std::ostringstream ss;
    ss << model_type_name(model_type) << " feature=" << provenance_name(feature)
       << " smoothing=" << (smoothing ? smoothing_window : 0) << " scaling=" << scaling
       << " pca=" << (pca ? pca_components : 0) << " span=" << span_name(span) << " k=" << k;
    return ss.str();
}

std::uint64_t PipelineConfig::hash() const {
    // FNV-1a over the full field serialization
    std::string s = summary() + " " + std::to_string(mfcc.n_coeffs) + " " +
                    fmt_double(mfcc.frame_ms) + " " + fmt_double(mfcc.hop_ms) + " " +
                    std::to_string(mfcc.n_mels);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::map<std::string, std::string> PipelineConfig::to_kv() const {
    return {{"model_type", model_type_name(model_type)},
            {"feature", provenance_name(feature)},
            {"smoothing", smoothing ? "true" : "false"},
            {"smoothing_window", std::to_string(smoothing_window)},
            {"scaling", scaling ? "true" : "false"},
            {"pca", pca ? "true" : "false"},
            {"pca_components", std::to_string(pca_components)},
            {"span", span_name(span)},
            {"k", std::to_string(k)},
            {"mfcc_n_coeffs", std::to_string(mfcc.n_coeffs)},
            {"mfcc_frame_ms", fmt_double(mfcc.frame_ms)},
            {"mfcc_hop_ms", fmt_double(mfcc.hop_ms)},
            {"mfcc_n_mels", std::to_string(mfcc.n_mels)},
            {"mfcc_pre_emphasis", fmt_double(mfcc.pre_emphasis)},
            {"mfcc_log_floor", fmt_double(mfcc.log_floor)}};
}

PipelineConfig PipelineConfig::from_kv(const std::map<std::string, std::string>& kv) {
    PipelineConfig cfg;
    for (const auto& [key, value] : kv) cfg = apply_config_line(std::move(cfg), key, value);
    return cfg;
}

EvalSample to_eval_sample(const SyntheticSample& s) {
    return EvalSample{s.recording, s.onsets, s.labels};
}

FeatureMatrix pipeline_features(const PipelineConfig& cfg,
                                const std::vector<KeystrokeSegment>& segments) {
    cfg.validate();
    if (segments.empty()) throw Error("no segments");

    std::vector<KeystrokeSegment> segs = segments;
    if (cfg.smoothing) {
        const std::size_t window = std::min(cfg.smoothing_window, segs.front().samples.size());
        for (auto& s : segs) s = smooth(s, window);
    }

    FeatureMatrix base;
    switch (cfg.feature) {
        case Provenance::RAW: base = raw_matrix(segs); break;
        case Provenance::FFT: base = fft_matrix(segs); break;
        case Provenance::MFCC: base = mfcc_matrix(segs, cfg.mfcc); break;
        case Provenance::FFT_MFCC:
            base = concat_features(fft_matrix(segs), mfcc_matrix(segs, cfg.mfcc));
            break;
        default: throw Error("bad feature provenance");
    }
    if (cfg.model_type == ModelType::XCORR) base = xcorr_similarity(base);

    if (cfg.scaling) base = standardize(base);
    if (cfg.pca) {
        const std::size_t limit = std::min(base.rows.size() - 1, base.dim);
        base = pca_reduce(base, std::min(cfg.pca_components, limit));
    }
    return base;
}

Clustering pipeline_cluster(const PipelineConfig& cfg, const EvalSample& sample,
                            std::uint64_t seed) {
    const std::string id = sample.recording.source_id;
    std::vector<KeystrokeSegment> segs;
    try {
        segs = extract_spans(sample.recording, sample.onsets, cfg.span, 30.0, 90.0);
    } catch (const Error& e) {
        throw PipelineFailure(id, "segment", e.what());
    }
    FeatureMatrix features;
    try {
        features = pipeline_features(cfg, segs);
    } catch (const Error& e) {
        throw PipelineFailure(id, "features", e.what());
    }
    try {
        const int k = std::min<int>(cfg.k, static_cast<int>(features.rows.size()));
        return kmeans(features, k, seed);
    } catch (const Error& e) {
        throw PipelineFailure(id, "cluster", e.what());
    }
}

PipelineConfig sample_config(const SearchSpace& space, Rng& rng) {
    if (space.model_types.empty() || space.spans.empty()) throw Error("empty search space");
    PipelineConfig cfg;
    cfg.model_type = space.model_types[rng.next_below(space.model_types.size())];
    if (cfg.model_type == ModelType::KMEANS) {
        const Provenance feats[] = {Provenance::FFT, Provenance::MFCC, Provenance::FFT_MFCC};
        cfg.feature = feats[rng.next_below(3)];
    } else {
        const Provenance feats[] = {Provenance::RAW, Provenance::FFT, Provenance::MFCC};
        cfg.feature = feats[rng.next_below(3)];
    }
    cfg.smoothing = rng.next_bool();
    cfg.smoothing_window =
        space.window_lo + rng.next_below(space.window_hi - space.window_lo + 1);
    cfg.scaling = rng.next_bool();
    cfg.pca = rng.next_bool();
    const std::size_t pca_hi =
        cfg.model_type == ModelType::KMEANS ? space.pca_hi_kmeans : space.pca_hi_xcorr;
    cfg.pca_components = 1 + rng.next_below(pca_hi);
    cfg.span = space.spans[rng.next_below(space.spans.size())];
    cfg.mfcc = space.mfcc;
    cfg.k = space.k;
    cfg.validate();
    return cfg;
}

ScoreSummary evaluate_config(const PipelineConfig& cfg, const std::vector<EvalSample>& samples,
                             std::uint64_t seed) {
    if (samples.empty()) throw Error("no samples to evaluate");
    std::vector<double> scores;
    scores.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Clustering c = pipeline_cluster(cfg, samples[i], derive_seed(seed, i));
        scores.push_back(score_clustering(c, samples[i].labels));
    }
    return summarize_scores(scores);
}

SearchReport search(const SearchSpace& space, std::size_t trials,
                    const std::vector<EvalSample>& samples, std::uint64_t seed,
                    unsigned workers) {
    if (trials < 1) throw Error("trials must be >= 1");
    SearchReport report;
    report.trials = trials;
    for (const auto& s : samples) report.sample_ids.push_back(s.recording.source_id);

    // Configs are drawn up front from per-trial seeds, so worker count
    // and scheduling cannot change the sampled space.
    std::vector<SearchEntry> entries(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        Rng rng(derive_seed(seed, i));
        entries[i].config = sample_config(space, rng);
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= trials) return;
            try {
                entries[i].score =
                    evaluate_config(entries[i].config, samples, derive_seed(seed, trials + i));
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    unsigned n_workers = workers == 0 ? std::thread::hardware_concurrency() : workers;
    if (n_workers == 0) n_workers = 1;
    n_workers = std::min<unsigned>(n_workers, static_cast<unsigned>(trials));
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);

    std::sort(entries.begin(), entries.end(), [](const SearchEntry& a, const SearchEntry& b) {
        if (a.score.median != b.score.median) return a.score.median > b.score.median;
        if (a.score.mean != b.score.mean) return a.score.mean > b.score.mean;
        return a.config.hash() < b.config.hash();
    });
    report.entries = std::move(entries);
    return report;
}

static nlohmann::json config_json(const PipelineConfig& c) {
    return nlohmann::json{{"model_type", model_type_name(c.model_type)},
                          {"feature", provenance_name(c.feature)},
                          {"smoothing", c.smoothing},
                          {"smoothing_window", c.smoothing_window},
                          {"scaling", c.scaling},
                          {"pca", c.pca},
                          {"pca_components", c.pca_components},
                          {"span", span_name(c.span)},
                          {"k", c.k},
                          {"mfcc_n_coeffs", c.mfcc.n_coeffs},
                          {"mfcc_frame_ms", c.mfcc.frame_ms},
                          {"mfcc_hop_ms", c.mfcc.hop_ms},
                          {"mfcc_n_mels", c.mfcc.n_mels}};
}

void save_search_report(const std::string& path, const SearchReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"config", config_json(e.config)},
                           {"median", e.score.median},
                           {"mean", e.score.mean},
                           {"max", e.score.max},
                           {"min", e.score.min}});
    }
    nlohmann::json j = {
        {"trials", r.trials}, {"sample_ids", r.sample_ids}, {"entries", entries}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

static bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error("expected boolean, got " + v);
}

PipelineConfig apply_config_line(PipelineConfig cfg, const std::string& key,
                                 const std::string& value) {
    try {
        if (key == "model_type")
            cfg.model_type = model_type_from_name(value);
        else if (key == "feature")
            cfg.feature = provenance_from_name(value);
        else if (key == "smoothing")
            cfg.smoothing = parse_bool(value);
        else if (key == "smoothing_window")
            cfg.smoothing_window = std::stoul(value);
        else if (key == "scaling")
            cfg.scaling = parse_bool(value);
        else if (key == "pca")
            cfg.pca = parse_bool(value);
        else if (key == "pca_components")
            cfg.pca_components = std::stoul(value);
        else if (key == "span")
            cfg.span = span_from_name(value);
        else if (key == "k")
            cfg.k = std::stoi(value);
        else if (key == "mfcc_n_coeffs")
            cfg.mfcc.n_coeffs = std::stoul(value);
        else if (key == "mfcc_frame_ms")
            cfg.mfcc.frame_ms = std::stod(value);
        else if (key == "mfcc_hop_ms")
            cfg.mfcc.hop_ms = std::stod(value);
        else if (key == "mfcc_n_mels")
            cfg.mfcc.n_mels = std::stoul(value);
        else if (key == "mfcc_pre_emphasis")
            cfg.mfcc.pre_emphasis = std::stod(value);
        else if (key == "mfcc_log_floor")
            cfg.mfcc.log_floor = std::stod(value);
        else
            throw Error("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw Error("bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw Error("bad value for " + key + ": " + value);
    }
    return cfg;
}

PipelineConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    PipelineConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        cfg = apply_config_line(std::move(cfg), key, value);
    }
    return cfg;
}

} // namespace keyclink
