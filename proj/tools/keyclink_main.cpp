#include "keyclink/report.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace keyclink;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 usage error (CLI11), 2 data error, 3 attack
// finished but recovered nothing.
constexpr int kExitData = 2;
constexpr int kExitNoRecovery = 3;

std::uint64_t env_seed() {
    if (const char* s = std::getenv("KEYCLINK_SEED")) {
        try {
            return std::stoull(s);
        } catch (...) {
            throw Error(std::string("KEYCLINK_SEED is not an integer: ") + s);
        }
    }
    return 0;
}

double parse_snr(const std::string& s) {
    if (s == "inf" || s == "none") return std::numeric_limits<double>::infinity();
    return std::stod(s);
}

// Budgets are usually quoted as powers of two ("2^32"); plain decimal
// also works.
std::uint64_t parse_budget(const std::string& s) {
    if (s.rfind("2^", 0) == 0) {
        const int exp = std::stoi(s.substr(2));
        if (exp < 0 || exp > 63) throw Error("budget exponent out of range: " + s);
        return 1ULL << exp;
    }
    return std::stoull(s);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

std::vector<std::string> split_words(const std::string& phrase) {
    std::vector<std::string> words;
    std::istringstream in(phrase);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

// Shared pipeline-config flags: a config file provides the baseline,
// explicitly passed flags override it (file keys mirror the flag names).
struct ConfigArgs {
    std::string config_path;
    std::string model_type, feature, span;
    std::string smoothing, scaling, pca; // tri-state: unset/true/false
    std::size_t smoothing_window = 0;
    std::size_t pca_components = 0;
    int k = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file");
        cmd->add_option("--model-type", model_type, "kmeans|xcorr");
        cmd->add_option("--feature", feature, "raw|fft|mfcc|fft+mfcc");
        cmd->add_option("--span", span, "P|PR");
        cmd->add_option("--smoothing", smoothing, "true|false");
        cmd->add_option("--smoothing-window", smoothing_window, "boxcar window, samples");
        cmd->add_option("--scaling", scaling, "true|false");
        cmd->add_option("--pca", pca, "true|false");
        cmd->add_option("--pca-components", pca_components, "projection dimension");
        cmd->add_option("-k,--clusters", k, "cluster count");
    }

    PipelineConfig resolve(const CLI::App* cmd) const {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg = parse_config_file(config_path);
        auto over = [&](const char* flag, const std::string& key, const std::string& value) {
            if (cmd->count(flag)) cfg = apply_config_line(cfg, key, value);
        };
        over("--model-type", "model_type", model_type);
        over("--feature", "feature", feature);
        over("--span", "span", span);
        over("--smoothing", "smoothing", smoothing);
        over("--smoothing-window", "smoothing_window", std::to_string(smoothing_window));
        over("--scaling", "scaling", scaling);
        over("--pca", "pca", pca);
        over("--pca-components", "pca_components", std::to_string(pca_components));
        over("-k", "k", std::to_string(k));
        cfg.validate();
        return cfg;
    }
};

struct SegArgs {
    SegmentationParams params;
    void attach(CLI::App* cmd) {
        cmd->add_option("--frame-ms", params.frame_ms, "energy frame length");
        cmd->add_option("--hop-ms", params.hop_ms, "energy hop");
        cmd->add_option("--threshold", params.threshold_factor, "x median energy");
        cmd->add_option("--min-gap-ms", params.min_gap_ms, "minimum onset spacing");
        cmd->add_option("--press-ms", params.press_window_ms, "press window");
        cmd->add_option("--release-ms", params.release_window_ms, "release window");
    }
};

// --- synth ------------------------------------------------------------

int run_synth(const std::string& phrase, const std::string& preset, std::size_t random_count,
              std::size_t random_words, const std::string& wordlist_path, const std::string& snr,
              std::uint64_t kit_seed, std::uint64_t seed, double gap_ms, double timing_jitter,
              double amp_jitter, int rate, const std::string& out, const std::string& truth_out) {
    const double snr_db = parse_snr(snr);
    const KeyJitter jitter{timing_jitter, amp_jitter};

    auto emit = [&](const SyntheticSample& s, const std::string& wav_path,
                    const std::string& json_path) {
        save_wav(wav_path, s.recording);
        if (!json_path.empty()) save_truth(json_path, s);
    };

    if (!phrase.empty()) {
        SyntheticSample s =
            synth_recording(split_words(phrase), kit_seed, snr_db, gap_ms, jitter, seed, rate);
        s.recording.source_id = fs::path(out).stem().string();
        emit(s, out, truth_out);
        std::cout << "wrote " << out << " (" << s.onsets.size() << " keystrokes)\n";
        return 0;
    }

    // corpus modes write <name>_pNN.wav plus matching truth JSON into a
    // directory, the layout `attack` consumes
    fs::create_directories(out);
    std::vector<std::vector<std::string>> phrases;
    if (preset == "appendix") {
        phrases = appendix_passphrases();
    } else if (random_count > 0) {
        if (wordlist_path.empty()) throw Error("--random needs --wordlist");
        const Wordlist wl = load_wordlist(wordlist_path);
        Rng rng(derive_seed(seed, 0x70617373ULL));
        for (std::size_t i = 0; i < random_count; ++i) {
            const std::size_t n_words = random_words ? random_words : 3 + rng.next_below(6);
            phrases.push_back(gen_passphrase(wl, n_words, rng));
        }
    } else {
        throw Error("one of --passphrase, --preset appendix, --random N is required");
    }

    for (std::size_t i = 0; i < phrases.size(); ++i) {
        SyntheticSample s =
            synth_recording(phrases[i], kit_seed, snr_db, gap_ms, jitter, derive_seed(seed, i), rate);
        std::ostringstream name;
        name << "sample" << (i < 10 ? "0" : "") << i << "_p" << (i < 10 ? "0" : "") << i;
        s.recording.source_id = name.str();
        const std::string base = (fs::path(out) / name.str()).string();
        emit(s, base + ".wav", base + ".json");
    }
    std::cout << "wrote " << phrases.size() << " samples to " << out << "\n";
    return 0;
}

// --- segment ----------------------------------------------------------

int run_segment(const std::string& in, const std::string& out, const std::string& span_s,
                const SegArgs& seg, std::optional<std::size_t> expected) {
    const AudioRecording rec = load_wav(in);
    const Span span = span_from_name(span_s);
    const auto segments = segment_recording(rec, seg.params, span, expected);
    save_segments(out, describe_segments(rec, segments));
    std::cout << segments.size() << " keystrokes -> " << out << "\n";
    return 0;
}

// --- cluster ----------------------------------------------------------

int run_cluster(const std::string& in, const std::string& out, const CLI::App* cmd,
                const ConfigArgs& cfg_args, const SegArgs& seg, const std::string& truth_path,
                bool truth_onsets, int sets, std::uint64_t seed) {
    const PipelineConfig cfg = cfg_args.resolve(cmd);
    const AudioRecording rec = load_wav(in);

    std::vector<std::size_t> onsets;
    std::optional<std::size_t> expected;
    if (!truth_path.empty()) {
        const SyntheticSample truth = load_truth(truth_path);
        expected = truth.key_sequence.size();
        if (truth_onsets) onsets = truth.onsets;
    } else if (truth_onsets) {
        throw Error("--truth-onsets needs --truth");
    }
    if (onsets.empty()) {
        const EnergySeries energy =
            short_time_energy(rec, ms_to_samples(seg.params.frame_ms, rec.sample_rate),
                              ms_to_samples(seg.params.hop_ms, rec.sample_rate));
        onsets = detect_keystrokes(energy, seg.params.threshold_factor, seg.params.min_gap_ms,
                                   expected);
    }
    const auto segments = extract_spans(rec, onsets, cfg.span, seg.params.press_window_ms,
                                        seg.params.release_window_ms);
    const FeatureMatrix features = pipeline_features(cfg, segments);
    const int k = std::min<int>(cfg.k, static_cast<int>(features.rows.size()));
    const auto clusterings = cluster_sets(features, k, sets, seed);
    save_cluster_sets(out, clusterings);
    std::cout << sets << " cluster set(s), k = " << k << " -> " << out << "\n";
    return 0;
}

// --- hypersearch ------------------------------------------------------

int run_hypersearch(const std::string& samples_dir, const std::string& out,
                    const std::string& model_type, std::size_t trials, std::uint64_t seed,
                    unsigned workers) {
    SearchSpace space;
    if (model_type == "kmeans")
        space.model_types = {ModelType::KMEANS};
    else if (model_type == "xcorr")
        space.model_types = {ModelType::XCORR};
    else if (model_type != "both")
        throw Error("unknown model type: " + model_type);

    std::vector<EvalSample> samples;
    for (const auto& input : load_attack_dir(samples_dir)) {
        if (!input.truth) throw Error(input.recording.source_id + " has no truth JSON");
        SyntheticSample t = *input.truth;
        t.recording = input.recording;
        samples.push_back(to_eval_sample(t));
    }
    const SearchReport report = search(space, trials, samples, seed, workers);
    save_search_report(out, report);
    if (!report.entries.empty()) {
        const auto& best = report.entries.front();
        std::cout << "best: " << best.config.summary() << " median " << best.score.median << "\n";
    }
    std::cout << report.trials << " trials -> " << out << "\n";
    return 0;
}

// --- demod ------------------------------------------------------------

int run_demod(const std::string& clusters_path, const std::string& wordlist_path,
              const std::string& out, std::optional<std::size_t> expected_words, int tries,
              std::size_t cap) {
    const Wordlist wl = load_wordlist(wordlist_path);
    const auto clusterings = load_clusterings(clusters_path);

    RecoveryFile file;
    for (std::size_t i = 0; i < clusterings.size(); ++i) {
        try {
            RecoveryResult r = recover(clusterings[i], wl, expected_words, tries, cap);
            r.cluster_set_id = static_cast<int>(i);
            file.results.push_back(std::move(r));
        } catch (const NoWords&) {
        }
    }
    if (file.results.empty()) throw NoWords();
    file.merged = merge_recoveries(file.results);
    save_recovery(out, file);

    std::cout << file.merged.words_recovered << "/" << file.merged.word_count
              << " words recovered (";
    for (std::size_t i = 0; i < file.merged.statuses.size(); ++i)
        std::cout << (i ? "," : "") << status_name(file.merged.statuses[i]);
    std::cout << ") -> " << out << "\n";
    return 0;
}

// --- attack -----------------------------------------------------------

int run_attack(const std::string& dir, const std::string& wordlist_path, const CLI::App* cmd,
               const ConfigArgs& cfg_args, const SegArgs& seg, const AttackOptions& base_options,
               const std::string& out, const std::string& csv_out) {
    const PipelineConfig cfg = cfg_args.resolve(cmd);
    const Wordlist wl = load_wordlist(wordlist_path);
    const auto inputs = load_attack_dir(dir);

    AttackOptions options = base_options;
    options.seg = seg.params;
    const AttackReport report = attack(inputs, cfg, wl, options);

    if (!out.empty()) save_attack_report(out, report);
    if (!csv_out.empty()) write_file(csv_out, report_matrix(report, ReportFormat::CSV));

    std::size_t full = 0, partial = 0, missing = 0;
    for (const auto& c : report.cells) {
        if (c.status == CellStatus::FULL) ++full;
        if (c.status == CellStatus::PARTIAL) ++partial;
        if (c.status == CellStatus::MISSING) ++missing;
    }
    std::cout << report.cells.size() << " samples: " << full << " full, " << partial
              << " partial, " << missing << " missing\n";
    return (full + partial) == 0 ? kExitNoRecovery : 0;
}

// --- combine ----------------------------------------------------------

int run_combine(const std::string& recovery_path, const std::string& wordlist_path,
                const std::string& budget_s, const std::string& truth, const std::string& out) {
    const Wordlist wl = load_wordlist(wordlist_path);
    const RecoveryFile file = load_recovery(recovery_path);
    const CandidateSets cs = candidate_sets(file.merged, wl);
    const CombinationBudget total = naive_count(cs);

    nlohmann::json j = {{"count", total.count.str()},
                        {"log2_exponent", total.log2_exponent}};

    if (!truth.empty()) {
        const std::vector<std::string> truth_words = split_words(truth);
        const std::uint64_t budget = parse_budget(budget_s);
        const EnumerationOutcome outcome = prioritized_enumerate(
            cs, wl, budget,
            [&](const std::vector<std::string>& guess) { return guess == truth_words; });
        j["attempts"] = outcome.attempts;
        j["found"] = outcome.found;
        if (outcome.found) j["guess"] = outcome.guess;
        std::cout << (outcome.found ? "found" : "not found") << " after " << outcome.attempts
                  << " attempts (budget " << budget << ")\n";
    }
    std::cout << "2^" << total.log2_exponent << " combinations\n";
    write_file(out, j.dump(2) + "\n");
    return 0;
}

// --- report -----------------------------------------------------------

int run_report(const std::vector<std::string>& inputs, const std::string& format,
               const std::string& out, bool by_length, bool curve) {
    if (curve) {
        std::vector<AttackReport> reports;
        for (const auto& p : inputs) reports.push_back(load_attack_report(p));
        const std::string csv = curve_csv(recovery_curve(reports));
        if (out.empty())
            std::cout << csv;
        else
            write_file(out, csv);
        return 0;
    }
    if (inputs.size() != 1) throw Error("report takes one report.json (or --curve with several)");
    const AttackReport report = load_attack_report(inputs.front());
    const std::string artifact = report_matrix(report, format_from_name(format), by_length);
    if (out.empty())
        std::cout << artifact;
    else
        write_file(out, artifact);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"keyclink - keystroke-audio passphrase recovery toolkit"};
    app.require_subcommand(1);

    std::uint64_t default_seed = 0;
    try {
        default_seed = env_seed();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }

    // synth
    auto* synth = app.add_subcommand("synth", "generate synthetic keystroke recordings");
    std::string sy_phrase, sy_preset, sy_wordlist, sy_snr = "inf", sy_out, sy_truth;
    std::size_t sy_random = 0, sy_words = 0;
    std::uint64_t sy_kit = 1, sy_seed = default_seed;
    double sy_gap = 250.0, sy_tjit = 2.0, sy_ajit = 0.1;
    int sy_rate = 44100;
    synth->add_option("--passphrase", sy_phrase, "words, space separated");
    synth->add_option("--preset", sy_preset, "appendix = bundled 30-passphrase list");
    synth->add_option("--random", sy_random, "generate N random passphrases");
    synth->add_option("--words", sy_words, "words per random passphrase (default 3-8)");
    synth->add_option("--wordlist", sy_wordlist, "wordlist for --random");
    synth->add_option("--snr", sy_snr, "SNR in dB, or inf");
    synth->add_option("--kit-seed", sy_kit, "keyboard voicing seed");
    synth->add_option("--seed", sy_seed, "jitter/noise seed");
    synth->add_option("--gap-ms", sy_gap, "inter-key gap");
    synth->add_option("--timing-jitter-ms", sy_tjit, "onset jitter std");
    synth->add_option("--amp-jitter", sy_ajit, "amplitude attenuation range");
    synth->add_option("--rate", sy_rate, "sample rate");
    synth->add_option("-o,--out", sy_out, "output wav (single) or directory (corpus)")
        ->required();
    synth->add_option("--truth", sy_truth, "truth JSON path (single mode)");

    // segment
    auto* segment = app.add_subcommand("segment", "detect keystroke onsets in a recording");
    std::string sg_in, sg_out, sg_span = "P";
    SegArgs sg_seg;
    std::size_t sg_expected = 0;
    segment->add_option("input", sg_in, "input wav")->required();
    segment->add_option("-o,--out", sg_out, "segments.json")->required();
    segment->add_option("--span", sg_span, "P|PR");
    segment->add_option("--expected", sg_expected, "expected keystroke count");
    sg_seg.attach(segment);

    // cluster
    auto* cluster = app.add_subcommand("cluster", "segment + features + k-means");
    std::string cl_in, cl_out, cl_truth;
    bool cl_truth_onsets = false;
    int cl_sets = 1;
    std::uint64_t cl_seed = default_seed;
    ConfigArgs cl_cfg;
    SegArgs cl_seg;
    cluster->add_option("input", cl_in, "input wav")->required();
    cluster->add_option("-o,--out", cl_out, "clusters.json")->required();
    cluster->add_option("--truth", cl_truth, "truth JSON (for expected counts)");
    cluster->add_flag("--truth-onsets", cl_truth_onsets, "use ground-truth onsets");
    cluster->add_option("--sets", cl_sets, "cluster sets to produce");
    cluster->add_option("--seed", cl_seed, "base seed");
    cl_cfg.attach(cluster);
    cl_seg.attach(cluster);

    // hypersearch
    auto* hyper = app.add_subcommand("hypersearch", "random hyperparameter search");
    std::string hy_samples, hy_out, hy_model = "both";
    std::size_t hy_trials = 100;
    std::uint64_t hy_seed = default_seed;
    unsigned hy_workers = 0;
    hyper->add_option("--samples", hy_samples, "directory of wav + truth JSON")->required();
    hyper->add_option("-o,--out", hy_out, "report.json")->required();
    hyper->add_option("--model-type", hy_model, "kmeans|xcorr|both");
    hyper->add_option("--trials", hy_trials, "configurations to draw");
    hyper->add_option("--seed", hy_seed, "search seed");
    hyper->add_option("--workers", hy_workers, "threads (0 = all)");

    // demod
    auto* demod = app.add_subcommand("demod", "dictionary attack on cluster labels");
    std::string dm_clusters, dm_wordlist, dm_out;
    std::size_t dm_expected = 0, dm_cap = 50;
    int dm_tries = 3;
    demod->add_option("clusters", dm_clusters, "clusters.json")->required();
    demod->add_option("--wordlist", dm_wordlist, "plain or Diceware format")->required();
    demod->add_option("-o,--out", dm_out, "recovery.json")->required();
    demod->add_option("--expected-words", dm_expected, "passphrase word count");
    demod->add_option("--tries", dm_tries, "delimiter candidates to try");
    demod->add_option("--cap", dm_cap, "solution cap");

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "end-to-end attack over a corpus");
    std::string at_dir, at_wordlist, at_out, at_csv;
    AttackOptions at_options;
    bool at_truth_onsets = false, at_no_expected = false, at_no_combiner = false;
    ConfigArgs at_cfg;
    SegArgs at_seg;
    at_options.seed = default_seed;
    attack_cmd->add_option("corpus", at_dir, "directory of wav (+ truth JSON)")->required();
    attack_cmd->add_option("--wordlist", at_wordlist, "plain or Diceware format")->required();
    attack_cmd->add_option("-o,--out", at_out, "report.json");
    attack_cmd->add_option("--csv", at_csv, "recovery matrix CSV");
    attack_cmd->add_option("--sets", at_options.sets, "cluster sets per sample");
    attack_cmd->add_option("--seed", at_options.seed, "base seed");
    attack_cmd->add_option("--workers", at_options.workers, "threads (0 = all)");
    attack_cmd->add_option("--tries", at_options.delimiter_tries, "delimiter candidates");
    attack_cmd->add_option("--cap", at_options.solution_cap, "solution cap");
    attack_cmd->add_flag("--truth-onsets", at_truth_onsets, "use ground-truth onsets");
    attack_cmd->add_flag("--no-expected-words", at_no_expected,
                         "do not pass the word count to the demodulator");
    attack_cmd->add_flag("--no-combiner", at_no_combiner, "skip combination counting");
    at_cfg.attach(attack_cmd);
    at_seg.attach(attack_cmd);

    // combine
    auto* combine = app.add_subcommand("combine", "count/enumerate candidate combinations");
    std::string cb_recovery, cb_wordlist, cb_budget = "2^32", cb_truth, cb_out;
    combine->add_option("recovery", cb_recovery, "recovery.json")->required();
    combine->add_option("--wordlist", cb_wordlist, "plain or Diceware format")->required();
    combine->add_option("-o,--out", cb_out, "combine.json")->required();
    combine->add_option("--budget", cb_budget, "attempt budget, decimal or 2^N");
    combine->add_option("--truth", cb_truth, "true passphrase: enables the guess oracle");

    // report
    auto* report_cmd = app.add_subcommand("report", "render attack reports");
    std::vector<std::string> rp_inputs;
    std::string rp_format = "csv", rp_out;
    bool rp_by_length = false, rp_curve = false;
    report_cmd->add_option("reports", rp_inputs, "report.json file(s)")->required();
    report_cmd->add_option("-f,--format", rp_format, "csv|svg|text");
    report_cmd->add_option("-o,--out", rp_out, "output file (stdout if omitted)");
    report_cmd->add_flag("--by-length", rp_by_length, "order cells by passphrase length");
    report_cmd->add_flag("--curve", rp_curve, "sets -> recovery table from several reports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help or the usage message
        return code == 0 ? 0 : 1;     // 0 = --help/--version, 1 = usage error
    }

    try {
        if (*synth)
            return run_synth(sy_phrase, sy_preset, sy_random, sy_words, sy_wordlist, sy_snr,
                             sy_kit, sy_seed, sy_gap, sy_tjit, sy_ajit, sy_rate, sy_out, sy_truth);
        if (*segment)
            return run_segment(sg_in, sg_out, sg_span, sg_seg,
                               sg_expected ? std::optional<std::size_t>(sg_expected)
                                           : std::nullopt);
        if (*cluster)
            return run_cluster(cl_in, cl_out, cluster, cl_cfg, cl_seg, cl_truth, cl_truth_onsets,
                               cl_sets, cl_seed);
        if (*hyper) return run_hypersearch(hy_samples, hy_out, hy_model, hy_trials, hy_seed,
                                           hy_workers);
        if (*demod)
            return run_demod(dm_clusters, dm_wordlist, dm_out,
                             dm_expected ? std::optional<std::size_t>(dm_expected) : std::nullopt,
                             dm_tries, dm_cap);
        if (*attack_cmd) {
            at_options.use_truth_onsets = at_truth_onsets;
            at_options.use_expected_words = !at_no_expected;
            at_options.run_combiner = !at_no_combiner;
            return run_attack(at_dir, at_wordlist, attack_cmd, at_cfg, at_seg, at_options, at_out,
                              at_csv);
        }
        if (*combine) return run_combine(cb_recovery, cb_wordlist, cb_budget, cb_truth, cb_out);
        if (*report_cmd) return run_report(rp_inputs, rp_format, rp_out, rp_by_length, rp_curve);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
