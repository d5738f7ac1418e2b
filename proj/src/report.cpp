#include "keyclink/report.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace keyclink {

std::string cell_status_name(CellStatus s) {
    switch (s) {
        case CellStatus::FULL: return "FULL";
        case CellStatus::PARTIAL: return "PARTIAL";
        case CellStatus::NONE: return "NONE";
        case CellStatus::MISSING: return "MISSING";
    }
    throw Error("bad cell status");
}

CellStatus cell_status_from_name(const std::string& name) {
    if (name == "FULL") return CellStatus::FULL;
    if (name == "PARTIAL") return CellStatus::PARTIAL;
    if (name == "NONE") return CellStatus::NONE;
    if (name == "MISSING") return CellStatus::MISSING;
    throw Error("unknown cell status: " + name);
}

static AttackCell attack_one(const AttackInput& input, const PipelineConfig& cfg,
                             const Wordlist& wl, const AttackOptions& options,
                             std::uint64_t sample_seed) {
    AttackCell cell;
    cell.sample_id = input.recording.source_id;
    cell.passphrase_index = input.passphrase_index;
    if (input.truth) cell.word_count = input.truth->passphrase.size();

    std::vector<std::size_t> onsets;
    if (options.use_truth_onsets) {
        if (!input.truth) throw Error("truth onsets requested but no truth available");
        onsets = input.truth->onsets;
    } else {
        std::optional<std::size_t> expected;
        if (input.truth) expected = input.truth->key_sequence.size();
        const std::size_t frame = ms_to_samples(options.seg.frame_ms, input.recording.sample_rate);
        const std::size_t hop = ms_to_samples(options.seg.hop_ms, input.recording.sample_rate);
        const EnergySeries energy = short_time_energy(input.recording, frame, hop);
        onsets = detect_keystrokes(energy, options.seg.threshold_factor, options.seg.min_gap_ms,
                                   expected);
    }
    const auto segments = extract_spans(input.recording, onsets, cfg.span,
                                        options.seg.press_window_ms,
                                        options.seg.release_window_ms);
    const FeatureMatrix features = pipeline_features(cfg, segments);
    const int k = std::min<int>(cfg.k, static_cast<int>(features.rows.size()));
    const auto sets = cluster_sets(features, k, options.sets, sample_seed);

    std::optional<std::size_t> expected_words;
    if (options.use_expected_words && input.truth) expected_words = input.truth->passphrase.size();

    std::vector<RecoveryResult> recoveries;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        try {
            RecoveryResult r = recover(sets[i], wl, expected_words, options.delimiter_tries,
                                       options.solution_cap);
            r.cluster_set_id = static_cast<int>(i);
            recoveries.push_back(std::move(r));
        } catch (const NoWords&) {
            // set produced no words under any delimiter; skip it
        }
    }
    if (recoveries.empty()) throw NoWords();

    const MergedRecovery merged = merge_recoveries(recoveries);
    cell.word_count = merged.word_count;
    cell.words_recovered = merged.words_recovered;
    if (merged.words_recovered == merged.word_count && merged.word_count > 0)
        cell.status = CellStatus::FULL;
    else if (merged.words_recovered >= 1)
        cell.status = CellStatus::PARTIAL;
    else
        cell.status = CellStatus::NONE;

    if (options.run_combiner && cell.status != CellStatus::FULL) {
        bool any_candidate = false;
        for (const auto& c : merged.candidates) any_candidate = any_candidate || !c.empty();
        if (any_candidate) {
            cell.has_exponent = true;
            cell.log2_exponent = naive_count(candidate_sets(merged, wl)).log2_exponent;
        }
    }
    return cell;
}

AttackReport attack(const std::vector<AttackInput>& inputs, const PipelineConfig& cfg,
                    const Wordlist& wl, const AttackOptions& options) {
    if (inputs.empty()) throw Error("no inputs to attack");
    cfg.validate();

    AttackReport report;
    report.config = cfg;
    report.sets = options.sets;
    report.seed = options.seed;
    report.cells.resize(inputs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= inputs.size()) return;
            try {
                report.cells[i] =
                    attack_one(inputs[i], cfg, wl, options, derive_seed(options.seed, i));
            } catch (const std::exception&) {
                AttackCell cell;
                cell.sample_id = inputs[i].recording.source_id;
                cell.passphrase_index = inputs[i].passphrase_index;
                if (inputs[i].truth) cell.word_count = inputs[i].truth->passphrase.size();
                cell.status = CellStatus::MISSING;
                report.cells[i] = std::move(cell);
            }
        }
    };
    unsigned n_workers = options.workers == 0 ? std::thread::hardware_concurrency() : options.workers;
    if (n_workers == 0) n_workers = 1;
    n_workers = std::min<unsigned>(n_workers, static_cast<unsigned>(inputs.size()));
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return report;
}

std::vector<AttackInput> load_attack_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(dir + " is not a directory");
    std::vector<fs::path> wavs;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
            wavs.push_back(entry.path());
    std::sort(wavs.begin(), wavs.end());
    if (wavs.empty()) throw Error("no .wav files in " + dir);

    std::vector<AttackInput> inputs;
    for (const auto& wav : wavs) {
        AttackInput in;
        in.recording = load_wav(wav.string());
        in.recording.source_id = wav.stem().string();
        fs::path truth = wav;
        truth.replace_extension(".json");
        if (fs::exists(truth)) in.truth = load_truth(truth.string());
        // passphrase index encoded as trailing _pNN in the stem, if present
        const std::string stem = wav.stem().string();
        const auto pos = stem.rfind("_p");
        if (pos != std::string::npos) {
            try {
                in.passphrase_index = std::stoi(stem.substr(pos + 2));
            } catch (...) {
            }
        }
        inputs.push_back(std::move(in));
    }
    return inputs;
}

ReportFormat format_from_name(const std::string& name) {
    if (name == "csv") return ReportFormat::CSV;
    if (name == "svg") return ReportFormat::SVG;
    if (name == "text") return ReportFormat::TEXT;
    throw UnsupportedFormat(name);
}

static std::string fmt_exponent(double v) {
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(4);
    ss << v;
    return ss.str();
}

static std::vector<AttackCell> ordered_cells(const AttackReport& r, bool order_by_length) {
    std::vector<AttackCell> cells = r.cells;
    if (order_by_length) {
        std::stable_sort(cells.begin(), cells.end(), [](const AttackCell& a, const AttackCell& b) {
            if (a.word_count != b.word_count) return a.word_count < b.word_count;
            if (a.passphrase_index != b.passphrase_index)
                return a.passphrase_index < b.passphrase_index;
            return a.sample_id < b.sample_id;
        });
    }
    return cells;
}

std::string report_matrix(const AttackReport& r, ReportFormat format, bool order_by_length) {
    if (r.cells.empty()) throw Error("empty report");
    const auto cells = ordered_cells(r, order_by_length);

    if (format == ReportFormat::CSV) {
        std::ostringstream out;
        out << "sample_id,passphrase_index,word_count,status,words_recovered,log2_exponent\n";
        for (const auto& c : cells) {
            out << c.sample_id << ',' << c.passphrase_index << ',' << c.word_count << ','
                << cell_status_name(c.status) << ',' << c.words_recovered << ',';
            if (c.has_exponent) out << fmt_exponent(c.log2_exponent);
            out << '\n';
        }
        return out.str();
    }

    if (format == ReportFormat::TEXT) {
        std::ostringstream out;
        constexpr std::size_t per_row = 10;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& c = cells[i];
            char ch = '.';
            if (c.status == CellStatus::FULL) ch = '#';
            else if (c.status == CellStatus::PARTIAL)
                ch = static_cast<char>('0' + std::min<std::size_t>(c.words_recovered, 9));
            else if (c.status == CellStatus::MISSING)
                ch = 'X';
            out << ch;
            if ((i + 1) % per_row == 0 || i + 1 == cells.size()) out << '\n';
        }
        out << "# = full, digit = words recovered (partial), . = none, X = missing\n";
        return out.str();
    }

    if (format == ReportFormat::SVG) {
        constexpr int cw = 48, ch = 24, pad = 4, per_row = 10;
        const int rows = static_cast<int>((cells.size() + per_row - 1) / per_row);
        const int width = per_row * (cw + pad) + pad;
        const int height = rows * (ch + pad) + pad;
        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\">\n";
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& c = cells[i];
            const int x = pad + static_cast<int>(i % per_row) * (cw + pad);
            const int y = pad + static_cast<int>(i / per_row) * (ch + pad);
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\""
                << ch << "\" fill=\"none\" stroke=\"black\"/>\n";
            if (c.status == CellStatus::MISSING) {
                out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw
                    << "\" height=\"" << ch << "\" fill=\"black\"/>\n";
            } else if (c.word_count > 0 && c.words_recovered > 0) {
                const double frac =
                    static_cast<double>(c.words_recovered) / static_cast<double>(c.word_count);
                out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\""
                    << static_cast<int>(std::lround(cw * frac)) << "\" height=\"" << ch
                    << "\" fill=\"#4477aa\"/>\n";
            }
            if (c.status == CellStatus::PARTIAL)
                out << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch - 7
                    << "\" font-size=\"12\" text-anchor=\"middle\">" << c.words_recovered
                    << "</text>\n";
        }
        out << "</svg>\n";
        return out.str();
    }
    throw UnsupportedFormat("?");
}

std::vector<AttackCell> parse_report_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty csv");
    std::vector<AttackCell> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        while (fields.size() < 6) fields.emplace_back();
        AttackCell c;
        c.sample_id = fields[0];
        c.passphrase_index = std::stoi(fields[1]);
        c.word_count = std::stoul(fields[2]);
        c.status = cell_status_from_name(fields[3]);
        c.words_recovered = std::stoul(fields[4]);
        if (!fields[5].empty()) {
            c.has_exponent = true;
            c.log2_exponent = std::stod(fields[5]);
        }
        cells.push_back(std::move(c));
    }
    return cells;
}

std::vector<CurveRow> recovery_curve(const std::vector<AttackReport>& reports) {
    if (reports.size() < 2) throw Error("recovery curve needs at least 2 set counts");
    std::vector<CurveRow> rows;
    for (const auto& r : reports) {
        CurveRow row;
        row.sets = r.sets;
        std::size_t total_words = 0;
        for (const auto& c : r.cells) {
            if (c.status == CellStatus::FULL) ++row.full_count;
            total_words += c.words_recovered;
        }
        row.mean_words_recovered =
            static_cast<double>(total_words) / static_cast<double>(r.cells.size());
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const CurveRow& a, const CurveRow& b) { return a.sets < b.sets; });
    return rows;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
    std::ostringstream out;
    out << "sets,full_count,mean_words_recovered\n";
    for (const auto& r : rows)
        out << r.sets << ',' << r.full_count << ',' << fmt_exponent(r.mean_words_recovered)
            << '\n';
    return out.str();
}

void save_attack_report(const std::string& path, const AttackReport& r) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) {
        nlohmann::json jc = {{"sample_id", c.sample_id},
                             {"passphrase_index", c.passphrase_index},
                             {"word_count", c.word_count},
                             {"status", cell_status_name(c.status)},
                             {"words_recovered", c.words_recovered}};
        if (c.has_exponent) jc["log2_exponent"] = c.log2_exponent;
        cells.push_back(std::move(jc));
    }
    nlohmann::json j = {{"config", r.config.to_kv()},
                        {"sets", r.sets},
                        {"seed", r.seed},
                        {"cells", cells}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

AttackReport load_attack_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    AttackReport r;
    try {
        r.config = PipelineConfig::from_kv(
            j.at("config").get<std::map<std::string, std::string>>());
        r.sets = j.at("sets").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& jc : j.at("cells")) {
            AttackCell c;
            c.sample_id = jc.at("sample_id").get<std::string>();
            c.passphrase_index = jc.at("passphrase_index").get<int>();
            c.word_count = jc.at("word_count").get<std::size_t>();
            c.status = cell_status_from_name(jc.at("status").get<std::string>());
            c.words_recovered = jc.at("words_recovered").get<std::size_t>();
            if (jc.contains("log2_exponent")) {
                c.has_exponent = true;
                c.log2_exponent = jc.at("log2_exponent").get<double>();
            }
            r.cells.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    return r;
}

} // namespace keyclink
