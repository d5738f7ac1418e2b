#pragma once

#include "keyclink/combiner.hpp"
#include "keyclink/hypersearch.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace keyclink {

enum class CellStatus { FULL, PARTIAL, NONE, MISSING };
std::string cell_status_name(CellStatus s);
CellStatus cell_status_from_name(const std::string& name);

// One attacked sample. Exponents are reported only for non-FULL cells
// that still carry at least one candidate word.
struct AttackCell {
    std::string sample_id;
    int passphrase_index = -1; // -1 when the corpus carries no index
    std::size_t word_count = 0;
    CellStatus status = CellStatus::MISSING;
    std::size_t words_recovered = 0;
    bool has_exponent = false;
    double log2_exponent = 0.0;
};

struct AttackReport {
    std::vector<AttackCell> cells;
    PipelineConfig config;
    int sets = 1;
    std::uint64_t seed = 0;
};

struct AttackInput {
    AudioRecording recording;
    std::optional<SyntheticSample> truth; // onsets/labels for synthetic corpora
    int passphrase_index = -1;
};

struct AttackOptions {
    int sets = 1;
    std::uint64_t seed = 0;
    unsigned workers = 0; // 0 = hardware concurrency
    bool use_truth_onsets = false;
    bool use_expected_words = true;
    int delimiter_tries = 3;
    std::size_t solution_cap = 50;
    bool run_combiner = true;
    SegmentationParams seg;
};

// Full pipeline per sample: segment -> features -> cluster_sets ->
// recover per set -> merge -> (optional) combination counting.
// Per-sample failures become MISSING cells; the run continues.
AttackReport attack(const std::vector<AttackInput>& inputs, const PipelineConfig& cfg,
                    const Wordlist& wl, const AttackOptions& options);

// Directory of <name>.wav plus matching <name>.json truth files.
std::vector<AttackInput> load_attack_dir(const std::string& dir);

enum class ReportFormat { CSV, SVG, TEXT };
struct UnsupportedFormat : Error {
    explicit UnsupportedFormat(const std::string& f) : Error("unsupported format: " + f) {}
};
ReportFormat format_from_name(const std::string& name);

// CSV is the canonical machine format; SVG/text draw the recovery grid
// (FULL = filled, PARTIAL = fraction-filled with count, NONE = empty,
// MISSING = black). order_by_length sorts cells by word count first.
std::string report_matrix(const AttackReport& r, ReportFormat format,
                          bool order_by_length = false);
std::vector<AttackCell> parse_report_csv(const std::string& csv);

struct CurveRow {
    int sets = 0;
    std::size_t full_count = 0;
    double mean_words_recovered = 0.0;
};
std::vector<CurveRow> recovery_curve(const std::vector<AttackReport>& reports);
std::string curve_csv(const std::vector<CurveRow>& rows);

void save_attack_report(const std::string& path, const AttackReport& r);
AttackReport load_attack_report(const std::string& path);

} // namespace keyclink
