#pragma once

#include "keyclink/clustering.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace keyclink {

struct EmptyWordlist : Error {
    EmptyWordlist() : Error("wordlist is empty") {}
};
struct MalformedLine : Error {
    explicit MalformedLine(std::size_t lineno)
        : Error("malformed wordlist line " + std::to_string(lineno)), lineno(lineno) {}
    std::size_t lineno;
};
struct NoWords : Error {
    NoWords() : Error("labels contain no non-delimiter runs") {}
};
struct NoSolution : Error {
    NoSolution() : Error("every position undemodulated") {}
};

struct Wordlist {
    std::vector<std::string> words; // lexicographic, unique
    std::size_t min_len = 0;
    std::size_t max_len = 0;
    std::map<std::size_t, std::vector<std::string>> by_length;
    // first-occurrence canonical pattern -> words (pattern encodes length)
    std::unordered_map<std::string, std::vector<std::string>> by_pattern;
};

Wordlist load_wordlist(const std::string& path);
Wordlist make_wordlist(std::vector<std::string> words);

// Binary symmetric same-symbol matrix: bits(i,j) = 1 iff seq_i = seq_j.
struct RelationMatrix {
    std::size_t n = 0;
    std::vector<std::uint8_t> bits; // row-major n*n

    std::uint8_t at(std::size_t i, std::size_t j) const { return bits[i * n + j]; }
    bool operator==(const RelationMatrix& other) const = default;
};

RelationMatrix relation_matrix(const std::vector<int>& seq);
RelationMatrix relation_matrix(const std::string& seq);

// First-occurrence canonical form; two sequences share a relation matrix
// iff they share a canonical pattern.
std::vector<int> canonical_pattern(const std::vector<int>& seq);
std::vector<int> canonical_pattern(const std::string& seq);
std::string pattern_key(const std::vector<int>& pattern);

// Delimiter-free run of cluster ids: one candidate ciphertext word.
struct ClusterWord {
    std::vector<int> ids;
    std::size_t position = 0; // word index within the passphrase
};

std::vector<int> delimiter_candidates(const Clustering& c,
                                      std::optional<std::size_t> expected_words);

std::vector<ClusterWord> split_into_words(const Clustering& c, int delimiter_id);

using LetterMapping = std::map<int, char>; // partial injective cluster-id -> letter

std::vector<std::string> word_candidates(const ClusterWord& w, const Wordlist& wl,
                                         const LetterMapping& mapping);

struct DemodSolution {
    std::vector<std::string> words;   // empty string at skipped positions
    std::vector<std::size_t> skipped; // ascending
    LetterMapping mapping;
};

struct DemodResult {
    LetterMapping mapping;                                   // of the top solution
    std::map<std::size_t, std::vector<std::string>> demodulated; // position -> candidates
    std::vector<std::size_t> undemodulated;                  // top solution's skips
    std::vector<DemodSolution> solutions;                    // ranked, bounded
};

DemodResult joint_demodulate(const std::vector<ClusterWord>& words, const Wordlist& wl,
                             std::size_t solution_cap = 50);

inline constexpr char kWildcard = '?';

std::string resubstitute(const ClusterWord& undemodulated, const LetterMapping& mapping);

int hamming_allowance(std::size_t len);

// Equal-length dictionary words within the Hamming allowance of the
// partial; wildcards match any letter at zero cost. (distance, lex) order.
struct Candidate {
    std::string word;
    int distance = 0;
    bool operator==(const Candidate&) const = default;
};
std::vector<Candidate> hamming_correct(const std::string& partial, const Wordlist& wl);

enum class PositionStatus { FULL, PARTIAL, NONE };
std::string status_name(PositionStatus s);
PositionStatus status_from_name(const std::string& name);

struct RecoveryResult {
    std::vector<PositionStatus> statuses;
    std::vector<std::vector<Candidate>> candidates; // per position
    std::size_t words_recovered = 0;                // FULL count
    int delimiter_id = -1;
    int cluster_set_id = -1;
};

RecoveryResult recover(const Clustering& c, const Wordlist& wl,
                       std::optional<std::size_t> expected_words, int delimiter_tries = 3,
                       std::size_t solution_cap = 50);

struct MergedCandidate {
    std::string word;
    int freq = 0;     // members containing the word at this position
    int distance = 0; // best distance across members
    bool operator==(const MergedCandidate&) const = default;
};

struct MergedRecovery {
    std::size_t word_count = 0;
    std::vector<PositionStatus> statuses;
    std::vector<std::vector<MergedCandidate>> candidates;
    std::size_t words_recovered = 0;
    std::size_t members = 0; // results in the majority group
};

MergedRecovery merge_recoveries(const std::vector<RecoveryResult>& results);

// recovery.json
struct RecoveryFile {
    std::vector<RecoveryResult> results;
    MergedRecovery merged;
};
void save_recovery(const std::string& path, const RecoveryFile& f);
RecoveryFile load_recovery(const std::string& path);

} // namespace keyclink
