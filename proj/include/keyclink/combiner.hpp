#pragma once

#include "keyclink/demodulation.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace keyclink {

using BigInt = boost::multiprecision::cpp_int;

// Per-position candidate words; a position with no candidates is OPEN
// and is filled from the full wordlist during counting/enumeration.
struct CandidateSets {
    std::vector<std::vector<std::string>> sets; // ranked, deduplicated
    std::vector<bool> open;
    std::size_t wordlist_size = 0;
};

struct CombinationBudget {
    BigInt count = 1;
    double log2_exponent = 0.0;
};

CandidateSets candidate_sets(const MergedRecovery& merged, const Wordlist& wl);

CombinationBudget naive_count(const CandidateSets& cs);

struct EnumerationOutcome {
    bool found = false;
    std::vector<std::string> guess; // valid when found
    std::uint64_t attempts = 0;
};

using GuessOracle = std::function<bool(const std::vector<std::string>&)>;

// Materialized per-position candidate order (OPEN positions expand to
// the wordlist in its own order).
std::vector<std::vector<std::string>> default_ranking(const CandidateSets& cs,
                                                      const Wordlist& wl);

// Best-first enumeration by total rank cost (sum of per-position
// candidate ranks); equal-cost ties resolve with the last position
// varying slowest. Streams guesses; never materializes the product.
EnumerationOutcome prioritized_enumerate(const std::vector<std::vector<std::string>>& ranking,
                                         std::uint64_t budget, const GuessOracle& oracle);

EnumerationOutcome prioritized_enumerate(const CandidateSets& cs, const Wordlist& wl,
                                         std::uint64_t budget, const GuessOracle& oracle);

} // namespace keyclink
