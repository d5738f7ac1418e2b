#include "keyclink/combiner.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace keyclink {

CandidateSets candidate_sets(const MergedRecovery& merged, const Wordlist& wl) {
    if (merged.statuses.empty()) throw Error("empty merged recovery");
    CandidateSets cs;
    cs.wordlist_size = wl.words.size();
    cs.sets.resize(merged.statuses.size());
    cs.open.assign(merged.statuses.size(), false);
    for (std::size_t p = 0; p < merged.statuses.size(); ++p) {
        if (merged.statuses[p] == PositionStatus::NONE || merged.candidates[p].empty()) {
            cs.open[p] = true;
            continue;
        }
        for (const auto& c : merged.candidates[p]) {
            if (std::find(cs.sets[p].begin(), cs.sets[p].end(), c.word) == cs.sets[p].end())
                cs.sets[p].push_back(c.word);
        }
    }
    return cs;
}

CombinationBudget naive_count(const CandidateSets& cs) {
    CombinationBudget b;
    for (std::size_t p = 0; p < cs.sets.size(); ++p) {
        const std::size_t factor = cs.open[p] ? cs.wordlist_size : cs.sets[p].size();
        if (factor == 0) throw Error("position with zero candidates and no wordlist");
        b.count *= factor;
    }
    b.log2_exponent = std::log2(static_cast<double>(b.count));
    return b;
}

std::vector<std::vector<std::string>> default_ranking(const CandidateSets& cs,
                                                      const Wordlist& wl) {
    std::vector<std::vector<std::string>> ranking(cs.sets.size());
    for (std::size_t p = 0; p < cs.sets.size(); ++p)
        ranking[p] = cs.open[p] ? wl.words : cs.sets[p];
    return ranking;
}

namespace {

struct Node {
    std::uint32_t cost;
    std::vector<std::uint32_t> ranks;
    // Equal-cost ties resolve with the last position varying slowest:
    // (1,0) is guessed before (0,1).
    bool operator>(const Node& other) const {
        if (cost != other.cost) return cost > other.cost;
        for (std::size_t i = ranks.size(); i-- > 0;)
            if (ranks[i] != other.ranks[i]) return ranks[i] > other.ranks[i];
        return false;
    }
};

} // namespace

EnumerationOutcome prioritized_enumerate(const std::vector<std::vector<std::string>>& ranking,
                                         std::uint64_t budget, const GuessOracle& oracle) {
    if (budget < 1) throw Error("budget must be >= 1");
    if (ranking.empty()) throw Error("nothing to enumerate");
    for (const auto& r : ranking)
        if (r.empty()) throw Error("ranking must cover every position");

    const std::size_t m = ranking.size();
    std::priority_queue<Node, std::vector<Node>, std::greater<Node>> frontier;
    frontier.push({0, std::vector<std::uint32_t>(m, 0)});

    EnumerationOutcome out;
    std::vector<std::string> guess(m);
    while (!frontier.empty()) {
        const Node node = frontier.top();
        frontier.pop();

        for (std::size_t p = 0; p < m; ++p) guess[p] = ranking[p][node.ranks[p]];
        ++out.attempts;
        if (oracle(guess)) {
            out.found = true;
            out.guess = guess;
            return out;
        }
        if (out.attempts >= budget) return out;

        // Unique-parent successor rule: bump coordinate i only when all
        // later coordinates are zero, so every rank vector is generated
        // exactly once and cost grows by exactly 1 per edge.
        for (std::size_t i = m; i-- > 0;) {
            if (node.ranks[i] + 1 < ranking[i].size()) {
                Node next = node;
                next.cost += 1;
                next.ranks[i] += 1;
                frontier.push(std::move(next));
            }
            if (node.ranks[i] != 0) break; // later coordinates must stay zero
        }
    }
    return out;
}

EnumerationOutcome prioritized_enumerate(const CandidateSets& cs, const Wordlist& wl,
                                         std::uint64_t budget, const GuessOracle& oracle) {
    return prioritized_enumerate(default_ranking(cs, wl), budget, oracle);
}

} // namespace keyclink
