#include "keyclink/demodulation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>

namespace keyclink {

Wordlist make_wordlist(std::vector<std::string> words) {
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    if (words.empty()) throw EmptyWordlist();
    Wordlist wl;
    wl.min_len = words.front().size();
    wl.max_len = 0;
    for (const auto& w : words) {
        if (w.empty()) throw EmptyWordlist();
        for (char ch : w)
            if (ch < 'a' || ch > 'z') throw Error("wordlist entry not lowercase a-z: " + w);
        wl.min_len = std::min(wl.min_len, w.size());
        wl.max_len = std::max(wl.max_len, w.size());
        wl.by_length[w.size()].push_back(w);
        wl.by_pattern[pattern_key(canonical_pattern(w))].push_back(w);
    }
    wl.words = std::move(words);
    return wl;
}

Wordlist load_wordlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::vector<std::string> words;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string word = line;
        const auto tab = line.find('\t');
        if (tab != std::string::npos) {
            const std::string dice = line.substr(0, tab);
            word = line.substr(tab + 1);
            if (dice.empty() ||
                !std::all_of(dice.begin(), dice.end(), [](unsigned char c) { return std::isdigit(c); }))
                throw MalformedLine(lineno);
        }
        for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (word.empty() || !std::all_of(word.begin(), word.end(),
                                         [](char c) { return c >= 'a' && c <= 'z'; }))
            throw MalformedLine(lineno);
        words.push_back(word);
    }
    if (words.empty()) throw EmptyWordlist();
    return make_wordlist(std::move(words));
}

template <typename Seq>
static RelationMatrix relation_matrix_impl(const Seq& seq) {
    RelationMatrix m;
    m.n = seq.size();
    if (m.n == 0) throw Error("relation matrix of empty sequence");
    m.bits.assign(m.n * m.n, 0);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j)
            m.bits[i * m.n + j] = seq[i] == seq[j] ? 1 : 0;
    return m;
}

RelationMatrix relation_matrix(const std::vector<int>& seq) { return relation_matrix_impl(seq); }
RelationMatrix relation_matrix(const std::string& seq) { return relation_matrix_impl(seq); }

template <typename Seq>
static std::vector<int> canonical_pattern_impl(const Seq& seq) {
    std::vector<int> out;
    out.reserve(seq.size());
    std::map<typename Seq::value_type, int> first_seen;
    for (const auto& s : seq) {
        auto [it, inserted] = first_seen.emplace(s, static_cast<int>(first_seen.size()));
        out.push_back(it->second);
    }
    return out;
}

std::vector<int> canonical_pattern(const std::vector<int>& seq) {
    return canonical_pattern_impl(seq);
}
std::vector<int> canonical_pattern(const std::string& seq) { return canonical_pattern_impl(seq); }

std::string pattern_key(const std::vector<int>& pattern) {
    std::string key;
    key.reserve(pattern.size());
    for (int v : pattern) {
        if (v < 0 || v > 25) throw Error("pattern wider than the alphabet");
        key.push_back(static_cast<char>('a' + v));
    }
    return key;
}

std::vector<int> delimiter_candidates(const Clustering& c,
                                      std::optional<std::size_t> expected_words) {
    if (c.labels.empty()) throw Error("empty clustering");
    std::map<int, std::size_t> counts;
    for (int l : c.labels) counts[l]++;
    std::vector<int> ids;
    ids.reserve(counts.size());
    for (const auto& [id, n] : counts) ids.push_back(id);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return a < b;
    });
    if (expected_words && *expected_words >= 1) {
        const std::size_t want = *expected_words - 1;
        std::stable_partition(ids.begin(), ids.end(),
                              [&](int id) { return counts[id] == want; });
    }
    return ids;
}

std::vector<ClusterWord> split_into_words(const Clustering& c, int delimiter_id) {
    if (delimiter_id < 0 || delimiter_id >= c.k) throw Error("delimiter id out of range");
    std::vector<ClusterWord> out;
    ClusterWord cur;
    for (int l : c.labels) {
        if (l == delimiter_id) {
            if (!cur.ids.empty()) {
                cur.position = out.size();
                out.push_back(std::move(cur));
                cur = ClusterWord{};
            }
        } else {
            cur.ids.push_back(l);
        }
    }
    if (!cur.ids.empty()) {
        cur.position = out.size();
        out.push_back(std::move(cur));
    }
    if (out.empty()) throw NoWords();
    return out;
}

std::vector<std::string> word_candidates(const ClusterWord& w, const Wordlist& wl,
                                         const LetterMapping& mapping) {
    const std::size_t len = w.ids.size();
    if (len < wl.min_len || len > wl.max_len) return {};
    const auto bucket = wl.by_pattern.find(pattern_key(canonical_pattern(w.ids)));
    if (bucket == wl.by_pattern.end()) return {};

    bool used[26] = {};
    for (const auto& [id, letter] : mapping) used[letter - 'a'] = true;

    std::vector<std::string> out;
    for (const std::string& word : bucket->second) {
        bool ok = true;
        for (std::size_t p = 0; p < len; ++p) {
            const auto it = mapping.find(w.ids[p]);
            if (it != mapping.end()) {
                if (it->second != word[p]) {
                    ok = false;
                    break;
                }
            } else if (used[word[p] - 'a']) {
                ok = false; // letter already owned by a different cluster
                break;
            }
        }
        if (ok) out.push_back(word);
    }
    return out;
}

namespace {

// Exact-skip-count DFS pass; candidates in lex order, skip branch last,
// so emissions within one pass are already in final rank order. Static
// candidate lists (pattern-bucket matches under the empty mapping) are
// computed once; the per-node mapping filter only shrinks them, so a
// position with an empty static list can never be demodulated and must
// be skipped at every level.
struct DemodSearch {
    const std::vector<ClusterWord>& words;
    const std::vector<std::vector<std::string>>& cands; // static, lex order
    const std::vector<std::size_t>& suffix_forced;      // empty-list positions at >= p
    std::size_t cap;
    std::size_t level = 0;
    std::vector<DemodSolution>& out;

    std::vector<char> assigned; // id -> letter, 0 = free
    bool used_letter[26] = {};
    LetterMapping mapping;
    std::vector<std::string> chosen;
    std::vector<std::size_t> skipped;
    std::vector<std::vector<int>> added_at; // per-depth rollback buffers

    DemodSearch(const std::vector<ClusterWord>& words_,
                const std::vector<std::vector<std::string>>& cands_,
                const std::vector<std::size_t>& suffix_forced_, std::size_t cap_,
                std::vector<DemodSolution>& out_)
        : words(words_), cands(cands_), suffix_forced(suffix_forced_), cap(cap_), out(out_) {
        int max_id = 0;
        for (const auto& w : words)
            for (int id : w.ids) max_id = std::max(max_id, id);
        assigned.assign(static_cast<std::size_t>(max_id) + 1, 0);
        chosen.assign(words.size(), std::string());
        added_at.assign(words.size(), {});
    }

    bool dfs(std::size_t p, std::size_t used) {
        if (out.size() >= cap) return false;
        const std::size_t m = words.size();
        if (p == m) {
            if (used == level) { // lower-skip leaves were emitted in earlier passes
                out.push_back({chosen, skipped, mapping});
                if (out.size() >= cap) return false;
            }
            return true;
        }
        if (used + (m - p) < level) return true;       // cannot skip enough from here
        if (used + suffix_forced[p] > level) return true; // forced skips overrun the budget

        const auto& ids = words[p].ids;
        for (const std::string& cand : cands[p]) {
            // Pattern equality already enforces within-word consistency;
            // check the word against ids mapped by earlier positions.
            bool ok = true;
            for (std::size_t i = 0; i < cand.size(); ++i) {
                const char have = assigned[ids[i]];
                if (have != 0) {
                    if (have != cand[i]) {
                        ok = false;
                        break;
                    }
                } else if (used_letter[cand[i] - 'a']) {
                    ok = false; // letter already owned by a different cluster
                    break;
                }
            }
            if (!ok) continue;

            auto& added = added_at[p];
            added.clear();
            for (std::size_t i = 0; i < cand.size(); ++i) {
                const int id = ids[i];
                if (assigned[id] == 0) {
                    assigned[id] = cand[i];
                    used_letter[cand[i] - 'a'] = true;
                    mapping.emplace(id, cand[i]);
                    added.push_back(id);
                }
            }
            chosen[p] = cand;
            const bool keep = dfs(p + 1, used);
            chosen[p].clear();
            for (int id : added) {
                used_letter[assigned[id] - 'a'] = false;
                assigned[id] = 0;
                mapping.erase(id);
            }
            if (!keep) return false;
        }
        if (used < level) {
            skipped.push_back(p);
            if (!dfs(p + 1, used + 1)) return false;
            skipped.pop_back();
        }
        return true;
    }
};

} // namespace

DemodResult joint_demodulate(const std::vector<ClusterWord>& words, const Wordlist& wl,
                             std::size_t solution_cap) {
    if (words.empty()) throw Error("no cluster words to demodulate");
    if (solution_cap < 1) throw Error("solution cap must be >= 1");
    const std::size_t m = words.size();

    std::vector<std::vector<std::string>> static_cands(m);
    for (std::size_t p = 0; p < m; ++p) static_cands[p] = word_candidates(words[p], wl, {});
    std::vector<std::size_t> suffix_forced(m + 1, 0);
    for (std::size_t p = m; p-- > 0;)
        suffix_forced[p] = suffix_forced[p + 1] + (static_cands[p].empty() ? 1 : 0);

    std::vector<DemodSolution> sols;
    // Passes by exact skip count; the all-skip assignment (level m) is
    // not a solution, and levels below the forced-skip count are
    // infeasible by construction.
    for (std::size_t level = suffix_forced[0]; level < m && sols.size() < solution_cap; ++level) {
        DemodSearch search(words, static_cands, suffix_forced, solution_cap, sols);
        search.level = level;
        search.dfs(0, 0);
    }
    if (sols.empty()) throw NoSolution();

    DemodResult r;
    r.solutions = std::move(sols);
    r.mapping = r.solutions.front().mapping;
    r.undemodulated = r.solutions.front().skipped;
    const std::size_t top_skips = r.undemodulated.size();
    for (const auto& s : r.solutions) {
        if (s.skipped.size() != top_skips) break; // strata are contiguous
        for (std::size_t p = 0; p < m; ++p) {
            if (s.words[p].empty()) continue;
            auto& list = r.demodulated[p];
            if (std::find(list.begin(), list.end(), s.words[p]) == list.end())
                list.push_back(s.words[p]);
        }
    }
    return r;
}

std::string resubstitute(const ClusterWord& undemodulated, const LetterMapping& mapping) {
    std::string out;
    out.reserve(undemodulated.ids.size());
    for (int id : undemodulated.ids) {
        const auto it = mapping.find(id);
        out.push_back(it == mapping.end() ? kWildcard : it->second);
    }
    return out;
}

int hamming_allowance(std::size_t len) {
    if (len < 1) throw Error("hamming allowance of empty word");
    if (len <= 2) return 0;
    if (len <= 4) return 1;
    if (len <= 6) return 2;
    return 3; // 7-9 per the piecewise rule; longer lengths keep the cap
}

std::vector<Candidate> hamming_correct(const std::string& partial, const Wordlist& wl) {
    const std::size_t len = partial.size();
    const auto bucket = wl.by_length.find(len);
    if (bucket == wl.by_length.end()) return {};
    const int allowance = hamming_allowance(len);
    std::vector<Candidate> out;
    for (const std::string& word : bucket->second) {
        int dist = 0;
        for (std::size_t i = 0; i < len; ++i)
            if (partial[i] != kWildcard && partial[i] != word[i]) ++dist;
        if (dist <= allowance) out.push_back({word, dist});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });
    return out;
}

std::string status_name(PositionStatus s) {
    switch (s) {
        case PositionStatus::FULL: return "FULL";
        case PositionStatus::PARTIAL: return "PARTIAL";
        case PositionStatus::NONE: return "NONE";
    }
    throw Error("bad status");
}

PositionStatus status_from_name(const std::string& name) {
    if (name == "FULL") return PositionStatus::FULL;
    if (name == "PARTIAL") return PositionStatus::PARTIAL;
    if (name == "NONE") return PositionStatus::NONE;
    throw Error("unknown status: " + name);
}

RecoveryResult recover(const Clustering& c, const Wordlist& wl,
                       std::optional<std::size_t> expected_words, int delimiter_tries,
                       std::size_t solution_cap) {
    if (delimiter_tries < 1) throw Error("delimiter tries must be >= 1");
    const auto delims = delimiter_candidates(c, expected_words);

    std::optional<RecoveryResult> best;
    bool any_split = false;
    const std::size_t tries = std::min<std::size_t>(delimiter_tries, delims.size());
    for (std::size_t t = 0; t < tries; ++t) {
        std::vector<ClusterWord> cw;
        try {
            cw = split_into_words(c, delims[t]);
        } catch (const NoWords&) {
            continue;
        }
        any_split = true;

        RecoveryResult r;
        r.delimiter_id = delims[t];
        const std::size_t m = cw.size();
        r.statuses.assign(m, PositionStatus::NONE);
        r.candidates.assign(m, {});
        try {
            const DemodResult d = joint_demodulate(cw, wl, solution_cap);
            for (const auto& [p, words] : d.demodulated)
                for (const auto& w : words) r.candidates[p].push_back({w, 0});
            for (std::size_t p : d.undemodulated) {
                const std::string partial = resubstitute(cw[p], d.mapping);
                for (const auto& cand : hamming_correct(partial, wl)) {
                    const bool dup =
                        std::any_of(r.candidates[p].begin(), r.candidates[p].end(),
                                    [&](const Candidate& x) { return x.word == cand.word; });
                    if (!dup) r.candidates[p].push_back(cand);
                }
            }
            for (std::size_t p = 0; p < m; ++p) {
                if (r.candidates[p].size() == 1) {
                    r.statuses[p] = PositionStatus::FULL;
                    ++r.words_recovered;
                } else if (!r.candidates[p].empty()) {
                    r.statuses[p] = PositionStatus::PARTIAL;
                }
            }
        } catch (const NoSolution&) {
            // nothing demodulated under this delimiter; keep the all-NONE attempt
        }

        auto partials = [](const RecoveryResult& x) {
            return std::count(x.statuses.begin(), x.statuses.end(), PositionStatus::PARTIAL);
        };
        if (!best || r.words_recovered > best->words_recovered ||
            (r.words_recovered == best->words_recovered && partials(r) > partials(*best)))
            best = std::move(r);
    }
    if (!any_split) throw NoWords();
    return *best;
}

MergedRecovery merge_recoveries(const std::vector<RecoveryResult>& results) {
    if (results.empty()) throw Error("no recovery results to merge");

    std::map<std::size_t, std::vector<const RecoveryResult*>> groups;
    for (const auto& r : results) groups[r.statuses.size()].push_back(&r);

    const std::vector<const RecoveryResult*>* group = nullptr;
    std::size_t group_wc = 0, group_full = 0;
    for (const auto& [wc, g] : groups) {
        std::size_t full = 0;
        for (const auto* r : g) full += r->words_recovered;
        const bool better = !group || g.size() > group->size() ||
                            (g.size() == group->size() && full > group_full);
        if (better) {
            group = &g;
            group_wc = wc;
            group_full = full;
        }
    }

    MergedRecovery m;
    m.word_count = group_wc;
    m.members = group->size();
    m.statuses.assign(group_wc, PositionStatus::NONE);
    m.candidates.assign(group_wc, {});
    for (std::size_t p = 0; p < group_wc; ++p) {
        // word -> (freq across members, best distance)
        std::map<std::string, std::pair<int, int>> agg;
        for (const auto* r : *group) {
            for (const auto& cand : (*r).candidates[p]) {
                auto [it, inserted] = agg.emplace(cand.word, std::make_pair(1, cand.distance));
                if (!inserted) {
                    it->second.first += 1;
                    it->second.second = std::min(it->second.second, cand.distance);
                }
            }
        }

        std::map<std::string, int> full_votes;
        for (const auto* r : *group)
            if (r->statuses[p] == PositionStatus::FULL)
                full_votes[r->candidates[p].front().word]++;

        if (!full_votes.empty()) {
            std::string winner;
            int votes = 0;
            for (const auto& [w, v] : full_votes) { // lex order; ties keep the first
                if (v > votes) {
                    winner = w;
                    votes = v;
                }
            }
            m.statuses[p] = PositionStatus::FULL;
            const auto& info = agg.at(winner);
            m.candidates[p] = {{winner, info.first, info.second}};
            ++m.words_recovered;
        } else if (!agg.empty()) {
            m.statuses[p] = PositionStatus::PARTIAL;
            for (const auto& [w, info] : agg)
                m.candidates[p].push_back({w, info.first, info.second});
            std::sort(m.candidates[p].begin(), m.candidates[p].end(),
                      [](const MergedCandidate& a, const MergedCandidate& b) {
                          if (a.freq != b.freq) return a.freq > b.freq;
                          if (a.distance != b.distance) return a.distance < b.distance;
                          return a.word < b.word;
                      });
        }
    }
    return m;
}

static nlohmann::json result_to_json(const RecoveryResult& r) {
    nlohmann::json positions = nlohmann::json::array();
    for (std::size_t p = 0; p < r.statuses.size(); ++p) {
        nlohmann::json cands = nlohmann::json::array();
        for (const auto& c : r.candidates[p])
            cands.push_back({{"word", c.word}, {"distance", c.distance}});
        positions.push_back({{"status", status_name(r.statuses[p])}, {"candidates", cands}});
    }
    return {{"delimiter_id", r.delimiter_id},
            {"cluster_set_id", r.cluster_set_id},
            {"words_recovered", r.words_recovered},
            {"positions", positions}};
}

static RecoveryResult result_from_json(const nlohmann::json& j) {
    RecoveryResult r;
    r.delimiter_id = j.at("delimiter_id").get<int>();
    r.cluster_set_id = j.at("cluster_set_id").get<int>();
    r.words_recovered = j.at("words_recovered").get<std::size_t>();
    for (const auto& pos : j.at("positions")) {
        r.statuses.push_back(status_from_name(pos.at("status").get<std::string>()));
        std::vector<Candidate> cands;
        for (const auto& c : pos.at("candidates"))
            cands.push_back({c.at("word").get<std::string>(), c.at("distance").get<int>()});
        r.candidates.push_back(std::move(cands));
    }
    return r;
}

void save_recovery(const std::string& path, const RecoveryFile& f) {
    nlohmann::json results = nlohmann::json::array();
    for (const auto& r : f.results) results.push_back(result_to_json(r));

    nlohmann::json merged_positions = nlohmann::json::array();
    for (std::size_t p = 0; p < f.merged.statuses.size(); ++p) {
        nlohmann::json cands = nlohmann::json::array();
        for (const auto& c : f.merged.candidates[p])
            cands.push_back({{"word", c.word}, {"freq", c.freq}, {"distance", c.distance}});
        merged_positions.push_back(
            {{"status", status_name(f.merged.statuses[p])}, {"candidates", cands}});
    }
    nlohmann::json j = {
        {"results", results},
        {"merged",
         {{"word_count", f.merged.word_count},
          {"members", f.merged.members},
          {"words_recovered", f.merged.words_recovered},
          {"positions", merged_positions}}}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

RecoveryFile load_recovery(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    RecoveryFile f;
    try {
        for (const auto& r : j.at("results")) f.results.push_back(result_from_json(r));
        const auto& m = j.at("merged");
        f.merged.word_count = m.at("word_count").get<std::size_t>();
        f.merged.members = m.at("members").get<std::size_t>();
        f.merged.words_recovered = m.at("words_recovered").get<std::size_t>();
        for (const auto& pos : m.at("positions")) {
            f.merged.statuses.push_back(status_from_name(pos.at("status").get<std::string>()));
            std::vector<MergedCandidate> cands;
            for (const auto& c : pos.at("candidates"))
                cands.push_back({c.at("word").get<std::string>(), c.at("freq").get<int>(),
                                 c.at("distance").get<int>()});
            f.merged.candidates.push_back(std::move(cands));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    return f;
}

} // namespace keyclink
