#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "keyclink/demodulation.hpp"
#include "keyclink/synthcorpus.hpp"
#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <vector>

using namespace keyclink;

namespace {

ClusterWord cw(std::vector<int> ids, std::size_t pos = 0) {
    ClusterWord w;
    w.ids = std::move(ids);
    w.position = pos;
    return w;
}

// encode a string as cluster ids via the fixed key map
std::vector<int> ids_of(const std::string& s) {
    std::vector<int> out;
    for (char c : s) out.push_back(key_to_id(c));
    return out;
}

} // namespace

TEST_CASE("load_wordlist: plain, diceware, dedup, case folding") {
    testsup::TempDir tmp;
    {
        std::ofstream f(tmp.file("plain.txt"));
        f << "zoo\nApple\nzoo\nbanana\n\n";
    }
    const auto wl = load_wordlist(tmp.file("plain.txt"));
    CHECK(wl.words == std::vector<std::string>{"apple", "banana", "zoo"});
    CHECK(wl.min_len == 3);
    CHECK(wl.max_len == 6);
    CHECK(wl.by_length.at(3) == std::vector<std::string>{"zoo"});

    {
        std::ofstream f(tmp.file("dice.txt"));
        f << "11111\tabacus\r\n11112\tabdomen\n";
    }
    const auto dice = load_wordlist(tmp.file("dice.txt"));
    CHECK(dice.words == std::vector<std::string>{"abacus", "abdomen"});
}

TEST_CASE("load_wordlist: errors carry the line number") {
    testsup::TempDir tmp;
    {
        std::ofstream f(tmp.file("bad.txt"));
        f << "fine\nxx11\tword\n";
    }
    try {
        load_wordlist(tmp.file("bad.txt"));
        FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
        CHECK(e.lineno == 2);
    }

    {
        std::ofstream f(tmp.file("punct.txt"));
        f << "ok\nnot-a-word\n";
    }
    CHECK_THROWS_AS(load_wordlist(tmp.file("punct.txt")), MalformedLine);

    std::ofstream(tmp.file("empty.txt")) << "\n\n";
    CHECK_THROWS_AS(load_wordlist(tmp.file("empty.txt")), EmptyWordlist);

    CHECK_THROWS_AS(make_wordlist({}), EmptyWordlist);
}

TEST_CASE("the EFF fixture loads with expected shape") {
    const auto& wl = testsup::eff_wordlist();
    // 7776 lines; the de-hyphenated yo-yo collides with yoyo, leaving
    // 7775 unique words
    CHECK(wl.words.size() == 7775);
    CHECK(wl.min_len == 3);
    CHECK(wl.max_len == 9);
    CHECK(std::binary_search(wl.words.begin(), wl.words.end(), "caviar"));
    CHECK(std::binary_search(wl.words.begin(), wl.words.end(), "zookeeper"));
}

TEST_CASE("relation_matrix: level and radar share the figure-2 pattern") {
    const auto lv = relation_matrix(std::string("level"));
    const auto rd = relation_matrix(std::string("radar"));
    CHECK(lv == rd);
    CHECK(lv.n == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(lv.at(i, i) == 1);
    const std::set<std::pair<std::size_t, std::size_t>> ones = {{0, 4}, {4, 0}, {1, 3}, {3, 1}};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            if (i == j) continue;
            CHECK(lv.at(i, j) == (ones.count({i, j}) ? 1 : 0));
        }

    // int overload agrees with the string overload
    const auto iv = relation_matrix(std::vector<int>{8, 3, 5, 3, 8});
    CHECK(iv == lv);

    CHECK(relation_matrix(std::string("abc")) != lv);
}

TEST_CASE("canonical_pattern first-occurrence encoding") {
    CHECK(canonical_pattern(std::string("level")) == std::vector<int>{0, 1, 2, 1, 0});
    CHECK(canonical_pattern(std::string("radar")) == std::vector<int>{0, 1, 2, 1, 0});
    CHECK(canonical_pattern(std::vector<int>{5, 9, 5}) == std::vector<int>{0, 1, 0});
    CHECK(pattern_key({0, 1, 2, 1, 0}) == "abcba");
}

TEST_CASE("equal relation matrices iff equal canonical patterns (exhaustive)") {
    // every sequence of length 1..5 over a 3-symbol alphabet
    std::vector<std::vector<int>> seqs;
    for (std::size_t len = 1; len <= 5; ++len) {
        std::vector<int> cur(len, 0);
        while (true) {
            seqs.push_back(cur);
            std::size_t p = 0;
            while (p < len && cur[p] == 2) cur[p++] = 0;
            if (p == len) break;
            cur[p]++;
        }
    }
    for (const auto& a : seqs)
        for (const auto& b : seqs) {
            if (a.size() != b.size()) continue;
            const bool same_rel = relation_matrix(a) == relation_matrix(b);
            const bool same_pat = canonical_pattern(a) == canonical_pattern(b);
            CHECK(same_rel == same_pat);
        }
}

TEST_CASE("delimiter_candidates ordering and promotion") {
    Clustering c;
    c.k = 4;
    // id 0 x5, id 1 x3, id 2 x2, id 3 x2
    c.labels = {0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 3, 3};

    const auto plain = delimiter_candidates(c, std::nullopt);
    CHECK(plain == std::vector<int>{0, 1, 2, 3}); // frequency desc, id asc ties

    // expecting 3 words -> ids seen exactly twice jump the queue
    const auto hinted = delimiter_candidates(c, 3);
    CHECK(hinted == std::vector<int>{2, 3, 0, 1});
}

TEST_CASE("split_into_words") {
    Clustering c;
    c.k = 27;
    c.labels = ids_of("peroxide hacking arena");
    const auto words = split_into_words(c, 26);
    REQUIRE(words.size() == 3);
    CHECK(words[0].ids.size() == 8);
    CHECK(words[1].ids.size() == 7);
    CHECK(words[2].ids.size() == 5);
    CHECK(words[0].position == 0);
    CHECK(words[2].position == 2);

    // doubled/leading/trailing delimiters collapse
    Clustering messy;
    messy.k = 3;
    messy.labels = {2, 0, 1, 2, 2, 1, 0, 2};
    const auto mw = split_into_words(messy, 2);
    REQUIRE(mw.size() == 2);
    CHECK(mw[0].ids == std::vector<int>{0, 1});
    CHECK(mw[1].ids == std::vector<int>{1, 0});

    Clustering all_delim;
    all_delim.k = 1;
    all_delim.labels = {0, 0, 0};
    CHECK_THROWS_AS(split_into_words(all_delim, 0), NoWords);
    CHECK_THROWS_AS(split_into_words(messy, 7), Error);
}

TEST_CASE("word_candidates honors pattern and partial mapping") {
    const auto wl = make_wordlist({"level", "radar", "taste", "nugget", "arena"});

    const auto w = cw(ids_of("level"));
    auto cands = word_candidates(w, wl, {});
    CHECK(cands == std::vector<std::string>{"level", "radar"}); // taste: pattern abcad differs

    // pin the middle letter: level survives, radar does not
    LetterMapping m;
    m[key_to_id('v')] = 'v';
    CHECK(word_candidates(w, wl, m) == std::vector<std::string>{"level"});

    // injectivity: if another cluster owns 'r', radar is excluded
    LetterMapping owned;
    owned[25] = 'r'; // some unrelated cluster id
    CHECK(word_candidates(w, wl, owned) == std::vector<std::string>{"level"});

    // no bucket for the pattern
    CHECK(word_candidates(cw({0, 0, 0, 0, 0}), wl, {}).empty());
}

TEST_CASE("word_candidates equals a direct scan on the EFF fixture") {
    const auto& wl = testsup::eff_wordlist();
    const auto w = cw(ids_of("hacking"));
    const auto fast = word_candidates(w, wl, {});

    std::vector<std::string> slow;
    const auto pat = canonical_pattern(w.ids);
    for (const auto& word : wl.words)
        if (word.size() == 7 && canonical_pattern(word) == pat) slow.push_back(word);
    CHECK(fast == slow);
    CHECK(std::find(fast.begin(), fast.end(), "hacking") != fast.end());
}

TEST_CASE("joint_demodulate: consistent two-word cipher solves exactly") {
    const auto wl = make_wordlist({"level", "radar", "nugget", "arena"});
    std::vector<ClusterWord> words = {cw(ids_of("nugget"), 0), cw(ids_of("arena"), 1)};

    const auto r = joint_demodulate(words, wl);
    // one complete solution; lower-ranked entries each skip a position
    REQUIRE(r.solutions.size() == 3);
    CHECK(r.solutions[0].words == std::vector<std::string>{"nugget", "arena"});
    CHECK(r.solutions[0].skipped.empty());
    CHECK(r.solutions[1].skipped.size() == 1);
    CHECK(r.solutions[2].skipped.size() == 1);
    CHECK(r.undemodulated.empty());
    CHECK(r.demodulated.at(0) == std::vector<std::string>{"nugget"});
    CHECK(r.demodulated.at(1) == std::vector<std::string>{"arena"});
    CHECK(r.mapping.at(key_to_id('n')) == 'n');
    CHECK(r.mapping.at(key_to_id('a')) == 'a');
}

TEST_CASE("joint_demodulate skips an uncoverable word and repair finds it") {
    const auto wl = make_wordlist({"iguana", "proving"});
    auto corrupted = ids_of("iguana");
    corrupted[5] = 25; // stray cluster: pattern becomes all-distinct, no match
    std::vector<ClusterWord> words = {cw(ids_of("proving"), 0), cw(corrupted, 1)};

    const auto r = joint_demodulate(words, wl);
    REQUIRE(r.solutions.size() == 1);
    CHECK(r.solutions[0].words[0] == "proving");
    CHECK(r.solutions[0].words[1] == "");
    CHECK(r.solutions[0].skipped == std::vector<std::size_t>{1});
    CHECK(r.undemodulated == std::vector<std::size_t>{1});

    const std::string partial = resubstitute(words[1], r.mapping);
    CHECK(partial == "ig??n?"); // u, a unseen in proving; stray id unknown
    const auto fixes = hamming_correct(partial, wl);
    REQUIRE(!fixes.empty());
    CHECK(fixes[0].word == "iguana");
    CHECK(fixes[0].distance == 0); // wildcards cost nothing
}

TEST_CASE("joint_demodulate: NoSolution when nothing matches anywhere") {
    const auto wl = make_wordlist({"abc"});
    std::vector<ClusterWord> words = {cw({0, 0}, 0), cw({1, 1, 1, 1}, 1)};
    CHECK_THROWS_AS(joint_demodulate(words, wl), NoSolution);
}

TEST_CASE("joint_demodulate respects the solution cap") {
    const auto wl =
        make_wordlist({"bad", "cad", "fad", "gad", "had", "lad", "mad", "pad", "sad", "tad"});
    std::vector<ClusterWord> words = {cw({0, 1, 2}, 0)};

    const auto all = joint_demodulate(words, wl, 50);
    CHECK(all.solutions.size() == 10);
    CHECK(all.demodulated.at(0).size() == 10);

    const auto capped = joint_demodulate(words, wl, 4);
    CHECK(capped.solutions.size() == 4);
}

TEST_CASE("resubstitute") {
    LetterMapping m;
    m[4] = 'c';
    m[9] = 'a';
    CHECK(resubstitute(cw({4, 9}), m) == "ca");
    CHECK(resubstitute(cw({4, 7}), m) == "c?");
}

TEST_CASE("hamming_allowance piecewise") {
    CHECK(hamming_allowance(1) == 0);
    CHECK(hamming_allowance(2) == 0);
    CHECK(hamming_allowance(3) == 1);
    CHECK(hamming_allowance(4) == 1);
    CHECK(hamming_allowance(5) == 2);
    CHECK(hamming_allowance(6) == 2);
    CHECK(hamming_allowance(7) == 3);
    CHECK(hamming_allowance(8) == 3);
    CHECK(hamming_allowance(9) == 3);
    CHECK(hamming_allowance(12) == 3);
    CHECK_THROWS_AS(hamming_allowance(0), Error);
}

TEST_CASE("hamming_correct on the EFF fixture") {
    const auto& wl = testsup::eff_wordlist();

    const auto caviar = hamming_correct("cavia?", wl);
    REQUIRE(!caviar.empty());
    CHECK(caviar[0].word == "caviar");
    CHECK(caviar[0].distance == 0);

    // an exact dictionary word comes back first at distance zero
    const auto exact = hamming_correct("zookeeper", wl);
    REQUIRE(!exact.empty());
    CHECK(exact[0].word == "zookeeper");
    CHECK(exact[0].distance == 0);

    // allowance 0 at length 2 and no 2-letter words in the list
    CHECK(hamming_correct("zz", wl).empty());

    // ordering: distance first, lex within equal distance; lengths match
    const auto near = hamming_correct("cattle", wl);
    for (std::size_t i = 1; i < near.size(); ++i) {
        const bool ordered = near[i - 1].distance < near[i].distance ||
                             (near[i - 1].distance == near[i].distance &&
                              near[i - 1].word < near[i].word);
        CHECK(ordered);
    }
    for (const auto& c : near) {
        CHECK(c.word.size() == 6);
        CHECK(c.distance <= 2);
    }
}

TEST_CASE("recover reports honest per-position statuses") {
    const auto& wl = testsup::eff_wordlist();

    // ambiguous middle word: 8 same-pattern candidates fit alongside
    // peroxide and arena, so position 1 is PARTIAL
    const auto amb = recover(truth_clustering("peroxide hacking arena"), wl, 3, 27);
    REQUIRE(amb.statuses.size() == 3);
    CHECK(amb.statuses[0] == PositionStatus::FULL);
    CHECK(amb.statuses[1] == PositionStatus::PARTIAL);
    CHECK(amb.statuses[2] == PositionStatus::FULL);
    CHECK(amb.words_recovered == 2);
    CHECK(amb.delimiter_id == 26);
    CHECK(amb.candidates[0][0].word == "peroxide");
    const auto& mid = amb.candidates[1];
    CHECK(std::any_of(mid.begin(), mid.end(),
                      [](const Candidate& c) { return c.word == "hacking"; }));
    CHECK(mid.size() == 8);

    // unambiguous phrase: everything FULL
    const auto full = recover(truth_clustering("glamorous upheaval"), wl, 2, 27);
    REQUIRE(full.statuses.size() == 2);
    CHECK(full.words_recovered == 2);
    CHECK(full.candidates[0][0].word == "glamorous");
    CHECK(full.candidates[1][0].word == "upheaval");
}

TEST_CASE("recover throws NoWords when no delimiter produces words") {
    const auto wl = make_wordlist({"abc"});
    Clustering c;
    c.k = 1;
    c.labels = {0, 0, 0, 0};
    CHECK_THROWS_AS(recover(c, wl, 2), NoWords);
}

TEST_CASE("merge_recoveries combines complementary sets") {
    RecoveryResult a;
    a.statuses = {PositionStatus::FULL, PositionStatus::NONE};
    a.candidates = {{{"nugget", 0}}, {}};
    a.words_recovered = 1;

    RecoveryResult b;
    b.statuses = {PositionStatus::NONE, PositionStatus::FULL};
    b.candidates = {{}, {{"arena", 0}}};
    b.words_recovered = 1;

    const auto m = merge_recoveries({a, b});
    CHECK(m.word_count == 2);
    CHECK(m.members == 2);
    CHECK(m.words_recovered == 2);
    CHECK(m.statuses[0] == PositionStatus::FULL);
    CHECK(m.statuses[1] == PositionStatus::FULL);
    CHECK(m.candidates[0][0].word == "nugget");
    CHECK(m.candidates[1][0].word == "arena");
}

TEST_CASE("merge_recoveries majority word count and full votes") {
    RecoveryResult two;
    two.statuses = {PositionStatus::FULL, PositionStatus::FULL};
    two.candidates = {{{"alpha", 0}}, {{"beta", 0}}};
    two.words_recovered = 2;

    RecoveryResult odd;
    odd.statuses = {PositionStatus::FULL};
    odd.candidates = {{{"gamma", 0}}};
    odd.words_recovered = 1;

    auto third = two;
    third.candidates[0][0].word = "delta";

    // group of word_count 2 has two members and wins over the singleton
    const auto m = merge_recoveries({two, odd, third});
    CHECK(m.word_count == 2);
    CHECK(m.members == 2);
    // full votes split alpha/delta 1-1: lexicographically first kept
    CHECK(m.statuses[0] == PositionStatus::FULL);
    CHECK(m.candidates[0][0].word == "alpha");
    CHECK(m.candidates[0][0].freq == 1);
    // beta is unanimous
    CHECK(m.candidates[1][0].word == "beta");
    CHECK(m.candidates[1][0].freq == 2);

    CHECK_THROWS_AS(merge_recoveries({}), Error);
}

TEST_CASE("merged partial candidates sort by frequency, distance, lex") {
    RecoveryResult a;
    a.statuses = {PositionStatus::PARTIAL};
    a.candidates = {{{"pear", 1}, {"plum", 0}}};

    RecoveryResult b;
    b.statuses = {PositionStatus::PARTIAL};
    b.candidates = {{{"pear", 0}, {"kiwi", 2}}};

    const auto m = merge_recoveries({a, b});
    REQUIRE(m.statuses[0] == PositionStatus::PARTIAL);
    REQUIRE(m.candidates[0].size() == 3);
    CHECK(m.candidates[0][0].word == "pear"); // freq 2 beats freq 1
    CHECK(m.candidates[0][0].freq == 2);
    CHECK(m.candidates[0][0].distance == 0); // best distance across members
    CHECK(m.candidates[0][1].word == "plum"); // distance 0 beats kiwi's 2
    CHECK(m.candidates[0][2].word == "kiwi");
}

TEST_CASE("recovery file round trip") {
    testsup::TempDir tmp;
    const auto& wl = testsup::eff_wordlist();
    const auto r1 = recover(truth_clustering("nugget unplug arena"), wl, 3, 27);
    const auto r2 = recover(truth_clustering("nugget unplug arena"), wl, 3, 27);

    RecoveryFile f;
    f.results = {r1, r2};
    f.merged = merge_recoveries(f.results);
    save_recovery(tmp.file("rec.json"), f);

    const auto back = load_recovery(tmp.file("rec.json"));
    REQUIRE(back.results.size() == 2);
    CHECK(back.results[0].statuses == r1.statuses);
    CHECK(back.results[0].delimiter_id == r1.delimiter_id);
    REQUIRE(back.results[0].candidates.size() == r1.candidates.size());
    for (std::size_t p = 0; p < r1.candidates.size(); ++p)
        CHECK(back.results[0].candidates[p] == r1.candidates[p]);
    CHECK(back.merged.word_count == f.merged.word_count);
    CHECK(back.merged.statuses == f.merged.statuses);
    CHECK(back.merged.words_recovered == f.merged.words_recovered);
    for (std::size_t p = 0; p < f.merged.candidates.size(); ++p)
        CHECK(back.merged.candidates[p] == f.merged.candidates[p]);
}

TEST_CASE("status names round trip") {
    for (auto s : {PositionStatus::FULL, PositionStatus::PARTIAL, PositionStatus::NONE})
        CHECK(status_from_name(status_name(s)) == s);
    CHECK_THROWS_AS(status_from_name("SIDEWAYS"), Error);
}
