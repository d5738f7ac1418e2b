#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "keyclink/features.hpp"
#include "keyclink/hypersearch.hpp"
#include "keyclink/synthcorpus.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

using namespace keyclink;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_xcorr_peak(const std::vector<double>& a, const std::vector<double>& b) {
    // direct lag scan, independent of the library's FFT path
    const auto centered = [](std::vector<double> v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= double(v.size());
        for (double& x : v) x -= mean;
        return v;
    };
    const auto ca = centered(a), cb = centered(b);
    double na = 0.0, nb = 0.0;
    for (double x : ca) na += x * x;
    for (double x : cb) nb += x * x;
    const double denom = std::sqrt(na * nb);
    if (denom == 0.0) return 0.0;
    double best = 0.0;
    const std::ptrdiff_t la = ca.size(), lb = cb.size();
    for (std::ptrdiff_t lag = -(lb - 1); lag < la; ++lag) {
        double acc = 0.0;
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, lag);
             i < std::min(la, lag + lb); ++i)
            acc += ca[i] * cb[i - lag];
        best = std::max(best, std::abs(acc) / denom);
    }
    return best;
}

} // namespace

TEST_CASE("gen_passphrase draws words uniformly and reproducibly") {
    const auto wl = make_wordlist({"ant", "bee", "cow", "doe"});

    Rng r1(99), r2(99);
    const auto a = gen_passphrase(wl, 5, r1);
    const auto b = gen_passphrase(wl, 5, r2);
    CHECK(a == b);
    CHECK(a.size() == 5);
    for (const auto& w : a)
        CHECK(std::find(wl.words.begin(), wl.words.end(), w) != wl.words.end());

    Rng rng(7);
    std::map<std::string, int> counts;
    for (int i = 0; i < 10000; ++i) counts[gen_passphrase(wl, 1, rng)[0]]++;
    // binomial(10000, 1/4): mean 2500, sigma ~43; 3 sigma band
    for (const auto& [w, n] : counts) {
        CHECK(n > 2500 - 130);
        CHECK(n < 2500 + 130);
    }

    Rng r3(1);
    CHECK(gen_passphrase(wl, 1, r3).size() == 1);
    Rng r4(1);
    CHECK_THROWS_AS(gen_passphrase(wl, 0, r4), Error);
}

TEST_CASE("key_signature is deterministic, peak-normalized, kit-specific") {
    const auto a1 = key_signature('a', 42);
    const auto a2 = key_signature('a', 42);
    CHECK(a1 == a2);

    double peak = 0.0;
    for (double v : a1) peak = std::max(peak, std::abs(v));
    CHECK(peak == doctest::Approx(1.0));

    // 120 ms template at 44.1 kHz
    CHECK(a1.size() == ms_to_samples(kTemplateMs, 44100));

    const auto other_kit = key_signature('a', 43);
    CHECK(a1 != other_kit);
}

TEST_CASE("key signatures within one kit are mutually dissimilar") {
    const std::string keys = "abcdefghijklmnopqrstuvwxyz ";
    std::vector<std::vector<double>> sigs;
    // 16 kHz keeps the direct O(n^2) lag scan affordable
    for (char k : keys) sigs.push_back(key_signature(k, 7, 16000));
    double worst = 0.0;
    for (std::size_t i = 0; i < sigs.size(); ++i)
        for (std::size_t j = i + 1; j < sigs.size(); ++j)
            worst = std::max(worst, norm_xcorr_peak(sigs[i], sigs[j]));
    CHECK(worst < 0.5);
}

TEST_CASE("synth_recording lays out the known passphrase") {
    const auto& phrase = appendix_passphrases()[9];
    const auto s = synth_recording(phrase, 3, kInf, 250.0, KeyJitter{}, 17);
    CHECK(s.key_sequence == "taco ferret circle deliverer");
    CHECK(s.labels == s.key_sequence);
    CHECK(s.onsets.size() == 28);
    CHECK(std::is_sorted(s.onsets.begin(), s.onsets.end()));
    CHECK(s.recording.sample_rate == 44100);
    // audio long enough for the last keystroke plus its tail
    CHECK(s.recording.samples.size() >=
          s.onsets.back() + ms_to_samples(kTemplateMs, 44100));

    // alternate sample rate carries through
    const auto s16 = synth_recording(phrase, 3, kInf, 250.0, KeyJitter{}, 17, 16000);
    CHECK(s16.recording.sample_rate == 16000);
    CHECK(s16.onsets.size() == 28);
}

TEST_CASE("equal seeds share jitters across SNRs; measured SNR is honest") {
    const auto& phrase = appendix_passphrases()[2];
    const auto clean = synth_recording(phrase, 11, kInf, 250.0, KeyJitter{}, 5);

    for (double snr : {10.0, 20.0, 30.0}) {
        const auto noisy = synth_recording(phrase, 11, snr, 250.0, KeyJitter{}, 5);
        REQUIRE(noisy.onsets == clean.onsets);
        REQUIRE(noisy.recording.samples.size() == clean.recording.samples.size());

        // signal power over the keystroke windows (the generator's
        // definition), noise power from the sample-wise difference
        const std::size_t tmpl = ms_to_samples(kTemplateMs, 44100);
        double sig = 0.0;
        std::size_t nsig = 0;
        for (std::size_t onset : clean.onsets) {
            for (std::size_t j = 0; j < tmpl; ++j) sig += clean.recording.samples[onset + j] *
                                                          clean.recording.samples[onset + j];
            nsig += tmpl;
        }
        sig /= double(nsig);

        double noise = 0.0;
        for (std::size_t i = 0; i < clean.recording.samples.size(); ++i) {
            const double d = noisy.recording.samples[i] - clean.recording.samples[i];
            noise += d * d;
        }
        noise /= double(clean.recording.samples.size());

        const double measured = 10.0 * std::log10(sig / noise);
        CHECK(std::abs(measured - snr) <= 1.0); // within 1 dB
    }
}

TEST_CASE("rollover is rejected, jitter only attenuates") {
    const auto& phrase = appendix_passphrases()[0];
    CHECK_THROWS_AS(synth_recording(phrase, 1, kInf, 100.0, KeyJitter{}, 1), RolloverRequested);
    CHECK_THROWS_AS(synth_recording({}, 1, kInf, 250.0, KeyJitter{}, 1), Error);

    // amplitude jitter never amplifies: peak stays at or below 1
    KeyJitter heavy;
    heavy.amplitude = 0.5;
    const auto s = synth_recording(phrase, 1, kInf, 250.0, heavy, 9);
    double peak = 0.0;
    for (double v : s.recording.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 1.0 + 1e-12);
}

TEST_CASE("synthesis invariants hold across random draws") {
    const auto& wl = testsup::eff_wordlist();
    for (int i = 0; i < 40; ++i) {
        Rng rng(derive_seed(800, i));
        const auto phrase = gen_passphrase(wl, 1 + rng.next_below(4), rng);
        const double snr = (i % 3 == 0) ? kInf : 15.0 + double(i % 20);
        const auto s = synth_recording(phrase, derive_seed(900, i), snr, 250.0, KeyJitter{},
                                       derive_seed(1000, i));
        REQUIRE(s.onsets.size() == s.key_sequence.size());
        REQUIRE(s.labels.size() == s.onsets.size());
        CHECK(std::is_sorted(s.onsets.begin(), s.onsets.end()));
        const std::size_t tmpl = ms_to_samples(kTemplateMs, 44100);
        for (std::size_t k = 1; k < s.onsets.size(); ++k)
            CHECK(s.onsets[k] - s.onsets[k - 1] >= tmpl); // no overlap ever
        CHECK(s.recording.samples.size() >= s.onsets.back() + tmpl);
        for (double v : s.recording.samples) {
            CHECK(v <= 1.0);
            CHECK(v >= -1.0);
        }
    }
}

TEST_CASE("corrupt_clustering") {
    Clustering c;
    c.k = 27;
    c.labels.assign(2000, 0);
    for (std::size_t i = 0; i < c.labels.size(); ++i) c.labels[i] = int(i % 27);

    Rng r0(1);
    const auto same = corrupt_clustering(c, 0.0, r0);
    CHECK(same.labels == c.labels);

    Rng r1(2);
    Clustering binary;
    binary.k = 2;
    binary.labels = {0, 1, 0, 1, 1, 0};
    const auto flipped = corrupt_clustering(binary, 1.0, r1);
    for (std::size_t i = 0; i < binary.labels.size(); ++i)
        CHECK(flipped.labels[i] == 1 - binary.labels[i]);

    Rng r2(3);
    const auto five = corrupt_clustering(c, 0.05, r2);
    int flips = 0;
    for (std::size_t i = 0; i < c.labels.size(); ++i) {
        if (five.labels[i] != c.labels[i]) ++flips;
        CHECK(five.labels[i] >= 0);
        CHECK(five.labels[i] < 27);
    }
    // binomial(2000, 0.05): mean 100, sigma ~9.7; 3 sigma band
    CHECK(flips > 70);
    CHECK(flips < 130);

    Rng r3(4);
    CHECK_THROWS_AS(corrupt_clustering(c, 1.5, r3), Error);
}

TEST_CASE("key ids and truth clusterings") {
    CHECK(key_to_id('a') == 0);
    CHECK(key_to_id('z') == 25);
    CHECK(key_to_id(' ') == 26);
    for (int id = 0; id < 27; ++id) CHECK(key_to_id(id_to_key(id)) == id);
    CHECK_THROWS_AS(key_to_id('7'), Error);
    CHECK_THROWS_AS(id_to_key(27), Error);

    const auto c = truth_clustering("abc ab");
    CHECK(c.k == 27);
    CHECK(c.labels == std::vector<int>{0, 1, 2, 26, 0, 1});

    CHECK_THROWS_AS(truth_clustering(""), Error);
    CHECK_THROWS_AS(truth_clustering("abc", 2), Error); // k too small for 'c'
}

TEST_CASE("appendix passphrases: 30 entries of real dictionary words") {
    const auto& list = appendix_passphrases();
    REQUIRE(list.size() == 30);
    CHECK(list[9] == std::vector<std::string>{"taco", "ferret", "circle", "deliverer"});

    const auto& wl = testsup::eff_wordlist();
    std::size_t shortest = 99, longest = 0;
    for (const auto& phrase : list) {
        shortest = std::min(shortest, phrase.size());
        longest = std::max(longest, phrase.size());
        for (const auto& w : phrase)
            CHECK(std::binary_search(wl.words.begin(), wl.words.end(), w));
    }
    CHECK(shortest == 3);
    CHECK(longest == 8);
}

TEST_CASE("truth files round trip, including infinite SNR") {
    testsup::TempDir tmp;
    const auto s = synth_recording(appendix_passphrases()[4], 55, kInf, 250.0, KeyJitter{}, 66);
    save_truth(tmp.file("t.json"), s);
    const auto back = load_truth(tmp.file("t.json"));
    CHECK(back.passphrase == s.passphrase);
    CHECK(back.key_sequence == s.key_sequence);
    CHECK(back.onsets == s.onsets);
    CHECK(back.labels == s.labels);
    CHECK(back.seed == 66);
    CHECK(back.kit_seed == 55);
    CHECK(std::isinf(back.snr_db));
    CHECK(back.recording.samples.empty()); // audio stays in the wav

    const auto noisy = synth_recording(appendix_passphrases()[4], 55, 25.0, 250.0, KeyJitter{}, 66);
    save_truth(tmp.file("n.json"), noisy);
    CHECK(load_truth(tmp.file("n.json")).snr_db == doctest::Approx(25.0));
}

TEST_CASE("noiseless calibration: xcorr features cluster perfectly") {
    // With no amplitude jitter, repeats of a key produce bit-identical
    // press windows, cross-correlation ties them at exactly 1, and
    // k-means collapses onto the distinct-key partition even at k = 27.
    const auto& wl = testsup::eff_wordlist();
    KeyJitter quiet;
    quiet.amplitude = 0.0;

    for (int i = 0; i < 100; ++i) {
        Rng rng(derive_seed(2100, i));
        const auto phrase = gen_passphrase(wl, 2 + rng.next_below(5), rng);
        const auto s = synth_recording(phrase, derive_seed(2200, i), kInf, 250.0, quiet,
                                       derive_seed(2300, i));

        const auto segs = extract_spans(s.recording, s.onsets, Span::P, 30.0, 90.0);
        const auto sim = xcorr_similarity(raw_matrix(segs));
        const int k = int(std::min<std::size_t>(kDefaultK, sim.rows.size()));
        const auto c = kmeans(sim, k, derive_seed(2400, i));
        CHECK(score_clustering(c, s.labels) == 100.0);
    }
}
