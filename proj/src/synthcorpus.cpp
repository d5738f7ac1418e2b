#include "keyclink/synthcorpus.hpp"

#include "keyclink/segmentation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace keyclink {

std::vector<std::string> gen_passphrase(const Wordlist& wl, std::size_t n_words, Rng& rng) {
    if (n_words < 1) throw Error("passphrase needs at least one word");
    std::vector<std::string> out;
    out.reserve(n_words);
    for (std::size_t i = 0; i < n_words; ++i) out.push_back(wl.words[rng.next_below(wl.words.size())]);
    return out;
}

int key_to_id(char key) {
    if (key >= 'a' && key <= 'z') return key - 'a';
    if (key == ' ') return 26;
    throw Error(std::string("unsupported key: '") + key + "'");
}

char id_to_key(int id) {
    if (id >= 0 && id < 26) return static_cast<char>('a' + id);
    if (id == 26) return ' ';
    throw Error("id " + std::to_string(id) + " has no key");
}

Clustering truth_clustering(const std::string& key_sequence, int k) {
    Clustering c;
    c.k = k;
    for (char ch : key_sequence) {
        const int id = key_to_id(ch);
        if (id >= k) throw Error("k too small for key sequence");
        c.labels.push_back(id);
    }
    if (c.labels.empty()) throw Error("empty key sequence");
    return c;
}

std::vector<double> key_signature(char key, std::uint64_t kit_seed, int sample_rate) {
    const int key_index = key_to_id(key);
    Rng rng(derive_seed(kit_seed, static_cast<std::uint64_t>(key_index)));

    // One frequency slot per key keeps fundamentals well separated; the
    // rest of the timbre is randomized per kit.
    constexpr double kLoHz = 400.0, kHiHz = 8000.0, kKeys = 27.0;
    const double slot = (kHiHz - kLoHz) / kKeys;
    const double fundamental = kLoHz + slot * (key_index + 0.2 + 0.6 * rng.next_double());

    const int n_partials = 2 + static_cast<int>(rng.next_below(3)); // 2..4
    std::vector<double> freqs, amps, phases;
    freqs.push_back(fundamental);
    amps.push_back(1.0);
    phases.push_back(2.0 * std::numbers::pi * rng.next_double());
    for (int p = 1; p < n_partials; ++p) {
        double f = fundamental * (1.9 + 0.9 * p + 0.4 * rng.next_double());
        while (f > kHiHz) f *= 0.5;
        freqs.push_back(f);
        amps.push_back(0.2 + 0.15 * rng.next_double());
        phases.push_back(2.0 * std::numbers::pi * rng.next_double());
    }
    const double tau_s = (4.0 + 4.0 * rng.next_double()) / 1000.0;
    const double release_gain = 0.5 + 0.2 * rng.next_double();
    std::vector<double> release_phases;
    for (int p = 0; p < n_partials; ++p)
        release_phases.push_back(2.0 * std::numbers::pi * rng.next_double());

    const std::size_t total = ms_to_samples(kTemplateMs, sample_rate);
    const std::size_t press_len = ms_to_samples(kPressMs, sample_rate);
    const std::size_t release_at = ms_to_samples(kReleaseDelayMs, sample_rate);
    const std::size_t release_len = ms_to_samples(kReleaseMs, sample_rate);
    std::vector<double> wave(total, 0.0);
    for (std::size_t i = 0; i < press_len; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        double v = 0.0;
        for (int p = 0; p < n_partials; ++p)
            v += amps[p] * std::sin(2.0 * std::numbers::pi * freqs[p] * t + phases[p]);
        wave[i] = v * std::exp(-t / tau_s);
    }
    for (std::size_t i = 0; i < release_len && release_at + i < total; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        double v = 0.0;
        for (int p = 0; p < n_partials; ++p)
            v += amps[p] * std::sin(2.0 * std::numbers::pi * freqs[p] * 1.03 * t +
                                    release_phases[p]);
        wave[release_at + i] += release_gain * v * std::exp(-t / (tau_s * 0.8));
    }

    double peak = 0.0;
    for (double v : wave) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
        for (double& v : wave) v /= peak;
    return wave;
}

SyntheticSample synth_recording(const std::vector<std::string>& passphrase,
                                std::uint64_t kit_seed, double snr_db, double inter_key_ms,
                                const KeyJitter& jitter, std::uint64_t seed, int sample_rate) {
    if (passphrase.empty()) throw Error("empty passphrase");
    if (inter_key_ms <= kTemplateMs) throw RolloverRequested(inter_key_ms, kTemplateMs);

    SyntheticSample s;
    s.passphrase = passphrase;
    s.seed = seed;
    s.kit_seed = kit_seed;
    s.snr_db = snr_db;
    for (std::size_t i = 0; i < passphrase.size(); ++i) {
        if (i > 0) s.key_sequence.push_back(' ');
        s.key_sequence += passphrase[i];
    }
    s.labels = s.key_sequence;

    Rng rng(seed);
    const std::size_t n_keys = s.key_sequence.size();
    // Draw order is frozen: per-key (timing, gain) pairs first, then
    // noise samples, so different SNRs share identical jitters.
    std::vector<double> t_jit(n_keys), gains(n_keys);
    for (std::size_t i = 0; i < n_keys; ++i) {
        t_jit[i] = rng.next_range(-jitter.timing_ms, jitter.timing_ms);
        gains[i] = 1.0 - jitter.amplitude * rng.next_double();
    }

    const std::size_t template_len = ms_to_samples(kTemplateMs, sample_rate);
    constexpr double kLeadMs = 100.0, kTailMs = 150.0;
    std::vector<std::size_t> onsets(n_keys);
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < n_keys; ++i) {
        const double at_ms = kLeadMs + inter_key_ms * static_cast<double>(i) + t_jit[i];
        std::size_t at = ms_to_samples(std::max(at_ms, 0.0), sample_rate);
        at = std::max(at, prev_end); // jitter never creates rollover
        onsets[i] = at;
        prev_end = at + template_len;
    }
    s.onsets = onsets;

    AudioRecording rec;
    rec.sample_rate = sample_rate;
    rec.source_id = "synth:" + s.key_sequence;
    rec.samples.assign(prev_end + ms_to_samples(kTailMs, sample_rate), 0.0);
    std::vector<std::vector<double>> kit(27);
    for (std::size_t i = 0; i < n_keys; ++i) {
        const int id = key_to_id(s.key_sequence[i]);
        if (kit[id].empty()) kit[id] = key_signature(s.key_sequence[i], kit_seed, sample_rate);
        for (std::size_t j = 0; j < kit[id].size(); ++j)
            rec.samples[onsets[i] + j] += gains[i] * kit[id][j];
    }

    if (std::isfinite(snr_db)) {
        double power = 0.0;
        std::size_t window_samples = 0;
        for (std::size_t i = 0; i < n_keys; ++i) {
            for (std::size_t j = 0; j < template_len; ++j) {
                const double v = rec.samples[onsets[i] + j];
                power += v * v;
            }
            window_samples += template_len;
        }
        power /= static_cast<double>(window_samples);
        const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
        for (double& v : rec.samples) v += sigma * rng.next_gauss();
        for (double& v : rec.samples) v = std::clamp(v, -1.0, 1.0);
    }
    s.recording = std::move(rec);
    return s;
}

Clustering corrupt_clustering(const Clustering& c, double error_rate, Rng& rng) {
    if (error_rate < 0.0 || error_rate > 1.0) throw Error("error rate outside [0, 1]");
    Clustering out = c;
    if (c.k < 2) return out; // no different id to flip to
    for (int& label : out.labels) {
        if (rng.next_double() < error_rate) {
            const int offset = 1 + static_cast<int>(rng.next_below(c.k - 1));
            label = (label + offset) % c.k;
        }
    }
    return out;
}

const std::vector<std::vector<std::string>>& appendix_passphrases() {
    static const std::vector<std::vector<std::string>> list = [] {
        const char* raw[30] = {
            "peroxide hacking arena",
            "goldfish augmented yoyo",
            "nugget iguana nylon",
            "finalist caviar cufflink",
            "ipad decal uptown",
            "lukewarm pedometer litter wreckage",
            "juggle gibberish hacking luxurious",
            "unmarked vaseline aluminum jasmine",
            "poison amendment sizable angelfish",
            "taco ferret circle deliverer",
            "velcro jelly duplex magazine silicon",
            "hefty frosting acid zookeeper patio",
            "daughter pyramid onyx pogo palm",
            "cahoots arena cement statue mutation",
            "blade banana awhile elsewhere tadpole",
            "oxygen remote diffuser engine lettuce acid",
            "oncoming feline glucose sushi abdomen judiciary",
            "nullify scarf deepness modify euphemism grumbling",
            "apple unnoticed bullfrog datebook vicinity glove",
            "unhinge zodiac movie tadpole tapestry waffle",
            "habitat gullible jingling mule envoy device erratic",
            "licorice breath thumb navigate saddlebag yahoo voucher",
            "festival yearbook fountain underwear nastiness dedicate licorice",
            "scooter urchin albatross sneezing itunes gumdrop cubical",
            "bagpipe earlobe aerosol aliens ivory clubhouse pantyhose",
            "couch crawfish mundane goggles rupture florist rancidity degree",
            "hefty tree riverboat sculpture junkyard awhile isotope unveiled",
            "sled dyslexia jelly clergyman fruit family blade rancidity",
            "payphone rupture awoke virus tuesday upbeat knapsack amnesty",
            "afloat ardently fox emission exquisite dagger jersey lubricant",
        };
        std::vector<std::vector<std::string>> out;
        for (const char* line : raw) {
            std::istringstream ss(line);
            std::vector<std::string> words;
            std::string w;
            while (ss >> w) words.push_back(w);
            out.push_back(std::move(words));
        }
        return out;
    }();
    return list;
}

void save_truth(const std::string& path, const SyntheticSample& s) {
    nlohmann::json j;
    j["passphrase"] = s.passphrase;
    j["key_sequence"] = s.key_sequence;
    j["onsets"] = s.onsets;
    j["labels"] = s.labels;
    j["seed"] = s.seed;
    j["kit_seed"] = s.kit_seed;
    j["snr_db"] = std::isfinite(s.snr_db) ? nlohmann::json(s.snr_db) : nlohmann::json("inf");
    j["sample_rate"] = s.recording.sample_rate;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

SyntheticSample load_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    SyntheticSample s;
    try {
        s.passphrase = j.at("passphrase").get<std::vector<std::string>>();
        s.key_sequence = j.at("key_sequence").get<std::string>();
        s.onsets = j.at("onsets").get<std::vector<std::size_t>>();
        s.labels = j.at("labels").get<std::string>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.kit_seed = j.at("kit_seed").get<std::uint64_t>();
        s.snr_db = j.at("snr_db").is_string() ? std::numeric_limits<double>::infinity()
                                              : j.at("snr_db").get<double>();
        s.recording.sample_rate = j.at("sample_rate").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    if (s.key_sequence.size() != s.onsets.size() || s.labels.size() != s.onsets.size())
        throw Error(path + ": inconsistent truth file");
    return s;
}

} // namespace keyclink
