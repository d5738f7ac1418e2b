#pragma once

#include "keyclink/features.hpp"
#include "keyclink/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace keyclink {

// Cluster labels per keystroke — the ciphertext the demodulator attacks.
struct Clustering {
    std::vector<int> labels;
    int k = 0;
    double inertia = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> inertia_history; // inertia after each Lloyd pass
};

struct ScoreSummary {
    double median = 0.0;
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
};

struct KTooLarge : Error {
    KTooLarge(int k, std::size_t rows)
        : Error("k = " + std::to_string(k) + " exceeds row count " + std::to_string(rows)) {}
};
struct LengthMismatch : Error {
    LengthMismatch(std::size_t a, std::size_t b)
        : Error("label/truth length mismatch: " + std::to_string(a) + " vs " +
                std::to_string(b)) {}
};

inline constexpr int kDefaultK = 27; // 26 letters + space

Clustering kmeans(const FeatureMatrix& features, int k, std::uint64_t seed, int max_iters = 300);

std::vector<Clustering> cluster_sets(const FeatureMatrix& features, int k, int count,
                                     std::uint64_t base_seed, int max_iters = 300);

// Best accuracy over injective cluster-id -> key assignments, percent.
double score_clustering(const Clustering& c, const std::vector<int>& truth);
double score_clustering(const Clustering& c, const std::string& truth_keys);

ScoreSummary summarize_scores(std::vector<double> scores);

// Maximum-total assignment on a contingency/weight table (rows need not
// equal columns; unmatched rows score 0). Returns the best total.
double max_assignment(const std::vector<std::vector<double>>& weights);

void save_clustering(const std::string& path, const Clustering& c);
void save_cluster_sets(const std::string& path, const std::vector<Clustering>& cs);
std::vector<Clustering> load_clusterings(const std::string& path);

} // namespace keyclink
