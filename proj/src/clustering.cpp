#include "keyclink/clustering.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace keyclink {

static double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

Clustering kmeans(const FeatureMatrix& features, int k, std::uint64_t seed, int max_iters) {
    const std::size_t n = features.rows.size();
    if (k < 1) throw Error("k must be >= 1");
    if (static_cast<std::size_t>(k) > n) throw KTooLarge(k, n);

    Rng rng(seed);
    const auto& x = features.rows;

    // k-means++ seeding
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    centroids.push_back(x[rng.next_below(n)]);
    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = sq_dist(x[i], centroids[0]);
            for (std::size_t j = 1; j < centroids.size(); ++j)
                best = std::min(best, sq_dist(x[i], centroids[j]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.next_below(n);
        } else {
            const double target = rng.next_double() * total;
            double run = 0.0;
            pick = n; // sentinel
            std::size_t last_positive = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                last_positive = i;
                run += d2[i];
                if (run > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = last_positive; // rounding fell off the end
        }
        centroids.push_back(x[pick]);
    }

    Clustering out;
    out.k = k;
    out.seed = seed;
    out.labels.assign(n, 0);

    std::vector<int> prev_labels(n, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        // assignment
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(x[i], centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(x[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            out.labels[i] = best;
            inertia += best_d;
        }

        // empty-cluster repair: move the empty centroid onto the point
        // farthest from its assigned centroid (never increases inertia).
        // Zero-distance points are left alone — moving one cannot lower
        // inertia and would only split a group of identical points.
        std::vector<std::size_t> counts(k, 0);
        for (int l : out.labels) counts[l]++;
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far_i = 0;
            double far_d = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[out.labels[i]] <= 1) continue; // don't orphan another cluster
                const double d = sq_dist(x[i], centroids[out.labels[i]]);
                if (d > far_d) {
                    far_d = d;
                    far_i = i;
                }
            }
            if (far_d <= 0.0) continue; // nothing movable
            counts[out.labels[far_i]]--;
            inertia -= far_d;
            out.labels[far_i] = c;
            counts[c] = 1;
            centroids[c] = x[far_i];
        }

        out.inertia = inertia;
        out.inertia_history.push_back(inertia);
        if (out.labels == prev_labels) break;
        prev_labels = out.labels;

        // update; a cluster of identical points keeps the point itself as
        // its centroid (the computed mean can drift by an ulp, which
        // makes assignments flap between duplicate centroids)
        std::vector<std::vector<double>> sums(k, std::vector<double>(features.dim, 0.0));
        std::vector<std::ptrdiff_t> first_member(k, -1);
        std::vector<char> all_same(k, 1);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = out.labels[i];
            counts[c]++;
            if (first_member[c] < 0)
                first_member[c] = static_cast<std::ptrdiff_t>(i);
            else if (all_same[c] && x[i] != x[static_cast<std::size_t>(first_member[c])])
                all_same[c] = 0;
            for (std::size_t d = 0; d < features.dim; ++d) sums[c][d] += x[i][d];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            if (all_same[c]) {
                centroids[c] = x[static_cast<std::size_t>(first_member[c])];
                continue;
            }
            for (std::size_t d = 0; d < features.dim; ++d)
                centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }
    return out;
}

std::vector<Clustering> cluster_sets(const FeatureMatrix& features, int k, int count,
                                     std::uint64_t base_seed, int max_iters) {
    if (count < 1) throw Error("cluster set count must be >= 1");
    std::vector<Clustering> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back(kmeans(features, k, base_seed + static_cast<std::uint64_t>(i), max_iters));
    return out;
}

// Jonker-Volgenant style shortest augmenting path assignment, O(n^3).
// Maximizes by negating weights; rectangular input is zero-padded.
double max_assignment(const std::vector<std::vector<double>>& weights) {
    const std::size_t nr = weights.size();
    if (nr == 0) return 0.0;
    std::size_t nc = 0;
    for (const auto& r : weights) nc = std::max(nc, r.size());
    const std::size_t n = std::max(nr, nc);

    auto cost = [&](std::size_t r, std::size_t c) -> double {
        if (r < nr && c < weights[r].size()) return -weights[r][c];
        return 0.0;
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, n), way(n + 1, n);
    for (std::size_t i = 0; i < n; ++i) {
        p[n] = i;
        std::size_t j0 = n;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = n;
            for (std::size_t j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != n);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != n);
    }

    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        if (p[j] < nr && j < nc) total += weights[p[j]].size() > j ? weights[p[j]][j] : 0.0;
    return total;
}

double score_clustering(const Clustering& c, const std::vector<int>& truth) {
    if (truth.size() != c.labels.size()) throw LengthMismatch(c.labels.size(), truth.size());
    if (truth.empty()) throw Error("empty clustering");

    // contingency table: cluster id x truth key
    std::map<int, std::size_t> key_index;
    for (int t : truth) key_index.emplace(t, key_index.size());
    std::vector<std::vector<double>> table(c.k, std::vector<double>(key_index.size(), 0.0));
    for (std::size_t i = 0; i < truth.size(); ++i)
        table[c.labels[i]][key_index[truth[i]]] += 1.0;

    return 100.0 * max_assignment(table) / static_cast<double>(truth.size());
}

double score_clustering(const Clustering& c, const std::string& truth_keys) {
    std::vector<int> truth(truth_keys.begin(), truth_keys.end());
    return score_clustering(c, truth);
}

ScoreSummary summarize_scores(std::vector<double> scores) {
    if (scores.empty()) throw Error("no scores to summarize");
    ScoreSummary s;
    double total = 0.0;
    for (double v : scores) total += v;
    s.mean = total / static_cast<double>(scores.size());
    std::sort(scores.begin(), scores.end());
    s.min = scores.front();
    s.max = scores.back();
    const std::size_t n = scores.size();
    s.median = n % 2 == 1 ? scores[n / 2] : 0.5 * (scores[n / 2 - 1] + scores[n / 2]);
    return s;
}

static nlohmann::json clustering_to_json(const Clustering& c) {
    return nlohmann::json{{"k", c.k}, {"seed", c.seed}, {"labels", c.labels}, {"inertia", c.inertia}};
}

static Clustering clustering_from_json(const nlohmann::json& j) {
    Clustering c;
    c.k = j.at("k").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.labels = j.at("labels").get<std::vector<int>>();
    c.inertia = j.at("inertia").get<double>();
    for (int l : c.labels)
        if (l < 0 || l >= c.k) throw Error("label out of range");
    return c;
}

void save_clustering(const std::string& path, const Clustering& c) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << clustering_to_json(c).dump(2) << "\n";
}

void save_cluster_sets(const std::string& path, const std::vector<Clustering>& cs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cs) arr.push_back(clustering_to_json(c));
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << arr.dump(2) << "\n";
}

std::vector<Clustering> load_clusterings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    std::vector<Clustering> out;
    try {
        if (j.is_array()) {
            for (const auto& e : j) out.push_back(clustering_from_json(e));
        } else {
            out.push_back(clustering_from_json(j));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    if (out.empty()) throw Error(path + ": no clusterings");
    return out;
}

} // namespace keyclink
