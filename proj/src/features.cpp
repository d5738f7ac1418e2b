#include "keyclink/features.hpp"

#include "keyclink/dsp.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace keyclink {

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::RAW: return "RAW";
        case Provenance::FFT: return "FFT";
        case Provenance::MFCC: return "MFCC";
        case Provenance::FFT_MFCC: return "FFT_MFCC";
        case Provenance::XCORR: return "XCORR";
    }
    throw Error("bad provenance");
}

Provenance provenance_from_name(const std::string& name) {
    std::string up = name;
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) {
        return c == '+' ? '_' : std::toupper(c);
    });
    if (up == "RAW") return Provenance::RAW;
    if (up == "FFT") return Provenance::FFT;
    if (up == "MFCC") return Provenance::MFCC;
    if (up == "FFT_MFCC") return Provenance::FFT_MFCC;
    if (up == "XCORR") return Provenance::XCORR;
    throw Error("unknown provenance: " + name);
}

KeystrokeSegment smooth(const KeystrokeSegment& segment, std::size_t window) {
    const std::size_t n = segment.samples.size();
    if (window < 1 || window > n) throw WindowTooLarge(window, n);
    if (window == 1) return segment;
    KeystrokeSegment out = segment;
    const std::size_t left = (window - 1) / 2;
    const double inv = 1.0 / static_cast<double>(window);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < window; ++j) {
            const std::ptrdiff_t idx =
                static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(left) +
                static_cast<std::ptrdiff_t>(j);
            if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n))
                acc += segment.samples[static_cast<std::size_t>(idx)];
        }
        out.samples[i] = acc * inv;
    }
    return out;
}

std::vector<double> fft_feature(const KeystrokeSegment& segment) {
    return fft_magnitude(segment.samples);
}

// Mel scale per O'Shaughnessy: m = 2595 log10(1 + f/700).
static double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
static double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mfcc_feature(const KeystrokeSegment& segment, const MfccParams& params) {
    if (segment.sample_rate <= 0) throw SegmentTooShort("segment carries no sample rate");
    if (params.n_coeffs < 1 || params.n_coeffs > params.n_mels)
        throw Error("n_coeffs must be in [1, n_mels]");
    const std::size_t frame_len = ms_to_samples(params.frame_ms, segment.sample_rate);
    const std::size_t hop = ms_to_samples(params.hop_ms, segment.sample_rate);
    const std::size_t n = segment.samples.size();
    if (frame_len == 0 || hop == 0 || n < frame_len)
        throw SegmentTooShort("frame does not fit in segment");
    const std::size_t frame_count = (n - frame_len) / hop + 1;

    std::vector<double> emphasized(n);
    emphasized[0] = segment.samples[0];
    for (std::size_t i = 1; i < n; ++i)
        emphasized[i] = segment.samples[i] - params.pre_emphasis * segment.samples[i - 1];

    const std::size_t nfft = next_pow2(frame_len);
    const std::size_t n_bins = nfft / 2 + 1;
    const auto window = hann_window(frame_len);

    // Triangular mel filterbank, 0 Hz .. Nyquist.
    const double nyquist = segment.sample_rate / 2.0;
    std::vector<double> mel_pts(params.n_mels + 2);
    for (std::size_t i = 0; i < mel_pts.size(); ++i)
        mel_pts[i] = mel_to_hz(hz_to_mel(nyquist) * static_cast<double>(i) /
                               static_cast<double>(params.n_mels + 1));
    auto hz_to_bin = [&](double hz) { return hz * static_cast<double>(nfft) / segment.sample_rate; };

    std::vector<double> out;
    out.reserve(params.n_coeffs * frame_count);
    std::vector<double> frame(frame_len);
    std::vector<double> mel_energy(params.n_mels);
    for (std::size_t f = 0; f < frame_count; ++f) {
        for (std::size_t i = 0; i < frame_len; ++i)
            frame[i] = emphasized[f * hop + i] * window[i];
        auto spec = fft_real(frame);
        std::vector<double> power(n_bins);
        for (std::size_t b = 0; b < n_bins; ++b) power[b] = std::norm(spec[b]);

        for (std::size_t m = 0; m < params.n_mels; ++m) {
            const double lo = hz_to_bin(mel_pts[m]);
            const double mid = hz_to_bin(mel_pts[m + 1]);
            const double hi = hz_to_bin(mel_pts[m + 2]);
            double acc = 0.0;
            const std::size_t b0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo)));
            const std::size_t b1 =
                std::min(n_bins - 1, static_cast<std::size_t>(std::floor(hi)));
            for (std::size_t b = b0; b <= b1 && b < n_bins; ++b) {
                const double x = static_cast<double>(b);
                double w = 0.0;
                if (x <= mid && mid > lo)
                    w = (x - lo) / (mid - lo);
                else if (x > mid && hi > mid)
                    w = (hi - x) / (hi - mid);
                if (w > 0.0) acc += w * power[b];
            }
            mel_energy[m] = std::log(std::max(acc, params.log_floor));
        }
        auto ceps = dct2(mel_energy, params.n_coeffs);
        out.insert(out.end(), ceps.begin(), ceps.end());
    }
    return out;
}

static FeatureMatrix from_rows(std::vector<std::vector<double>> rows, Provenance p) {
    FeatureMatrix m;
    m.provenance = p;
    m.dim = rows.empty() ? 0 : rows.front().size();
    for (const auto& r : rows)
        if (r.size() != m.dim) throw Error("ragged feature rows");
    m.rows = std::move(rows);
    return m;
}

FeatureMatrix raw_matrix(const std::vector<KeystrokeSegment>& segments) {
    std::vector<std::vector<double>> rows;
    rows.reserve(segments.size());
    for (const auto& s : segments) rows.push_back(s.samples);
    return from_rows(std::move(rows), Provenance::RAW);
}

FeatureMatrix fft_matrix(const std::vector<KeystrokeSegment>& segments) {
    std::vector<std::vector<double>> rows;
    rows.reserve(segments.size());
    for (const auto& s : segments) rows.push_back(fft_feature(s));
    return from_rows(std::move(rows), Provenance::FFT);
}

FeatureMatrix mfcc_matrix(const std::vector<KeystrokeSegment>& segments,
                          const MfccParams& params) {
    std::vector<std::vector<double>> rows;
    rows.reserve(segments.size());
    for (const auto& s : segments) rows.push_back(mfcc_feature(s, params));
    return from_rows(std::move(rows), Provenance::MFCC);
}

FeatureMatrix concat_features(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (b.rows.empty() && b.dim == 0) return a;
    if (a.rows.empty() && a.dim == 0) return b;
    if (a.rows.size() != b.rows.size()) throw RowMismatch(a.rows.size(), b.rows.size());
    FeatureMatrix out;
    out.provenance = Provenance::FFT_MFCC;
    out.dim = a.dim + b.dim;
    out.smoothing_window = a.smoothing_window;
    out.degenerate_rows = a.degenerate_rows || b.degenerate_rows;
    out.rows.reserve(a.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        std::vector<double> row = a.rows[i];
        row.insert(row.end(), b.rows[i].begin(), b.rows[i].end());
        out.rows.push_back(std::move(row));
    }
    return out;
}

FeatureMatrix xcorr_similarity(const FeatureMatrix& m) {
    const std::size_t n = m.rows.size();
    if (n < 2) throw Error("xcorr needs at least 2 rows");
    const std::size_t len = m.dim;
    if (len == 0) throw Error("xcorr over zero-length rows");

    // Zero-mean, unit-norm rows; remember degenerate (constant) ones.
    std::vector<std::vector<double>> norm_rows(n);
    std::vector<bool> degenerate(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = m.rows[i];
        double mean = 0.0;
        for (double v : r) mean += v;
        mean /= static_cast<double>(len);
        double ss = 0.0;
        norm_rows[i].resize(len);
        for (std::size_t t = 0; t < len; ++t) {
            norm_rows[i][t] = r[t] - mean;
            ss += norm_rows[i][t] * norm_rows[i][t];
        }
        if (ss <= 1e-24) {
            degenerate[i] = true;
            continue;
        }
        const double inv = 1.0 / std::sqrt(ss);
        for (double& v : norm_rows[i]) v *= inv;
    }

    // Identical input rows must produce identical feature rows (and a
    // pairwise correlation of exactly 1), so correlations are computed
    // once per class of bit-identical rows.
    std::vector<std::size_t> rep(n);
    for (std::size_t i = 0; i < n; ++i) {
        rep[i] = i;
        for (std::size_t j = 0; j < i; ++j) {
            if (rep[j] == j && m.rows[j] == m.rows[i]) {
                rep[i] = j;
                break;
            }
        }
    }

    // Correlation at every lag via one FFT per representative row.
    const std::size_t nfft = next_pow2(2 * len - 1);
    std::vector<std::vector<std::complex<double>>> specs(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (degenerate[i] || rep[i] != i) continue;
        specs[i].assign(nfft, {0.0, 0.0});
        for (std::size_t t = 0; t < len; ++t) specs[i][t] = norm_rows[i][t];
        fft_inplace(specs[i]);
    }

    FeatureMatrix out;
    out.provenance = Provenance::XCORR;
    out.dim = n;
    out.smoothing_window = m.smoothing_window;
    out.rows.assign(n, std::vector<double>(n, 0.0));
    std::vector<std::complex<double>> prod(nfft);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ri = rep[i];
        for (std::size_t j = i; j < n; ++j) {
            const std::size_t rj = rep[j];
            double best;
            if (degenerate[ri] || degenerate[rj]) {
                best = 0.0; // a constant row correlates with nothing
            } else if (ri == rj) {
                best = 1.0;
            } else if (std::min(ri, rj) != i || std::max(ri, rj) != j) {
                // the representative pair precedes every member pair
                best = out.rows[std::min(ri, rj)][std::max(ri, rj)];
            } else {
                for (std::size_t t = 0; t < nfft; ++t)
                    prod[t] = std::conj(specs[ri][t]) * specs[rj][t];
                fft_inplace(prod, true);
                // prod[tau] = sum_t u[t] v[t + tau]; valid lags are
                // 0..len-1 and nfft-len+1..nfft-1 (negative side).
                best = prod[0].real();
                for (std::size_t t = 1; t < len; ++t) best = std::max(best, prod[t].real());
                for (std::size_t t = nfft - len + 1; t < nfft; ++t)
                    best = std::max(best, prod[t].real());
                best = std::clamp(best, -1.0, 1.0);
            }
            out.rows[i][j] = best;
            out.rows[j][i] = best;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (degenerate[i]) out.degenerate_rows = true;
    out.degenerate_rows = out.degenerate_rows || m.degenerate_rows;
    return out;
}

FeatureMatrix standardize(const FeatureMatrix& m) {
    const std::size_t n = m.rows.size();
    if (n < 2) throw Error("standardize needs at least 2 rows");
    FeatureMatrix out = m;
    out.scaled = true;
    for (std::size_t c = 0; c < m.dim; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += m.rows[r][c];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double d = m.rows[r][c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        if (var <= 0.0) {
            for (std::size_t r = 0; r < n; ++r) out.rows[r][c] = 0.0;
        } else {
            const double inv = 1.0 / std::sqrt(var);
            for (std::size_t r = 0; r < n; ++r) out.rows[r][c] = (m.rows[r][c] - mean) * inv;
        }
    }
    return out;
}

FeatureMatrix pca_reduce(const FeatureMatrix& m, std::size_t d) {
    const std::size_t n = m.rows.size();
    const std::size_t dim = m.dim;
    if (n < 2) throw Error("pca needs at least 2 rows");
    const std::size_t limit = std::min(n - 1, dim);
    if (d < 1 || d > limit) throw TooManyComponents(d, limit);

    Eigen::MatrixXd x(n, dim);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c) x(r, c) = m.rows[r][c];
    x.rowwise() -= x.colwise().mean();

    // Principal directions as columns of V (dim x d), eigenvalue-descending.
    Eigen::MatrixXd v(dim, d);
    if (dim <= n) {
        Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        if (es.info() != Eigen::Success) throw Error("pca eigendecomposition failed");
        for (std::size_t c = 0; c < d; ++c) v.col(c) = es.eigenvectors().col(dim - 1 - c);
    } else {
        // Rows are few and wide: eigenvectors of the Gram matrix give the
        // same top components at n x n cost.
        Eigen::MatrixXd gram = x * x.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.info() != Eigen::Success) throw Error("pca eigendecomposition failed");
        for (std::size_t c = 0; c < d; ++c) {
            const double lambda = es.eigenvalues()(n - 1 - c);
            if (lambda <= 1e-12 * std::max(1.0, es.eigenvalues()(n - 1))) {
                v.col(c).setZero();
            } else {
                v.col(c) = x.transpose() * es.eigenvectors().col(n - 1 - c) / std::sqrt(lambda);
            }
        }
    }

    for (std::size_t c = 0; c < d; ++c) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t r = 0; r < dim; ++r) {
            const double a = std::abs(v(r, c));
            if (a > best) {
                best = a;
                arg = r;
            }
        }
        if (v(arg, c) < 0.0) v.col(c) = -v.col(c);
    }

    Eigen::MatrixXd proj = x * v;
    FeatureMatrix out;
    out.provenance = m.provenance;
    out.smoothing_window = m.smoothing_window;
    out.scaled = m.scaled;
    out.degenerate_rows = m.degenerate_rows;
    out.pca_components = d;
    out.dim = d;
    out.rows.assign(n, std::vector<double>(d));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out.rows[r][c] = proj(r, c);
    return out;
}

void save_features(const std::string& path, const FeatureMatrix& m) {
    nlohmann::json j;
    j["provenance"] = provenance_name(m.provenance);
    j["dim"] = m.dim;
    j["rows"] = m.rows;
    j["smoothing_window"] = m.smoothing_window;
    j["scaled"] = m.scaled;
    j["pca_components"] = m.pca_components;
    j["degenerate_rows"] = m.degenerate_rows;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump() << "\n";
}

FeatureMatrix load_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    FeatureMatrix m;
    try {
        m.provenance = provenance_from_name(j.at("provenance").get<std::string>());
        m.dim = j.at("dim").get<std::size_t>();
        m.rows = j.at("rows").get<std::vector<std::vector<double>>>();
        m.smoothing_window = j.value("smoothing_window", std::size_t{0});
        m.scaled = j.value("scaled", false);
        m.pca_components = j.value("pca_components", std::size_t{0});
        m.degenerate_rows = j.value("degenerate_rows", false);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    for (const auto& r : m.rows)
        if (r.size() != m.dim) throw Error(path + ": ragged rows");
    return m;
}

} // namespace keyclink
