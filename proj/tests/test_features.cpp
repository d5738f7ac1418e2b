#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "keyclink/dsp.hpp"
#include "keyclink/features.hpp"
#include "keyclink/rng.hpp"
#include "support.hpp"

#include <cmath>
#include <vector>

using namespace keyclink;

namespace {

KeystrokeSegment make_segment(std::vector<double> samples, int rate = 44100) {
    KeystrokeSegment s;
    s.samples = std::move(samples);
    s.sample_rate = rate;
    s.press_window_ms = 1000.0 * double(s.samples.size()) / rate;
    return s;
}

KeystrokeSegment random_segment(std::size_t n, Rng& rng, int rate = 44100) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_range(-1.0, 1.0);
    return make_segment(std::move(v), rate);
}

double row_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

} // namespace

TEST_CASE("smooth: boxcar with zero boundary") {
    const auto imp = make_segment({0, 0, 1, 0, 0});
    const auto sm = smooth(imp, 5);
    REQUIRE(sm.samples.size() == 5);
    for (double v : sm.samples) CHECK(v == doctest::Approx(0.2));

    // window 1 is the identity
    const auto id = smooth(imp, 1);
    CHECK(id.samples == imp.samples);

    CHECK_THROWS_AS(smooth(imp, 6), WindowTooLarge);
    CHECK_THROWS_AS(smooth(imp, 0), WindowTooLarge);
}

TEST_CASE("fft_feature equals the magnitude spectrum, DC dropped") {
    Rng rng(31);
    const auto seg = random_segment(300, rng);
    const auto f = fft_feature(seg);
    const auto ref = fft_magnitude(seg.samples);
    CHECK(f.size() == next_pow2(300) / 2);
    REQUIRE(f.size() == ref.size());
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == ref[i]);
}

TEST_CASE("mfcc dimensions: 30 ms at 44.1 kHz, 10/5 ms frames, 36 coeffs -> 180") {
    Rng rng(32);
    const auto seg = random_segment(1323, rng);
    MfccParams p;
    const auto f = mfcc_feature(seg, p);
    CHECK(f.size() == 180); // 5 frames x 36 coefficients
}

TEST_CASE("mfcc of silence is finite") {
    const auto seg = make_segment(std::vector<double>(1323, 0.0));
    MfccParams p;
    const auto f = mfcc_feature(seg, p);
    REQUIRE(f.size() == 180);
    for (double v : f) CHECK(std::isfinite(v));
}

TEST_CASE("mfcc is bitwise deterministic") {
    Rng rng(33);
    const auto seg = random_segment(5292, rng);
    MfccParams p;
    const auto a = mfcc_feature(seg, p);
    const auto b = mfcc_feature(seg, p);
    CHECK(a == b);
}

TEST_CASE("mfcc rejects segments shorter than one frame") {
    const auto seg = make_segment(std::vector<double>(100, 0.1)); // 100 < 441
    MfccParams p;
    CHECK_THROWS_AS(mfcc_feature(seg, p), SegmentTooShort);
}

TEST_CASE("raw and fft matrices") {
    Rng rng(34);
    std::vector<KeystrokeSegment> segs;
    for (int i = 0; i < 3; ++i) segs.push_back(random_segment(200, rng));

    const auto raw = raw_matrix(segs);
    CHECK(raw.provenance == Provenance::RAW);
    CHECK(raw.rows.size() == 3);
    CHECK(raw.dim == 200);
    CHECK(raw.rows[1] == segs[1].samples);

    const auto fft = fft_matrix(segs);
    CHECK(fft.provenance == Provenance::FFT);
    CHECK(fft.dim == 128);
}

TEST_CASE("concat_features stacks columns") {
    Rng rng(35);
    std::vector<KeystrokeSegment> segs;
    for (int i = 0; i < 4; ++i) segs.push_back(random_segment(1323, rng));

    const auto fft = fft_matrix(segs);
    const auto mfcc = mfcc_matrix(segs, MfccParams{});
    const auto both = concat_features(fft, mfcc);
    CHECK(both.provenance == Provenance::FFT_MFCC);
    CHECK(both.dim == fft.dim + mfcc.dim);
    REQUIRE(both.rows.size() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < fft.dim; ++c) CHECK(both.rows[r][c] == fft.rows[r][c]);
        for (std::size_t c = 0; c < mfcc.dim; ++c)
            CHECK(both.rows[r][fft.dim + c] == mfcc.rows[r][c]);
    }

    auto short_m = fft;
    short_m.rows.pop_back();
    CHECK_THROWS_AS(concat_features(short_m, mfcc), RowMismatch);
}

TEST_CASE("xcorr: identical rows correlate at exactly 1") {
    Rng rng(36);
    const auto seg = random_segment(400, rng);
    std::vector<KeystrokeSegment> segs = {seg, seg, random_segment(400, rng)};

    const auto sim = xcorr_similarity(raw_matrix(segs));
    CHECK(sim.provenance == Provenance::XCORR);
    CHECK(sim.dim == 3);
    CHECK(sim.rows[0][1] == 1.0);
    CHECK(sim.rows[1][0] == 1.0);
    CHECK(sim.rows[0][0] == 1.0);
    // symmetry
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(sim.rows[i][j] == doctest::Approx(sim.rows[j][i]));
    CHECK_FALSE(sim.degenerate_rows);
}

TEST_CASE("xcorr: a small shift still correlates high") {
    Rng rng(37);
    std::vector<double> base(400);
    for (auto& v : base) v = rng.next_range(-1.0, 1.0);
    std::vector<double> shifted(400, 0.0);
    for (std::size_t i = 7; i < 400; ++i) shifted[i] = base[i - 7];

    std::vector<KeystrokeSegment> segs = {make_segment(base), make_segment(shifted)};
    const auto sim = xcorr_similarity(raw_matrix(segs));
    CHECK(sim.rows[0][1] >= 0.9);
}

TEST_CASE("xcorr: orthogonal-frequency sinusoids correlate low") {
    std::vector<double> a(512), b(512);
    for (std::size_t i = 0; i < 512; ++i) {
        a[i] = std::sin(2.0 * M_PI * 8.0 * double(i) / 512.0);
        b[i] = std::sin(2.0 * M_PI * 64.0 * double(i) / 512.0);
    }
    std::vector<KeystrokeSegment> segs = {make_segment(a), make_segment(b)};
    const auto sim = xcorr_similarity(raw_matrix(segs));
    CHECK(sim.rows[0][1] < 0.2);
}

TEST_CASE("xcorr: constant rows are degenerate") {
    std::vector<KeystrokeSegment> segs = {make_segment(std::vector<double>(100, 0.5)),
                                          make_segment([] {
                                              Rng rng(38);
                                              std::vector<double> v(100);
                                              for (auto& x : v) x = rng.next_range(-1.0, 1.0);
                                              return v;
                                          }())};
    const auto sim = xcorr_similarity(raw_matrix(segs));
    CHECK(sim.degenerate_rows);
    CHECK(sim.rows[0][1] == 0.0);
    CHECK(sim.rows[1][0] == 0.0);
}

TEST_CASE("standardize") {
    FeatureMatrix m;
    m.dim = 2;
    m.rows = {{1.0, 5.0}, {3.0, 5.0}};
    const auto z = standardize(m);
    CHECK(z.scaled);
    // column 0: mean 2, population std 1 -> exactly (-1, +1)
    CHECK(z.rows[0][0] == doctest::Approx(-1.0));
    CHECK(z.rows[1][0] == doctest::Approx(1.0));
    // constant column collapses to zero
    CHECK(z.rows[0][1] == 0.0);
    CHECK(z.rows[1][1] == 0.0);

    // standardizing a standardized matrix changes nothing
    const auto zz = standardize(z);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(zz.rows[r][c] == doctest::Approx(z.rows[r][c]).epsilon(1e-12));
}

TEST_CASE("pca: collinear points reduce to one dimension losslessly") {
    FeatureMatrix m;
    m.dim = 2;
    // points on the line y = 2x
    m.rows = {{0.0, 0.0}, {1.0, 2.0}, {2.0, 4.0}, {3.0, 6.0}};
    const auto r = pca_reduce(m, 1);
    CHECK(r.dim == 1);
    CHECK(r.pca_components == 1);
    // pairwise distances survive the projection (zero residual variance)
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double orig = row_distance(m.rows[i], m.rows[j]);
            const double proj = row_distance(r.rows[i], r.rows[j]);
            CHECK(proj == doctest::Approx(orig).epsilon(1e-9));
        }
}

TEST_CASE("pca: full rank preserves pairwise distances") {
    Rng rng(39);
    FeatureMatrix m;
    m.dim = 6;
    for (int r = 0; r < 10; ++r) {
        std::vector<double> row(6);
        for (auto& v : row) v = rng.next_range(-2.0, 2.0);
        m.rows.push_back(row);
    }
    const auto r = pca_reduce(m, 6);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = i + 1; j < 10; ++j) {
            const double orig = row_distance(m.rows[i], m.rows[j]);
            const double proj = row_distance(r.rows[i], r.rows[j]);
            CHECK(std::abs(proj - orig) <= 1e-6 * std::max(1.0, orig));
        }
}

TEST_CASE("pca: wide matrices go through the Gram path") {
    Rng rng(40);
    FeatureMatrix m;
    m.dim = 2000;
    for (int r = 0; r < 5; ++r) {
        std::vector<double> row(2000);
        for (auto& v : row) v = rng.next_range(-1.0, 1.0);
        m.rows.push_back(row);
    }
    const auto r = pca_reduce(m, 4); // limit = rows - 1
    CHECK(r.dim == 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) {
            const double orig = row_distance(m.rows[i], m.rows[j]);
            const double proj = row_distance(r.rows[i], r.rows[j]);
            CHECK(proj == doctest::Approx(orig).epsilon(1e-6));
        }

    CHECK_THROWS_AS(pca_reduce(m, 5), TooManyComponents);
}

TEST_CASE("features round-trip through disk") {
    testsup::TempDir tmp;
    Rng rng(41);
    std::vector<KeystrokeSegment> segs;
    for (int i = 0; i < 3; ++i) segs.push_back(random_segment(256, rng));
    auto m = standardize(fft_matrix(segs));
    m.smoothing_window = 9;

    save_features(tmp.file("f.json"), m);
    const auto back = load_features(tmp.file("f.json"));
    CHECK(back.provenance == m.provenance);
    CHECK(back.dim == m.dim);
    CHECK(back.scaled == m.scaled);
    CHECK(back.smoothing_window == 9);
    CHECK(back.rows == m.rows); // nlohmann doubles round-trip exactly
}
