#include "keyclink/dsp.hpp"

#include "keyclink/error.hpp"

#include <cmath>
#include <numbers>

namespace keyclink {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0) return;
    if ((n & (n - 1)) != 0) throw Error("fft size must be a power of two");

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

std::vector<std::complex<double>> fft_real(const std::vector<double>& x) {
    const std::size_t n = next_pow2(x.size() == 0 ? 1 : x.size());
    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i];
    fft_inplace(a);
    return a;
}

std::vector<double> fft_magnitude(const std::vector<double>& x) {
    auto spec = fft_real(x);
    const std::size_t half = spec.size() / 2;
    std::vector<double> mag(half); // bins 1..N/2
    for (std::size_t i = 0; i < half; ++i) mag[i] = std::abs(spec[i + 1]);
    return mag;
}

std::vector<double> dct2(const std::vector<double>& x, std::size_t n_out) {
    const std::size_t n = x.size();
    std::vector<double> y(n_out, 0.0);
    for (std::size_t k = 0; k < n_out; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += x[i] * std::cos(std::numbers::pi / static_cast<double>(n) *
                                   (static_cast<double>(i) + 0.5) * static_cast<double>(k));
        y[k] = acc;
    }
    return y;
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    if (n == 1) {
        w[0] = 1.0;
        return w;
    }
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                    static_cast<double>(n - 1));
    return w;
}

} // namespace keyclink
