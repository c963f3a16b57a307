#include "auscult/fft.hpp"

#include <cmath>

namespace auscult {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n < 2) return;

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

namespace {

// Bluestein's algorithm: expresses a length-n DFT as a convolution that is
// evaluated with a power-of-two transform.
std::vector<cplx> bluestein(const std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    const double sign = inverse ? 1.0 : -1.0;

    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n avoids precision loss in the phase for large k
        const std::size_t k2 = (static_cast<std::size_t>(k) * k) % (2 * n);
        const double ang = sign * M_PI * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }

    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<cplx> fa(m, cplx(0.0, 0.0)), fb(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k)
        fb[k] = fb[m - k] = std::conj(chirp[k]);

    fft_pow2(fa, false);
    fft_pow2(fb, false);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    fft_pow2(fa, true);

    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = fa[k] * chirp[k];
    if (inverse)
        for (auto& v : out) v /= static_cast<double>(n);
    return out;
}

} // namespace

std::vector<cplx> fft(std::vector<cplx> a, bool inverse) {
    const std::size_t n = a.size();
    if (n < 2) return a;
    if ((n & (n - 1)) == 0) {
        fft_pow2(a, inverse);
        return a;
    }
    return bluestein(a, inverse);
}

std::vector<cplx> fft_real(const std::vector<double>& x, std::size_t n) {
    if (n == 0) n = x.size();
    std::vector<cplx> a(n, cplx(0.0, 0.0));
    const std::size_t copy = std::min(n, x.size());
    for (std::size_t i = 0; i < copy; ++i) a[i] = cplx(x[i], 0.0);
    return fft(std::move(a));
}

std::vector<cplx> analytic_signal(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    std::vector<cplx> spec = fft_real(x);

    // keep DC (and Nyquist for even n), double positive, zero negative freqs
    for (std::size_t k = 1; k < (n + 1) / 2; ++k) spec[k] *= 2.0;
    for (std::size_t k = n / 2 + 1; k < n; ++k) spec[k] = cplx(0.0, 0.0);

    return fft(std::move(spec), true);
}

} // namespace auscult
