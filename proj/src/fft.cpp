#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "lda/aggregate.hpp"
#include "lda/errors.hpp"

namespace lda {

namespace {

bool power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform; sign = -1 forward, +1 inverse
// (inverse is unscaled — caller divides by n). Hand-rolled so results are
// bitwise reproducible across platforms and thread counts.
void fft_radix2(std::vector<std::complex<double>>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

} // namespace

DiscreteDensity fft_compound(const FrequencyModel& freq, const DiscreteDensity& sev,
                             double theta, FftStats* stats) {
    const std::size_t m = sev.masses.size();
    if (!power_of_two(m))
        throw std::invalid_argument("fft_compound requires a power-of-two lattice size");
    if (!(theta >= 0.0)) throw std::invalid_argument("tilt parameter must be >= 0");

    // Tilt, transform, apply the frequency pgf, transform back, untilt.
    std::vector<std::complex<double>> buf(m);
    for (std::size_t j = 0; j < m; ++j)
        buf[j] = sev.masses[j] * std::exp(-theta * static_cast<double>(j));

    fft_radix2(buf, -1);
    for (auto& phi : buf) phi = freq.pgf(phi);
    fft_radix2(buf, +1);

    DiscreteDensity out;
    out.step = sev.step;
    out.masses.resize(m);
    FftStats st;
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double h = buf[j].real() / static_cast<double>(m) *
                         std::exp(theta * static_cast<double>(j));
        if (h < 0.0) {
            st.clipped_mass += -h;
            if (-h > st.max_negative) st.max_negative = -h;
            out.masses[j] = 0.0;
        } else {
            out.masses[j] = h;
        }
        total += out.masses[j];
    }
    st.aliasing = st.max_negative > 1e-14;
    out.tail_mass = 1.0 - total;
    if (stats) *stats = st;
    return out;
}

} // namespace lda
