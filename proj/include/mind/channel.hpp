// Channel models: AWGN, additive Student-t noise (ATN), radar bursts, and
// optional normalized fast Rayleigh fading, y = h*x + z (+ w).
#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "mind/core.hpp"
#include "mind/rng.hpp"

namespace mind::channel {

enum class ChannelKind { Awgn, Atn, Radar };

struct ChannelSpec {
    ChannelKind kind = ChannelKind::Awgn;
    double sigma = 1.0;   // AWGN std / ATN scale parameter
    double nu = 3.0;      // ATN degrees of freedom, must be > 2
    double sigma1 = 1.0;  // radar background std
    double sigma2 = 2.0;  // radar burst std
    double p = 0.05;      // radar burst probability
    bool fading = false;

    void validate() const {
        switch (kind) {
            case ChannelKind::Awgn:
                require(sigma >= 0.0, "awgn: sigma must be >= 0");
                break;
            case ChannelKind::Atn:
                require(sigma >= 0.0, "atn: sigma must be >= 0");
                require(nu > 2.0, "atn: nu must be > 2 (finite-variance regime)");
                break;
            case ChannelKind::Radar:
                require(sigma1 >= 0.0 && sigma2 >= 0.0, "radar: sigmas must be >= 0");
                require(sigma1 <= sigma2, "radar: sigma1 must be <= sigma2");
                require(p >= 0.0 && p <= 1.0, "radar: p must be in [0,1]");
                break;
        }
    }

    // Stable label used in CSV rows and plot legends.
    std::string id() const {
        char buf[96];
        switch (kind) {
            case ChannelKind::Awgn:
                std::snprintf(buf, sizeof(buf), "awgn");
                break;
            case ChannelKind::Atn:
                std::snprintf(buf, sizeof(buf), "atn_nu%g", nu);
                break;
            case ChannelKind::Radar:
                std::snprintf(buf, sizeof(buf), "radar_s%g_p%g", sigma2, p);
                break;
        }
        std::string s = buf;
        if (fading) s += "_fading";
        return s;
    }
};

// SNR(dB) = 10*log10(1/sigma^2) for unit-energy BPSK symbols.
inline double snr_to_sigma(double snr_db) { return std::pow(10.0, -snr_db / 20.0); }

// Copy of `spec` with the SNR-dependent scale set: sigma for AWGN/ATN, the
// background sigma1 for radar.
inline ChannelSpec at_snr(ChannelSpec spec, double snr_db) {
    double s = snr_to_sigma(snr_db);
    if (spec.kind == ChannelKind::Radar)
        spec.sigma1 = s;
    else
        spec.sigma = s;
    return spec;
}

inline Mat sample_noise(const ChannelSpec& spec, int rows, int cols, Rng& rng) {
    require(rows > 0 && cols > 0, "sample_noise: shape must be positive");
    spec.validate();
    Mat z(rows, cols);
    switch (spec.kind) {
        case ChannelKind::Awgn:
            for (auto& e : z.v) e = spec.sigma * rng.normal();
            break;
        case ChannelKind::Atn:
            for (auto& e : z.v) e = spec.sigma * rng.student_t(spec.nu);
            break;
        case ChannelKind::Radar:
            // Background Gaussian plus, per entry, a Bernoulli(p)-gated burst.
            for (auto& e : z.v) {
                e = spec.sigma1 * rng.normal();
                if (rng.uniform() < spec.p) e += spec.sigma2 * rng.normal();
            }
            break;
    }
    return z;
}

// h = sqrt(X1^2 + X2^2) / sqrt(pi/2), normalized so E[h] = 1. Entries > 0.
inline Mat sample_fading(int rows, int cols, Rng& rng) {
    require(rows > 0 && cols > 0, "sample_fading: shape must be positive");
    constexpr double inv_norm = 0.7978845608028653558799;  // 1/sqrt(pi/2)
    Mat h(rows, cols);
    for (auto& e : h.v) {
        double x1 = rng.normal();
        double x2 = rng.normal();
        e = std::sqrt(x1 * x1 + x2 * x2) * inv_norm;
        if (e <= 0.0) e = 1e-300;  // measure-zero guard, keeps the >0 invariant
    }
    return h;
}

struct ReceivedBlock {
    Mat symbols;
    Mat fading_coeffs;  // present iff has_fading
    bool has_fading = false;
};

// y = x + z for the additive channels, y = h.*x + z with h recorded when
// fading is enabled. `frozen_h`, when non-null, supplies the fading matrix
// instead of drawing one (used to hold h fixed across an adaptation batch).
inline ReceivedBlock transmit(const Mat& codeword, const ChannelSpec& spec, Rng& rng,
                              const Mat* frozen_h = nullptr) {
    ReceivedBlock out;
    if (spec.fading) {
        if (frozen_h != nullptr) {
            require(frozen_h->same_shape(codeword), "transmit: frozen fading shape mismatch");
            out.fading_coeffs = *frozen_h;
        } else {
            out.fading_coeffs = sample_fading(codeword.rows, codeword.cols, rng);
        }
        out.has_fading = true;
    }
    Mat z = sample_noise(spec, codeword.rows, codeword.cols, rng);
    out.symbols = Mat(codeword.rows, codeword.cols);
    for (size_t i = 0; i < codeword.v.size(); ++i) {
        double h = out.has_fading ? out.fading_coeffs.v[i] : 1.0;
        out.symbols.v[i] = h * codeword.v[i] + z.v[i];
    }
    return out;
}

}  // namespace mind::channel
