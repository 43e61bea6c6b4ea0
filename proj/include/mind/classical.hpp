// Reference decoders: Viterbi, exact log-MAP BCJR, the iterative turbo loop,
// and exhaustive-enumeration oracles used by the test suites.
//
// LLR sign convention throughout: positive means bit 0. The trellis is
// unterminated; forward recursions start in state 0, backward recursions start
// uniform. Log-MAP uses exact max* (log-sum-exp), not the max-log
// approximation, so BCJR posteriors match brute-force MAP marginals to
// floating-point accuracy.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mind/codec.hpp"
#include "mind/core.hpp"

namespace mind::classical {

using LlrBlock = std::vector<double>;

// Extrinsic/prior magnitudes are clamped to this inside the turbo loop.
constexpr double kLlrClamp = 30.0;

struct TrellisTable {
    int states = 0;
    // Indexed [state][input]: successor state and parity output bit.
    std::vector<std::array<int, 2>> next;
    std::vector<std::array<int, 2>> parity;

    explicit TrellisTable(const codec::CodeSpec& spec) {
        spec.validate();
        int m = spec.memory();
        states = 1 << m;
        next.resize(states);
        parity.resize(states);
        for (int s = 0; s < states; ++s) {
            // State bits: bit i of s is the shift register cell s_{i+1}.
            for (int u = 0; u < 2; ++u) {
                std::vector<std::uint8_t> st(m);
                for (int i = 0; i < m; ++i) st[i] = (s >> i) & 1;
                std::uint8_t par = codec::detail::rsc_step(static_cast<std::uint8_t>(u), st, spec);
                int ns = 0;
                for (int i = 0; i < m; ++i) ns |= st[i] << i;
                next[s][u] = ns;
                parity[s][u] = par;
            }
        }
    }

    // Encoding by trellis walk; must reproduce codec::rsc_encode bit for bit.
    BitMat walk(const codec::MessageBlock& msg) const {
        BitMat out(static_cast<int>(msg.size()), 2);
        int s = 0;
        for (size_t k = 0; k < msg.size(); ++k) {
            int u = msg[k];
            out.at(static_cast<int>(k), 0) = static_cast<std::uint8_t>(u);
            out.at(static_cast<int>(k), 1) = static_cast<std::uint8_t>(parity[s][u]);
            s = next[s][u];
        }
        return out;
    }
};

namespace detail {

inline double max_star(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double hi = std::max(a, b);
    return hi + std::log1p(std::exp(-std::abs(a - b)));
}

inline double bpsk(int bit) { return bit ? -1.0 : 1.0; }

}  // namespace detail

// ML sequence decoding by minimum squared Euclidean distance over the trellis.
// Zero initial state, free final state. Ties at a merge keep the path coming
// from the smaller predecessor state; final-state ties pick the smaller index.
// sigma does not affect the argmin under AWGN; it is kept for interface
// symmetry with the soft decoders.
inline codec::MessageBlock viterbi_decode(const Mat& received, double sigma,
                                          const codec::CodeSpec& spec) {
    (void)sigma;
    require(received.cols == 2, "viterbi_decode: expected (L,2) input");
    TrellisTable tr(spec);
    const int L = received.rows;
    const int S = tr.states;
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> pm(S, inf), pm_next(S, inf);
    pm[0] = 0.0;
    std::vector<std::int16_t> prev(static_cast<size_t>(L) * S, -1);
    std::vector<std::uint8_t> dec(static_cast<size_t>(L) * S, 0);

    for (int k = 0; k < L; ++k) {
        std::fill(pm_next.begin(), pm_next.end(), inf);
        double y0 = received.at(k, 0);
        double y1 = received.at(k, 1);
        for (int s = 0; s < S; ++s) {
            if (pm[s] == inf) continue;
            for (int u = 0; u < 2; ++u) {
                int ns = tr.next[s][u];
                double d0 = y0 - detail::bpsk(u);
                double d1 = y1 - detail::bpsk(tr.parity[s][u]);
                double m = pm[s] + d0 * d0 + d1 * d1;
                if (m < pm_next[ns]) {
                    pm_next[ns] = m;
                    prev[static_cast<size_t>(k) * S + ns] = static_cast<std::int16_t>(s);
                    dec[static_cast<size_t>(k) * S + ns] = static_cast<std::uint8_t>(u);
                }
            }
        }
        pm.swap(pm_next);
    }

    int best = 0;
    for (int s = 1; s < S; ++s)
        if (pm[s] < pm[best]) best = s;

    codec::MessageBlock msg(L);
    int s = best;
    for (int k = L - 1; k >= 0; --k) {
        msg[k] = dec[static_cast<size_t>(k) * S + s];
        s = prev[static_cast<size_t>(k) * S + s];
    }
    return msg;
}

// Exact log-MAP forward-backward over the trellis. Inputs are per-bit LLRs for
// the systematic stream, the parity stream, and an a-priori term; output is
// the per-bit posterior LLR. Subtracting sys+prior from it yields the
// extrinsic information used in the turbo loop.
inline LlrBlock bcjr_decode(const LlrBlock& sys_llr, const LlrBlock& par_llr,
                            const LlrBlock& prior_llr, const codec::CodeSpec& spec) {
    const int L = static_cast<int>(sys_llr.size());
    require(static_cast<int>(par_llr.size()) == L && static_cast<int>(prior_llr.size()) == L,
            "bcjr_decode: LLR blocks must have equal length");
    for (int k = 0; k < L; ++k)
        require(std::isfinite(sys_llr[k]) && std::isfinite(par_llr[k]) && std::isfinite(prior_llr[k]),
                "bcjr_decode: non-finite input LLR");

    TrellisTable tr(spec);
    const int S = tr.states;
    constexpr double ninf = -std::numeric_limits<double>::infinity();

    // gamma[k][s][u] = (1-2u)*(sys+prior)/2 + (1-2c)*par/2
    auto gamma = [&](int k, int s, int u) {
        double gu = (u == 0 ? 0.5 : -0.5) * (sys_llr[k] + prior_llr[k]);
        double gc = (tr.parity[s][u] == 0 ? 0.5 : -0.5) * par_llr[k];
        return gu + gc;
    };

    std::vector<std::vector<double>> alpha(L + 1, std::vector<double>(S, ninf));
    std::vector<std::vector<double>> beta(L + 1, std::vector<double>(S, 0.0));
    alpha[0][0] = 0.0;

    for (int k = 0; k < L; ++k) {
        for (int s = 0; s < S; ++s) {
            if (alpha[k][s] == ninf) continue;
            for (int u = 0; u < 2; ++u) {
                int ns = tr.next[s][u];
                alpha[k + 1][ns] = detail::max_star(alpha[k + 1][ns], alpha[k][s] + gamma(k, s, u));
            }
        }
        // Normalize to keep magnitudes bounded (cancels in the LLR).
        double mx = *std::max_element(alpha[k + 1].begin(), alpha[k + 1].end());
        for (auto& a : alpha[k + 1]) a -= mx;
    }

    for (int k = L - 1; k >= 0; --k) {
        std::vector<double> b(S, ninf);
        for (int s = 0; s < S; ++s)
            for (int u = 0; u < 2; ++u)
                b[s] = detail::max_star(b[s], gamma(k, s, u) + beta[k + 1][tr.next[s][u]]);
        double mx = *std::max_element(b.begin(), b.end());
        for (auto& e : b) e -= mx;
        beta[k] = std::move(b);
    }

    LlrBlock post(L);
    for (int k = 0; k < L; ++k) {
        double num = ninf, den = ninf;
        for (int s = 0; s < S; ++s) {
            if (alpha[k][s] == ninf) continue;
            num = detail::max_star(num, alpha[k][s] + gamma(k, s, 0) + beta[k + 1][tr.next[s][0]]);
            den = detail::max_star(den, alpha[k][s] + gamma(k, s, 1) + beta[k + 1][tr.next[s][1]]);
        }
        post[k] = num - den;
    }
    return post;
}

// Standard extrinsic-exchange turbo decoding with `iterations` full rounds
// (each round: constituent decoder 1, then decoder 2 on interleaved data).
// Hard decision from the final de-interleaved posterior; positive LLR -> 0.
inline codec::MessageBlock turbo_decode(const Mat& received, double sigma,
                                        const codec::CodeSpec& spec, const codec::Interleaver& il,
                                        int iterations = 6) {
    require(received.cols == 3, "turbo_decode: expected (L,3) input");
    require(received.rows == il.L, "turbo_decode: interleaver size mismatch");
    require(iterations >= 1, "turbo_decode: iterations must be >= 1");
    require(sigma > 0.0, "turbo_decode: sigma must be > 0");
    const int L = received.rows;

    LlrBlock sys(L), par1(L), par2(L);
    double c = 2.0 / (sigma * sigma);
    for (int k = 0; k < L; ++k) {
        sys[k] = c * received.at(k, 0);
        par1[k] = c * received.at(k, 1);
        par2[k] = c * received.at(k, 2);
    }
    LlrBlock sys_i = codec::interleave(sys, il);

    auto clamp = [](LlrBlock& v) {
        for (auto& e : v) e = std::clamp(e, -kLlrClamp, kLlrClamp);
    };

    LlrBlock ext2_deint(L, 0.0);
    LlrBlock post2_deint(L, 0.0);
    for (int it = 0; it < iterations; ++it) {
        LlrBlock post1 = bcjr_decode(sys, par1, ext2_deint, spec);
        LlrBlock ext1(L);
        for (int k = 0; k < L; ++k) ext1[k] = post1[k] - sys[k] - ext2_deint[k];
        clamp(ext1);

        LlrBlock ext1_i = codec::interleave(ext1, il);
        LlrBlock post2 = bcjr_decode(sys_i, par2, ext1_i, spec);
        LlrBlock ext2(L);
        for (int k = 0; k < L; ++k) ext2[k] = post2[k] - sys_i[k] - ext1_i[k];
        clamp(ext2);

        ext2_deint = codec::deinterleave(ext2, il);
        post2_deint = codec::deinterleave(post2, il);
    }

    codec::MessageBlock msg(L);
    for (int k = 0; k < L; ++k) msg[k] = post2_deint[k] > 0.0 ? 0 : 1;
    return msg;
}

// Exhaustive rate-1/2 oracles, usable up to L = 14.

inline codec::MessageBlock brute_force_ml(const Mat& received, double sigma,
                                          const codec::CodeSpec& spec) {
    (void)sigma;
    require(received.cols == 2, "brute_force_ml: expected (L,2) input");
    const int L = received.rows;
    require(L <= 14, "brute_force_ml: L too large for enumeration");
    codec::MessageBlock best;
    double best_d = std::numeric_limits<double>::infinity();
    codec::MessageBlock msg(L);
    for (std::uint32_t m = 0; m < (1u << L); ++m) {
        // Lexicographic enumeration: bit k of the message is bit (L-1-k) of m.
        for (int k = 0; k < L; ++k) msg[k] = (m >> (L - 1 - k)) & 1u;
        BitMat cw = codec::rsc_encode(msg, spec);
        double d = 0.0;
        for (int k = 0; k < L; ++k)
            for (int j = 0; j < 2; ++j) {
                double e = received.at(k, j) - detail::bpsk(cw.at(k, j));
                d += e * e;
            }
        if (d < best_d) {
            best_d = d;
            best = msg;
        }
    }
    return best;
}

inline LlrBlock brute_force_map_bits(const Mat& received, double sigma,
                                     const codec::CodeSpec& spec) {
    require(received.cols == 2, "brute_force_map_bits: expected (L,2) input");
    require(sigma > 0.0, "brute_force_map_bits: sigma must be > 0");
    const int L = received.rows;
    require(L <= 14, "brute_force_map_bits: L too large for enumeration");
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    std::vector<double> num(L, ninf), den(L, ninf);
    codec::MessageBlock msg(L);
    for (std::uint32_t m = 0; m < (1u << L); ++m) {
        for (int k = 0; k < L; ++k) msg[k] = (m >> (L - 1 - k)) & 1u;
        BitMat cw = codec::rsc_encode(msg, spec);
        double ll = 0.0;
        for (int k = 0; k < L; ++k)
            for (int j = 0; j < 2; ++j) {
                double e = received.at(k, j) - detail::bpsk(cw.at(k, j));
                ll -= e * e / (2.0 * sigma * sigma);
            }
        for (int k = 0; k < L; ++k) {
            if (msg[k] == 0)
                num[k] = detail::max_star(num[k], ll);
            else
                den[k] = detail::max_star(den[k], ll);
        }
    }
    LlrBlock llr(L);
    for (int k = 0; k < L; ++k) llr[k] = num[k] - den[k];
    return llr;
}

}  // namespace mind::classical
