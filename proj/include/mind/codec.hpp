// RSC convolutional / turbo encoding, interleaving, BPSK mapping.
//
// The code is the recursive systematic [1, f2/f1] encoder with f1 = 1+D+D^2
// and f2 = 1+D^2 by default. Blocks are unterminated: the encoder starts in
// the all-zero state and L message bits produce exactly (L, n) coded bits.
#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "mind/core.hpp"
#include "mind/rng.hpp"

namespace mind::codec {

struct CodeSpec {
    std::vector<int> f1 = {1, 1, 1};  // feedback taps, f1[0] must be 1
    std::vector<int> f2 = {1, 0, 1};  // forward taps
    int block_length = 100;

    int memory() const { return static_cast<int>(f1.size()) - 1; }

    void validate() const {
        require(!f1.empty() && f1[0] == 1, "code: feedback polynomial must be monic");
        require(f1.size() == f2.size(), "code: f1 and f2 must have equal length");
        require(block_length >= 1, "code: block length must be >= 1");
    }
};

using MessageBlock = std::vector<std::uint8_t>;

struct Interleaver {
    int L = 0;
    std::uint64_t seed = 0;
    std::vector<int> perm;  // interleaved[i] = x[perm[i]]
    std::vector<int> inv;   // deinterleaved[perm[i]] = y[i]
};

// Fixed pseudo-random permutation, re-derivable from (L, seed). The
// permutation is part of the reproducibility contract; configs store only
// (L, seed).
inline Interleaver make_interleaver(int L, std::uint64_t seed) {
    require(L >= 1, "interleaver: L must be >= 1");
    Interleaver il;
    il.L = L;
    il.seed = seed;
    il.perm.resize(L);
    std::iota(il.perm.begin(), il.perm.end(), 0);
    Rng rng(seed, Rng::derive({0x1u, static_cast<std::uint64_t>(L)}));
    for (int i = L - 1; i > 0; --i) {
        int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(il.perm[i], il.perm[j]);
    }
    il.inv.resize(L);
    for (int i = 0; i < L; ++i) il.inv[il.perm[i]] = i;
    return il;
}

inline Interleaver identity_interleaver(int L) {
    Interleaver il;
    il.L = L;
    il.perm.resize(L);
    std::iota(il.perm.begin(), il.perm.end(), 0);
    il.inv = il.perm;
    return il;
}

template <typename T>
std::vector<T> interleave(const std::vector<T>& x, const Interleaver& il) {
    require(static_cast<int>(x.size()) == il.L, "interleave: size mismatch");
    std::vector<T> y(x.size());
    for (int i = 0; i < il.L; ++i) y[i] = x[il.perm[i]];
    return y;
}

template <typename T>
std::vector<T> deinterleave(const std::vector<T>& y, const Interleaver& il) {
    require(static_cast<int>(y.size()) == il.L, "deinterleave: size mismatch");
    std::vector<T> x(y.size());
    for (int i = 0; i < il.L; ++i) x[il.perm[i]] = y[i];
    return x;
}

inline MessageBlock random_message(int L, Rng& rng) {
    require(L >= 1, "random_message: L must be >= 1");
    MessageBlock m(L);
    for (auto& b : m) b = static_cast<std::uint8_t>(rng.next_u64() & 1u);
    return m;
}

namespace detail {

// One recursion step: a = u xor (feedback taps . state), parity = f2 . [a, state],
// state shifts a in at the front.
inline std::uint8_t rsc_step(std::uint8_t u, std::vector<std::uint8_t>& state, const CodeSpec& spec) {
    int m = spec.memory();
    int a = u;
    for (int i = 0; i < m; ++i) a ^= spec.f1[i + 1] & state[i];
    int par = spec.f2[0] & a;
    for (int i = 0; i < m; ++i) par ^= spec.f2[i + 1] & state[i];
    for (int i = m - 1; i > 0; --i) state[i] = state[i - 1];
    if (m > 0) state[0] = static_cast<std::uint8_t>(a);
    return static_cast<std::uint8_t>(par);
}

}  // namespace detail

// Rate-1/2 encode: column 0 systematic, column 1 recursive parity.
inline BitMat rsc_encode(const MessageBlock& msg, const CodeSpec& spec) {
    spec.validate();
    int L = static_cast<int>(msg.size());
    BitMat out(L, 2);
    std::vector<std::uint8_t> state(spec.memory(), 0);
    for (int k = 0; k < L; ++k) {
        out.at(k, 0) = msg[k];
        out.at(k, 1) = detail::rsc_step(msg[k], state, spec);
    }
    return out;
}

// Rate-1/3 turbo encode: systematic, parity of msg, parity of interleaved msg.
inline BitMat turbo_encode(const MessageBlock& msg, const CodeSpec& spec, const Interleaver& il) {
    spec.validate();
    int L = static_cast<int>(msg.size());
    require(L == il.L, "turbo_encode: interleaver size mismatch");
    BitMat p1 = rsc_encode(msg, spec);
    BitMat p2 = rsc_encode(interleave(msg, il), spec);
    BitMat out(L, 3);
    for (int k = 0; k < L; ++k) {
        out.at(k, 0) = msg[k];
        out.at(k, 1) = p1.at(k, 1);
        out.at(k, 2) = p2.at(k, 1);
    }
    return out;
}

// Bit-to-symbol mapping 0 -> +1, 1 -> -1.
inline Mat bpsk_modulate(const BitMat& bits) {
    Mat x(bits.rows, bits.cols);
    for (size_t i = 0; i < bits.v.size(); ++i) x.v[i] = bits.v[i] ? -1.0 : 1.0;
    return x;
}

// Per-symbol LLR log P(bit=0|y)/P(bit=1|y) = 2y/sigma^2 under AWGN.
inline Mat bpsk_llr(const Mat& received, double sigma) {
    require(sigma > 0.0, "bpsk_llr: sigma must be > 0");
    Mat llr(received.rows, received.cols);
    double c = 2.0 / (sigma * sigma);
    for (size_t i = 0; i < received.v.size(); ++i) llr.v[i] = c * received.v[i];
    return llr;
}

}  // namespace mind::codec
