// Bi-directional GRU neural decoders.
//
// Two variants share the same recurrent trunk:
//   - the convolutional decoder maps a received block (B, L, 2) — or
//     (B, L, 4) under fading with coherent detection — to per-bit
//     probabilities (B, L);
//   - the N-BCJR block maps (B, L, 3) [systematic, parity, incoming message]
//     to a real-valued per-bit message; the unrolled neural turbo decoder
//     alternates such blocks with shared weights across an interleaver and
//     applies a sigmoid only at the end.
//
// Every forward here is built from mind::ad ops, so decoders are
// differentiable to second order with respect to their parameters.
#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mind/codec.hpp"
#include "mind/core.hpp"
#include "mind/rng.hpp"
#include "mind/tensor.hpp"

namespace mind::neural {

struct ArchitectureConfig {
    int num_layers = 2;
    int hidden_units = 100;  // per direction
    int input_width = 2;     // 2 conv, 3 N-BCJR, 4 conv+fading

    void validate() const {
        require(num_layers >= 1, "arch: num_layers must be >= 1");
        require(hidden_units >= 1, "arch: hidden_units must be >= 1");
        require(input_width == 2 || input_width == 3 || input_width == 4,
                "arch: input_width must be 2, 3 or 4");
    }

    bool operator==(const ArchitectureConfig&) const = default;
};

struct ParamEntry {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
};

// Flat, named collection of parameter arrays (the decoder's theta).
struct DecoderParams {
    ArchitectureConfig arch;
    std::vector<ParamEntry> entries;

    size_t count() const {
        size_t n = 0;
        for (const auto& e : entries) n += e.value.size();
        return n;
    }

    bool finite() const {
        for (const auto& e : entries)
            for (double v : e.value)
                if (!std::isfinite(v)) return false;
        return true;
    }

    void check_combinable(const DecoderParams& o) const {
        require(arch == o.arch && entries.size() == o.entries.size(),
                "params: architectures must match");
        for (size_t i = 0; i < entries.size(); ++i)
            require(entries[i].name == o.entries[i].name &&
                        entries[i].value.size() == o.entries[i].value.size(),
                    "params: entry layout mismatch");
    }

    // this += a * other
    void axpy(double a, const DecoderParams& o) {
        check_combinable(o);
        for (size_t i = 0; i < entries.size(); ++i)
            for (size_t j = 0; j < entries[i].value.size(); ++j)
                entries[i].value[j] += a * o.entries[i].value[j];
    }

    void scale_inplace(double a) {
        for (auto& e : entries)
            for (auto& v : e.value) v *= a;
    }
};

namespace detail {

inline int layer_input_width(const ArchitectureConfig& arch, int layer) {
    return layer == 0 ? arch.input_width : 2 * arch.hidden_units;
}

}  // namespace detail

// Parameter layout is fully determined by the architecture: per layer and
// direction a fused-gate GRU (w_ih: 3H x in, w_hh: 3H x H, b_ih, b_hh: 1 x 3H)
// plus a per-timestep linear head (2H x 1 and bias).
inline DecoderParams init_params(const ArchitectureConfig& arch, Rng& rng) {
    arch.validate();
    DecoderParams p;
    p.arch = arch;
    const int H = arch.hidden_units;
    auto push = [&](const std::string& name, int r, int c, double k) {
        ParamEntry e;
        e.name = name;
        e.rows = r;
        e.cols = c;
        e.value.resize(static_cast<size_t>(r) * c);
        for (auto& v : e.value) v = k * (2.0 * rng.uniform() - 1.0);
        p.entries.push_back(std::move(e));
    };
    const double k = 1.0 / std::sqrt(static_cast<double>(H));
    for (int l = 0; l < arch.num_layers; ++l) {
        int in = detail::layer_input_width(arch, l);
        for (const char* dir : {"fwd", "bwd"}) {
            std::string base = "gru" + std::to_string(l) + "." + dir + ".";
            push(base + "w_ih", 3 * H, in, k);
            push(base + "w_hh", 3 * H, H, k);
            push(base + "b_ih", 1, 3 * H, k);
            push(base + "b_hh", 1, 3 * H, k);
        }
    }
    push("head.w", 2 * H, 1, k);
    ParamEntry hb;
    hb.name = "head.b";
    hb.rows = 1;
    hb.cols = 1;
    hb.value = {0.0};
    p.entries.push_back(std::move(hb));
    return p;
}

// Lifts parameter arrays into autodiff leaves (one tensor per entry, in
// canonical order).
inline std::vector<ad::Tensor> lift(const DecoderParams& p, bool requires_grad = true) {
    std::vector<ad::Tensor> out;
    out.reserve(p.entries.size());
    for (const auto& e : p.entries)
        out.push_back(ad::Tensor::from(e.value, e.rows, e.cols, requires_grad));
    return out;
}

// Writes tensor values (e.g. adapted parameters) back into a named container.
inline DecoderParams materialize(const DecoderParams& like, const std::vector<ad::Tensor>& ts) {
    require(ts.size() == like.entries.size(), "materialize: entry count mismatch");
    DecoderParams out = like;
    for (size_t i = 0; i < ts.size(); ++i) {
        require(ts[i].size() == like.entries[i].value.size(), "materialize: size mismatch");
        out.entries[i].value = ts[i].data();
    }
    return out;
}

// Batched time-major inputs: x holds (B, L, width) row-major.
struct BatchInputs {
    int B = 0;
    int L = 0;
    int width = 0;
    std::vector<double> x;

    static BatchInputs zeros(int B, int L, int width) {
        BatchInputs b;
        b.B = B;
        b.L = L;
        b.width = width;
        b.x.assign(static_cast<size_t>(B) * L * width, 0.0);
        return b;
    }

    double& at(int b, int t, int w) { return x[(static_cast<size_t>(b) * L + t) * width + w]; }
    double at(int b, int t, int w) const { return x[(static_cast<size_t>(b) * L + t) * width + w]; }
};

namespace detail {

struct ParamView {
    const std::vector<ad::Tensor>* ts;
    const DecoderParams* layout;

    const ad::Tensor& get(const std::string& name) const {
        for (size_t i = 0; i < layout->entries.size(); ++i)
            if (layout->entries[i].name == name) return (*ts)[i];
        throw std::invalid_argument("unknown parameter: " + name);
    }
};

// Splits batch inputs into L per-timestep tensors of shape (B, width).
inline std::vector<ad::Tensor> timestep_tensors(const BatchInputs& in) {
    std::vector<ad::Tensor> xs;
    xs.reserve(in.L);
    for (int t = 0; t < in.L; ++t) {
        std::vector<double> v(static_cast<size_t>(in.B) * in.width);
        for (int b = 0; b < in.B; ++b)
            for (int w = 0; w < in.width; ++w) v[static_cast<size_t>(b) * in.width + w] = in.at(b, t, w);
        xs.push_back(ad::Tensor::from(std::move(v), in.B, in.width));
    }
    return xs;
}

// One GRU direction over the given timestep order. Gate layout in the fused
// matrices is [r | z | n].
inline std::vector<ad::Tensor> gru_direction(const std::vector<ad::Tensor>& xs,
                                             const ad::Tensor& w_ih, const ad::Tensor& w_hh,
                                             const ad::Tensor& b_ih, const ad::Tensor& b_hh,
                                             int H, bool reverse) {
    using namespace ad;
    const int L = static_cast<int>(xs.size());
    const int B = xs[0].rows();
    Tensor w_ih_t = transpose(w_ih);
    Tensor w_hh_t = transpose(w_hh);
    Tensor h = Tensor::zeros(B, H);
    std::vector<Tensor> out(L);
    for (int step = 0; step < L; ++step) {
        int t = reverse ? L - 1 - step : step;
        Tensor gi = add_rowvec(matmul(xs[t], w_ih_t), b_ih);
        Tensor gh = add_rowvec(matmul(h, w_hh_t), b_hh);
        Tensor r = sigmoid(add(slice_cols(gi, 0, H), slice_cols(gh, 0, H)));
        Tensor z = sigmoid(add(slice_cols(gi, H, 2 * H), slice_cols(gh, H, 2 * H)));
        Tensor n = tanh_(add(slice_cols(gi, 2 * H, 3 * H), mul(r, slice_cols(gh, 2 * H, 3 * H))));
        // h' = (1 - z) .* n + z .* h
        h = add(mul(add_scalar(neg(z), 1.0), n), mul(z, h));
        out[t] = h;
    }
    return out;
}

// Full trunk: stacked bi-GRU layers followed by the per-timestep linear head.
// Returns the pre-sigmoid outputs as one (B, L) tensor.
inline ad::Tensor trunk_forward(const ParamView& pv, const ArchitectureConfig& arch,
                                std::vector<ad::Tensor> xs) {
    using namespace ad;
    const int H = arch.hidden_units;
    for (int l = 0; l < arch.num_layers; ++l) {
        std::string base = "gru" + std::to_string(l) + ".";
        auto fwd = gru_direction(xs, pv.get(base + "fwd.w_ih"), pv.get(base + "fwd.w_hh"),
                                 pv.get(base + "fwd.b_ih"), pv.get(base + "fwd.b_hh"), H, false);
        auto bwd = gru_direction(xs, pv.get(base + "bwd.w_ih"), pv.get(base + "bwd.w_hh"),
                                 pv.get(base + "bwd.b_ih"), pv.get(base + "bwd.b_hh"), H, true);
        std::vector<Tensor> next(xs.size());
        for (size_t t = 0; t < xs.size(); ++t) next[t] = concat_cols({fwd[t], bwd[t]});
        xs = std::move(next);
    }
    const Tensor& head_w = pv.get("head.w");
    const Tensor& head_b = pv.get("head.b");
    std::vector<Tensor> cols(xs.size());
    for (size_t t = 0; t < xs.size(); ++t) {
        Tensor y = matmul(xs[t], head_w);  // (B, 1)
        cols[t] = add_rowvec(y, head_b);
    }
    return concat_cols(cols);  // (B, L)
}

}  // namespace detail

// Convolutional decoder: probabilities of bit = 1, shape (B, L).
inline ad::Tensor conv_forward(const std::vector<ad::Tensor>& params, const DecoderParams& layout,
                               const BatchInputs& in) {
    layout.arch.validate();
    require(in.width == layout.arch.input_width, "conv_forward: input width mismatch");
    require(in.B >= 1 && in.L >= 1, "conv_forward: empty batch");
    detail::ParamView pv{&params, &layout};
    return ad::sigmoid(detail::trunk_forward(pv, layout.arch, detail::timestep_tensors(in)));
}

// Low-level variant over caller-built per-timestep (B, width) tensors; lift
// the inputs as autodiff leaves to differentiate with respect to them.
inline ad::Tensor conv_forward_timesteps(const std::vector<ad::Tensor>& params,
                                         const DecoderParams& layout,
                                         const std::vector<ad::Tensor>& xs) {
    layout.arch.validate();
    require(!xs.empty() && xs[0].cols() == layout.arch.input_width,
            "conv_forward_timesteps: input width mismatch");
    detail::ParamView pv{&params, &layout};
    return ad::sigmoid(detail::trunk_forward(pv, layout.arch, xs));
}

// N-BCJR block: real-valued per-bit message, shape (B, L). No output sigmoid;
// the value is what gets exchanged between turbo iterations.
inline ad::Tensor nbcjr_forward(const std::vector<ad::Tensor>& params, const DecoderParams& layout,
                                const BatchInputs& in) {
    layout.arch.validate();
    require(layout.arch.input_width == 3 && in.width == 3, "nbcjr_forward: input width must be 3");
    detail::ParamView pv{&params, &layout};
    return detail::trunk_forward(pv, layout.arch, detail::timestep_tensors(in));
}

// Unrolled neural turbo decoder over a received (B, L, 3) block.
//
// `iterations` counts N-BCJR block applications: odd passes run in message
// order on (sys, par1, msg), even passes run in interleaved order on
// (pi(sys), par2, pi(msg)). All passes share one parameter set. The final
// pass output goes through a sigmoid (de-interleaved first if the last pass
// was an even one), giving probabilities in message order.
inline ad::Tensor neural_turbo_forward(const std::vector<ad::Tensor>& params,
                                       const DecoderParams& layout, const BatchInputs& in,
                                       const codec::Interleaver& il, int iterations = 6) {
    using namespace ad;
    layout.arch.validate();
    require(layout.arch.input_width == 3 && in.width == 3, "neural_turbo: input width must be 3");
    require(in.L == il.L, "neural_turbo: interleaver size mismatch");
    require(iterations >= 1, "neural_turbo: iterations must be >= 1");
    detail::ParamView pv{&params, &layout};
    const int B = in.B, L = in.L;

    // Per-timestep channel columns.
    std::vector<Tensor> sys(L), par1(L), par2(L), msg(L);
    for (int t = 0; t < L; ++t) {
        std::vector<double> s(B), q1(B), q2(B);
        for (int b = 0; b < B; ++b) {
            s[b] = in.at(b, t, 0);
            q1[b] = in.at(b, t, 1);
            q2[b] = in.at(b, t, 2);
        }
        sys[t] = Tensor::from(std::move(s), B, 1);
        par1[t] = Tensor::from(std::move(q1), B, 1);
        par2[t] = Tensor::from(std::move(q2), B, 1);
        msg[t] = Tensor::zeros(B, 1);
    }

    Tensor last;
    bool last_interleaved = false;
    for (int pass = 1; pass <= iterations; ++pass) {
        bool even = (pass % 2) == 0;
        std::vector<Tensor> xs(L);
        for (int t = 0; t < L; ++t) {
            if (!even)
                xs[t] = concat_cols({sys[t], par1[t], msg[t]});
            else
                xs[t] = concat_cols({sys[il.perm[t]], par2[t], msg[il.perm[t]]});
        }
        Tensor out = detail::trunk_forward(pv, layout.arch, std::move(xs));  // (B, L)
        last = out;
        last_interleaved = even;
        if (pass == iterations) break;
        // thread the per-timestep message into the next pass, in message order
        std::vector<Tensor> next_msg(L);
        for (int t = 0; t < L; ++t) {
            int src = even ? il.inv[t] : t;
            next_msg[t] = slice_cols(out, src, src + 1);
        }
        msg = std::move(next_msg);
    }

    if (last_interleaved) {
        std::vector<Tensor> reordered(L);
        for (int t = 0; t < L; ++t) reordered[t] = slice_cols(last, il.inv[t], il.inv[t] + 1);
        last = concat_cols(reordered);
    }
    return sigmoid(last);
}

// Mean binary cross-entropy; the training loss for all decoders.
inline ad::Tensor loss(const ad::Tensor& probabilities, const ad::Tensor& targets) {
    return ad::bce_loss(probabilities, targets);
}

// Inference without graph construction.
inline Mat conv_probabilities(const DecoderParams& p, const BatchInputs& in) {
    ad::NoGradGuard guard;
    ad::Tensor out = conv_forward(lift(p, false), p, in);
    Mat m(out.rows(), out.cols());
    m.v = out.data();
    return m;
}

inline Mat neural_turbo_probabilities(const DecoderParams& p, const BatchInputs& in,
                                      const codec::Interleaver& il, int iterations = 6) {
    ad::NoGradGuard guard;
    ad::Tensor out = neural_turbo_forward(lift(p, false), p, in, il, iterations);
    Mat m(out.rows(), out.cols());
    m.v = out.data();
    return m;
}

// Threshold at 0.5 with ties mapping to bit 0; outputs are P(bit = 1).
inline BitMat hard_decision(const ad::Tensor& probabilities) {
    BitMat bits(probabilities.rows(), probabilities.cols());
    for (size_t i = 0; i < probabilities.size(); ++i)
        bits.v[i] = probabilities.data()[i] > 0.5 ? 1 : 0;
    return bits;
}

// ---- checkpoint io ----
//
// JSON container: format version, architecture, named arrays. Doubles are
// serialized with shortest round-trip formatting, so save -> load -> save is
// byte-identical.

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json params_to_json(const DecoderParams& p) {
    nlohmann::json j;
    j["format_version"] = kCheckpointVersion;
    j["arch"] = {{"num_layers", p.arch.num_layers},
                 {"hidden_units", p.arch.hidden_units},
                 {"input_width", p.arch.input_width}};
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : p.entries) {
        arr.push_back({{"name", e.name}, {"rows", e.rows}, {"cols", e.cols}, {"data", e.value}});
    }
    j["params"] = arr;
    return j;
}

inline DecoderParams params_from_json(const nlohmann::json& j) {
    require(j.at("format_version").get<int>() == kCheckpointVersion,
            "checkpoint: unsupported format version");
    DecoderParams p;
    p.arch.num_layers = j.at("arch").at("num_layers").get<int>();
    p.arch.hidden_units = j.at("arch").at("hidden_units").get<int>();
    p.arch.input_width = j.at("arch").at("input_width").get<int>();
    for (const auto& e : j.at("params")) {
        ParamEntry pe;
        pe.name = e.at("name").get<std::string>();
        pe.rows = e.at("rows").get<int>();
        pe.cols = e.at("cols").get<int>();
        pe.value = e.at("data").get<std::vector<double>>();
        require(pe.value.size() == static_cast<size_t>(pe.rows) * pe.cols,
                "checkpoint: array size mismatch");
        p.entries.push_back(std::move(pe));
    }
    return p;
}

inline void save_checkpoint(const DecoderParams& p, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "save_checkpoint: cannot open " + path);
    f << params_to_json(p).dump();
}

inline DecoderParams load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "load_checkpoint: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return params_from_json(j);
}

}  // namespace mind::neural
