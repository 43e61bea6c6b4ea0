// Config-driven experiment runner: BER/BLER sweeps over SNR grids and channel
// matrices, training/adaptation orchestration, CSV results, manifests and
// plots.
//
// Reproducibility contract: every Monte-Carlo stream is keyed by
// (seed, purpose, channel index, grid index), never by thread schedule, so a
// run is reproducible given its manifest; in sequential mode CSVs regenerate
// byte-identically (sequential runs report wall_time_s as 0 since timing is
// not data).
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mind/channel.hpp"
#include "mind/classical.hpp"
#include "mind/codec.hpp"
#include "mind/core.hpp"
#include "mind/meta.hpp"
#include "mind/neural.hpp"
#include "mind/plot.hpp"
#include "mind/rng.hpp"

namespace mind::harness {

using nlohmann::json;

// ---- results ----

struct EvalResult {
    std::string decoder;
    std::string channel;
    int K = 0;
    double snr_db = 0.0;
    long bits = 0;
    long bit_errors = 0;
    long blocks = 0;
    long block_errors = 0;
    double ber = 0.0;
    double bler = 0.0;
    double ci95 = 0.0;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
};

// Wilson 95% confidence half-width for x successes out of n trials.
inline double wilson_halfwidth(long x, long n) {
    if (n <= 0) return 0.0;
    const double z = 1.959963984540054;
    double p = static_cast<double>(x) / static_cast<double>(n);
    double z2n = z * z / static_cast<double>(n);
    double hw = z * std::sqrt(p * (1.0 - p) / static_cast<double>(n) +
                              z2n / (4.0 * static_cast<double>(n)));
    return hw / (1.0 + z2n);
}

inline std::string csv_header() {
    return "decoder,channel,K,snr_db,bits,bit_errors,blocks,block_errors,ber,bler,ci95,seed,"
           "wall_time_s";
}

inline std::string csv_row(const EvalResult& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6g,%ld,%ld,%ld,%ld,%.8g,%.8g,%.8g,%llu,%.3f",
                  r.decoder.c_str(), r.channel.c_str(), r.K, r.snr_db, r.bits, r.bit_errors,
                  r.blocks, r.block_errors, r.ber, r.bler, r.ci95,
                  static_cast<unsigned long long>(r.seed), r.wall_time_s);
    return buf;
}

// ---- evaluation ----

// A decoder under test: receives a batch of channel outputs and the per-point
// sigma, returns hard bit decisions (B, L).
using DecodeFn =
    std::function<BitMat(const std::vector<channel::ReceivedBlock>&, double sigma)>;

struct EvalOptions {
    int blocks_per_point = 1000;
    int early_stop_errors = 500;  // stop a point after this many bit errors
    int batch_blocks = 200;
    int workers = 1;         // parallelism across SNR points
    bool sequential = false;  // serial execution, wall_time_s reported as 0
    std::uint64_t stream_salt = 0;  // decoder-independent: same salt => same noise
};

// Monte-Carlo BER/BLER of `decode` on `family` across the SNR grid. Block
// data depends only on (seed, stream_salt, point index), so two decoders
// evaluated with the same salt see identical channel realizations.
inline std::vector<EvalResult> evaluate(const DecodeFn& decode, const std::string& decoder_label,
                                        int K, const channel::ChannelSpec& family,
                                        const meta::DecoderModel& model,
                                        const std::vector<double>& snr_grid,
                                        const EvalOptions& opts, std::uint64_t seed) {
    require(!snr_grid.empty(), "evaluate: snr grid must be non-empty");
    require(opts.blocks_per_point >= 1, "evaluate: blocks_per_point must be >= 1");
    const int L = model.code.block_length;
    const int n = model.codeword_cols();

    std::vector<EvalResult> out(snr_grid.size());
    int workers = opts.sequential ? 1 : opts.workers;

    parallel_for(static_cast<int>(snr_grid.size()), workers, [&](int pi) {
        auto t0 = std::chrono::steady_clock::now();
        channel::ChannelSpec spec = channel::at_snr(family, snr_grid[pi]);
        constexpr std::uint64_t kEvalStream = 0xE7A1;
        Rng rng(seed, Rng::derive({kEvalStream, opts.stream_salt, static_cast<std::uint64_t>(pi)}));

        long bit_errors = 0, bits = 0, block_errors = 0, blocks = 0;
        while (blocks < opts.blocks_per_point && bit_errors < opts.early_stop_errors) {
            int nb = std::min(opts.batch_blocks, opts.blocks_per_point - static_cast<int>(blocks));
            std::vector<codec::MessageBlock> msgs(nb);
            std::vector<channel::ReceivedBlock> rbs(nb);
            for (int b = 0; b < nb; ++b) {
                msgs[b] = codec::random_message(L, rng);
                BitMat enc = model.turbo ? codec::turbo_encode(msgs[b], model.code, model.il)
                                         : codec::rsc_encode(msgs[b], model.code);
                rbs[b] = channel::transmit(codec::bpsk_modulate(enc), spec, rng);
            }
            BitMat hat = decode(rbs, spec.kind == channel::ChannelKind::Radar ? spec.sigma1
                                                                              : spec.sigma);
            require(hat.rows == nb && hat.cols == L, "evaluate: decoder shape mismatch");
            for (int b = 0; b < nb; ++b) {
                int be = 0;
                for (int t = 0; t < L; ++t) be += hat.at(b, t) != msgs[b][t];
                bit_errors += be;
                block_errors += be > 0;
                bits += L;
                ++blocks;
            }
        }

        EvalResult r;
        r.decoder = decoder_label;
        r.channel = family.id();
        r.K = K;
        r.snr_db = snr_grid[pi];
        r.bits = bits;
        r.bit_errors = bit_errors;
        r.blocks = blocks;
        r.block_errors = block_errors;
        r.ber = bits ? static_cast<double>(bit_errors) / bits : 0.0;
        r.bler = blocks ? static_cast<double>(block_errors) / blocks : 0.0;
        r.ci95 = wilson_halfwidth(bit_errors, bits);
        r.seed = seed;
        auto t1 = std::chrono::steady_clock::now();
        r.wall_time_s =
            opts.sequential ? 0.0 : std::chrono::duration<double>(t1 - t0).count();
        out[pi] = r;
        (void)n;
    });
    return out;
}

// ---- decoder construction ----

inline DecodeFn make_viterbi_fn(const codec::CodeSpec& code) {
    return [code](const std::vector<channel::ReceivedBlock>& rbs, double sigma) {
        BitMat out(static_cast<int>(rbs.size()), code.block_length);
        for (size_t b = 0; b < rbs.size(); ++b) {
            codec::MessageBlock m = classical::viterbi_decode(rbs[b].symbols, sigma, code);
            for (int t = 0; t < code.block_length; ++t) out.at(static_cast<int>(b), t) = m[t];
        }
        return out;
    };
}

inline DecodeFn make_turbo_fn(const codec::CodeSpec& code, const codec::Interleaver& il,
                              int iterations) {
    return [code, il, iterations](const std::vector<channel::ReceivedBlock>& rbs, double sigma) {
        BitMat out(static_cast<int>(rbs.size()), code.block_length);
        for (size_t b = 0; b < rbs.size(); ++b) {
            codec::MessageBlock m =
                classical::turbo_decode(rbs[b].symbols, sigma, code, il, iterations);
            for (int t = 0; t < code.block_length; ++t) out.at(static_cast<int>(b), t) = m[t];
        }
        return out;
    };
}

inline neural::BatchInputs pack_inputs(const std::vector<channel::ReceivedBlock>& rbs,
                                       const meta::DecoderModel& model) {
    const int L = model.code.block_length;
    const int n = model.codeword_cols();
    const int W = model.input_width();
    neural::BatchInputs in = neural::BatchInputs::zeros(static_cast<int>(rbs.size()), L, W);
    for (size_t b = 0; b < rbs.size(); ++b) {
        for (int t = 0; t < L; ++t) {
            for (int c = 0; c < n; ++c) in.at(static_cast<int>(b), t, c) = rbs[b].symbols.at(t, c);
            if (model.fading_inputs) {
                require(rbs[b].has_fading, "pack_inputs: fading coefficients missing");
                for (int c = 0; c < n; ++c)
                    in.at(static_cast<int>(b), t, n + c) = rbs[b].fading_coeffs.at(t, c);
            }
        }
    }
    return in;
}

inline DecodeFn make_neural_fn(const neural::DecoderParams& params,
                               const meta::DecoderModel& model) {
    return [params, model](const std::vector<channel::ReceivedBlock>& rbs, double) {
        neural::BatchInputs in = pack_inputs(rbs, model);
        Mat probs = model.turbo ? neural::neural_turbo_probabilities(params, in, model.il,
                                                                     model.turbo_iterations)
                                : neural::conv_probabilities(params, in);
        BitMat out(probs.rows, probs.cols);
        for (size_t i = 0; i < probs.v.size(); ++i) out.v[i] = probs.v[i] > 0.5 ? 1 : 0;
        return out;
    };
}

// ---- configuration ----

struct TrainingConfig {
    std::string mode = "none";  // none | maml | mtl
    meta::MetaConfig meta;
    double lr = 0.001;  // mtl settings
    int iterations = 1000;
    int batch = 100;
    bool adam = false;
    int warm_start_iterations = 0;  // plain training phase before meta-training
    double warm_start_lr = 0.002;
    int pretrain_iterations = 0;  // turbo N-BCJR pretraining stage
    int pretrain_batch = 32;
    double pretrain_lr = 0.001;
};

struct ExperimentConfig {
    codec::CodeSpec code;
    bool turbo = false;
    std::uint64_t interleaver_seed = 1;
    int turbo_iterations = 6;

    std::string decoder = "viterbi";  // viterbi | bcjr-turbo | neural-conv | neural-turbo
    std::string label;                // CSV decoder column; defaulted from decoder/training
    neural::ArchitectureConfig arch;
    bool fading_inputs = false;
    bool freeze_fading = false;

    TrainingConfig training;
    std::vector<meta::AdaptConfig> adaptation;  // neural only; empty means K=0
    meta::ChannelTaskSet train_channels;
    meta::ChannelTaskSet test_channels;

    std::vector<double> snr_grid = {0, 1, 2, 3, 4, 5, 6};
    int blocks_per_point = 1000;
    int early_stop_errors = 500;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    bool sequential = false;
    int workers = 2;
    std::optional<double> adapt_snr;  // default: middle of the grid
    bool per_snr_adaptation = false;
    std::string checkpoint;  // load instead of training

    bool is_neural() const { return decoder == "neural-conv" || decoder == "neural-turbo"; }

    double adaptation_snr() const {
        if (adapt_snr) return *adapt_snr;
        return snr_grid[snr_grid.size() / 2];
    }

    void validate() const {
        code.validate();
        require(!snr_grid.empty(), "config: snr_grid must be non-empty");
        for (size_t i = 1; i < snr_grid.size(); ++i)
            require(snr_grid[i] > snr_grid[i - 1], "config: snr_grid must be strictly increasing");
        require(blocks_per_point >= 1, "config: blocks_per_point must be >= 1");
        require(decoder == "viterbi" || decoder == "bcjr-turbo" || decoder == "neural-conv" ||
                    decoder == "neural-turbo",
                "config: unknown decoder " + decoder);
        require(!test_channels.tasks.empty(), "config: test_channels must be non-empty");
        bool turbo_dec = decoder == "bcjr-turbo" || decoder == "neural-turbo";
        require(turbo == turbo_dec, "config: decoder/turbo flag mismatch");
        if (!is_neural())
            for (const auto& t : test_channels.tasks)
                require(!t.spec.fading, "config: classical decoders do not support fading");
    }

    std::string default_label() const {
        if (!label.empty()) return label;
        if (decoder == "viterbi") return "viterbi";
        if (decoder == "bcjr-turbo") return "turbo" + std::to_string(turbo_iterations);
        if (training.mode == "maml") return "mind";
        if (training.mode == "mtl") return "mtl";
        return decoder;
    }

    meta::DecoderModel model() const {
        meta::DecoderModel m;
        m.code = code;
        m.turbo = turbo;
        m.turbo_iterations = turbo_iterations;
        m.fading_inputs = fading_inputs;
        m.freeze_fading = freeze_fading;
        if (turbo) m.il = codec::make_interleaver(code.block_length, interleaver_seed);
        return m;
    }
};

// ---- json (de)serialization ----

inline json channel_to_json(const channel::ChannelSpec& c) {
    json j;
    switch (c.kind) {
        case channel::ChannelKind::Awgn:
            j["kind"] = "awgn";
            j["sigma"] = c.sigma;
            break;
        case channel::ChannelKind::Atn:
            j["kind"] = "atn";
            j["sigma"] = c.sigma;
            j["nu"] = c.nu;
            break;
        case channel::ChannelKind::Radar:
            j["kind"] = "radar";
            j["sigma1"] = c.sigma1;
            j["sigma2"] = c.sigma2;
            j["p"] = c.p;
            break;
    }
    j["fading"] = c.fading;
    return j;
}

inline channel::ChannelSpec channel_from_json(const json& j) {
    channel::ChannelSpec c;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "awgn")
        c.kind = channel::ChannelKind::Awgn;
    else if (kind == "atn")
        c.kind = channel::ChannelKind::Atn;
    else if (kind == "radar")
        c.kind = channel::ChannelKind::Radar;
    else
        throw std::invalid_argument("unknown channel kind: " + kind);
    c.sigma = j.value("sigma", 1.0);
    c.nu = j.value("nu", 3.0);
    c.sigma1 = j.value("sigma1", 1.0);
    c.sigma2 = j.value("sigma2", 2.0);
    c.p = j.value("p", 0.05);
    c.fading = j.value("fading", false);
    c.validate();
    return c;
}

// The training channel sets used in the studies; "less-diversified" is the
// base meta-training set, "diversified" spans a larger parameter scale, and
// "diversified-test" adds the held-out channels evaluated against it.
inline std::vector<meta::ChannelTask> channel_preset(const std::string& name) {
    using channel::ChannelKind;
    auto atn = [](double nu) {
        meta::ChannelTask t;
        t.spec.kind = ChannelKind::Atn;
        t.spec.nu = nu;
        return t;
    };
    auto radar = [](double s2, double p) {
        meta::ChannelTask t;
        t.spec.kind = ChannelKind::Radar;
        t.spec.sigma2 = s2;
        t.spec.p = p;
        return t;
    };
    std::vector<meta::ChannelTask> out;
    meta::ChannelTask awgn;
    if (name == "less-diversified") {
        out = {awgn, atn(5.0), atn(3.0), radar(2.0, 0.05), radar(3.5, 0.05), radar(5.0, 0.05)};
    } else if (name == "diversified") {
        out = {awgn,
               atn(2.5),
               atn(3.0),
               radar(2.0, 0.05),
               radar(10.0, 0.05),
               radar(100.0, 0.05),
               radar(2.0, 0.2),
               radar(10.0, 0.2),
               radar(100.0, 0.2)};
    } else if (name == "diversified-test") {
        out = channel_preset("diversified");
        out.push_back(atn(10.0));
        for (double p : {0.01, 0.1}) {
            out.push_back(radar(10.0, p));
            out.push_back(radar(100.0, p));
        }
    } else {
        throw std::invalid_argument("unknown channel preset: " + name);
    }
    return out;
}

inline meta::ChannelTaskSet taskset_from_json(const json& j) {
    meta::ChannelTaskSet ts;
    if (j.is_string()) {
        ts.tasks = channel_preset(j.get<std::string>());
        return ts;
    }
    for (const auto& e : j) {
        meta::ChannelTask t;
        t.spec = channel_from_json(e);
        t.snr_lo = e.value("snr_lo", 0.0);
        t.snr_hi = e.value("snr_hi", 6.0);
        ts.tasks.push_back(t);
    }
    return ts;
}

inline json taskset_to_json(const meta::ChannelTaskSet& ts) {
    json arr = json::array();
    for (const auto& t : ts.tasks) {
        json e = channel_to_json(t.spec);
        e["snr_lo"] = t.snr_lo;
        e["snr_hi"] = t.snr_hi;
        arr.push_back(e);
    }
    return arr;
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("code")) {
        const auto& jc = j.at("code");
        c.code.block_length = jc.value("block_length", 100);
        if (jc.contains("f1")) c.code.f1 = jc.at("f1").get<std::vector<int>>();
        if (jc.contains("f2")) c.code.f2 = jc.at("f2").get<std::vector<int>>();
        c.turbo = jc.value("turbo", false);
        c.interleaver_seed = jc.value("interleaver_seed", 1ull);
    }
    c.decoder = j.value("decoder", "viterbi");
    c.label = j.value("label", "");
    c.turbo_iterations = j.value("turbo_iterations", 6);
    if (j.contains("arch")) {
        c.arch.num_layers = j.at("arch").value("num_layers", 2);
        c.arch.hidden_units = j.at("arch").value("hidden_units", 100);
    }
    c.fading_inputs = j.value("fading_inputs", false);
    c.freeze_fading = j.value("freeze_fading", false);

    if (j.contains("training")) {
        const auto& jt = j.at("training");
        c.training.mode = jt.value("mode", "none");
        auto& m = c.training.meta;
        m.alpha = jt.value("alpha", 0.001);
        m.beta = jt.value("beta", 0.001);
        m.P = jt.value("P", 3);
        m.B = jt.value("B", 100);
        m.inner_steps = jt.value("inner_steps", 1);
        m.second_order = jt.value("second_order", true);
        m.meta_iterations = jt.value("meta_iterations", 1000);
        m.adam = jt.value("adam", false);
        c.training.lr = jt.value("lr", 0.001);
        c.training.iterations = jt.value("iterations", 1000);
        c.training.batch = jt.value("batch", 100);
        c.training.adam = jt.value("adam", false);
        c.training.warm_start_iterations = jt.value("warm_start_iterations", 0);
        c.training.warm_start_lr = jt.value("warm_start_lr", 0.002);
        c.training.pretrain_iterations = jt.value("pretrain_iterations", 0);
        c.training.pretrain_batch = jt.value("pretrain_batch", 32);
        c.training.pretrain_lr = jt.value("pretrain_lr", 0.001);
    }
    if (j.contains("adaptation")) {
        for (const auto& e : j.at("adaptation")) {
            meta::AdaptConfig a;
            a.K = e.value("K", 0);
            a.B = e.value("B", 100);
            a.alpha = e.value("alpha", 0.001);
            c.adaptation.push_back(a);
        }
    }
    if (j.contains("train_channels")) c.train_channels = taskset_from_json(j.at("train_channels"));
    if (j.contains("test_channels")) c.test_channels = taskset_from_json(j.at("test_channels"));
    if (j.contains("snr_grid")) c.snr_grid = j.at("snr_grid").get<std::vector<double>>();
    c.blocks_per_point = j.value("blocks_per_point", 1000);
    c.early_stop_errors = j.value("early_stop_errors", 500);
    c.seed = j.value("seed", 1ull);
    c.output_dir = j.value("output_dir", "out");
    c.sequential = j.value("sequential", false);
    c.workers = j.value("workers", 2);
    if (j.contains("adapt_snr") && !j.at("adapt_snr").is_null())
        c.adapt_snr = j.at("adapt_snr").get<double>();
    c.per_snr_adaptation = j.value("per_snr_adaptation", false);
    c.checkpoint = j.value("checkpoint", "");
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["code"] = {{"block_length", c.code.block_length},
                 {"f1", c.code.f1},
                 {"f2", c.code.f2},
                 {"turbo", c.turbo},
                 {"interleaver_seed", c.interleaver_seed}};
    j["decoder"] = c.decoder;
    j["label"] = c.label;
    j["turbo_iterations"] = c.turbo_iterations;
    j["arch"] = {{"num_layers", c.arch.num_layers}, {"hidden_units", c.arch.hidden_units}};
    j["fading_inputs"] = c.fading_inputs;
    j["freeze_fading"] = c.freeze_fading;
    j["training"] = {{"mode", c.training.mode},
                     {"alpha", c.training.meta.alpha},
                     {"beta", c.training.meta.beta},
                     {"P", c.training.meta.P},
                     {"B", c.training.meta.B},
                     {"inner_steps", c.training.meta.inner_steps},
                     {"second_order", c.training.meta.second_order},
                     {"meta_iterations", c.training.meta.meta_iterations},
                     {"adam", c.training.adam},
                     {"lr", c.training.lr},
                     {"iterations", c.training.iterations},
                     {"batch", c.training.batch},
                     {"warm_start_iterations", c.training.warm_start_iterations},
                     {"warm_start_lr", c.training.warm_start_lr},
                     {"pretrain_iterations", c.training.pretrain_iterations},
                     {"pretrain_batch", c.training.pretrain_batch},
                     {"pretrain_lr", c.training.pretrain_lr}};
    json ad = json::array();
    for (const auto& a : c.adaptation)
        ad.push_back({{"K", a.K}, {"B", a.B}, {"alpha", a.alpha}});
    j["adaptation"] = ad;
    j["train_channels"] = taskset_to_json(c.train_channels);
    j["test_channels"] = taskset_to_json(c.test_channels);
    j["snr_grid"] = c.snr_grid;
    j["blocks_per_point"] = c.blocks_per_point;
    j["early_stop_errors"] = c.early_stop_errors;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["sequential"] = c.sequential;
    j["workers"] = c.workers;
    if (c.adapt_snr)
        j["adapt_snr"] = *c.adapt_snr;
    else
        j["adapt_snr"] = nullptr;
    j["per_snr_adaptation"] = c.per_snr_adaptation;
    j["checkpoint"] = c.checkpoint;
    return j;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "load_config: cannot open " + path);
    json j;
    f >> j;
    return config_from_json(j);
}

// ---- experiment pipeline ----

struct ExperimentOutput {
    std::vector<EvalResult> results;
    std::string csv_path;
    std::string manifest_path;
    std::string checkpoint_path;  // empty for classical decoders
    std::vector<double> training_losses;
};

inline void write_csv(const std::string& path, const std::vector<EvalResult>& rows) {
    std::ofstream f(path);
    require(f.good(), "write_csv: cannot open " + path);
    f << csv_header() << "\n";
    for (const auto& r : rows) f << csv_row(r) << "\n";
}

inline void write_plots(const std::string& dir, const std::vector<EvalResult>& rows) {
    // one plot per channel, one series per (decoder, K)
    std::vector<std::string> channels;
    for (const auto& r : rows)
        if (std::find(channels.begin(), channels.end(), r.channel) == channels.end())
            channels.push_back(r.channel);
    for (const auto& ch : channels) {
        std::vector<plot::Series> series;
        for (const auto& r : rows) {
            if (r.channel != ch) continue;
            std::string label = r.decoder + "-" + std::to_string(r.K);
            auto it = std::find_if(series.begin(), series.end(),
                                   [&](const plot::Series& s) { return s.label == label; });
            if (it == series.end()) {
                series.push_back({label, {}});
                it = series.end() - 1;
            }
            it->points.emplace_back(r.snr_db, r.ber);
        }
        plot::write_svg(dir + "/plot_" + ch + ".svg", "BER vs SNR - " + ch, series);
    }
}

// Trains (or loads) the decoder the config asks for. Returns nothing for
// classical decoders.
inline std::optional<neural::DecoderParams> prepare_params(const ExperimentConfig& cfg,
                                                           std::vector<double>* losses_out) {
    if (!cfg.is_neural()) return std::nullopt;
    meta::DecoderModel model = cfg.model();
    neural::ArchitectureConfig arch = cfg.arch;
    arch.input_width = model.input_width();

    neural::DecoderParams params;
    if (!cfg.checkpoint.empty()) {
        params = neural::load_checkpoint(cfg.checkpoint);
        require(params.arch.input_width == arch.input_width,
                "checkpoint: input width does not match the configured decoder");
        return params;
    }
    Rng init_rng(cfg.seed, Rng::derive({0x1817u}));
    params = neural::init_params(arch, init_rng);

    meta::MetaConfig mc = cfg.training.meta;
    mc.workers = cfg.sequential ? 1 : cfg.workers;

    if (cfg.turbo && cfg.training.pretrain_iterations > 0) {
        auto pre = meta::pretrain_nbcjr(params, model, cfg.training.pretrain_iterations,
                                        cfg.training.pretrain_batch, cfg.training.pretrain_lr,
                                        cfg.snr_grid.front(), cfg.snr_grid.back(),
                                        cfg.seed ^ 0xBCull);
        params = pre.params;
        if (losses_out)
            losses_out->insert(losses_out->end(), pre.losses.begin(), pre.losses.end());
    }

    if (cfg.training.mode == "maml") {
        if (cfg.training.warm_start_iterations > 0) {
            auto warm = meta::mtl_train(params, cfg.train_channels, cfg.training.warm_start_lr,
                                        cfg.training.warm_start_iterations, cfg.training.batch,
                                        model, cfg.seed ^ 0x57ull, /*adam=*/true);
            params = warm.params;
            if (losses_out)
                losses_out->insert(losses_out->end(), warm.losses.begin(), warm.losses.end());
        }
        auto tr = meta::maml_meta_train(params, cfg.train_channels, mc, model, cfg.seed);
        params = tr.params;
        if (losses_out)
            losses_out->insert(losses_out->end(), tr.losses.begin(), tr.losses.end());
    } else if (cfg.training.mode == "mtl") {
        auto tr = meta::mtl_train(params, cfg.train_channels, cfg.training.lr,
                                  cfg.training.iterations, cfg.training.batch, model, cfg.seed,
                                  cfg.training.adam);
        params = tr.params;
        if (losses_out)
            losses_out->insert(losses_out->end(), tr.losses.begin(), tr.losses.end());
    } else {
        require(cfg.training.mode == "none", "config: unknown training mode " + cfg.training.mode);
    }
    return params;
}

// Full pipeline: train (if requested), adapt per (channel, K), evaluate the
// whole matrix, and write CSV + manifest + checkpoint + plots.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    meta::DecoderModel model = cfg.model();

    ExperimentOutput out;
    std::optional<neural::DecoderParams> params = prepare_params(cfg, &out.training_losses);

    // manifest first: it is the re-run recipe
    out.manifest_path = cfg.output_dir + "/manifest.json";
    {
        json m;
        m["config"] = config_to_json(cfg);
        m["format_version"] = 1;
        std::ofstream f(out.manifest_path);
        require(f.good(), "run_experiment: cannot write manifest");
        f << m.dump(2) << "\n";
    }
    if (params) {
        out.checkpoint_path = cfg.output_dir + "/checkpoint.json";
        neural::save_checkpoint(*params, out.checkpoint_path);
    }

    EvalOptions opts;
    opts.blocks_per_point = cfg.blocks_per_point;
    opts.early_stop_errors = cfg.early_stop_errors;
    opts.workers = cfg.workers;
    opts.sequential = cfg.sequential;

    std::string label = cfg.default_label();
    std::vector<meta::AdaptConfig> adapts = cfg.adaptation;
    if (adapts.empty()) adapts.push_back(meta::AdaptConfig{});

    for (size_t ci = 0; ci < cfg.test_channels.tasks.size(); ++ci) {
        const channel::ChannelSpec& family = cfg.test_channels.tasks[ci].spec;
        opts.stream_salt = ci;

        if (!cfg.is_neural()) {
            DecodeFn fn = cfg.decoder == "viterbi"
                              ? make_viterbi_fn(cfg.code)
                              : make_turbo_fn(cfg.code, model.il, cfg.turbo_iterations);
            auto rows = evaluate(fn, label, 0, family, model, cfg.snr_grid, opts, cfg.seed);
            out.results.insert(out.results.end(), rows.begin(), rows.end());
            continue;
        }

        for (size_t ai = 0; ai < adapts.size(); ++ai) {
            const meta::AdaptConfig& ac = adapts[ai];
            if (!cfg.per_snr_adaptation) {
                // adapt once at the adaptation SNR, evaluate across the grid
                channel::ChannelSpec adapt_spec = channel::at_snr(family, cfg.adaptation_snr());
                std::uint64_t aseed = Rng::derive({cfg.seed, 0xADull, ci, ai});
                meta::AdaptResult ar = meta::mind_adapt(*params, adapt_spec, ac, model, aseed);
                auto rows = evaluate(make_neural_fn(ar.params, model), label, ac.K, family, model,
                                     cfg.snr_grid, opts, cfg.seed);
                out.results.insert(out.results.end(), rows.begin(), rows.end());
            } else {
                for (size_t pi = 0; pi < cfg.snr_grid.size(); ++pi) {
                    channel::ChannelSpec adapt_spec = channel::at_snr(family, cfg.snr_grid[pi]);
                    std::uint64_t aseed = Rng::derive({cfg.seed, 0xADull, ci, ai, pi});
                    meta::AdaptResult ar = meta::mind_adapt(*params, adapt_spec, ac, model, aseed);
                    std::vector<double> single = {cfg.snr_grid[pi]};
                    EvalOptions popts = opts;
                    popts.stream_salt = Rng::derive({ci, pi});
                    auto rows = evaluate(make_neural_fn(ar.params, model), label, ac.K, family,
                                         model, single, popts, cfg.seed);
                    out.results.push_back(rows[0]);
                }
            }
        }
    }

    out.csv_path = cfg.output_dir + "/results.csv";
    write_csv(out.csv_path, out.results);
    write_plots(cfg.output_dir, out.results);
    return out;
}

// Hyperparameter study along one axis. B and K re-adapt an already trained
// decoder; alpha retrains per value (the training-time adaptation rate is
// what the study varies).
inline std::vector<EvalResult> hyperparam_sweep(const ExperimentConfig& base,
                                                const std::string& axis,
                                                const std::vector<double>& values) {
    require(axis == "B" || axis == "K" || axis == "alpha", "sweep: axis must be B, K or alpha");
    require(!values.empty(), "sweep: values must be non-empty");
    require(base.is_neural(), "sweep: needs a neural decoder config");
    std::vector<EvalResult> all;
    std::filesystem::create_directories(base.output_dir);

    if (axis == "alpha") {
        for (double v : values) {
            ExperimentConfig cfg = base;
            cfg.training.meta.alpha = v;
            for (auto& a : cfg.adaptation) a.alpha = v;
            char suffix[32];
            std::snprintf(suffix, sizeof(suffix), "[a=%g]", v);
            cfg.label = cfg.default_label() + suffix;
            cfg.output_dir = base.output_dir + "/alpha_" + std::to_string(v);
            auto out = run_experiment(cfg);
            all.insert(all.end(), out.results.begin(), out.results.end());
        }
    } else {
        ExperimentConfig cfg = base;
        meta::AdaptConfig proto = base.adaptation.empty() ? meta::AdaptConfig{}
                                                          : base.adaptation.front();
        cfg.adaptation.clear();
        for (double v : values) {
            meta::AdaptConfig a = proto;
            if (axis == "K")
                a.K = static_cast<int>(v);
            else
                a.B = static_cast<int>(v);
            cfg.adaptation.push_back(a);
        }
        if (axis == "B") {
            // distinguish rows: fold B into the label per adaptation entry by
            // running one experiment per value
            cfg.adaptation.clear();
            for (double v : values) {
                ExperimentConfig one = cfg;
                meta::AdaptConfig a = proto;
                a.B = static_cast<int>(v);
                one.adaptation = {a};
                char suffix[32];
                std::snprintf(suffix, sizeof(suffix), "[B=%d]", a.B);
                one.label = one.default_label() + suffix;
                one.output_dir = base.output_dir + "/B_" + std::to_string(a.B);
                auto out = run_experiment(one);
                all.insert(all.end(), out.results.begin(), out.results.end());
            }
        } else {
            cfg.output_dir = base.output_dir + "/K_sweep";
            auto out = run_experiment(cfg);
            all.insert(all.end(), out.results.begin(), out.results.end());
        }
    }

    write_csv(base.output_dir + "/sweep_results.csv", all);
    write_plots(base.output_dir, all);
    return all;
}

}  // namespace mind::harness
