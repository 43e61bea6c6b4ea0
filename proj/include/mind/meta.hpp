// Meta-learning over channel tasks.
//
// maml_meta_train implements the meta-training loop: per meta iteration it
// samples P channels, takes inner_steps gradient steps on a fresh pilot batch
// per channel, and applies the meta update
//     theta <- theta - beta * d/dtheta sum_i L(theta'_i; D'_i),
// differentiating through the inner steps when second_order is set (the
// first-order variant detaches the inner gradients). mind_adapt is the
// test-time procedure: K plain gradient steps on pilot batches from the
// deployed channel. mtl_train is the multi-task baseline that minimizes the
// average loss with no inner/outer split; MTL-K evaluation is mtl_train
// output passed through mind_adapt.
//
// Sampling streams are keyed by (phase, iteration, slot) so that runs are
// reproducible and so that mtl_train consumes exactly the channel-pick and
// meta-batch streams of maml's slot 0 — with alpha = 0 and P = 1 the two
// trainers then see identical data and produce identical trajectories.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mind/channel.hpp"
#include "mind/classical.hpp"
#include "mind/codec.hpp"
#include "mind/core.hpp"
#include "mind/neural.hpp"
#include "mind/rng.hpp"
#include "mind/tensor.hpp"

namespace mind::meta {

struct MetaConfig {
    double alpha = 0.001;  // task/adaptation learning rate
    double beta = 0.001;   // meta learning rate
    int P = 3;             // channels per meta step
    int B = 100;           // blocks per task batch
    int inner_steps = 1;
    bool second_order = true;
    int meta_iterations = 1000;
    bool adam = false;  // adaptive-moment meta update (plain SGD when off)
    int workers = 1;    // parallel tasks within a meta step

    void validate() const {
        require(alpha >= 0.0 && beta > 0.0, "meta: rates must be positive (alpha may be 0)");
        require(P >= 1 && B >= 1 && inner_steps >= 1 && meta_iterations >= 0, "meta: bad sizes");
    }
};

struct AdaptConfig {
    int K = 0;
    int B = 100;
    double alpha = 0.001;

    void validate() const { require(K >= 0 && B >= 1 && alpha > 0.0, "adapt: bad config"); }
};

// A training channel plus its SNR sampling range (dB, uniform per batch).
struct ChannelTask {
    channel::ChannelSpec spec;
    double snr_lo = 0.0;
    double snr_hi = 6.0;
};

struct ChannelTaskSet {
    std::vector<ChannelTask> tasks;

    void validate() const {
        require(!tasks.empty(), "task set must be non-empty");
        for (const auto& t : tasks) t.spec.validate();
    }
};

// Binds the code context a neural decoder is trained against.
struct DecoderModel {
    codec::CodeSpec code;
    codec::Interleaver il;  // used by the turbo variants
    bool turbo = false;
    int turbo_iterations = 6;
    bool fading_inputs = false;  // conv decoder fed (L,4) = [y | h]
    bool freeze_fading = false;  // hold h fixed across an adaptation run

    int input_width() const { return turbo ? 3 : (fading_inputs ? 4 : 2); }
    int codeword_cols() const { return turbo ? 3 : 2; }
};

struct TaskBatch {
    neural::BatchInputs inputs;
    ad::Tensor targets;  // (B, L) constant
    int pairs = 0;       // pilot accounting: (message, received) pairs consumed
};

namespace detail {

enum StreamTag : std::uint64_t {
    kPick = 1,
    kInner = 2,
    kMeta = 3,
    kAdapt = 4,
    kAdaptFade = 5,
};

}  // namespace detail

// Encodes B random messages, transmits them through the channel at the given
// sigma-bearing spec and packs decoder inputs alongside the bit targets.
inline TaskBatch sample_task_batch(const DecoderModel& model, const channel::ChannelSpec& spec,
                                   int B, Rng& rng, const Mat* frozen_h = nullptr) {
    const int L = model.code.block_length;
    const int n = model.codeword_cols();
    const int W = model.input_width();
    require(!model.turbo || model.il.L == L, "sample_task_batch: interleaver mismatch");
    require(!(model.fading_inputs && !spec.fading),
            "sample_task_batch: fading decoder needs a fading channel");
    require(!(spec.fading && !model.turbo && !model.fading_inputs),
            "sample_task_batch: fading channel needs the (L,4) conv decoder");

    TaskBatch out;
    out.inputs = neural::BatchInputs::zeros(B, L, W);
    std::vector<double> targets(static_cast<size_t>(B) * L);
    for (int b = 0; b < B; ++b) {
        codec::MessageBlock msg = codec::random_message(L, rng);
        BitMat bits = model.turbo ? codec::turbo_encode(msg, model.code, model.il)
                                  : codec::rsc_encode(msg, model.code);
        Mat x = codec::bpsk_modulate(bits);
        channel::ReceivedBlock rb = channel::transmit(x, spec, rng, frozen_h);
        for (int t = 0; t < L; ++t) {
            for (int c = 0; c < n; ++c) out.inputs.at(b, t, c) = rb.symbols.at(t, c);
            if (model.fading_inputs)
                for (int c = 0; c < n; ++c) out.inputs.at(b, t, n + c) = rb.fading_coeffs.at(t, c);
            targets[static_cast<size_t>(b) * L + t] = msg[t];
        }
    }
    out.targets = ad::Tensor::from(std::move(targets), B, L);
    out.pairs = B;
    return out;
}

// Loss of the model under the given lifted parameters on one batch.
inline ad::Tensor batch_loss(const std::vector<ad::Tensor>& params,
                             const neural::DecoderParams& layout, const DecoderModel& model,
                             const TaskBatch& batch) {
    ad::Tensor probs = model.turbo
                           ? neural::neural_turbo_forward(params, layout, batch.inputs, model.il,
                                                          model.turbo_iterations)
                           : neural::conv_forward(params, layout, batch.inputs);
    return neural::loss(probs, batch.targets);
}

// First-order gradient of batch_loss at `theta`. Returns (loss, grad).
inline std::pair<double, neural::DecoderParams> plain_gradient(const neural::DecoderParams& theta,
                                                               const DecoderModel& model,
                                                               const TaskBatch& batch) {
    auto ts = neural::lift(theta, true);
    ad::Tensor l = batch_loss(ts, theta, model, batch);
    auto gs = ad::grad(l, ts, false);
    return {l.item(), neural::materialize(theta, gs)};
}

// ---- optimizers ----

inline void sgd_step(neural::DecoderParams& p, const neural::DecoderParams& g, double lr) {
    p.axpy(-lr, g);
}

struct Adam {
    double lr = 0.001;
    double b1 = 0.9;
    double b2 = 0.999;
    double eps = 1e-8;
    int t = 0;
    std::vector<std::vector<double>> m, v;

    void step(neural::DecoderParams& p, const neural::DecoderParams& g) {
        if (m.empty()) {
            for (const auto& e : p.entries) {
                m.emplace_back(e.value.size(), 0.0);
                v.emplace_back(e.value.size(), 0.0);
            }
        }
        ++t;
        double c1 = 1.0 - std::pow(b1, t);
        double c2 = 1.0 - std::pow(b2, t);
        for (size_t i = 0; i < p.entries.size(); ++i) {
            auto& pv = p.entries[i].value;
            const auto& gv = g.entries[i].value;
            for (size_t j = 0; j < pv.size(); ++j) {
                m[i][j] = b1 * m[i][j] + (1.0 - b1) * gv[j];
                v[i][j] = b2 * v[i][j] + (1.0 - b2) * gv[j] * gv[j];
                pv[j] -= lr * (m[i][j] / c1) / (std::sqrt(v[i][j] / c2) + eps);
            }
        }
    }
};

// ---- meta training ----

// The two batches a task contributes to one meta step.
struct TaskData {
    TaskBatch adapt;  // D_i, for the inner update(s)
    TaskBatch meta;   // D'_i, for the meta loss
};

// Draws the channels and batches of meta iteration `iter` (streams depend
// only on seed, iteration and slot, never on thread schedule).
inline std::vector<TaskData> sample_meta_batches(const ChannelTaskSet& tasks,
                                                 const MetaConfig& cfg, const DecoderModel& model,
                                                 std::uint64_t seed, int iter) {
    std::vector<TaskData> out(cfg.P);
    for (int i = 0; i < cfg.P; ++i) {
        Rng pick(seed, Rng::derive({detail::kPick, static_cast<std::uint64_t>(iter),
                                    static_cast<std::uint64_t>(i)}));
        const ChannelTask& task =
            tasks.tasks[pick.below(static_cast<std::uint64_t>(tasks.tasks.size()))];

        Rng inner_rng(seed, Rng::derive({detail::kInner, static_cast<std::uint64_t>(iter),
                                         static_cast<std::uint64_t>(i)}));
        double snr_a = task.snr_lo + (task.snr_hi - task.snr_lo) * inner_rng.uniform();
        out[i].adapt =
            sample_task_batch(model, channel::at_snr(task.spec, snr_a), cfg.B, inner_rng);

        Rng meta_rng(seed, Rng::derive({detail::kMeta, static_cast<std::uint64_t>(iter),
                                        static_cast<std::uint64_t>(i)}));
        double snr_m = task.snr_lo + (task.snr_hi - task.snr_lo) * meta_rng.uniform();
        out[i].meta = sample_task_batch(model, channel::at_snr(task.spec, snr_m), cfg.B, meta_rng);
    }
    return out;
}

// Meta gradient of sum_i L(theta'_i; D'_i) with respect to theta, where
// theta'_i results from inner_steps gradient steps on D_i. Exact through the
// inner steps when second_order; first-order detaches them. Returns the
// summed meta loss and the gradient.
inline std::pair<double, neural::DecoderParams> meta_gradient(const neural::DecoderParams& theta,
                                                              const std::vector<TaskData>& data,
                                                              const MetaConfig& cfg,
                                                              const DecoderModel& model) {
    const int P = static_cast<int>(data.size());
    std::vector<double> losses(P, 0.0);
    std::vector<neural::DecoderParams> grads(P);

    parallel_for(P, cfg.workers, [&](int i) {
        auto leaves = neural::lift(theta, true);
        std::vector<ad::Tensor> adapted = leaves;
        for (int s = 0; s < cfg.inner_steps; ++s) {
            ad::Tensor inner = batch_loss(adapted, theta, model, data[i].adapt);
            auto gs = ad::grad(inner, adapted, /*create_graph=*/cfg.second_order);
            for (size_t j = 0; j < adapted.size(); ++j) {
                ad::Tensor gj = cfg.second_order ? gs[j] : gs[j].detach();
                adapted[j] = ad::sub(adapted[j], ad::scale(gj, cfg.alpha));
            }
        }
        ad::Tensor meta_loss = batch_loss(adapted, theta, model, data[i].meta);
        losses[i] = meta_loss.item();
        grads[i] = neural::materialize(theta, ad::grad(meta_loss, leaves, false));
    });

    double total = 0.0;
    neural::DecoderParams g = grads[0];
    total += losses[0];
    for (int i = 1; i < P; ++i) {
        g.axpy(1.0, grads[i]);
        total += losses[i];
    }
    return {total, g};
}

// Value of the composed objective sum_i L(theta'_i(theta); D'_i); the
// independent quantity finite-difference checks differentiate.
inline double meta_objective(const neural::DecoderParams& theta, const std::vector<TaskData>& data,
                             const MetaConfig& cfg, const DecoderModel& model) {
    double total = 0.0;
    for (const auto& td : data) {
        auto leaves = neural::lift(theta, true);
        std::vector<ad::Tensor> adapted = leaves;
        for (int s = 0; s < cfg.inner_steps; ++s) {
            ad::Tensor inner = batch_loss(adapted, theta, model, td.adapt);
            auto gs = ad::grad(inner, adapted, false);
            for (size_t j = 0; j < adapted.size(); ++j)
                adapted[j] = ad::sub(adapted[j], ad::scale(gs[j].detach(), cfg.alpha));
        }
        ad::NoGradGuard off;
        total += batch_loss(adapted, theta, model, td.meta).item();
    }
    return total;
}

struct TrainResult {
    neural::DecoderParams params;
    std::vector<double> losses;  // per-iteration training loss
};

// Algorithm "meta-training phase": returns the meta-trained initialization.
inline TrainResult maml_meta_train(const neural::DecoderParams& init, const ChannelTaskSet& tasks,
                                   const MetaConfig& cfg, const DecoderModel& model,
                                   std::uint64_t seed) {
    cfg.validate();
    tasks.validate();
    require(init.finite(), "maml_meta_train: non-finite initial parameters");

    TrainResult res;
    res.params = init;
    res.losses.reserve(cfg.meta_iterations);
    Adam adam;
    adam.lr = cfg.beta;
    for (int iter = 0; iter < cfg.meta_iterations; ++iter) {
        auto data = sample_meta_batches(tasks, cfg, model, seed, iter);
        auto [loss, g] = meta_gradient(res.params, data, cfg, model);
        if (!std::isfinite(loss))
            throw std::runtime_error("maml_meta_train: non-finite loss at iteration " +
                                     std::to_string(iter));
        if (cfg.adam)
            adam.step(res.params, g);
        else
            sgd_step(res.params, g, cfg.beta);
        res.losses.push_back(loss);
    }
    return res;
}

// Multi-task baseline: one gradient step per iteration on a batch from a
// uniformly drawn channel. Uses the slot-0 channel-pick and meta-batch
// streams, which is what makes the alpha = 0 MAML collapse exact.
inline TrainResult mtl_train(const neural::DecoderParams& init, const ChannelTaskSet& tasks,
                             double lr, int iterations, int B, const DecoderModel& model,
                             std::uint64_t seed, bool adam_update = false) {
    tasks.validate();
    require(lr > 0.0 && iterations >= 0 && B >= 1, "mtl_train: bad config");
    require(init.finite(), "mtl_train: non-finite initial parameters");

    TrainResult res;
    res.params = init;
    res.losses.reserve(iterations);
    Adam adam;
    adam.lr = lr;
    for (int iter = 0; iter < iterations; ++iter) {
        Rng pick(seed, Rng::derive({detail::kPick, static_cast<std::uint64_t>(iter), 0}));
        const ChannelTask& task =
            tasks.tasks[pick.below(static_cast<std::uint64_t>(tasks.tasks.size()))];
        Rng rng(seed, Rng::derive({detail::kMeta, static_cast<std::uint64_t>(iter), 0}));
        double snr = task.snr_lo + (task.snr_hi - task.snr_lo) * rng.uniform();
        TaskBatch batch = sample_task_batch(model, channel::at_snr(task.spec, snr), B, rng);
        auto [loss, g] = plain_gradient(res.params, model, batch);
        if (!std::isfinite(loss))
            throw std::runtime_error("mtl_train: non-finite loss at iteration " +
                                     std::to_string(iter));
        if (adam_update)
            adam.step(res.params, g);
        else
            sgd_step(res.params, g, lr);
        res.losses.push_back(loss);
    }
    return res;
}

// Supervised pretraining of the N-BCJR block: regression of the block output
// toward classical log-MAP posteriors on AWGN (clamped like the turbo loop).
// The turbo meta/mtl training stages start from these weights.
inline TrainResult pretrain_nbcjr(const neural::DecoderParams& init, const DecoderModel& model,
                                  int iterations, int B, double lr, double snr_lo, double snr_hi,
                                  std::uint64_t seed, bool adam_update = true) {
    require(model.turbo, "pretrain_nbcjr: needs a turbo decoder model");
    const int L = model.code.block_length;
    TrainResult res;
    res.params = init;
    Adam adam;
    adam.lr = lr;
    for (int iter = 0; iter < iterations; ++iter) {
        Rng rng(seed, Rng::derive({detail::kInner, static_cast<std::uint64_t>(iter), 77}));
        double snr = snr_lo + (snr_hi - snr_lo) * rng.uniform();
        channel::ChannelSpec ch;
        ch.sigma = channel::snr_to_sigma(snr);

        neural::BatchInputs in = neural::BatchInputs::zeros(B, L, 3);
        std::vector<double> targets(static_cast<size_t>(B) * L);
        for (int b = 0; b < B; ++b) {
            codec::MessageBlock msg = codec::random_message(L, rng);
            Mat x = codec::bpsk_modulate(codec::turbo_encode(msg, model.code, model.il));
            Mat y = channel::transmit(x, ch, rng).symbols;
            classical::LlrBlock sys(L), par(L), prior(L, 0.0);
            double c = 2.0 / (ch.sigma * ch.sigma);
            for (int t = 0; t < L; ++t) {
                sys[t] = c * y.at(t, 0);
                par[t] = c * y.at(t, 1);
                in.at(b, t, 0) = y.at(t, 0);
                in.at(b, t, 1) = y.at(t, 1);
            }
            classical::LlrBlock post = classical::bcjr_decode(sys, par, prior, model.code);
            for (int t = 0; t < L; ++t)
                targets[static_cast<size_t>(b) * L + t] =
                    std::clamp(post[t], -classical::kLlrClamp, classical::kLlrClamp);
        }

        auto ts = neural::lift(res.params, true);
        ad::Tensor out = neural::nbcjr_forward(ts, res.params, in);
        ad::Tensor l = ad::mse_loss(out, ad::Tensor::from(std::move(targets), B, L));
        auto gs = ad::grad(l, ts, false);
        neural::DecoderParams g = neural::materialize(res.params, gs);
        if (!std::isfinite(l.item()))
            throw std::runtime_error("pretrain_nbcjr: non-finite loss at iteration " +
                                     std::to_string(iter));
        if (adam_update)
            adam.step(res.params, g);
        else
            sgd_step(res.params, g, lr);
        res.losses.push_back(l.item());
    }
    return res;
}

struct AdaptResult {
    neural::DecoderParams params;
    int pilot_pairs = 0;  // exactly K * B
    std::vector<double> losses;
};

// Algorithm "meta-testing phase": K plain gradient steps on fresh pilot
// batches from the deployed channel (sigma already set on `spec`). The input
// theta is left untouched; K = 0 returns it unchanged.
inline AdaptResult mind_adapt(const neural::DecoderParams& theta,
                              const channel::ChannelSpec& spec, const AdaptConfig& cfg,
                              const DecoderModel& model, std::uint64_t seed) {
    cfg.validate();
    require(theta.finite(), "mind_adapt: non-finite parameters");

    AdaptResult res;
    res.params = theta;
    Mat frozen_h;
    bool use_frozen = spec.fading && model.freeze_fading;
    if (use_frozen) {
        Rng hr(seed, Rng::derive({detail::kAdaptFade}));
        frozen_h = channel::sample_fading(model.code.block_length, model.codeword_cols(), hr);
    }
    for (int k = 0; k < cfg.K; ++k) {
        Rng rng(seed, Rng::derive({detail::kAdapt, static_cast<std::uint64_t>(k)}));
        TaskBatch batch =
            sample_task_batch(model, spec, cfg.B, rng, use_frozen ? &frozen_h : nullptr);
        auto [loss, g] = plain_gradient(res.params, model, batch);
        if (!std::isfinite(loss))
            throw std::runtime_error("mind_adapt: non-finite loss at step " + std::to_string(k));
        sgd_step(res.params, g, cfg.alpha);
        res.pilot_pairs += batch.pairs;
        res.losses.push_back(loss);
    }
    return res;
}

}  // namespace mind::meta
