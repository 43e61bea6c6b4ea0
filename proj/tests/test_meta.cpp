#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mind/meta.hpp"

using namespace mind;
using namespace mind::meta;
using neural::DecoderParams;

namespace {

DecoderModel tiny_model(int L = 8) {
    DecoderModel m;
    m.code.block_length = L;
    m.il = codec::make_interleaver(L, 3);
    return m;
}

DecoderParams tiny_params(std::uint64_t seed, int width = 2) {
    neural::ArchitectureConfig arch;
    arch.num_layers = 1;
    arch.hidden_units = 4;
    arch.input_width = width;
    Rng rng(seed, 0);
    return neural::init_params(arch, rng);
}

ChannelTaskSet awgn_tasks() {
    ChannelTaskSet ts;
    ChannelTask t;
    t.snr_lo = 0.0;
    t.snr_hi = 2.0;
    ts.tasks.push_back(t);
    return ts;
}

std::vector<double> flatten(const DecoderParams& p) {
    std::vector<double> f;
    for (const auto& e : p.entries) f.insert(f.end(), e.value.begin(), e.value.end());
    return f;
}

DecoderParams unflatten(const DecoderParams& like, const std::vector<double>& f) {
    DecoderParams p = like;
    size_t off = 0;
    for (auto& e : p.entries) {
        std::copy(f.begin() + off, f.begin() + off + e.value.size(), e.value.begin());
        off += e.value.size();
    }
    return p;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(1e-12, std::sqrt(den));
}

}  // namespace

TEST_CASE("mind_adapt: K=0 returns theta unchanged, bitwise") {
    DecoderModel model = tiny_model();
    DecoderParams theta = tiny_params(1);
    channel::ChannelSpec ch;
    ch.sigma = 0.7;
    AdaptConfig cfg;
    cfg.K = 0;
    AdaptResult r = mind_adapt(theta, ch, cfg, model, 42);
    CHECK(r.pilot_pairs == 0);
    for (size_t i = 0; i < theta.entries.size(); ++i)
        CHECK(r.params.entries[i].value == theta.entries[i].value);
}

TEST_CASE("mind_adapt: K=1 is exactly one explicit gradient step") {
    DecoderModel model = tiny_model();
    DecoderParams theta = tiny_params(2);
    channel::ChannelSpec ch;
    ch.sigma = 0.9;
    AdaptConfig cfg;
    cfg.K = 1;
    cfg.B = 6;
    cfg.alpha = 0.01;
    AdaptResult r = mind_adapt(theta, ch, cfg, model, 43);

    // reproduce the step by hand from the same stream
    Rng rng(43, Rng::derive({meta::detail::kAdapt, 0}));
    TaskBatch batch = sample_task_batch(model, ch, cfg.B, rng);
    auto [loss, g] = plain_gradient(theta, model, batch);
    DecoderParams manual = theta;
    manual.axpy(-cfg.alpha, g);
    for (size_t i = 0; i < manual.entries.size(); ++i)
        CHECK(r.params.entries[i].value == manual.entries[i].value);

    // theta input unmodified
    DecoderParams fresh = tiny_params(2);
    for (size_t i = 0; i < theta.entries.size(); ++i)
        CHECK(theta.entries[i].value == fresh.entries[i].value);
}

TEST_CASE("mind_adapt: pilot budget is exactly K*B and calls are repeatable") {
    DecoderModel model = tiny_model();
    DecoderParams theta = tiny_params(3);
    channel::ChannelSpec ch;
    ch.sigma = 0.8;
    AdaptConfig cfg;
    cfg.K = 5;
    cfg.B = 7;
    AdaptResult a = mind_adapt(theta, ch, cfg, model, 44);
    AdaptResult b = mind_adapt(theta, ch, cfg, model, 44);
    CHECK(a.pilot_pairs == 35);
    CHECK(b.pilot_pairs == 35);
    for (size_t i = 0; i < a.params.entries.size(); ++i)
        CHECK(a.params.entries[i].value == b.params.entries[i].value);
}

TEST_CASE("alpha=0 maml trajectory equals mtl trajectory bitwise") {
    DecoderModel model = tiny_model();
    DecoderParams init = tiny_params(4);
    ChannelTaskSet tasks = awgn_tasks();
    {
        ChannelTask radar;
        radar.spec.kind = channel::ChannelKind::Radar;
        radar.spec.sigma2 = 2.0;
        radar.spec.p = 0.1;
        tasks.tasks.push_back(radar);
    }

    MetaConfig cfg;
    cfg.alpha = 0.0;
    cfg.beta = 0.05;
    cfg.P = 1;
    cfg.B = 4;
    cfg.second_order = false;
    cfg.meta_iterations = 50;

    TrainResult maml = maml_meta_train(init, tasks, cfg, model, 777);
    TrainResult mtl = mtl_train(init, tasks, cfg.beta, 50, cfg.B, model, 777);
    REQUIRE(maml.losses.size() == mtl.losses.size());
    for (size_t i = 0; i < maml.losses.size(); ++i) CHECK(maml.losses[i] == mtl.losses[i]);
    for (size_t i = 0; i < maml.params.entries.size(); ++i)
        CHECK(maml.params.entries[i].value == mtl.params.entries[i].value);
}

TEST_CASE("second-order meta gradient matches finite differences") {
    DecoderModel model = tiny_model(5);
    DecoderParams theta = tiny_params(5);
    ChannelTaskSet tasks = awgn_tasks();
    MetaConfig cfg;
    cfg.alpha = 0.05;
    cfg.P = 1;
    cfg.B = 3;
    cfg.second_order = true;

    auto data = sample_meta_batches(tasks, cfg, model, 99, 0);
    auto [loss, g] = meta_gradient(theta, data, cfg, model);
    CHECK(loss == doctest::Approx(meta_objective(theta, data, cfg, model)).epsilon(1e-12));

    std::vector<double> flat = flatten(theta);
    std::vector<double> fd(flat.size());
    const double eps = 1e-4;
    for (size_t i = 0; i < flat.size(); ++i) {
        double keep = flat[i];
        flat[i] = keep + eps;
        double up = meta_objective(unflatten(theta, flat), data, cfg, model);
        flat[i] = keep - eps;
        double dn = meta_objective(unflatten(theta, flat), data, cfg, model);
        flat[i] = keep;
        fd[i] = (up - dn) / (2.0 * eps);
    }
    CHECK(rel_err(flatten(g), fd) < 1e-3);
}

TEST_CASE("first- and second-order trajectories differ; both losses decrease") {
    DecoderModel model = tiny_model();
    DecoderParams init = tiny_params(6);
    ChannelTaskSet tasks = awgn_tasks();

    MetaConfig cfg;
    cfg.alpha = 0.05;
    cfg.beta = 0.05;
    cfg.P = 2;
    cfg.B = 8;
    cfg.meta_iterations = 200;
    cfg.second_order = true;
    TrainResult so = maml_meta_train(init, tasks, cfg, model, 1234);

    cfg.second_order = false;
    TrainResult fo = maml_meta_train(init, tasks, cfg, model, 1234);

    bool same = true;
    for (size_t i = 0; i < so.params.entries.size() && same; ++i)
        same = so.params.entries[i].value == fo.params.entries[i].value;
    CHECK_FALSE(same);

    auto head_mean = [](const std::vector<double>& v) {
        double s = 0;
        for (size_t i = 0; i < 20; ++i) s += v[i];
        return s / 20.0;
    };
    auto tail_mean = [](const std::vector<double>& v) {
        double s = 0;
        for (size_t i = v.size() - 20; i < v.size(); ++i) s += v[i];
        return s / 20.0;
    };
    CHECK(tail_mean(so.losses) < head_mean(so.losses));
    CHECK(tail_mean(fo.losses) < head_mean(fo.losses));
}

TEST_CASE("mtl_train: iterations=0 identity; loss decreases on one channel") {
    DecoderModel model = tiny_model();
    DecoderParams init = tiny_params(7);
    ChannelTaskSet tasks = awgn_tasks();

    TrainResult id = mtl_train(init, tasks, 0.05, 0, 8, model, 5);
    for (size_t i = 0; i < init.entries.size(); ++i)
        CHECK(id.params.entries[i].value == init.entries[i].value);

    TrainResult tr = mtl_train(init, tasks, 0.05, 500, 8, model, 5);
    double head = 0, tail = 0;
    for (int i = 0; i < 50; ++i) head += tr.losses[i];
    for (size_t i = tr.losses.size() - 50; i < tr.losses.size(); ++i) tail += tr.losses[i];
    CHECK(tail < head);
}

TEST_CASE("meta batches: fresh D' differs from D") {
    DecoderModel model = tiny_model();
    ChannelTaskSet tasks = awgn_tasks();
    MetaConfig cfg;
    cfg.P = 2;
    cfg.B = 3;
    auto data = sample_meta_batches(tasks, cfg, model, 11, 0);
    for (const auto& td : data) {
        CHECK(td.adapt.inputs.x != td.meta.inputs.x);
        CHECK(td.adapt.pairs == 3);
        CHECK(td.meta.pairs == 3);
    }
}

TEST_CASE("turbo model trains end to end (smoke)") {
    DecoderModel model = tiny_model(6);
    model.turbo = true;
    model.turbo_iterations = 2;
    DecoderParams init = tiny_params(8, 3);
    ChannelTaskSet tasks = awgn_tasks();
    TrainResult tr = mtl_train(init, tasks, 0.05, 60, 4, model, 6, /*adam=*/true);
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) head += tr.losses[i];
    for (size_t i = tr.losses.size() - 10; i < tr.losses.size(); ++i) tail += tr.losses[i];
    CHECK(tail < head);
}

TEST_CASE("fading adaptation freezes h when configured") {
    DecoderModel model = tiny_model();
    model.fading_inputs = true;
    model.freeze_fading = true;
    DecoderParams theta = tiny_params(9, 4);
    channel::ChannelSpec ch;
    ch.sigma = 0.5;
    ch.fading = true;

    Rng hr(91, Rng::derive({meta::detail::kAdaptFade}));
    Mat h = channel::sample_fading(model.code.block_length, 2, hr);

    Rng rng(91, Rng::derive({meta::detail::kAdapt, 0}));
    TaskBatch batch = sample_task_batch(model, ch, 3, rng, &h);
    // every block in the batch carries the same h in channels 2..3
    for (int b = 1; b < 3; ++b)
        for (int t = 0; t < model.code.block_length; ++t)
            for (int w = 2; w < 4; ++w)
                CHECK(batch.inputs.at(b, t, w) == batch.inputs.at(0, t, w));

    AdaptConfig cfg;
    cfg.K = 2;
    cfg.B = 3;
    AdaptResult r = mind_adapt(theta, ch, cfg, model, 91);
    CHECK(r.pilot_pairs == 6);
}
