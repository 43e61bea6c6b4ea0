// mindsim: channel-coding workbench CLI.
//
// Subcommands:
//   meta-train    meta-train a neural decoder across the configured channels
//   mtl-train     train the multi-task baseline
//   adapt         K-step adaptation of a checkpoint to the test channels
//   evaluate      run the full experiment pipeline from a config
//   sweep         hyperparameter study along --axis {B, K, alpha}
//   plot          re-render SVG plots from a results CSV
//   oracle-check  classical decoders vs exhaustive oracles
//
// Every run writes a manifest.json next to its outputs; re-running a manifest
// with --sequential reproduces the CSV byte for byte.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mind/harness.hpp"

using namespace mind;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool sequential = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* c = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
    if (config_required) c->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "master seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_flag("--sequential", args.sequential,
                  "bitwise-reproducible single-thread reference mode");
}

harness::ExperimentConfig load(const CommonArgs& args) {
    harness::ExperimentConfig cfg = harness::load_config(args.config_path);
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    if (args.seed_set) cfg.seed = args.seed;
    if (args.sequential) cfg.sequential = true;
    return cfg;
}

int run_training(const CommonArgs& args, const std::string& mode) {
    harness::ExperimentConfig cfg = load(args);
    cfg.training.mode = mode;
    require(cfg.is_neural(), mode + " needs a neural decoder config");
    require(!cfg.train_channels.tasks.empty(), mode + " needs train_channels");
    std::filesystem::create_directories(cfg.output_dir);

    std::vector<double> losses;
    auto params = harness::prepare_params(cfg, &losses);
    std::string ckpt = cfg.output_dir + "/checkpoint.json";
    neural::save_checkpoint(*params, ckpt);

    nlohmann::json m;
    m["config"] = harness::config_to_json(cfg);
    m["format_version"] = 1;
    std::ofstream mf(cfg.output_dir + "/manifest.json");
    mf << m.dump(2) << "\n";

    std::ofstream lf(cfg.output_dir + "/training_loss.csv");
    lf << "iteration,loss\n";
    for (size_t i = 0; i < losses.size(); ++i) lf << i << "," << losses[i] << "\n";

    std::printf("%s: %zu iterations, %zu parameters -> %s\n", mode.c_str(), losses.size(),
                params->count(), ckpt.c_str());
    if (!losses.empty())
        std::printf("loss: first %.4f last %.4f\n", losses.front(), losses.back());
    return 0;
}

int run_adapt(const CommonArgs& args) {
    harness::ExperimentConfig cfg = load(args);
    require(cfg.is_neural(), "adapt needs a neural decoder config");
    require(!cfg.checkpoint.empty(), "adapt needs a checkpoint in the config");
    std::filesystem::create_directories(cfg.output_dir);

    neural::DecoderParams params = neural::load_checkpoint(cfg.checkpoint);
    meta::DecoderModel model = cfg.model();
    std::vector<meta::AdaptConfig> adapts = cfg.adaptation;
    if (adapts.empty()) adapts.push_back(meta::AdaptConfig{});

    nlohmann::json report = nlohmann::json::array();
    for (size_t ci = 0; ci < cfg.test_channels.tasks.size(); ++ci) {
        const auto& family = cfg.test_channels.tasks[ci].spec;
        for (size_t ai = 0; ai < adapts.size(); ++ai) {
            const auto& ac = adapts[ai];
            channel::ChannelSpec spec = channel::at_snr(family, cfg.adaptation_snr());
            std::uint64_t aseed = Rng::derive({cfg.seed, 0xADull, ci, ai});
            meta::AdaptResult ar = meta::mind_adapt(params, spec, ac, model, aseed);
            std::string name = cfg.output_dir + "/adapted_" + family.id() + "_K" +
                               std::to_string(ac.K) + ".json";
            neural::save_checkpoint(ar.params, name);
            report.push_back({{"channel", family.id()},
                              {"K", ac.K},
                              {"B", ac.B},
                              {"alpha", ac.alpha},
                              {"pilot_pairs", ar.pilot_pairs},
                              {"checkpoint", name}});
            std::printf("adapted %s K=%d (pilot pairs: %d) -> %s\n", family.id().c_str(), ac.K,
                        ar.pilot_pairs, name.c_str());
        }
    }
    std::ofstream rf(cfg.output_dir + "/adapt_report.json");
    rf << report.dump(2) << "\n";
    return 0;
}

int run_evaluate(const CommonArgs& args) {
    harness::ExperimentConfig cfg = load(args);
    harness::ExperimentOutput out = harness::run_experiment(cfg);
    std::printf("%zu result rows -> %s\n", out.results.size(), out.csv_path.c_str());
    for (const auto& r : out.results)
        std::printf("  %-14s %-22s K=%-2d %5.1f dB  ber %.3e (ci %.1e)\n", r.decoder.c_str(),
                    r.channel.c_str(), r.K, r.snr_db, r.ber, r.ci95);
    return 0;
}

int run_sweep(const CommonArgs& args, const std::string& axis, std::vector<double> values) {
    harness::ExperimentConfig cfg = load(args);
    if (values.empty()) {
        if (axis == "B")
            values = {1, 100};
        else if (axis == "K")
            values = {0, 1, 10};
        else
            values = {0.001, 0.005};
    }
    auto rows = harness::hyperparam_sweep(cfg, axis, values);
    std::printf("sweep over %s: %zu rows -> %s/sweep_results.csv\n", axis.c_str(), rows.size(),
                cfg.output_dir.c_str());
    return 0;
}

int run_plot(const std::string& csv_path, const std::string& out_dir) {
    std::ifstream f(csv_path);
    require(f.good(), "plot: cannot open " + csv_path);
    std::string line;
    std::getline(f, line);
    require(line == harness::csv_header(), "plot: unexpected CSV header");
    std::vector<harness::EvalResult> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        harness::EvalResult r;
        std::getline(ss, r.decoder, ',');
        std::getline(ss, r.channel, ',');
        std::getline(ss, tok, ',');
        r.K = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.snr_db = std::stod(tok);
        std::getline(ss, tok, ',');
        r.bits = std::stol(tok);
        std::getline(ss, tok, ',');
        r.bit_errors = std::stol(tok);
        std::getline(ss, tok, ',');
        r.blocks = std::stol(tok);
        std::getline(ss, tok, ',');
        r.block_errors = std::stol(tok);
        std::getline(ss, tok, ',');
        r.ber = std::stod(tok);
        std::getline(ss, tok, ',');
        r.bler = std::stod(tok);
        rows.push_back(r);
    }
    std::filesystem::create_directories(out_dir);
    harness::write_plots(out_dir, rows);
    std::printf("plots written to %s\n", out_dir.c_str());
    return 0;
}

int run_oracle_check() {
    using codec::CodeSpec;
    using codec::MessageBlock;
    CodeSpec spec;
    Rng rng(20240601, 0);
    int checked = 0, mismatches = 0;
    for (double sigma : {0.5, 1.0}) {
        channel::ChannelSpec ch;
        ch.sigma = sigma;
        for (int i = 0; i < 500; ++i) {
            MessageBlock msg = codec::random_message(8, rng);
            Mat y = channel::transmit(codec::bpsk_modulate(codec::rsc_encode(msg, spec)), ch, rng)
                        .symbols;
            if (classical::viterbi_decode(y, sigma, spec) !=
                classical::brute_force_ml(y, sigma, spec))
                ++mismatches;
            ++checked;
        }
    }
    std::printf("[%s] viterbi == brute-force ML on %d blocks (%d mismatches)\n",
                mismatches == 0 ? "PASS" : "FAIL", checked, mismatches);

    double max_dev = 0.0;
    channel::ChannelSpec ch;
    ch.sigma = 1.0;
    for (int i = 0; i < 100; ++i) {
        MessageBlock msg = codec::random_message(6, rng);
        Mat y = channel::transmit(codec::bpsk_modulate(codec::rsc_encode(msg, spec)), ch, rng)
                    .symbols;
        Mat llr = codec::bpsk_llr(y, 1.0);
        classical::LlrBlock sys(6), par(6), prior(6, 0.0);
        for (int k = 0; k < 6; ++k) {
            sys[k] = llr.at(k, 0);
            par[k] = llr.at(k, 1);
        }
        auto post = classical::bcjr_decode(sys, par, prior, spec);
        auto oracle = classical::brute_force_map_bits(y, 1.0, spec);
        for (int k = 0; k < 6; ++k) max_dev = std::max(max_dev, std::abs(post[k] - oracle[k]));
    }
    bool bcjr_ok = max_dev <= 1e-6;
    std::printf("[%s] bcjr == exhaustive MAP marginals (max |dLLR| = %.2e)\n",
                bcjr_ok ? "PASS" : "FAIL", max_dev);
    return (mismatches == 0 && bcjr_ok) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mindsim: neural decoder meta-learning workbench"};
    app.require_subcommand(1);

    CommonArgs meta_args, mtl_args, adapt_args, eval_args, sweep_args;
    std::string sweep_axis = "K";
    std::vector<double> sweep_values;
    std::string plot_csv, plot_out = "plots";

    add_common(app.add_subcommand("meta-train", "meta-train a neural decoder"), meta_args);
    add_common(app.add_subcommand("mtl-train", "train the multi-task baseline"), mtl_args);
    add_common(app.add_subcommand("adapt", "K-step adaptation of a checkpoint"), adapt_args);
    add_common(app.add_subcommand("evaluate", "run the experiment pipeline"), eval_args);
    auto* sweep = app.add_subcommand("sweep", "hyperparameter study");
    add_common(sweep, sweep_args);
    sweep->add_option("--axis", sweep_axis, "B, K or alpha")->required();
    sweep->add_option("--values", sweep_values, "axis values");
    auto* plot_cmd = app.add_subcommand("plot", "render plots from a results CSV");
    plot_cmd->add_option("--csv", plot_csv, "results CSV")->required();
    plot_cmd->add_option("--out", plot_out, "output directory");
    app.add_subcommand("oracle-check", "classical decoders vs exhaustive oracles");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("meta-train")) return run_training(meta_args, "maml");
        if (app.got_subcommand("mtl-train")) return run_training(mtl_args, "mtl");
        if (app.got_subcommand("adapt")) return run_adapt(adapt_args);
        if (app.got_subcommand("evaluate")) return run_evaluate(eval_args);
        if (app.got_subcommand("sweep")) return run_sweep(sweep_args, sweep_axis, sweep_values);
        if (app.got_subcommand("plot")) return run_plot(plot_csv, plot_out);
        if (app.got_subcommand("oracle-check")) return run_oracle_check();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
