#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "t2m/cli/experiment.hpp"
#include "t2m/core/errors.hpp"

namespace {

struct CommonFlags {
    bool force = false;
    bool print_config = false;
};

// Every subcommand accepts the full experiment configuration, either from a
// config file ([section] key=value) or as --section.key flags; flags win.
void add_config_options(CLI::App* sub, t2m::cli::ExperimentConfig& cfg, CommonFlags& flags) {
    sub->set_config("--config", "", "Experiment config file (INI sections)");
    sub->add_flag("--force", flags.force, "Overwrite existing outputs");
    sub->add_flag("--print-config", flags.print_config,
                  "Print the resolved configuration and exit");
    sub->add_option("--seed", cfg.seed, "Run seed; every stage derives from it");
    sub->add_option("--preset", cfg.preset,
                    "Ablation preset: baseline_vq, baseline_rvq, plus_vp, plus_ns");

    sub->add_option("--corpus.n_samples", cfg.corpus.n_samples);
    sub->add_option("--corpus.feature_dim", cfg.corpus.feature_dim);
    sub->add_option("--corpus.t_min", cfg.corpus.t_min);
    sub->add_option("--corpus.t_max", cfg.corpus.t_max);
    sub->add_option("--corpus.described_prob", cfg.corpus.described_prob);
    sub->add_option("--corpus.holdout_fraction", cfg.corpus.holdout_fraction);
    sub->add_option("--corpus.frame_rate", cfg.corpus.frame_rate);

    sub->add_option("--rvq.codebook_size", cfg.rvq.codebook_size);
    sub->add_option("--rvq.code_dim", cfg.rvq.code_dim);
    sub->add_option("--rvq.downsample", cfg.rvq.downsample);
    sub->add_option("--rvq.num_layers", cfg.rvq.num_layers);
    sub->add_option("--rvq.beta", cfg.rvq.beta);
    sub->add_option("--rvq.ema_decay", cfg.rvq.ema_decay);
    sub->add_option("--rvq.reset_threshold", cfg.rvq.reset_threshold);
    sub->add_option("--rvq.reset_window", cfg.rvq.reset_window);
    sub->add_option("--rvq.channels", cfg.rvq.channels);
    sub->add_option("--rvq.lr", cfg.rvq.lr);
    sub->add_option("--rvq.lr_min", cfg.rvq.lr_min);
    sub->add_option("--rvq.batch_size", cfg.rvq.batch_size);
    sub->add_option("--rvq.epochs", cfg.rvq.epochs);
    sub->add_option("--rvq.warmup_epochs", cfg.rvq.warmup_epochs);

    sub->add_option("--predictor.width", cfg.predictor.width);
    sub->add_option("--predictor.heads", cfg.predictor.heads);
    sub->add_option("--predictor.ffn_dim", cfg.predictor.ffn_dim);
    sub->add_option("--predictor.blocks", cfg.predictor.blocks);
    sub->add_option("--predictor.signal_dim", cfg.predictor.signal_dim);
    sub->add_option("--predictor.latent_dim", cfg.predictor.latent_dim);
    sub->add_option("--predictor.code_mlp_blocks", cfg.predictor.code_mlp_blocks);
    sub->add_option("--predictor.residual_blocks", cfg.predictor.residual_blocks);
    sub->add_option("--predictor.p_noise", cfg.predictor.p_noise);
    sub->add_option("--predictor.lambda_kl", cfg.predictor.lambda_kl);
    sub->add_option("--predictor.variational", cfg.predictor.variational);
    sub->add_option("--predictor.lr", cfg.predictor.lr);
    sub->add_option("--predictor.batch_size", cfg.predictor.batch_size);
    sub->add_option("--predictor.epochs", cfg.predictor.epochs);

    sub->add_option("--extractor.hidden", cfg.extractor.hidden);
    sub->add_option("--extractor.feature_dim", cfg.extractor.feature_dim);
    sub->add_option("--extractor.temperature", cfg.extractor.temperature);
    sub->add_option("--extractor.lr", cfg.extractor.lr);
    sub->add_option("--extractor.batch_size", cfg.extractor.batch_size);
    sub->add_option("--extractor.epochs", cfg.extractor.epochs);

    sub->add_option("--generate.w", cfg.generate.w);
    sub->add_option("--generate.decode_steps", cfg.generate.decode_steps);

    sub->add_option("--eval.repeats", cfg.eval.repeats);
    sub->add_option("--eval.pool_size", cfg.eval.pool_size);
    sub->add_option("--eval.caption_cap", cfg.eval.caption_cap);
    sub->add_option("--eval.mm_captions", cfg.eval.mm_captions);
}

void print_report(const t2m::evalsuite::EvalReport& r) {
    const auto line = [](const char* name, const t2m::evalsuite::MetricStat& s) {
        std::cout << "  " << name << ": " << s.mean << " +/- " << s.ci << "\n";
    };
    line("Top-1", r.top1);
    line("Top-2", r.top2);
    line("Top-3", r.top3);
    line("FID", r.fid_score);
    line("MM-Dist", r.matching_dist);
    line("MultiModality", r.multimodality_score);
    std::cout << "  repeats: " << r.repeats << (r.single_repeat ? " (single repeat)" : "")
              << "\n  fingerprint: " << r.fingerprint << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage text-to-motion pipeline on a synthetic corpus: residual-VQ codec, "
                 "noise-and-text-conditioned masked code predictor, guided generation, and the "
                 "repeated-evaluation metric suite"};
    app.require_subcommand(1);

    t2m::cli::ExperimentConfig cfg;
    CommonFlags flags;

    std::string data_dir, rvq_dir, pred_dir, eval_dir, out_dir;
    t2m::cli::GenerateArgs gen_args;
    std::string gen_length = "auto";
    std::vector<double> w_list{0, 1, 2, 3, 4, 5};
    std::vector<std::string> presets{"baseline_vq", "baseline_rvq", "plus_vp", "plus_ns"};
    double eval_w = -1.0;
    int eval_repeats = -1;

    auto* c_gen_data = app.add_subcommand("gen-data", "Generate the synthetic corpus");
    c_gen_data->add_option("--out", out_dir, "Dataset output directory")->required();
    add_config_options(c_gen_data, cfg, flags);

    auto* c_train_rvq = app.add_subcommand("train-rvq", "Train the residual-VQ motion codec");
    c_train_rvq->add_option("--data", data_dir, "Dataset directory")->required();
    c_train_rvq->add_option("--out", out_dir, "Checkpoint output directory")->required();
    add_config_options(c_train_rvq, cfg, flags);

    auto* c_train_pred =
        app.add_subcommand("train-predictor", "Train the masked code predictor");
    c_train_pred->add_option("--data", data_dir, "Dataset directory")->required();
    c_train_pred->add_option("--rvq", rvq_dir, "Trained codec checkpoint")->required();
    c_train_pred->add_option("--out", out_dir, "Checkpoint output directory")->required();
    add_config_options(c_train_pred, cfg, flags);

    auto* c_train_eval =
        app.add_subcommand("train-eval", "Train the contrastive evaluation extractor");
    c_train_eval->add_option("--data", data_dir, "Dataset directory")->required();
    c_train_eval->add_option("--out", out_dir, "Checkpoint output directory")->required();
    add_config_options(c_train_eval, cfg, flags);

    auto* c_generate = app.add_subcommand("generate", "Generate motions for a caption");
    c_generate->add_option("--rvq", rvq_dir, "Trained codec checkpoint")->required();
    c_generate->add_option("--predictor", pred_dir, "Trained predictor checkpoint")->required();
    c_generate->add_option("--caption", gen_args.caption, "Caption text")->required();
    c_generate->add_option("--out", out_dir, "Export directory")->required();
    auto* opt_w = c_generate->add_option("--w", gen_args.w, "Guidance weight");
    c_generate->add_option("--length", gen_length, "Frames, or 'auto'");
    auto* opt_steps =
        c_generate->add_option("--decode-steps", gen_args.decode_steps, "Decoding steps");
    c_generate->add_option("--gen-seed", gen_args.seed, "Generation seed");
    c_generate->add_option("--count", gen_args.count, "Number of motions");
    add_config_options(c_generate, cfg, flags);

    auto* c_evaluate = app.add_subcommand("evaluate", "Run the full metric protocol");
    c_evaluate->add_option("--data", data_dir, "Dataset directory")->required();
    c_evaluate->add_option("--rvq", rvq_dir, "Trained codec checkpoint")->required();
    c_evaluate->add_option("--predictor", pred_dir, "Trained predictor checkpoint")->required();
    c_evaluate->add_option("--eval", eval_dir, "Trained extractor checkpoint")->required();
    c_evaluate->add_option("--out", out_dir, "Report output directory")->required();
    c_evaluate->add_option("--w", eval_w, "Guidance weight (default from [generate])");
    c_evaluate->add_option("--repeats", eval_repeats, "Evaluation repeats (default 20)");
    add_config_options(c_evaluate, cfg, flags);

    auto* c_sweep = app.add_subcommand("sweep", "Evaluate across guidance weights");
    c_sweep->add_option("--data", data_dir, "Dataset directory")->required();
    c_sweep->add_option("--rvq", rvq_dir, "Trained codec checkpoint")->required();
    c_sweep->add_option("--predictor", pred_dir, "Trained predictor checkpoint")->required();
    c_sweep->add_option("--eval", eval_dir, "Trained extractor checkpoint")->required();
    c_sweep->add_option("--out", out_dir, "Sweep output directory")->required();
    c_sweep->add_option("--w-list", w_list, "Guidance weights")->delimiter(',');
    add_config_options(c_sweep, cfg, flags);

    auto* c_ablate = app.add_subcommand("ablate", "Train and evaluate ablation presets");
    c_ablate->add_option("--data", data_dir, "Dataset directory")->required();
    c_ablate->add_option("--out", out_dir, "Ablation output directory")->required();
    c_ablate->add_option("--presets", presets, "Preset list")->delimiter(',');
    add_config_options(c_ablate, cfg, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        t2m::cli::apply_preset(cfg);
        auto resolved = t2m::cli::with_stage_seeds(cfg);
        if (flags.print_config) {
            std::cout << t2m::cli::dump_ini(resolved);
            return 0;
        }

        if (c_gen_data->parsed()) {
            auto ds = t2m::cli::cmd_gen_data(resolved, out_dir, flags.force);
            std::cout << "dataset: " << ds.samples.size() << " samples ("
                      << ds.train_indices.size() << " train, " << ds.heldout_indices.size()
                      << " held out) -> " << out_dir << "\n";
        } else if (c_train_rvq->parsed()) {
            t2m::cli::cmd_train_rvq(resolved, data_dir, out_dir, flags.force);
            std::cout << "rvq checkpoint -> " << out_dir << "\n";
        } else if (c_train_pred->parsed()) {
            t2m::cli::cmd_train_predictor(resolved, data_dir, rvq_dir, out_dir, flags.force);
            std::cout << "predictor checkpoint -> " << out_dir << "\n";
        } else if (c_train_eval->parsed()) {
            t2m::cli::cmd_train_eval(resolved, data_dir, out_dir, flags.force);
            std::cout << "extractor checkpoint -> " << out_dir << "\n";
        } else if (c_generate->parsed()) {
            if (!*opt_w) gen_args.w = resolved.generate.w;
            if (!*opt_steps) gen_args.decode_steps = resolved.generate.decode_steps;
            if (gen_length == "auto") {
                gen_args.length = -1;
            } else {
                try {
                    gen_args.length = std::stoi(gen_length);
                } catch (const std::exception&) {
                    throw t2m::ConfigError("--length expects a frame count or 'auto'");
                }
            }
            t2m::cli::cmd_generate(resolved, rvq_dir, pred_dir, gen_args, out_dir, flags.force);
            std::cout << gen_args.count << " generation(s) -> " << out_dir << "\n";
        } else if (c_evaluate->parsed()) {
            auto run = resolved;
            if (eval_repeats >= 0) run.eval.repeats = eval_repeats;
            double w = eval_w >= 0 ? eval_w : run.generate.w;
            auto report = t2m::cli::cmd_evaluate(run, data_dir, rvq_dir, pred_dir, eval_dir, w,
                                                 out_dir, flags.force);
            std::cout << "evaluation (w=" << w << ") -> " << out_dir << "\n";
            print_report(report);
        } else if (c_sweep->parsed()) {
            auto reports = t2m::cli::cmd_sweep(resolved, data_dir, rvq_dir, pred_dir, eval_dir,
                                               w_list, out_dir, flags.force);
            std::cout << "sweep over " << reports.size() << " w values -> " << out_dir
                      << "/sweep.csv\n";
        } else if (c_ablate->parsed()) {
            auto rows = t2m::cli::cmd_ablate(resolved, data_dir, presets, out_dir, flags.force);
            std::cout << t2m::cli::format_ablate_table(rows);
        }
        return 0;
    } catch (const t2m::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const t2m::PrerequisiteError& e) {
        std::cerr << "prerequisite error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
