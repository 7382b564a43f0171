#include "t2m/cli/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "t2m/core/binio.hpp"
#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/generator/generator.hpp"
#include "t2m/nn/checkpoint.hpp"
#include "t2m/predictor/train.hpp"
#include "t2m/rvq/train.hpp"
#include "t2m/syndata/caption.hpp"
#include "t2m/syndata/corpus.hpp"
#include "t2m/syndata/dataset_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace t2m::cli {

void apply_preset(ExperimentConfig& cfg) {
    if (cfg.preset.empty()) return;
    if (cfg.preset == "baseline_vq") {
        cfg.rvq.num_layers = 1;
        cfg.predictor.variational = false;
        cfg.predictor.p_noise = 0.0;
    } else if (cfg.preset == "baseline_rvq") {
        cfg.rvq.num_layers = 3;
        cfg.predictor.variational = false;
        cfg.predictor.p_noise = 0.0;
    } else if (cfg.preset == "plus_vp") {
        cfg.rvq.num_layers = 3;
        cfg.predictor.variational = true;
        cfg.predictor.p_noise = 0.0;
    } else if (cfg.preset == "plus_ns") {
        cfg.rvq.num_layers = 3;
        cfg.predictor.variational = true;
        cfg.predictor.p_noise = 0.1;
    } else {
        throw ConfigError("unknown preset '" + cfg.preset +
                          "' (expected baseline_vq, baseline_rvq, plus_vp or plus_ns)");
    }
}

double preset_w(const std::string& preset, double configured_w) {
    if (preset == "plus_ns" || preset.empty()) return configured_w;
    return 0.0;
}

std::string dump_ini(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "[corpus]\n"
        << "n_samples=" << cfg.corpus.n_samples << "\n"
        << "feature_dim=" << cfg.corpus.feature_dim << "\n"
        << "t_min=" << cfg.corpus.t_min << "\n"
        << "t_max=" << cfg.corpus.t_max << "\n"
        << "described_prob=" << cfg.corpus.described_prob << "\n"
        << "holdout_fraction=" << cfg.corpus.holdout_fraction << "\n"
        << "frame_rate=" << cfg.corpus.frame_rate << "\n\n";
    out << "[rvq]\n"
        << "codebook_size=" << cfg.rvq.codebook_size << "\n"
        << "code_dim=" << cfg.rvq.code_dim << "\n"
        << "downsample=" << cfg.rvq.downsample << "\n"
        << "num_layers=" << cfg.rvq.num_layers << "\n"
        << "beta=" << cfg.rvq.beta << "\n"
        << "ema_decay=" << cfg.rvq.ema_decay << "\n"
        << "reset_threshold=" << cfg.rvq.reset_threshold << "\n"
        << "reset_window=" << cfg.rvq.reset_window << "\n"
        << "channels=" << cfg.rvq.channels << "\n"
        << "lr=" << cfg.rvq.lr << "\n"
        << "lr_min=" << cfg.rvq.lr_min << "\n"
        << "batch_size=" << cfg.rvq.batch_size << "\n"
        << "epochs=" << cfg.rvq.epochs << "\n"
        << "warmup_epochs=" << cfg.rvq.warmup_epochs << "\n\n";
    out << "[predictor]\n"
        << "width=" << cfg.predictor.width << "\n"
        << "heads=" << cfg.predictor.heads << "\n"
        << "ffn_dim=" << cfg.predictor.ffn_dim << "\n"
        << "blocks=" << cfg.predictor.blocks << "\n"
        << "signal_dim=" << cfg.predictor.signal_dim << "\n"
        << "latent_dim=" << cfg.predictor.latent_dim << "\n"
        << "code_mlp_blocks=" << cfg.predictor.code_mlp_blocks << "\n"
        << "residual_blocks=" << cfg.predictor.residual_blocks << "\n"
        << "p_noise=" << cfg.predictor.p_noise << "\n"
        << "lambda_kl=" << cfg.predictor.lambda_kl << "\n"
        << "variational=" << (cfg.predictor.variational ? "true" : "false") << "\n"
        << "lr=" << cfg.predictor.lr << "\n"
        << "batch_size=" << cfg.predictor.batch_size << "\n"
        << "epochs=" << cfg.predictor.epochs << "\n\n";
    out << "[extractor]\n"
        << "hidden=" << cfg.extractor.hidden << "\n"
        << "feature_dim=" << cfg.extractor.feature_dim << "\n"
        << "temperature=" << cfg.extractor.temperature << "\n"
        << "lr=" << cfg.extractor.lr << "\n"
        << "batch_size=" << cfg.extractor.batch_size << "\n"
        << "epochs=" << cfg.extractor.epochs << "\n\n";
    out << "[generate]\n"
        << "w=" << cfg.generate.w << "\n"
        << "decode_steps=" << cfg.generate.decode_steps << "\n\n";
    out << "[eval]\n"
        << "repeats=" << cfg.eval.repeats << "\n"
        << "pool_size=" << cfg.eval.pool_size << "\n"
        << "caption_cap=" << cfg.eval.caption_cap << "\n"
        << "mm_captions=" << cfg.eval.mm_captions << "\n\n";
    out << "[run]\n"
        << "seed=" << cfg.seed << "\n"
        << "preset=" << cfg.preset << "\n";
    return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::string s = dump_ini(cfg);
    return fnv1a64(s.data(), s.size());
}

ExperimentConfig with_stage_seeds(ExperimentConfig cfg) {
    cfg.corpus.seed = derive_seed(cfg.seed, "stage.corpus");
    cfg.rvq.seed = derive_seed(cfg.seed, "stage.rvq");
    cfg.predictor.seed = derive_seed(cfg.seed, "stage.predictor");
    cfg.extractor.seed = derive_seed(cfg.seed, "stage.extractor");
    return cfg;
}

namespace {

// Overwrite protection shared by every artifact-producing command.
void claim_output(const std::string& out_dir, bool force, const char* what) {
    fs::path p(out_dir);
    if (fs::exists(p) && !fs::is_empty(p)) {
        if (!force)
            throw PrerequisiteError(std::string(what) + " output " + out_dir +
                                    " already exists; pass --force to overwrite");
        fs::remove_all(p);
    }
    fs::create_directories(p);
}

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

// Provenance record: the timestamp is the only field allowed to differ
// between identically seeded runs.
void write_run_json(const std::string& out_dir, const std::string& command,
                    const ExperimentConfig& cfg,
                    const std::vector<std::pair<std::string, std::string>>& artifacts) {
    json j;
    j["command"] = command;
    j["config_hash"] = hex64(config_hash(cfg));
    j["seed"] = cfg.seed;
    j["preset"] = cfg.preset;
    j["checkpoint_format_version"] = nn::kCheckpointVersion;
    j["dataset_format_version"] = syndata::kDatasetVersion;
    json a = json::object();
    for (const auto& [name, fp] : artifacts) a[name] = fp;
    j["artifacts"] = a;
    j["timestamp"] = timestamp_utc();
    write_file_text(fs::path(out_dir) / "run.json", j.dump(2) + "\n");
}

std::string checkpoint_fp(const std::string& dir) {
    return hex64(nn::checkpoint_fingerprint(dir));
}

evalsuite::EvalProtocol protocol_for(const ExperimentConfig& cfg, double w,
                                     const std::string& models) {
    evalsuite::EvalProtocol p;
    p.pool_size = cfg.eval.pool_size;
    p.repeats = cfg.eval.repeats;
    p.caption_cap = cfg.eval.caption_cap;
    p.mm_captions = cfg.eval.mm_captions;
    p.w = w;
    p.decode_steps = cfg.generate.decode_steps;
    p.seed = derive_seed(cfg.seed, "stage.evaluate");
    p.model_fingerprint = models;
    return p;
}

}  // namespace

syndata::Dataset cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_dir,
                              bool force) {
    claim_output(out_dir, force, "dataset");
    auto ds = syndata::generate_corpus(cfg.corpus);
    syndata::write_dataset(ds, out_dir);
    write_run_json(out_dir, "gen-data", cfg, {});
    return ds;
}

void cmd_train_rvq(const ExperimentConfig& cfg, const std::string& data_dir,
                   const std::string& out_dir, bool force) {
    auto ds = syndata::read_dataset(data_dir);
    claim_output(out_dir, force, "rvq checkpoint");
    std::vector<rvq::CurvePoint> curve;
    auto model = rvq::train_rvq(ds, cfg.rvq, &curve);
    rvq::save_rvq(model, out_dir, curve);
    write_run_json(out_dir, "train-rvq", cfg, {{"rvq", checkpoint_fp(out_dir)}});
}

void cmd_train_predictor(const ExperimentConfig& cfg, const std::string& data_dir,
                         const std::string& rvq_dir, const std::string& out_dir, bool force) {
    auto ds = syndata::read_dataset(data_dir);
    auto rvq_model = rvq::load_rvq(rvq_dir);
    std::string rvq_fp = checkpoint_fp(rvq_dir);
    claim_output(out_dir, force, "predictor checkpoint");
    std::vector<rvq::CurvePoint> curve;
    auto model = predictor::train_predictor(ds, rvq_model, rvq_fp, cfg.predictor, &curve);
    predictor::save_predictor(model, out_dir, curve);
    write_run_json(out_dir, "train-predictor", cfg,
                   {{"rvq", rvq_fp}, {"predictor", checkpoint_fp(out_dir)}});
}

void cmd_train_eval(const ExperimentConfig& cfg, const std::string& data_dir,
                    const std::string& out_dir, bool force) {
    auto ds = syndata::read_dataset(data_dir);
    claim_output(out_dir, force, "eval extractor checkpoint");
    std::vector<evalsuite::ExtractorCurvePoint> curve;
    auto ex = evalsuite::train_eval_extractor(ds, cfg.extractor, &curve);
    evalsuite::save_extractor(ex, out_dir, curve);
    write_run_json(out_dir, "train-eval", cfg, {{"extractor", checkpoint_fp(out_dir)}});
}

void cmd_generate(const ExperimentConfig& cfg, const std::string& rvq_dir,
                  const std::string& predictor_dir, const GenerateArgs& args,
                  const std::string& out_dir, bool force) {
    auto rvq_model = rvq::load_rvq(rvq_dir);
    std::string rvq_fp = checkpoint_fp(rvq_dir);
    auto model = predictor::load_predictor(predictor_dir, rvq_model, rvq_fp);
    if (args.count < 1) throw ConfigError("generate: count must be >= 1");
    syndata::CaptionTokens caption;
    try {
        caption.tokens = syndata::tokenize_text(args.caption);
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("caption: ") + e.what());
    }
    claim_output(out_dir, force, "generation");

    for (int i = 0; i < args.count; ++i) {
        generator::GenerationRequest req;
        req.caption = caption;
        req.w = args.w;
        req.length = args.length < 0 ? generator::kAutoLength : args.length;
        req.decode_steps = args.decode_steps;
        req.seed = derive_seed(args.seed, "cli.gen", static_cast<std::uint64_t>(i));
        auto result = generator::generate(model, rvq_model, req);
        char stem[32];
        std::snprintf(stem, sizeof stem, "gen_%04d", i);
        generator::export_result(result, req, (fs::path(out_dir) / (std::string(stem) + ".csv")).string(),
                                 (fs::path(out_dir) / (std::string(stem) + ".json")).string());
    }
    write_run_json(out_dir, "generate", cfg,
                   {{"rvq", rvq_fp}, {"predictor", checkpoint_fp(predictor_dir)}});
}

evalsuite::EvalReport cmd_evaluate(const ExperimentConfig& cfg, const std::string& data_dir,
                                   const std::string& rvq_dir, const std::string& predictor_dir,
                                   const std::string& eval_dir, double w,
                                   const std::string& out_dir, bool force) {
    auto ds = syndata::read_dataset(data_dir);
    auto rvq_model = rvq::load_rvq(rvq_dir);
    std::string rvq_fp = checkpoint_fp(rvq_dir);
    auto model = predictor::load_predictor(predictor_dir, rvq_model, rvq_fp);
    auto extractor = evalsuite::load_extractor(eval_dir);
    claim_output(out_dir, force, "evaluation");

    std::string models = rvq_fp + ":" + checkpoint_fp(predictor_dir) + ":" + checkpoint_fp(eval_dir);
    auto report = evalsuite::evaluate(model, rvq_model, extractor, ds,
                                      protocol_for(cfg, w, models));
    write_file_text(fs::path(out_dir) / "report.json",
                    evalsuite::report_to_json(report).dump(2) + "\n");
    write_run_json(out_dir, "evaluate", cfg,
                   {{"rvq", rvq_fp},
                    {"predictor", checkpoint_fp(predictor_dir)},
                    {"extractor", checkpoint_fp(eval_dir)}});
    return report;
}

std::vector<evalsuite::EvalReport> cmd_sweep(const ExperimentConfig& cfg,
                                             const std::string& data_dir,
                                             const std::string& rvq_dir,
                                             const std::string& predictor_dir,
                                             const std::string& eval_dir,
                                             const std::vector<double>& w_values,
                                             const std::string& out_dir, bool force) {
    if (w_values.empty()) throw ConfigError("sweep: at least one w value required");
    auto ds = syndata::read_dataset(data_dir);
    auto rvq_model = rvq::load_rvq(rvq_dir);
    std::string rvq_fp = checkpoint_fp(rvq_dir);
    auto model = predictor::load_predictor(predictor_dir, rvq_model, rvq_fp);
    auto extractor = evalsuite::load_extractor(eval_dir);
    claim_output(out_dir, force, "sweep");

    std::string models = rvq_fp + ":" + checkpoint_fp(predictor_dir) + ":" + checkpoint_fp(eval_dir);
    auto reports = evalsuite::sweep_w(model, rvq_model, extractor, ds, w_values,
                                      protocol_for(cfg, cfg.generate.w, models));
    evalsuite::write_sweep_csv((fs::path(out_dir) / "sweep.csv").string(), w_values, reports);
    json jr = json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        json j = evalsuite::report_to_json(reports[i]);
        j["w"] = w_values[i];
        jr.push_back(j);
    }
    write_file_text(fs::path(out_dir) / "reports.json", jr.dump(2) + "\n");
    write_run_json(out_dir, "sweep", cfg,
                   {{"rvq", rvq_fp},
                    {"predictor", checkpoint_fp(predictor_dir)},
                    {"extractor", checkpoint_fp(eval_dir)}});
    return reports;
}

std::vector<AblateRow> cmd_ablate(const ExperimentConfig& cfg, const std::string& data_dir,
                                  const std::vector<std::string>& presets,
                                  const std::string& out_dir, bool force) {
    if (presets.empty()) throw ConfigError("ablate: at least one preset required");
    auto ds = syndata::read_dataset(data_dir);
    claim_output(out_dir, force, "ablation");

    using Clock = std::chrono::steady_clock;
    const auto since = [](Clock::time_point from) {
        return std::chrono::duration<double>(Clock::now() - from).count();
    };
    json timing = json::object();
    const auto run_start = Clock::now();

    // The extractor is preset-independent: train it once.
    std::string eval_dir = (fs::path(out_dir) / "extractor").string();
    {
        const auto t0 = Clock::now();
        std::vector<evalsuite::ExtractorCurvePoint> curve;
        auto ex = evalsuite::train_eval_extractor(ds, cfg.extractor, &curve);
        evalsuite::save_extractor(ex, eval_dir, curve);
        timing["extractor"] = since(t0);
    }
    auto extractor = evalsuite::load_extractor(eval_dir);
    std::string extractor_fp = checkpoint_fp(eval_dir);

    // Codecs depend only on the quantizer config; presets sharing it share one.
    std::vector<std::pair<std::string, std::string>> artifacts{{"extractor", extractor_fp}};
    std::map<int, std::string> rvq_dirs;
    std::vector<AblateRow> rows;
    for (const auto& preset : presets) {
        ExperimentConfig pc = cfg;
        pc.preset = preset;
        apply_preset(pc);

        auto it = rvq_dirs.find(pc.rvq.num_layers);
        if (it == rvq_dirs.end()) {
            std::string dir =
                (fs::path(out_dir) / ("rvq_l" + std::to_string(pc.rvq.num_layers))).string();
            const auto t0 = Clock::now();
            std::vector<rvq::CurvePoint> curve;
            auto m = rvq::train_rvq(ds, pc.rvq, &curve);
            rvq::save_rvq(m, dir, curve);
            timing["rvq_l" + std::to_string(pc.rvq.num_layers)] = since(t0);
            it = rvq_dirs.emplace(pc.rvq.num_layers, dir).first;
            artifacts.emplace_back("rvq_l" + std::to_string(pc.rvq.num_layers),
                                   checkpoint_fp(dir));
        }
        auto rvq_model = rvq::load_rvq(it->second);
        std::string rvq_fp = checkpoint_fp(it->second);

        std::string pred_dir = (fs::path(out_dir) / preset).string();
        {
            const auto t0 = Clock::now();
            std::vector<rvq::CurvePoint> curve;
            auto m = predictor::train_predictor(ds, rvq_model, rvq_fp, pc.predictor, &curve);
            predictor::save_predictor(m, pred_dir, curve);
            timing["train:" + preset] = since(t0);
        }
        auto model = predictor::load_predictor(pred_dir, rvq_model, rvq_fp);
        artifacts.emplace_back(preset, checkpoint_fp(pred_dir));

        double w = preset_w(preset, cfg.generate.w);
        std::string models = rvq_fp + ":" + checkpoint_fp(pred_dir) + ":" + extractor_fp;
        const auto t0 = Clock::now();
        auto report = evalsuite::evaluate(model, rvq_model, extractor, ds,
                                          protocol_for(pc, w, models));
        timing["eval:" + preset] = since(t0);
        rows.push_back({preset, w, report});
    }
    timing["total"] = since(run_start);

    json jr = json::array();
    for (const auto& row : rows) {
        json j = evalsuite::report_to_json(row.report);
        j["preset"] = row.preset;
        j["w"] = row.w;
        jr.push_back(j);
    }
    write_file_text(fs::path(out_dir) / "ablate.json", jr.dump(2) + "\n");
    write_file_text(fs::path(out_dir) / "timing.json", timing.dump(2) + "\n");
    write_file_text(fs::path(out_dir) / "ablate.txt", format_ablate_table(rows));
    write_run_json(out_dir, "ablate", cfg, artifacts);
    return rows;
}

std::string format_ablate_table(const std::vector<AblateRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(14) << "preset" << std::right << std::setw(6) << "w"
        << std::setw(10) << "Top-1" << std::setw(10) << "Top-2" << std::setw(10) << "Top-3"
        << std::setw(10) << "FID" << std::setw(10) << "MM-Dist" << std::setw(14)
        << "MultiModality" << "\n";
    out << std::fixed << std::setprecision(3);
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << std::left << std::setw(14) << row.preset << std::right << std::setw(6) << row.w
            << std::setw(10) << r.top1.mean << std::setw(10) << r.top2.mean << std::setw(10)
            << r.top3.mean << std::setw(10) << r.fid_score.mean << std::setw(10)
            << r.matching_dist.mean << std::setw(8) << r.multimodality_score.mean << " +/- "
            << r.multimodality_score.ci << "\n";
    }
    return out.str();
}

}  // namespace t2m::cli
