#include "t2m/evalsuite/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "t2m/core/binio.hpp"
#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/generator/generator.hpp"

using nlohmann::json;

namespace t2m::evalsuite {

namespace {

MetricStat aggregate(const std::vector<double>& values) {
    MetricStat stat;
    const int n = static_cast<int>(values.size());
    for (double v : values) stat.mean += v;
    stat.mean /= n;
    if (n > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - stat.mean) * (v - stat.mean);
        double sd = std::sqrt(acc / (n - 1));
        stat.ci = 1.96 * sd / std::sqrt(static_cast<double>(n));
    }
    return stat;
}

std::uint64_t protocol_hash(const EvalProtocol& p) {
    json j = {{"pool_size", p.pool_size},       {"repeats", p.repeats},
              {"caption_cap", p.caption_cap},   {"mm_captions", p.mm_captions},
              {"w", p.w},                       {"decode_steps", p.decode_steps},
              {"seed", p.seed},                 {"models", p.model_fingerprint}};
    std::string s = j.dump();
    return fnv1a64(s.data(), s.size());
}

}  // namespace

EvalReport evaluate(const predictor::PredictorModel& model, const rvq::RvqModel& rvq,
                    const EvalExtractor& extractor, const syndata::Dataset& ds,
                    const EvalProtocol& protocol) {
    if (protocol.repeats < 1) throw ArgumentError("evaluate: repeats must be >= 1");
    if (protocol.caption_cap < protocol.pool_size)
        throw ArgumentError("evaluate: caption cap below the retrieval pool size");
    if (protocol.mm_captions < 1 || protocol.mm_captions > protocol.caption_cap)
        throw ArgumentError("evaluate: mm_captions outside [1, caption_cap]");
    if (ds.heldout_indices.empty()) throw ArgumentError("evaluate: empty held-out split");

    // The scored caption set is fixed across repeats; only generation seeds
    // change per repeat.
    std::vector<int> subset = ds.heldout_indices;
    if (static_cast<int>(subset.size()) > protocol.caption_cap) {
        Rng srng(derive_seed(protocol.seed, "eval.subset"));
        srng.shuffle(subset);
        subset.resize(static_cast<std::size_t>(protocol.caption_cap));
        std::sort(subset.begin(), subset.end());
    }
    const int n = static_cast<int>(subset.size());

    std::map<std::vector<int>, int> class_of;
    std::vector<int> caption_class;
    std::vector<Feature> real_feats, caption_feats;
    for (int idx : subset) {
        const auto& s = ds.samples[static_cast<std::size_t>(idx)];
        auto [it, inserted] = class_of.emplace(s.caption.tokens, static_cast<int>(class_of.size()));
        caption_class.push_back(it->second);
        real_feats.push_back(extractor.motion_feature(s.motion));
        caption_feats.push_back(extractor.caption_feature(s.caption));
    }
    if (static_cast<int>(class_of.size()) < protocol.pool_size)
        throw ArgumentError("evaluate: fewer distinct captions than the retrieval pool");

    // MultiModality captions: a fixed seeded pick from the scored subset.
    std::vector<int> mm_set = subset;
    Rng mrng(derive_seed(protocol.seed, "eval.mmset"));
    mrng.shuffle(mm_set);
    mm_set.resize(static_cast<std::size_t>(protocol.mm_captions));

    std::vector<double> v_top1, v_top2, v_top3, v_fid, v_mmd, v_mm;
    for (int rep = 0; rep < protocol.repeats; ++rep) {
        const std::uint64_t rep_seed =
            derive_seed(protocol.seed, "eval.repeat", static_cast<std::uint64_t>(rep));
        std::vector<Feature> gen_feats;
        for (int i = 0; i < n; ++i) {
            const auto& s = ds.samples[static_cast<std::size_t>(subset[static_cast<std::size_t>(i)])];
            generator::GenerationRequest req;
            req.caption = s.caption;
            req.w = protocol.w;
            req.length = rvq.crop_length(s.motion.length());
            req.decode_steps = protocol.decode_steps;
            req.seed = derive_seed(rep_seed, "gen", static_cast<std::uint64_t>(i));
            auto result = generator::generate(model, rvq, req);
            gen_feats.push_back(extractor.motion_feature(result.motion));
        }

        Rng pool_rng(derive_seed(rep_seed, "pool"));
        auto scores = r_precision(gen_feats, caption_feats, caption_class, protocol.pool_size,
                                  pool_rng);
        v_top1.push_back(scores.top1);
        v_top2.push_back(scores.top2);
        v_top3.push_back(scores.top3);
        v_fid.push_back(fid(real_feats, gen_feats));
        v_mmd.push_back(mm_dist(caption_feats, gen_feats));

        std::vector<std::vector<Feature>> per_caption;
        for (std::size_t c = 0; c < mm_set.size(); ++c) {
            const auto& s = ds.samples[static_cast<std::size_t>(mm_set[c])];
            const std::uint64_t cap_seed =
                derive_seed(rep_seed, "mm.cap", static_cast<std::uint64_t>(c));
            std::vector<Feature> gens;
            for (int g = 0; g < 30; ++g) {
                generator::GenerationRequest req;
                req.caption = s.caption;
                req.w = protocol.w;
                req.length = rvq.crop_length(s.motion.length());
                req.decode_steps = protocol.decode_steps;
                req.seed = derive_seed(cap_seed, "mm.gen", static_cast<std::uint64_t>(g));
                auto result = generator::generate(model, rvq, req);
                gens.push_back(extractor.motion_feature(result.motion));
            }
            per_caption.push_back(std::move(gens));
        }
        Rng pair_rng(derive_seed(rep_seed, "mm.pair"));
        v_mm.push_back(multimodality(per_caption, pair_rng));
    }

    EvalReport report;
    report.top1 = aggregate(v_top1);
    report.top2 = aggregate(v_top2);
    report.top3 = aggregate(v_top3);
    report.fid_score = aggregate(v_fid);
    report.matching_dist = aggregate(v_mmd);
    report.multimodality_score = aggregate(v_mm);
    report.repeats = protocol.repeats;
    report.single_repeat = protocol.repeats == 1;
    report.fingerprint = hex64(protocol_hash(protocol));
    return report;
}

std::vector<EvalReport> sweep_w(const predictor::PredictorModel& model,
                                const rvq::RvqModel& rvq, const EvalExtractor& extractor,
                                const syndata::Dataset& ds, const std::vector<double>& w_values,
                                const EvalProtocol& protocol) {
    if (w_values.empty()) throw ArgumentError("sweep_w: w_values must be nonempty");
    std::vector<EvalReport> reports;
    for (double w : w_values) {
        EvalProtocol p = protocol;
        p.w = w;
        reports.push_back(evaluate(model, rvq, extractor, ds, p));
    }
    return reports;
}

json report_to_json(const EvalReport& report) {
    const auto stat = [](const MetricStat& s) {
        return json{{"mean", s.mean}, {"ci", s.ci}};
    };
    return json{{"top1", stat(report.top1)},
                {"top2", stat(report.top2)},
                {"top3", stat(report.top3)},
                {"fid", stat(report.fid_score)},
                {"mm_dist", stat(report.matching_dist)},
                {"multimodality", stat(report.multimodality_score)},
                {"repeats", report.repeats},
                {"single_repeat", report.single_repeat},
                {"fingerprint", report.fingerprint}};
}

void write_sweep_csv(const std::string& path, const std::vector<double>& w_values,
                     const std::vector<EvalReport>& reports) {
    if (w_values.size() != reports.size())
        throw ArgumentError("write_sweep_csv: one report per w required");
    std::ostringstream out;
    out << "w,metric,mean,ci\n";
    out.precision(9);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        const auto row = [&](const char* name, const MetricStat& s) {
            out << w_values[i] << "," << name << "," << s.mean << "," << s.ci << "\n";
        };
        row("top1", r.top1);
        row("top2", r.top2);
        row("top3", r.top3);
        row("fid", r.fid_score);
        row("mm_dist", r.matching_dist);
        row("multimodality", r.multimodality_score);
    }
    write_file_text(path, out.str());
}

}  // namespace t2m::evalsuite
