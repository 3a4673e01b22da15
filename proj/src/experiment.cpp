#include "classpair/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "classpair/parallel.hpp"

namespace classpair {

std::uint64_t split_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.master_seed, "split"); }
std::uint64_t model_init_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.master_seed, "model.init"); }
std::uint64_t train_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.master_seed, "train"); }

std::uint64_t eval_level_seed(const ExperimentConfig& cfg, int index) {
    return derive_seed(cfg.master_seed, "eval.level", static_cast<std::uint64_t>(index));
}

std::uint64_t evolve_seed(const ExperimentConfig& cfg, int run) {
    return derive_seed(cfg.master_seed, "evolve", static_cast<std::uint64_t>(run));
}

std::vector<std::uint64_t> ground_truth_seeds(const ExperimentConfig& cfg, int run) {
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < cfg.ground_truth_runs; ++k)
        seeds.push_back(derive_seed(cfg.master_seed, "ground_truth",
                                    static_cast<std::uint64_t>(run) * static_cast<std::uint64_t>(cfg.ground_truth_runs) +
                                        static_cast<std::uint64_t>(k)));
    return seeds;
}

TrainedSurrogate train_surrogate(const Corpus& corpus, ModelKind kind, const ExperimentConfig& cfg, const LogFn& log) {
    const auto [train_set, val_set] = split(corpus, cfg.validation_fraction, split_seed(cfg));
    TrainConfig tc = cfg.train;
    tc.seed = train_seed(cfg);
    TrainedSurrogate out{Model::initialized(kind, model_init_seed(cfg)), {}, train_set.samples.size(),
                         val_set.samples.size()};
    out.result = train(out.model, train_set.samples, val_set.samples, tc, [&](const EpochRecord& r) {
        if (!log) return;
        std::ostringstream line;
        line << to_string(kind) << " epoch " << r.epoch << " train " << std::setprecision(5) << r.train_loss
             << " val " << r.validation_loss;
        log(line.str());
    });
    return out;
}

std::vector<EvalLevel> evaluation_levels(const ExperimentConfig& cfg) {
    std::vector<EvalLevel> levels;
    for (int i = 0; i < cfg.generated_eval_levels; ++i)
        levels.push_back({"gen_" + std::to_string(i), MapOrigin::generated,
                          generate_level(eval_level_seed(cfg, i), cfg.settings.generator)});
    for (const std::string& path : cfg.designed_levels)
        levels.push_back({std::filesystem::path(path).stem().string(), MapOrigin::designed, read_level_file(path)});
    return levels;
}

std::vector<EvolvedRun> evolve_all(const Surrogate& surrogate, const std::vector<EvalLevel>& levels,
                                   const ExperimentConfig& cfg, int jobs, const LogFn& log) {
    std::vector<EvolvedRun> runs;
    for (const EvalLevel& l : levels)
        for (const TargetPreset& p : kTargetPresets) runs.push_back({l.id, l.origin, std::string(p.name), p.target, {}});
    std::vector<ChannelStack> channels;
    for (const EvalLevel& l : levels) channels.push_back(encode_level(l.level));
    parallel_for(runs.size(), jobs, [&](std::size_t i) {
        EvolutionConfig ec = cfg.evolution;
        ec.seed = evolve_seed(cfg, static_cast<int>(i));
        runs[i].run = evolve(surrogate, channels[i / kTargetPresets.size()], runs[i].target, ec);
    });
    if (log)
        for (const EvolvedRun& r : runs) {
            std::ostringstream line;
            line << "evolved " << r.level_id << '/' << r.preset << " fitness " << std::setprecision(4)
                 << r.run.best_fitness;
            log(line.str());
        }
    return runs;
}

Evaluation evaluate_runs(const std::vector<EvolvedRun>& runs, const std::vector<EvalLevel>& levels,
                         const ExperimentConfig& cfg, int jobs, const LogFn& log) {
    auto level_of = [&](const std::string& id) -> const Level& {
        for (const EvalLevel& l : levels)
            if (l.id == id) return l.level;
        throw std::invalid_argument("run refers to unknown level " + id);
    };
    std::vector<GroundTruthStats> stats(runs.size());
    parallel_for(runs.size(), jobs, [&](std::size_t i) {
        stats[i] = ground_truth(level_of(runs[i].level_id), decode_genotype(runs[i].run.best),
                                ground_truth_seeds(cfg, static_cast<int>(i)), cfg.settings.match,
                                cfg.settings.ranges);
    });

    Evaluation eval;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const EvolvedRun& r = runs[i];
        eval.records.push_back(make_record(r.level_id, r.origin, r.preset, r.target, r.run.best_prediction, stats[i]));
        if (log) {
            std::ostringstream line;
            line << "ground truth " << r.level_id << '/' << r.preset << " a_t " << std::setprecision(4) << stats[i].a_t
                 << " a_s " << stats[i].a_s;
            log(line.str());
        }
    }
    eval.distances = distance_report(eval.records);

    std::vector<PresetGroup> groups;
    std::vector<double> short_t;
    std::vector<double> long_t;
    for (const TargetPreset& p : kTargetPresets) {
        PresetGroup g{std::string(p.name), {}};
        double hp = 0.0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (runs[i].preset != p.name) continue;
            g.pairs.push_back(runs[i].run.best);
            hp += (runs[i].run.best[0] + runs[i].run.best[kClassParams]) / 2.0;
            if (p.name == "short") short_t.push_back(stats[i].a_t);
            if (p.name == "long") long_t.push_back(stats[i].a_t);
        }
        if (g.pairs.empty()) continue;
        eval.mean_hp.emplace_back(g.preset, hp / static_cast<double>(g.pairs.size()));
        groups.push_back(std::move(g));
    }
    if (std::all_of(groups.begin(), groups.end(), [](const PresetGroup& g) { return g.pairs.size() >= 2; }))
        eval.trend = trend_report(groups);
    eval.tf2 = tf2_report(groups, cfg.tf2, cfg.tf2_threshold);
    try {
        if (long_t.size() >= 2 && short_t.size() >= 2) eval.long_vs_short = welch_test(long_t, short_t);
    } catch (const std::invalid_argument&) {
        // both groups without variance; no test possible
    }
    return eval;
}

void write_summary(std::ostream& out, const Evaluation& eval) {
    std::size_t acc_t = 0;
    std::size_t acc_s = 0;
    for (const AccuracyRecord& r : eval.records) {
        acc_t += r.accurate.duration ? 1 : 0;
        acc_s += r.accurate.score ? 1 : 0;
    }
    out << "runs: " << eval.records.size() << "\n"
        << "duration predictions inside the GT interval: " << acc_t << "\n"
        << "score predictions inside the GT interval: " << acc_s << "\n\n";
    write_distance_text(out, eval.distances);
    out << "\nmean hp gene per target:";
    for (const auto& [preset, hp] : eval.mean_hp) out << ' ' << preset << '=' << std::fixed << std::setprecision(4) << hp;
    out << '\n';
    if (eval.long_vs_short) {
        const WelchResult& w = *eval.long_vs_short;
        out << "GT duration long vs short: " << std::setprecision(4) << w.mean_x << " vs " << w.mean_y << ", Welch t "
            << w.t << ", dof " << w.dof << ", p(one-sided) " << std::scientific << w.p_greater << std::fixed
            << (w.p_greater < 0.05 ? " (significant at 95%)" : " (not significant at 95%)") << '\n';
    }
}

void write_evaluation(const std::string& dir, const ExperimentConfig& cfg, const std::vector<EvolvedRun>& runs,
                      const Evaluation& eval) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "pairs");
    auto open = [&](const std::string& name) {
        std::ofstream out(fs::path(dir) / (cfg.id + "_" + name));
        if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / (cfg.id + "_" + name)).string());
        return out;
    };
    {
        auto out = open("accuracy.csv");
        write_accuracy_csv(out, eval.records);
    }
    {
        auto out = open("distance.csv");
        write_distance_csv(out, eval.distances);
    }
    {
        auto out = open("trend.csv");
        write_trend_csv(out, eval.trend);
    }
    {
        auto out = open("tf2.csv");
        write_tf2_csv(out, eval.tf2, cfg.tf2);
    }
    {
        auto out = open("summary.txt");
        write_summary(out, eval);
    }
    for (const EvolvedRun& r : runs) {
        const ClassPair pair = decode_genotype(r.run.best);
        const CharacterClass classes[] = {pair.player1, pair.player2};
        write_class_file((fs::path(dir) / "pairs" / (r.level_id + "_" + r.preset + ".jsonl")).string(), classes);
    }
}

}  // namespace classpair
