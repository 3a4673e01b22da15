#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "classpair/experiment.hpp"

using namespace classpair;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, kChannelCount> kChannelNames{
    "ground", "first_floor", "second_floor", "stairs", "double_damage", "healing", "armor", "cover"};

ExperimentConfig config_or_default(const std::string& path) {
    return path.empty() ? ExperimentConfig{} : load_config(path);
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

ClassPair read_pair(const std::string& path) {
    const auto classes = read_class_file(path);
    if (classes.size() != 2) throw std::runtime_error(path + ": expected exactly two classes (player 1, player 2)");
    return {classes[0], classes[1]};
}

void print_outcome(const MatchOutcome& o, std::uint64_t seed) {
    std::cout << "seed " << seed << ": kills " << o.kills_p1 << '-' << o.kills_p2 << ", duration " << std::fixed
              << std::setprecision(1) << o.duration << " s, score " << std::setprecision(3) << o.score
              << (o.completed ? "" : " (incomplete)") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Level generation, match simulation, surrogate training and class-pair evolution"};
    app.require_subcommand(1);

    // gen-level
    auto* gen = app.add_subcommand("gen-level", "Generate levels in the text tile format");
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    int gen_count = 1;
    std::string gen_config;
    gen->add_option("--seed", gen_seed, "Generator seed (master seed with --count)");
    gen->add_option("--out", gen_out, "Output file, or directory with --count > 1")->required();
    gen->add_option("--count", gen_count, "Number of levels; seeds are derived from --seed")->check(CLI::PositiveNumber);
    gen->add_option("--config", gen_config, "Experiment config supplying generator parameters");

    // show-level
    auto* show = app.add_subcommand("show-level", "Print a level, its validity and channel occupancy");
    std::string show_file;
    bool show_channels = false;
    show->add_option("file", show_file, "Level file")->required();
    show->add_flag("--channels", show_channels, "Also print every channel plane");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate matches between two classes on a level");
    std::string sim_level;
    std::string sim_classes;
    std::uint64_t sim_seed = 0;
    int sim_runs = 1;
    std::string sim_log;
    std::string sim_config;
    sim->add_option("--level", sim_level, "Level file")->required();
    sim->add_option("--classes", sim_classes, "Class file with player 1 and player 2")->required();
    sim->add_option("--seed", sim_seed, "Seed of the first match; further matches use seed+1, ...");
    sim->add_option("--runs", sim_runs, "Number of matches")->check(CLI::PositiveNumber);
    sim->add_option("--log", sim_log, "Write the event log of the first match here");
    sim->add_option("--config", sim_config, "Experiment config supplying match rules and parameter ranges");

    // build-corpus
    auto* corpus_cmd = app.add_subcommand("build-corpus", "Simulate random configurations into a training corpus");
    std::string corpus_config;
    std::string corpus_out;
    std::optional<int> corpus_n;
    std::optional<std::uint64_t> corpus_seed;
    int corpus_jobs = 1;
    std::string corpus_text;
    corpus_cmd->add_option("--config", corpus_config, "Experiment config");
    corpus_cmd->add_option("--out", corpus_out, "Corpus file")->required();
    corpus_cmd->add_option("--configs", corpus_n, "Number of (level, class pair) configurations")
        ->check(CLI::PositiveNumber);
    corpus_cmd->add_option("--seed", corpus_seed, "Master seed (overrides the config)");
    corpus_cmd->add_option("--jobs", corpus_jobs, "Worker threads")->check(CLI::PositiveNumber);
    corpus_cmd->add_option("--export-text", corpus_text, "Also write one JSON record per sample here");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a surrogate on a corpus");
    std::string train_corpus;
    std::string train_model;
    std::string train_out;
    std::string train_config;
    std::optional<int> train_epochs;
    std::optional<std::uint64_t> train_seed_opt;
    train_cmd->add_option("--corpus", train_corpus, "Corpus file")->required();
    train_cmd->add_option("--model", train_model, "Model kind")
        ->check(CLI::IsMember({"cnn", "mlp16", "perceptron", "linear"}));
    train_cmd->add_option("--out", train_out, "Weight file; metrics and epoch log are written next to it")
        ->required();
    train_cmd->add_option("--config", train_config, "Experiment config");
    train_cmd->add_option("--epochs", train_epochs, "Maximum epochs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train_seed_opt, "Master seed (overrides the config)");

    // evolve
    auto* evolve_cmd = app.add_subcommand("evolve", "Evolve a class pair on one level against a trained surrogate");
    std::string evo_level;
    std::string evo_model;
    std::string evo_target = "medium";
    std::optional<double> evo_dt;
    std::optional<double> evo_ds;
    std::string evo_out;
    std::string evo_trace;
    std::optional<std::uint64_t> evo_seed;
    std::string evo_config;
    evolve_cmd->add_option("--level", evo_level, "Level file")->required();
    evolve_cmd->add_option("--model", evo_model, "Weight file")->required();
    evolve_cmd->add_option("--target", evo_target, "Target preset")->check(CLI::IsMember({"short", "medium", "long"}));
    evolve_cmd->add_option("--dt", evo_dt, "Desired normalized duration (overrides the preset)")
        ->check(CLI::Range(0.0, 1.0));
    evolve_cmd->add_option("--ds", evo_ds, "Desired score (overrides the preset)")->check(CLI::Range(0.0, 1.0));
    evolve_cmd->add_option("--out", evo_out, "Class file for the best pair")->required();
    evolve_cmd->add_option("--trace", evo_trace, "Fitness trace CSV");
    evolve_cmd->add_option("--seed", evo_seed, "GA seed");
    evolve_cmd->add_option("--config", evo_config, "Experiment config supplying GA settings");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Evolve pairs for every level and target, then check them in simulation");
    std::string eval_config;
    std::string eval_model;
    std::string eval_out;
    std::vector<std::string> eval_levels;
    std::optional<int> eval_generated;
    int eval_jobs = 1;
    eval_cmd->add_option("--config", eval_config, "Experiment config");
    eval_cmd->add_option("--model", eval_model, "Weight file")->required();
    eval_cmd->add_option("--out", eval_out, "Output directory (default: <output_dir>/<id>)");
    eval_cmd->add_option("--levels", eval_levels, "Designed level files (replace the config list)");
    eval_cmd->add_option("--generated", eval_generated, "Number of generated evaluation levels")
        ->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--jobs", eval_jobs, "Worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const ExperimentConfig cfg = config_or_default(gen_config);
            if (gen_count == 1) {
                write_level_file(gen_out, generate_level(gen_seed, cfg.settings.generator));
                return 0;
            }
            fs::create_directories(gen_out);
            for (int i = 0; i < gen_count; ++i) {
                std::ostringstream name;
                name << "level_" << std::setw(3) << std::setfill('0') << i << ".txt";
                const std::uint64_t seed = derive_seed(gen_seed, "gen-level", static_cast<std::uint64_t>(i));
                write_level_file((fs::path(gen_out) / name.str()).string(), generate_level(seed, cfg.settings.generator));
            }
            return 0;
        }

        if (*show) {
            const Level level = read_level_file(show_file);
            std::cout << render_level(level);
            const auto violation = find_violation(level);
            if (violation)
                std::cout << "invalid: row " << violation->row << ", col " << violation->col << ": "
                          << violation->message << '\n';
            else
                std::cout << "valid\n";
            const ChannelStack stack = encode_level(level);
            for (int c = 0; c < kChannelCount; ++c) {
                int count = 0;
                for (int i = 0; i < kTileCount; ++i) count += stack.bits[static_cast<std::size_t>(c * kTileCount + i)];
                std::cout << std::left << std::setw(14) << kChannelNames[static_cast<std::size_t>(c)] << count << '\n';
                if (!show_channels) continue;
                for (int y = 0; y < kLevelSize; ++y) {
                    for (int x = 0; x < kLevelSize; ++x) std::cout << (stack.at(c, x, y) ? '#' : '.');
                    std::cout << '\n';
                }
            }
            return violation ? 1 : 0;
        }

        if (*sim) {
            const ExperimentConfig cfg = config_or_default(sim_config);
            const Level level = read_level_file(sim_level);
            const ClassPair pair = read_pair(sim_classes);
            std::ofstream log;
            if (!sim_log.empty()) log = open_out(sim_log);
            for (int r = 0; r < sim_runs; ++r) {
                const std::uint64_t seed = sim_seed + static_cast<std::uint64_t>(r);
                const MatchOutcome o = simulate_match(level, pair, seed, cfg.settings.match, cfg.settings.ranges,
                                                      r == 0 && log.is_open() ? &log : nullptr);
                print_outcome(o, seed);
            }
            return 0;
        }

        if (*corpus_cmd) {
            ExperimentConfig cfg = config_or_default(corpus_config);
            if (corpus_n) cfg.corpus_configs = *corpus_n;
            if (corpus_seed) cfg.master_seed = *corpus_seed;
            const Corpus corpus = build_corpus(cfg.corpus_configs, cfg.master_seed, cfg.settings, corpus_jobs,
                                               [](std::size_t done, std::size_t total) {
                                                   if (done % 100 == 0 || done == total)
                                                       std::cerr << "\rconfigurations " << done << '/' << total
                                                                 << std::flush;
                                                   if (done == total) std::cerr << '\n';
                                               });
            write_corpus(corpus_out, corpus);
            const DistributionReport report = distribution_report(corpus);
            {
                auto out = open_out(corpus_out + ".distribution.csv");
                write_distribution_csv(out, report);
            }
            {
                auto out = open_out(corpus_out + ".distribution.txt");
                write_distribution_text(out, report);
            }
            if (!corpus_text.empty()) {
                auto out = open_out(corpus_text);
                export_corpus_text(out, corpus);
            }
            std::cout << corpus.samples.size() << " samples, " << corpus.dropped << " incomplete matches dropped\n";
            return 0;
        }

        if (*train_cmd) {
            ExperimentConfig cfg = config_or_default(train_config);
            if (train_epochs) {
                cfg.train.max_epochs = *train_epochs;
                cfg.train.patience = std::min(cfg.train.patience, std::max(1, *train_epochs - 1));
                if (*train_epochs == 1) cfg.train.early_stopping = false;
            }
            if (train_seed_opt) cfg.master_seed = *train_seed_opt;
            const ModelKind kind = train_model.empty() ? cfg.model : parse_model_kind(train_model);
            const Corpus corpus = read_corpus(train_corpus);
            const TrainedSurrogate t = train_surrogate(corpus, kind, cfg, log_line);
            save_model(train_out, t.model);
            {
                auto out = open_out(train_out + ".metrics.csv");
                write_metrics_csv(out, t.result.validation_metrics);
            }
            {
                auto out = open_out(train_out + ".epochs.csv");
                write_epoch_log(out, t.result.log);
            }
            write_metrics_csv(std::cout, t.result.validation_metrics);
            return 0;
        }

        if (*evolve_cmd) {
            ExperimentConfig cfg = config_or_default(evo_config);
            DesiredOutcome target = target_preset(evo_target);
            if (evo_dt) target.d_t = *evo_dt;
            if (evo_ds) target.d_s = *evo_ds;
            EvolutionConfig ec = cfg.evolution;
            ec.seed = evo_seed ? *evo_seed : evolve_seed(cfg, 0);
            const Model model = load_model(evo_model);
            const RunResult r = evolve(model, encode_level(read_level_file(evo_level)), target, ec);
            const ClassPair pair = decode_genotype(r.best);
            const CharacterClass classes[] = {pair.player1, pair.player2};
            if (fs::path(evo_out).has_parent_path()) fs::create_directories(fs::path(evo_out).parent_path());
            write_class_file(evo_out, classes);
            if (!evo_trace.empty()) {
                auto out = open_out(evo_trace);
                write_trace_csv(out, r.trace);
            }
            std::cout << "fitness " << r.best_fitness << ", predicted duration " << r.best_prediction.t << ", score "
                      << r.best_prediction.s << '\n';
            return 0;
        }

        if (*eval_cmd) {
            ExperimentConfig cfg = config_or_default(eval_config);
            if (!eval_levels.empty()) cfg.designed_levels = eval_levels;
            if (eval_generated) cfg.generated_eval_levels = *eval_generated;
            const Model model = load_model(eval_model);
            const auto levels = evaluation_levels(cfg);
            if (levels.empty()) throw std::runtime_error("no evaluation levels");
            const auto runs = evolve_all(model, levels, cfg, eval_jobs, log_line);
            const Evaluation eval = evaluate_runs(runs, levels, cfg, eval_jobs, log_line);
            const std::string dir = eval_out.empty() ? (fs::path(cfg.output_dir) / cfg.id).string() : eval_out;
            write_evaluation(dir, cfg, runs, eval);
            write_summary(std::cout, eval);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
