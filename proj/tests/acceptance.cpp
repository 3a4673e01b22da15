// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "classpair/experiment.hpp"

using namespace classpair;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " | " << o.detail << std::endl;
}

void run(int id, const std::string& title, const std::function<Outcome()>& fn) {
    try {
        report(id, title, fn());
    } catch (const std::exception& e) {
        report(id, title, {false, std::string("exception: ") + e.what()});
    }
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

// Every walkable tile is reachable from, and can reach, the first walkable tile.
bool strongly_connected(const Level& level) {
    const MovementGraph g = movement_graph(level);
    int start = -1;
    int walkable = 0;
    for (int i = 0; i < kTileCount; ++i)
        if (level.at(i).elevation < 2) {
            ++walkable;
            if (start < 0) start = i;
        }
    if (start < 0) return false;
    const auto fwd = reachable_from(g, start);
    const auto back = reachable_from(g, start, true);
    int both = 0;
    for (int i = 0; i < kTileCount; ++i) both += fwd[static_cast<std::size_t>(i)] && back[static_cast<std::size_t>(i)];
    return both == walkable;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::string config_path = std::string(CLASSPAIR_SOURCE_DIR) + "/configs/desk.json";
    std::string out_dir = "acceptance_out";
    int jobs = 1;
    app.add_option("--config", config_path, "Experiment config");
    app.add_option("--out", out_dir, "Directory for artifacts");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    const ExperimentConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);
    std::cout << "config " << config_path << ", master seed " << cfg.master_seed << ", jobs " << jobs << std::endl;

    run(1, "level suite (1000 generated levels)", [&] {
        const auto t0 = Clock::now();
        int bad_onehot = 0, invalid = 0, disconnected = 0, roundtrip = 0;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            const Level level = generate_level(seed, cfg.settings.generator);
            const ChannelStack s = encode_level(level);
            for (int i = 0; i < kTileCount; ++i) {
                int sum = 0;
                for (int c = kGround; c <= kSecondFloor; ++c) sum += s.bits[static_cast<std::size_t>(c * kTileCount + i)];
                if (sum != 1) {
                    ++bad_onehot;
                    break;
                }
            }
            if (find_violation(level)) ++invalid;
            if (!strongly_connected(level)) ++disconnected;
            if (!(parse_level(render_level(level)) == level)) ++roundtrip;
        }
        const double t = seconds_since(t0);
        return Outcome{bad_onehot + invalid + disconnected + roundtrip == 0 && t < 60.0,
                       "one-hot failures " + std::to_string(bad_onehot) + ", invalid " + std::to_string(invalid) +
                           ", disconnected " + std::to_string(disconnected) + ", round-trip failures " +
                           std::to_string(roundtrip) + ", " + fmt(t, 3) + " s (limit 60)"};
    });

    run(2, "network shape anchor", [&] {
        const Model m = Model::initialized(ModelKind::cnn, 1);
        Rng rng(2);
        bool ok = true;
        std::string detail;
        for (int trial = 0; trial < 5; ++trial) {
            const ChannelStack level = encode_level(generate_level(static_cast<std::uint64_t>(trial)));
            const Genotype g = random_genotype(rng);
            int flatten = -1, output = -1;
            for (const TraceEntry& e : m.trace(level, g)) {
                if (e.name == "flatten") flatten = e.width();
                if (e.name == "output") output = e.width();
            }
            const ChannelStack* maps[] = {&level, &level, &level};
            const Eigen::MatrixXd y = m.forward(maps, Eigen::MatrixXd::Constant(kPairParams, 3, 0.5));
            ok = ok && flatten == 800 && output == 2 && y.rows() == 2 && y.cols() == 3;
            detail = "flatten " + std::to_string(flatten) + ", output " + std::to_string(output);
        }
        return Outcome{ok, detail};
    });

    Corpus corpus;
    double corpus_seconds = 0.0;
    {
        const auto t0 = Clock::now();
        corpus = build_corpus(cfg.corpus_configs, cfg.master_seed, cfg.settings, jobs);
        corpus_seconds = seconds_since(t0);
        write_corpus((fs::path(out_dir) / "desk.cfc").string(), corpus);
        std::ofstream dist(fs::path(out_dir) / "desk_distribution.txt");
        write_distribution_text(dist, distribution_report(corpus));
        std::cout << "desk corpus: " << corpus.samples.size() << " samples, " << corpus.dropped << " dropped, "
                  << fmt(corpus_seconds, 3) << " s" << std::endl;
    }

    run(3, "gradient check (3 samples, all model kinds)", [&] {
        const auto t0 = Clock::now();
        const std::vector<Sample> samples(corpus.samples.begin(), corpus.samples.begin() + 3);
        double worst = 0.0;
        std::string where;
        std::size_t checked = 0;
        for (ModelKind k : {ModelKind::cnn, ModelKind::mlp16, ModelKind::perceptron, ModelKind::linear}) {
            GradientCheckConfig gc;
            gc.entries_per_tensor = 200;
            const GradientCheckResult r = gradient_check(Model::initialized(k, 3), samples, gc);
            checked += r.checked;
            if (r.max_relative_error >= worst) {
                worst = r.max_relative_error;
                where = std::string(to_string(k)) + "/" + r.worst_tensor;
            }
        }
        const double t = seconds_since(t0);
        return Outcome{worst < 1e-4 && t < 60.0, "max relative error " + fmt(worst, 3) + " at " + where + " over " +
                                                     std::to_string(checked) + " entries, " + fmt(t, 3) +
                                                     " s (limit 60)"};
    });

    run(4, "capacity (CNN fits 64 samples within 500 epochs)", [&] {
        const std::vector<Sample> subset(corpus.samples.begin(), corpus.samples.begin() + 64);
        Model m = Model::initialized(ModelKind::cnn, model_init_seed(cfg));
        TrainConfig tc = cfg.train;
        tc.max_epochs = 500;
        tc.batch_size = 8;
        tc.early_stopping = false;
        tc.target_train_loss = 1e-3;
        tc.seed = train_seed(cfg);
        const TrainResult r = train(m, subset, subset, tc);
        const double mse = evaluate_loss(m, subset);
        return Outcome{mse < 1e-3, "training loss " + fmt(mse, 3) + " after " + std::to_string(r.log.size()) +
                                       " epochs (batch " + std::to_string(tc.batch_size) + ")"};
    });

    std::optional<Model> cnn;
    double cnn_train_seconds = 0.0;
    run(5, "baseline ordering on the desk corpus", [&] {
        std::map<ModelKind, Metrics> m;
        std::ostringstream detail;
        double train_seconds = 0.0;
        for (ModelKind k : {ModelKind::cnn, ModelKind::perceptron, ModelKind::linear, ModelKind::mlp16}) {
            const auto t0 = Clock::now();
            TrainedSurrogate t = train_surrogate(corpus, k, cfg);
            const double elapsed = seconds_since(t0);
            train_seconds += elapsed;
            m[k] = t.result.validation_metrics;
            std::ofstream metrics_out(fs::path(out_dir) / (std::string(to_string(k)) + ".metrics.csv"));
            write_metrics_csv(metrics_out, m[k]);
            std::ofstream epochs_out(fs::path(out_dir) / (std::string(to_string(k)) + ".epochs.csv"));
            write_epoch_log(epochs_out, t.result.log);
            detail << to_string(k) << " MAE_s " << fmt(m[k].mae_s) << " MAE_t " << fmt(m[k].mae_t) << " R2_s "
                   << fmt(m[k].r2_s.value_or(NAN)) << " R2_t " << fmt(m[k].r2_t.value_or(NAN)) << "; ";
            if (k == ModelKind::cnn) {
                cnn_train_seconds = elapsed;
                save_model((fs::path(out_dir) / "cnn.cfw").string(), t.model);
                cnn = std::move(t.model);
            }
        }
        const bool order = m[ModelKind::cnn].mae_s <= m[ModelKind::perceptron].mae_s &&
                           m[ModelKind::cnn].mae_s <= m[ModelKind::linear].mae_s;
        detail << corpus.samples.size() << " samples; corpus " << fmt(corpus_seconds, 3) << " s (limit 1800), training "
               << fmt(train_seconds, 3) << " s (limit 1200)";
        return Outcome{order && corpus_seconds < 1800.0 && train_seconds < 1200.0, detail.str()};
    });

    run(6, "GA machinery oracle (identity surrogate)", [&] {
        const auto t0 = Clock::now();
        const IdentitySurrogate stub;
        int reached = 0;
        bool monotone = true;
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            EvolutionConfig ec = cfg.evolution;
            ec.seed = seed;
            const RunResult r = evolve(stub, ChannelStack{}, {0.33, 0.5}, ec);
            reached += r.best_fitness < 0.05 ? 1 : 0;
            worst = std::max(worst, r.best_fitness);
            for (std::size_t i = 1; i < r.trace.size(); ++i)
                monotone = monotone && r.trace[i].best_ever <= r.trace[i - 1].best_ever;
        }
        const double t = seconds_since(t0);
        return Outcome{reached == 10 && monotone && t < 10.0,
                       std::to_string(reached) + "/10 runs below 0.05 (worst " + fmt(worst, 3) + "), traces " +
                           (monotone ? "monotone" : "NOT monotone") + ", " + fmt(t, 3) + " s (limit 10)"};
    });

    run(7, "distance fitness examples", [&] {
        const double a = std::abs(fitness(0.4, 0.6, {0.4, 0.6}) - 0.0);
        const double b = std::abs(fitness(1.0, 1.0, {0.0, 0.0}) - std::sqrt(2.0));
        const double c = std::abs(fitness(0.11, 0.6, {0.11, 0.5}) - 0.1);
        const double worst = std::max({a, b, c});
        return Outcome{worst <= 1e-12, "max deviation " + fmt(worst, 3)};
    });

    run(8, "simulator determinism and conservation", [&] {
        const auto t0 = Clock::now();
        const MatchConfig& mc = cfg.settings.match;
        const ParamRanges& pr = cfg.settings.ranges;
        bool identical = true;
        int completed = 0, conserved = 0;
        for (std::uint64_t i = 0; i < 200; ++i) {
            Rng rng(derive_seed(cfg.master_seed, "acceptance.sim", i));
            const Level level = generate_level(i, cfg.settings.generator);
            const ClassPair pair = random_pair(rng);
            const MatchOutcome a = simulate_match(level, pair, i, mc, pr);
            const MatchOutcome b = simulate_match(level, pair, i, mc, pr);
            identical = identical && a == b;
            if (a.completed) {
                ++completed;
                conserved += a.kills_p1 + a.kills_p2 == mc.kill_limit ? 1 : 0;
            }
        }
        const Level sym = read_level_file(std::string(CLASSPAIR_SOURCE_DIR) + "/data/levels/symmetric.txt");
        const Arena arena(sym);
        const PhysicalClass mid = denormalize(CharacterClass{}, pr);
        double total = 0.0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) total += simulate_match(arena, mid, mid, seed, mc).score;
        const double mean = total / 200.0;
        const double t = seconds_since(t0);
        return Outcome{identical && conserved == completed && std::abs(mean - 0.5) <= 0.05 && t < 300.0,
                       std::string("repeat runs ") + (identical ? "bit-identical" : "DIFFER") + ", " +
                           std::to_string(conserved) + "/" + std::to_string(completed) +
                           " completed matches with 20 kills, symmetric mean score " + fmt(mean) + ", " + fmt(t, 3) +
                           " s (limit 300)"};
    });

    run(9, "end-to-end: GT duration and hp trend across targets", [&] {
        if (!cnn) return Outcome{false, "no trained CNN (criterion 5 did not finish)"};
        const auto t0 = Clock::now();
        const auto levels = evaluation_levels(cfg);
        const auto runs = evolve_all(*cnn, levels, cfg, jobs);
        const Evaluation eval = evaluate_runs(runs, levels, cfg, jobs);
        write_evaluation((fs::path(out_dir) / "evaluation").string(), cfg, runs, eval);
        const double t = seconds_since(t0) + corpus_seconds + cnn_train_seconds;
        std::ostringstream detail;
        detail << runs.size() << " runs on " << levels.size() << " levels; mean hp";
        std::map<std::string, double> hp(eval.mean_hp.begin(), eval.mean_hp.end());
        for (const auto& [preset, v] : eval.mean_hp) detail << ' ' << preset << ' ' << fmt(v, 3);
        const bool trend = hp.count("short") && hp.count("medium") && hp.count("long") && hp["short"] < hp["medium"] &&
                           hp["medium"] < hp["long"];
        bool welch = false;
        if (eval.long_vs_short) {
            const WelchResult& w = *eval.long_vs_short;
            welch = w.t > 0.0 && w.p_greater < 0.05;
            detail << "; GT duration long " << fmt(w.mean_x, 3) << " vs short " << fmt(w.mean_y, 3) << ", Welch t "
                   << fmt(w.t, 3) << ", one-sided p " << fmt(w.p_greater, 3);
        } else {
            detail << "; Welch test undefined";
        }
        detail << "; " << fmt(t, 3) << " s including corpus and CNN training (limit 5400)";
        return Outcome{trend && welch && runs.size() == 30 && t < 5400.0, detail.str()};
    });

    run(10, "TF2 matcher", [&] {
        const auto refs = cfg.tf2;
        bool self = true;
        for (const TF2Reference& r : refs) {
            const TF2Match m = match_tf2(from_vector(std::span<const double, kClassParams>(r.vector)), refs);
            self = self && m.label == r.label && m.distance == 0.0;
        }
        CharacterClass far;
        far.hit_points = far.speed = far.damage = far.accuracy = far.rate_of_fire = far.clip_size =
            far.bullets_per_shot = 0.0;
        far.weapon_range = WeaponRange::Short;
        const bool undefined = match_tf2(far, refs, 0.1).label == kUndefinedLabel;
        // Equidistant from two references: the tie order decides.
        std::vector<TF2Reference> tie{{"sniper", {}}, {"scout", {}}};
        tie[0].vector.fill(0.25);
        tie[1].vector.fill(0.75);
        tie[0].vector[kRangeGene] = tie[1].vector[kRangeGene] = 0.5;
        CharacterClass middle;
        const std::string first = match_tf2(middle, tie).label;
        bool stable = first == "scout";
        for (int i = 0; i < 100; ++i) stable = stable && match_tf2(middle, tie).label == first;
        return Outcome{self && undefined && stable, std::string("self-labels ") + (self ? "exact" : "WRONG") +
                                                        ", undefined " + (undefined ? "ok" : "WRONG") +
                                                        ", tie goes to " + first};
    });

    run(11, "regression metrics oracle", [&] {
        const std::vector<double> target{0.0, 1.0};
        const std::vector<double> flipped{1.0, 0.0};
        const std::vector<double> mean{0.5, 0.5};
        const RegressionMetrics a = regression_metrics(target, target);
        const RegressionMetrics b = regression_metrics(flipped, target);
        const RegressionMetrics c = regression_metrics(mean, target);
        const std::vector<double> t3{0.2, 0.4, 0.9};
        const std::vector<double> p3{0.3, 0.3, 0.6};
        const RegressionMetrics d = regression_metrics(p3, t3);
        // By hand: MAE (0.1 + 0.1 + 0.3) / 3; SSE 0.11, SST 0.26.
        const double worst = std::max({std::abs(a.mae), std::abs(*a.r2 - 1.0), std::abs(b.mae - 1.0),
                                       std::abs(*b.r2 + 3.0), std::abs(c.mae - 0.5), std::abs(*c.r2),
                                       std::abs(d.mae - 0.5 / 3.0), std::abs(*d.r2 - (1.0 - 0.11 / 0.26))});
        return Outcome{worst <= 1e-12, "max deviation " + fmt(worst, 3)};
    });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
