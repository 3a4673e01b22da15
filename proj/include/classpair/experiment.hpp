#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "classpair/analysis.hpp"
#include "classpair/config.hpp"

namespace classpair {

// Stage seeds, all derived from the master seed.
std::uint64_t split_seed(const ExperimentConfig& cfg);
std::uint64_t model_init_seed(const ExperimentConfig& cfg);
std::uint64_t train_seed(const ExperimentConfig& cfg);
std::uint64_t eval_level_seed(const ExperimentConfig& cfg, int index);
std::uint64_t evolve_seed(const ExperimentConfig& cfg, int run);
std::vector<std::uint64_t> ground_truth_seeds(const ExperimentConfig& cfg, int run);

using LogFn = std::function<void(const std::string&)>;

struct TrainedSurrogate {
    Model model;
    TrainResult result;
    std::size_t train_samples = 0;
    std::size_t validation_samples = 0;
};

/// Seeded split, seeded initialization, then training.
TrainedSurrogate train_surrogate(const Corpus& corpus, ModelKind kind, const ExperimentConfig& cfg,
                                 const LogFn& log = {});

struct EvalLevel {
    std::string id;
    MapOrigin origin = MapOrigin::generated;
    Level level;
};

/// Freshly generated levels followed by the designed level files.
std::vector<EvalLevel> evaluation_levels(const ExperimentConfig& cfg);

struct EvolvedRun {
    std::string level_id;
    MapOrigin origin = MapOrigin::generated;
    std::string preset;
    DesiredOutcome target;
    RunResult run;
};

/// One run per (level, preset), in level-major order.
std::vector<EvolvedRun> evolve_all(const Surrogate& surrogate, const std::vector<EvalLevel>& levels,
                                   const ExperimentConfig& cfg, int jobs = 1, const LogFn& log = {});

struct Evaluation {
    std::vector<AccuracyRecord> records;
    DistanceReport distances;
    std::vector<TrendRow> trend;
    std::vector<TF2Counts> tf2;
    std::optional<WelchResult> long_vs_short;  // per-run GT durations
    std::vector<std::pair<std::string, double>> mean_hp;  // per preset, both players
};

Evaluation evaluate_runs(const std::vector<EvolvedRun>& runs, const std::vector<EvalLevel>& levels,
                         const ExperimentConfig& cfg, int jobs = 1, const LogFn& log = {});

/// Writes <dir>/<id>_{accuracy,distance,trend,tf2}.csv, <id>_summary.txt and
/// one class file per run under <dir>/pairs.
void write_evaluation(const std::string& dir, const ExperimentConfig& cfg, const std::vector<EvolvedRun>& runs,
                      const Evaluation& eval);
void write_summary(std::ostream& out, const Evaluation& eval);

}  // namespace classpair
