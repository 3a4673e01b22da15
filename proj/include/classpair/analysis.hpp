#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "classpair/classes.hpp"
#include "classpair/evolve.hpp"
#include "classpair/level.hpp"
#include "classpair/simulator.hpp"
#include "classpair/surrogate.hpp"

namespace classpair {

/// Two-sided critical value of Student's t with `dof` degrees of freedom.
double t_critical(double dof, double confidence = 0.95);

struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;  // 95% t-interval; 0 for a single value
    std::size_t n = 0;
};

MeanCI mean_ci(std::span<const double> values, double confidence = 0.95);

struct GroundTruthStats {
    double a_t = 0.0;  // mean normalized duration
    double a_s = 0.0;  // mean score
    double ci_t = 0.0;
    double ci_s = 0.0;
    int n = 0;
    int incomplete = 0;  // matches that hit the time limit
};

/// Aggregates per-match normalized durations and scores. Needs n >= 2.
GroundTruthStats summarize_ground_truth(std::span<const double> durations_norm, std::span<const double> scores,
                                        int incomplete = 0);

/// Simulates the pair once per seed. Incomplete matches count with the time
/// limit as duration and their realized score.
GroundTruthStats ground_truth(const Level& level, const ClassPair& pair, std::span<const std::uint64_t> seeds,
                              const MatchConfig& match = {}, const ParamRanges& ranges = {}, int jobs = 1);

struct Accuracy {
    bool duration = false;
    bool score = false;
};

/// Closed-interval containment of the clamped prediction in mean +- ci.
Accuracy accuracy(const Prediction& p, const GroundTruthStats& stats);

enum class MapOrigin : std::uint8_t { generated, designed };
std::string_view to_string(MapOrigin origin);

struct AccuracyRecord {
    std::string level_id;
    MapOrigin origin = MapOrigin::generated;
    std::string preset;
    DesiredOutcome desired;
    Prediction prediction;
    GroundTruthStats stats;
    Accuracy accurate;
    // |a - d| per axis and Euclidean, then |a - p| per axis and Euclidean.
    std::array<double, 6> distances{};
};

AccuracyRecord make_record(std::string level_id, MapOrigin origin, std::string preset, const DesiredOutcome& desired,
                           const Prediction& prediction, const GroundTruthStats& stats);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct DistanceRow {
    std::string preset;
    MapOrigin origin = MapOrigin::generated;
    std::size_t runs = 0;
    std::array<MeanStd, 6> cells{};
};

struct DistanceReport {
    std::vector<DistanceRow> rows;    // preset-major, designed before generated
    std::vector<std::string> notes;   // groups without runs
};

DistanceReport distance_report(std::span<const AccuracyRecord> records);
void write_distance_csv(std::ostream& out, const DistanceReport& report);
void write_distance_text(std::ostream& out, const DistanceReport& report);
void write_accuracy_csv(std::ostream& out, std::span<const AccuracyRecord> records);

/// Product-moment correlation; empty if either variance is zero.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct WelchResult {
    double t = 0.0;
    double dof = 0.0;
    double p_two_sided = 1.0;
    double p_greater = 1.0;  // H1: mean(x) > mean(y)
    double mean_x = 0.0;
    double mean_y = 0.0;
};

/// Welch's unequal-variance two-sample t-test. Needs two values per sample
/// and a nonzero pooled variance.
WelchResult welch_test(std::span<const double> x, std::span<const double> y);

/// Genotypes evolved for one target preset.
struct PresetGroup {
    std::string preset;
    std::vector<Genotype> pairs;
};

struct TrendRow {
    std::string preset;
    int player = 1;
    std::string parameter;
    MeanCI value;
};

/// Mean and 95% CI of every gene per preset and player.
std::vector<TrendRow> trend_report(std::span<const PresetGroup> groups);
void write_trend_csv(std::ostream& out, std::span<const TrendRow> rows);

struct TF2Counts {
    std::string preset;
    int player = 0;  // 1 or 2; 0 for both players together
    std::map<std::string, int> counts;
};

std::vector<TF2Counts> tf2_report(std::span<const PresetGroup> groups, std::span<const TF2Reference> refs,
                                  double threshold = 1.5);
void write_tf2_csv(std::ostream& out, std::span<const TF2Counts> rows, std::span<const TF2Reference> refs);

}  // namespace classpair
