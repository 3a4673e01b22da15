#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "classpair/classes.hpp"
#include "classpair/level.hpp"
#include "classpair/simulator.hpp"

namespace classpair {

inline constexpr double kDurationFloor = 150.0;    // seconds mapped to 0
inline constexpr double kDurationCeiling = 600.0;  // seconds mapped to 1

/// clamp((seconds - 150) / 450, 0, 1)
double normalize_duration(double seconds);
double denormalize_duration(double normalized);

struct Sample {
    ChannelStack channels;
    std::array<float, kPairParams> params{};  // genotype layout, range genes 0/0.5/1
    float score = 0.5f;
    float duration_norm = 0.0f;
    std::uint64_t level_seed = 0;
    std::uint64_t class_seed = 0;
    std::uint64_t sim_seed = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Corpus {
    std::vector<Sample> samples;
    std::uint64_t dropped = 0;        // incomplete matches left out
    std::uint64_t config_digest = 0;  // digest of the settings that built it
    // Raw match durations in seconds, parallel to samples. Only filled while
    // building; not persisted.
    std::vector<double> durations;
};

struct CorpusSettings {
    GeneratorConfig generator;
    ParamRanges ranges;
    MatchConfig match;
};

std::uint64_t corpus_digest(const CorpusSettings& settings, std::uint64_t master_seed, int n_configs);

/// Outcome of one configuration: both role assignments of the same pair.
struct ConfigResult {
    std::vector<Sample> samples;
    std::vector<double> durations;
    int dropped = 0;
};

/// Plays (A, B) then (B, A) on `level`; incomplete matches are dropped.
ConfigResult simulate_config(const Level& level, const ClassPair& pair, std::uint64_t level_seed,
                             std::uint64_t class_seed, std::array<std::uint64_t, 2> sim_seeds,
                             const CorpusSettings& settings);

/// Called after each finished configuration with (done, total).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/// Deterministic per master seed regardless of `jobs`.
Corpus build_corpus(int n_configs, std::uint64_t master_seed, const CorpusSettings& settings, int jobs = 1,
                    const ProgressFn& progress = {});

/// Seeded shuffle; validation gets round(n * fraction) samples.
std::pair<Corpus, Corpus> split(const Corpus& corpus, double fraction, std::uint64_t seed);

struct DistributionReport {
    static constexpr int kBins = 20;
    std::size_t count = 0;
    std::array<std::size_t, kBins> score_bins{};
    std::array<std::size_t, kBins> duration_bins{};
    double duration_mean = 0.0;  // seconds
    double duration_std = 0.0;
    bool raw_durations = false;  // false: estimated from clamped normalized values
};

DistributionReport distribution_report(const Corpus& corpus);
void write_distribution_csv(std::ostream& out, const DistributionReport& report);
void write_distribution_text(std::ostream& out, const DistributionReport& report);

// ---------------------------------------------------------------------------
// Files

class CorpusFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
Corpus read_corpus(std::istream& in);

/// One JSON object per sample, level rendered in the text tile format.
void export_corpus_text(std::ostream& out, const Corpus& corpus);

}  // namespace classpair
