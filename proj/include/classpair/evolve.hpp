#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "classpair/classes.hpp"
#include "classpair/random.hpp"
#include "classpair/surrogate.hpp"

namespace classpair {

struct DesiredOutcome {
    double d_t = 0.33;  // normalized duration
    double d_s = 0.5;   // score

    void validate() const;
};

struct TargetPreset {
    std::string_view name;
    DesiredOutcome target;
};

/// short 0.11, medium 0.33, long 1.0; all balanced (0.5).
inline constexpr std::array<TargetPreset, 3> kTargetPresets{{
    {"short", {0.11, 0.5}},
    {"medium", {0.33, 0.5}},
    {"long", {1.0, 0.5}},
}};

/// Throws std::invalid_argument for unknown preset names.
DesiredOutcome target_preset(std::string_view name);

/// Euclidean distance between (t, s) and the target; minimized.
double fitness(double t, double s, const DesiredOutcome& target);

struct EvolutionConfig {
    int population = 100;
    int generations = 100;
    double crossover_probability = 0.2;
    double mutation_probability = 0.1;
    double mutation_sigma = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GenerationStats {
    int generation = 0;
    double best_ever = 0.0;
    double best = 0.0;  // within this generation
    double mean = 0.0;
};

struct RunResult {
    Genotype best{};
    double best_fitness = 0.0;
    Prediction best_prediction;
    std::vector<GenerationStats> trace;
};

/// Predicts t = gene 0 and s = gene 1, ignoring the level. Lets the GA be
/// tested on a known convex landscape.
class IdentitySurrogate final : public Surrogate {
public:
    std::unique_ptr<LevelPredictor> bind(const ChannelStack& level) const override;
};

std::vector<double> evaluate_population(const LevelPredictor& predictor, std::span<const Genotype> genotypes,
                                        const DesiredOutcome& target, std::vector<Prediction>* predictions = nullptr);
std::vector<double> evaluate_population(const Surrogate& surrogate, const ChannelStack& level,
                                        std::span<const Genotype> genotypes, const DesiredOutcome& target);

/// Weights (f_max - f_i) + 1e-6 (1 + f_max), sampled with replacement.
std::vector<double> roulette_weights(std::span<const double> fitness);
std::vector<std::size_t> roulette_select(std::span<const double> fitness, std::size_t count, Rng& rng);

/// Children exchange every gene from `point` on. 1 <= point <= 15.
std::pair<Genotype, Genotype> one_point_crossover(const Genotype& a, const Genotype& b, int point);

/// Continuous genes get clamped Gaussian noise; range genes jump to one of the
/// other two categories.
Genotype mutate(const Genotype& genes, const EvolutionConfig& cfg, Rng& rng);

Genotype random_genotype(Rng& rng);

RunResult evolve(const Surrogate& surrogate, const ChannelStack& level, const DesiredOutcome& target,
                 const EvolutionConfig& cfg);

void write_trace_csv(std::ostream& out, std::span<const GenerationStats> trace);

}  // namespace classpair
