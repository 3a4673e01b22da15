#include "classpair/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace classpair {

void DesiredOutcome::validate() const {
    if (!(d_t >= 0.0 && d_t <= 1.0) || !(d_s >= 0.0 && d_s <= 1.0))
        throw std::invalid_argument("desired duration and score must lie in [0,1]");
}

DesiredOutcome target_preset(std::string_view name) {
    for (const TargetPreset& p : kTargetPresets)
        if (p.name == name) return p.target;
    throw std::invalid_argument("unknown target preset: " + std::string(name));
}

double fitness(double t, double s, const DesiredOutcome& target) {
    return std::hypot(t - target.d_t, s - target.d_s);
}

void EvolutionConfig::validate() const {
    if (population < 2 || population % 2 != 0) throw std::invalid_argument("population must be even and >= 2");
    if (generations < 1) throw std::invalid_argument("generations must be positive");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(crossover_probability) || !prob(mutation_probability))
        throw std::invalid_argument("probabilities must lie in [0,1]");
    if (!(mutation_sigma >= 0.0)) throw std::invalid_argument("mutation sigma must be non-negative");
}

namespace {

class IdentityPredictor final : public LevelPredictor {
public:
    void predict(std::span<const Genotype> genotypes, std::span<Prediction> out) const override {
        for (std::size_t i = 0; i < genotypes.size(); ++i) out[i] = make_prediction(genotypes[i][1], genotypes[i][0]);
    }
};

}  // namespace

std::unique_ptr<LevelPredictor> IdentitySurrogate::bind(const ChannelStack&) const {
    return std::make_unique<IdentityPredictor>();
}

std::vector<double> evaluate_population(const LevelPredictor& predictor, std::span<const Genotype> genotypes,
                                        const DesiredOutcome& target, std::vector<Prediction>* predictions) {
    std::vector<Prediction> local;
    std::vector<Prediction>& preds = predictions ? *predictions : local;
    preds.resize(genotypes.size());
    predictor.predict(genotypes, preds);
    std::vector<double> f(genotypes.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = fitness(preds[i].t, preds[i].s, target);
        if (!std::isfinite(f[i])) throw NumericError("surrogate produced a non-finite prediction");
    }
    return f;
}

std::vector<double> evaluate_population(const Surrogate& surrogate, const ChannelStack& level,
                                        std::span<const Genotype> genotypes, const DesiredOutcome& target) {
    return evaluate_population(*surrogate.bind(level), genotypes, target);
}

std::vector<double> roulette_weights(std::span<const double> fitness) {
    if (fitness.empty()) throw std::invalid_argument("cannot select from an empty population");
    const double f_max = *std::max_element(fitness.begin(), fitness.end());
    const double eps = 1e-6 * (1.0 + f_max);
    std::vector<double> w(fitness.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (f_max - fitness[i]) + eps;
    return w;
}

std::vector<std::size_t> roulette_select(std::span<const double> fitness, std::size_t count, Rng& rng) {
    const std::vector<double> w = roulette_weights(fitness);
    std::vector<double> cumulative(w.size());
    std::partial_sum(w.begin(), w.end(), cumulative.begin());
    const double total = cumulative.back();
    std::vector<std::size_t> picks(count);
    for (std::size_t& p : picks) {
        const double r = uniform01(rng) * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        p = std::min(static_cast<std::size_t>(it - cumulative.begin()), w.size() - 1);
    }
    return picks;
}

std::pair<Genotype, Genotype> one_point_crossover(const Genotype& a, const Genotype& b, int point) {
    if (point < 1 || point >= kPairParams) throw std::invalid_argument("crossover point must lie in [1, 15]");
    Genotype c1 = a;
    Genotype c2 = b;
    for (int i = point; i < kPairParams; ++i) std::swap(c1[static_cast<std::size_t>(i)], c2[static_cast<std::size_t>(i)]);
    return {c1, c2};
}

Genotype mutate(const Genotype& genes, const EvolutionConfig& cfg, Rng& rng) {
    Genotype out = genes;
    std::normal_distribution<double> noise(0.0, cfg.mutation_sigma);
    for (int i = 0; i < kPairParams; ++i) {
        double& g = out[static_cast<std::size_t>(i)];
        if (!bernoulli(rng, cfg.mutation_probability)) continue;
        if (is_range_gene(i)) {
            const int current = static_cast<int>(range_from_embedding(g));
            const int next = (current + uniform_int(rng, 1, 2)) % 3;
            g = range_embedding(static_cast<WeaponRange>(next));
        } else {
            g = std::clamp(g + noise(rng), 0.0, 1.0);
        }
    }
    return out;
}

Genotype random_genotype(Rng& rng) {
    return encode_genotype(random_pair(rng));
}

RunResult evolve(const Surrogate& surrogate, const ChannelStack& level, const DesiredOutcome& target,
                 const EvolutionConfig& cfg) {
    cfg.validate();
    target.validate();
    const auto predictor = surrogate.bind(level);
    Rng rng(cfg.seed);
    const auto n = static_cast<std::size_t>(cfg.population);

    std::vector<Genotype> population(n);
    for (Genotype& g : population) g = random_genotype(rng);

    RunResult result;
    result.best_fitness = std::numeric_limits<double>::infinity();
    std::vector<Prediction> predictions;
    for (int gen = 0; gen < cfg.generations; ++gen) {
        const std::vector<double> f = evaluate_population(*predictor, population, target, &predictions);
        const auto best = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
        if (f[best] < result.best_fitness) {
            result.best_fitness = f[best];
            result.best = population[best];
            result.best_prediction = predictions[best];
        }
        result.trace.push_back(
            {gen, result.best_fitness, f[best], std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(n)});
        if (gen + 1 == cfg.generations) break;

        const std::vector<std::size_t> parents = roulette_select(f, n, rng);
        std::vector<Genotype> next;
        next.reserve(n);
        for (std::size_t i = 0; i < n; i += 2) {
            const Genotype& a = population[parents[i]];
            const Genotype& b = population[parents[i + 1]];
            if (bernoulli(rng, cfg.crossover_probability)) {
                const auto [c1, c2] = one_point_crossover(a, b, uniform_int(rng, 1, kPairParams - 1));
                next.push_back(c1);
                next.push_back(c2);
            } else {
                next.push_back(a);
                next.push_back(b);
            }
        }
        for (Genotype& g : next) g = mutate(g, cfg, rng);
        population = std::move(next);
    }
    return result;
}

void write_trace_csv(std::ostream& out, std::span<const GenerationStats> trace) {
    out << "generation,best_ever,best,mean\n" << std::setprecision(10);
    for (const GenerationStats& s : trace)
        out << s.generation << ',' << s.best_ever << ',' << s.best << ',' << s.mean << '\n';
}

}  // namespace classpair
