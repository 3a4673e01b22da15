#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "classpair/evolve.hpp"
#include "doctest.h"

using namespace classpair;

TEST_CASE("distance fitness examples") {
    CHECK(std::abs(fitness(0.3, 0.7, {0.3, 0.7})) <= 1e-12);
    CHECK(std::abs(fitness(1.0, 1.0, {0.0, 0.0}) - std::sqrt(2.0)) <= 1e-12);
    CHECK(std::abs(fitness(0.11, 0.6, {0.11, 0.5}) - 0.1) <= 1e-12);
    CHECK(fitness(0.2, 0.9, {0.6, 0.1}) == fitness(0.6, 0.1, {0.2, 0.9}));
}

TEST_CASE("target presets") {
    CHECK(target_preset("short").d_t == 0.11);
    CHECK(target_preset("medium").d_t == 0.33);
    CHECK(target_preset("long").d_t == 1.0);
    for (const TargetPreset& p : kTargetPresets) CHECK(p.target.d_s == 0.5);
    CHECK_THROWS_AS(target_preset("epic"), std::invalid_argument);
    CHECK_THROWS_AS((DesiredOutcome{1.2, 0.5}.validate()), std::invalid_argument);
}

TEST_CASE("identity surrogate feeds genes straight into the fitness") {
    Rng rng(1);
    std::vector<Genotype> pop;
    for (int i = 0; i < 100; ++i) pop.push_back(random_genotype(rng));
    pop.push_back(pop.front());
    const DesiredOutcome target{0.33, 0.5};
    const IdentitySurrogate stub;
    const auto f = evaluate_population(stub, ChannelStack{}, pop, target);
    REQUIRE(f.size() == 101);
    for (std::size_t i = 0; i < pop.size(); ++i) {
        CHECK(std::isfinite(f[i]));
        CHECK(f[i] == doctest::Approx(std::hypot(pop[i][0] - 0.33, pop[i][1] - 0.5)).epsilon(1e-12));
    }
    CHECK(f.front() == f.back());
}

TEST_CASE("predictions are clamped before the distance") {
    Model linear(ModelKind::linear);
    linear.params().back() << 1.7, -0.4;  // raw score above 1, raw duration below 0
    Rng rng(2);
    const Genotype g = random_genotype(rng);
    const auto f = evaluate_population(linear, encode_level(generate_level(1)), std::span(&g, 1), {0.0, 1.0});
    CHECK(f[0] == doctest::Approx(0.0));
}

TEST_CASE("roulette weights") {
    const std::vector<double> equal(4, 0.3);
    for (double w : roulette_weights(equal)) CHECK(w == roulette_weights(equal).front());

    const auto w = roulette_weights(std::vector<double>{0.0, 1.0});
    CHECK(w[0] / (w[0] + w[1]) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(w[1] / (w[0] + w[1]) < 1e-5);
}

TEST_CASE("roulette selection frequencies follow the weights") {
    const std::vector<double> f{0.1, 0.4, 0.25, 0.9, 0.6};
    // Independent oracle: the shifted weights computed by hand.
    const double f_max = 0.9;
    const double eps = 1e-6 * (1.0 + f_max);
    std::vector<double> expected;
    double total = 0.0;
    for (double v : f) {
        expected.push_back(f_max - v + eps);
        total += expected.back();
    }
    Rng rng(77);
    const std::size_t draws = 100000;
    const auto picks = roulette_select(f, draws, rng);
    std::vector<double> freq(f.size(), 0.0);
    for (std::size_t p : picks) freq[p] += 1.0 / static_cast<double>(draws);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CAPTURE(i);
        CHECK(std::abs(freq[i] - expected[i] / total) <= 0.02 * std::max(expected[i] / total, 0.01));
    }
    CHECK(freq[0] > freq[2]);
    CHECK(freq[2] > freq[1]);
    CHECK(freq[1] > freq[4]);
}

TEST_CASE("one-point crossover") {
    Genotype a{};
    Genotype b{};
    for (int i = 0; i < kPairParams; ++i) {
        a[static_cast<std::size_t>(i)] = i / 100.0;
        b[static_cast<std::size_t>(i)] = 0.5 + i / 100.0;
    }
    const auto [c1, c2] = one_point_crossover(a, b, 8);
    for (int i = 0; i < 8; ++i) {
        CHECK(c1[static_cast<std::size_t>(i)] == a[static_cast<std::size_t>(i)]);
        CHECK(c2[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)]);
    }
    for (int i = 8; i < kPairParams; ++i) {
        CHECK(c1[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)]);
        CHECK(c2[static_cast<std::size_t>(i)] == a[static_cast<std::size_t>(i)]);
    }
    for (int point = 1; point < kPairParams; ++point) {
        const auto [x, y] = one_point_crossover(a, b, point);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::multiset<double>{x[i], y[i]} == std::multiset<double>{a[i], b[i]});
    }
    const auto same = one_point_crossover(a, a, 5);
    CHECK(same.first == a);
    CHECK(same.second == a);
    CHECK_THROWS_AS(one_point_crossover(a, b, 0), std::invalid_argument);
    CHECK_THROWS_AS(one_point_crossover(a, b, 16), std::invalid_argument);
}

TEST_CASE("mutation") {
    Rng rng(5);
    EvolutionConfig cfg;
    cfg.mutation_probability = 0.0;
    const Genotype g = random_genotype(rng);
    CHECK(mutate(g, cfg, rng) == g);

    cfg.mutation_probability = 1.0;
    cfg.mutation_sigma = 10.0;
    Genotype ones{};
    ones.fill(1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Genotype m = mutate(ones, cfg, rng);
        for (int i = 0; i < kPairParams; ++i) {
            const double v = m[static_cast<std::size_t>(i)];
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            if (is_range_gene(i)) CHECK(v != 1.0);
        }
    }

    cfg.mutation_sigma = 0.1;
    std::map<double, int> jumps;
    for (int trial = 0; trial < 3000; ++trial) {
        const Genotype m = mutate(g, cfg, rng);
        CHECK(m[7] != g[7]);
        CHECK(m[15] != g[15]);
        CHECK((m[7] == 0.0 || m[7] == 0.5 || m[7] == 1.0));
        ++jumps[m[7]];
    }
    CHECK(jumps.size() == 2);
    for (const auto& [value, count] : jumps) CHECK(std::abs(count - 1500) < 150);
}

TEST_CASE("evolution against the identity surrogate") {
    const IdentitySurrogate stub;
    const DesiredOutcome target{0.33, 0.5};
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CAPTURE(seed);
        EvolutionConfig cfg;
        cfg.seed = seed;
        const RunResult r = evolve(stub, ChannelStack{}, target, cfg);
        CHECK(r.trace.size() == 100);
        CHECK(r.best_fitness < 0.05);
        CHECK(r.best_fitness == doctest::Approx(fitness(r.best[0], r.best[1], target)).epsilon(1e-12));
        for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].best_ever <= r.trace[i - 1].best_ever);
        for (const double g : r.best) {
            CHECK(g >= 0.0);
            CHECK(g <= 1.0);
        }
    }
    EvolutionConfig cfg;
    cfg.seed = 3;
    const RunResult a = evolve(stub, ChannelStack{}, target, cfg);
    const RunResult b = evolve(stub, ChannelStack{}, target, cfg);
    CHECK(a.best == b.best);
    std::ostringstream ta;
    std::ostringstream tb;
    write_trace_csv(ta, a.trace);
    write_trace_csv(tb, b.trace);
    CHECK(ta.str() == tb.str());
}

TEST_CASE("evolution config validation") {
    EvolutionConfig cfg;
    cfg.population = 7;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.crossover_probability = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
