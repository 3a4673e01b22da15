#include <string>

#include "classpair/config.hpp"
#include "doctest.h"

using namespace classpair;

TEST_CASE("config dump and parse round trip") {
    ExperimentConfig cfg;
    cfg.id = "round";
    cfg.master_seed = 77;
    cfg.corpus_configs = 12;
    cfg.model = ModelKind::linear;
    cfg.train.learning_rate = 0.01;
    cfg.evolution.population = 20;
    cfg.settings.ranges.hit_points = {50.0, 60.0};
    const std::string text = dump_config(cfg);
    const ExperimentConfig back = parse_config(text);
    CHECK(dump_config(back) == text);
    CHECK(back.id == "round");
    CHECK(back.master_seed == 77);
    CHECK(back.model == ModelKind::linear);
    CHECK(back.settings.ranges.hit_points.min == 50.0);
}

TEST_CASE("config keeps defaults for absent keys") {
    const ExperimentConfig cfg = parse_config(R"({"id": "x"})");
    const ExperimentConfig def;
    CHECK(cfg.id == "x");
    CHECK(cfg.master_seed == def.master_seed);
    CHECK(cfg.corpus_configs == def.corpus_configs);
    CHECK(cfg.train.batch_size == def.train.batch_size);
}

TEST_CASE("config rejects unknown keys, bad JSON and invalid values") {
    CHECK_THROWS_AS(parse_config(R"({"idd": "x"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"train": {"epochs": 3}})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"validation_fraction": 1.5})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model": "rnn"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"ground_truth_runs": 1})"), ConfigError);
}

TEST_CASE("designed level paths resolve against the config directory") {
    const ExperimentConfig cfg = parse_config(R"({"designed_levels": ["a.txt", "/abs/b.txt"]})", "/base/dir");
    REQUIRE(cfg.designed_levels.size() == 2);
    CHECK(cfg.designed_levels[0] == "/base/dir/a.txt");
    CHECK(cfg.designed_levels[1] == "/abs/b.txt");
}

TEST_CASE("shipped desk config loads") {
    const ExperimentConfig cfg = load_config(std::string(CLASSPAIR_DATA_DIR) + "/../configs/desk.json");
    CHECK(cfg.id == "desk");
    CHECK(cfg.designed_levels.size() == 5);
}
