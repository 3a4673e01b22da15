#include "classpair/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace classpair {

using nlohmann::json;

void ExperimentConfig::validate() const {
    if (id.empty()) throw ConfigError("id must not be empty");
    try {
        settings.generator.validate();
        settings.ranges.validate();
        settings.match.validate();
        train.validate();
        evolution.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (corpus_configs < 1) throw ConfigError("corpus_configs must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("validation_fraction must lie in (0,1)");
    if (tf2.empty()) throw ConfigError("tf2 reference table is empty");
    if (!(tf2_threshold > 0.0)) throw ConfigError("tf2_threshold must be positive");
    if (generated_eval_levels < 0) throw ConfigError("generated_eval_levels must be non-negative");
    if (ground_truth_runs < 2) throw ConfigError("ground_truth_runs must be at least 2");
}

namespace {

// Reads the keys of one JSON object into fields, rejecting unknown keys.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    template <typename T>
    Reader& get(const char* key, T& value) {
        seen_.push_back(key);
        if (const auto it = j_.find(key); it != j_.end()) {
            try {
                value = it->template get<T>();
            } catch (const json::exception& e) {
                throw ConfigError(path_ + "." + key + ": " + e.what());
            }
        }
        return *this;
    }

    Reader& get(const char* key, Interval& value) {
        seen_.push_back(key);
        if (const auto it = j_.find(key); it != j_.end()) {
            if (!it->is_array() || it->size() != 2) throw ConfigError(path_ + "." + key + ": expected [min, max]");
            value = {(*it)[0].get<double>(), (*it)[1].get<double>()};
        }
        return *this;
    }

    template <typename Fn>
    Reader& object(const char* key, Fn&& fn) {
        seen_.push_back(key);
        if (const auto it = j_.find(key); it != j_.end()) {
            Reader sub(*it, path_ + "." + key);
            fn(sub);
            sub.finish();
        }
        return *this;
    }

    const json* raw(const char* key) {
        seen_.push_back(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, _] : j_.items())
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                throw ConfigError(path_ + ": unknown key \"" + key + "\"");
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    std::string model = std::string(to_string(cfg.model));
    Reader root(j, "config");
    root.get("id", cfg.id)
        .get("master_seed", cfg.master_seed)
        .get("output_dir", cfg.output_dir)
        .get("corpus_configs", cfg.corpus_configs)
        .get("validation_fraction", cfg.validation_fraction)
        .get("model", model)
        .get("tf2_threshold", cfg.tf2_threshold)
        .get("generated_eval_levels", cfg.generated_eval_levels)
        .get("designed_levels", cfg.designed_levels)
        .get("ground_truth_runs", cfg.ground_truth_runs);
    root.object("generator", [&](Reader& r) {
        GeneratorConfig& g = cfg.settings.generator;
        r.get("stairs_probability", g.stairs_probability)
            .get("powerup_probability", g.powerup_probability)
            .get("digger_target_bias", g.digger_target_bias)
            .get("ca_iterations", g.ca_iterations)
            .get("ca_wall_threshold", g.ca_wall_threshold)
            .get("ca_revert_threshold", g.ca_revert_threshold)
            .get("ca_wall_probability", g.ca_wall_probability)
            .get("ca_revert_probability", g.ca_revert_probability)
            .get("max_attempts", g.max_attempts);
    });
    root.object("ranges", [&](Reader& r) {
        ParamRanges& p = cfg.settings.ranges;
        r.get("hit_points", p.hit_points)
            .get("speed", p.speed)
            .get("damage", p.damage)
            .get("accuracy", p.accuracy)
            .get("rate_of_fire", p.rate_of_fire)
            .get("clip_size", p.clip_size)
            .get("bullets_per_shot", p.bullets_per_shot)
            .get("range_tiles", p.range_tiles);
    });
    root.object("match", [&](Reader& r) {
        MatchConfig& m = cfg.settings.match;
        r.get("kill_limit", m.kill_limit)
            .get("time_limit", m.time_limit)
            .get("tick", m.tick)
            .get("respawn_delay", m.respawn_delay)
            .get("reload_time", m.reload_time)
            .get("perception_radius", m.perception_radius)
            .get("heal_seek_threshold", m.heal_seek_threshold)
            .get("healing_amount", m.healing_amount)
            .get("armor_amount", m.armor_amount)
            .get("double_damage_duration", m.double_damage_duration)
            .get("double_damage_multiplier", m.double_damage_multiplier)
            .get("healing_respawn", m.healing_respawn)
            .get("armor_respawn", m.armor_respawn)
            .get("double_damage_respawn", m.double_damage_respawn);
    });
    root.object("train", [&](Reader& r) {
        TrainConfig& t = cfg.train;
        r.get("max_epochs", t.max_epochs)
            .get("patience", t.patience)
            .get("early_stopping", t.early_stopping)
            .get("batch_size", t.batch_size)
            .get("learning_rate", t.learning_rate)
            .get("beta1", t.beta1)
            .get("beta2", t.beta2)
            .get("adam_epsilon", t.adam_epsilon);
    });
    root.object("evolution", [&](Reader& r) {
        EvolutionConfig& e = cfg.evolution;
        r.get("population", e.population)
            .get("generations", e.generations)
            .get("crossover_probability", e.crossover_probability)
            .get("mutation_probability", e.mutation_probability)
            .get("mutation_sigma", e.mutation_sigma);
    });
    if (const json* refs = root.raw("tf2")) {
        if (!refs->is_array()) throw ConfigError("config.tf2: expected an array");
        cfg.tf2.clear();
        for (const json& item : *refs) {
            TF2Reference ref;
            Reader r(item, "config.tf2[]");
            r.get("label", ref.label).get("vector", ref.vector).finish();
            cfg.tf2.push_back(ref);
        }
    }
    root.finish();

    try {
        cfg.model = parse_model_kind(model);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    for (std::string& path : cfg.designed_levels)
        if (std::filesystem::path(path).is_relative()) path = (std::filesystem::path(base_dir) / path).string();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), std::filesystem::path(path).parent_path().string());
}

std::string dump_config(const ExperimentConfig& cfg) {
    auto interval = [](const Interval& i) { return json::array({i.min, i.max}); };
    const GeneratorConfig& g = cfg.settings.generator;
    const ParamRanges& p = cfg.settings.ranges;
    const MatchConfig& m = cfg.settings.match;
    nlohmann::ordered_json j;
    j["id"] = cfg.id;
    j["master_seed"] = cfg.master_seed;
    j["output_dir"] = cfg.output_dir;
    j["corpus_configs"] = cfg.corpus_configs;
    j["validation_fraction"] = cfg.validation_fraction;
    j["model"] = to_string(cfg.model);
    j["generator"] = {{"stairs_probability", g.stairs_probability},
                      {"powerup_probability", g.powerup_probability},
                      {"digger_target_bias", g.digger_target_bias},
                      {"ca_iterations", g.ca_iterations},
                      {"ca_wall_threshold", g.ca_wall_threshold},
                      {"ca_revert_threshold", g.ca_revert_threshold},
                      {"ca_wall_probability", g.ca_wall_probability},
                      {"ca_revert_probability", g.ca_revert_probability},
                      {"max_attempts", g.max_attempts}};
    j["ranges"] = {{"hit_points", interval(p.hit_points)},
                   {"speed", interval(p.speed)},
                   {"damage", interval(p.damage)},
                   {"accuracy", interval(p.accuracy)},
                   {"rate_of_fire", interval(p.rate_of_fire)},
                   {"clip_size", interval(p.clip_size)},
                   {"bullets_per_shot", interval(p.bullets_per_shot)},
                   {"range_tiles", p.range_tiles}};
    j["match"] = {{"kill_limit", m.kill_limit},
                  {"time_limit", m.time_limit},
                  {"tick", m.tick},
                  {"respawn_delay", m.respawn_delay},
                  {"reload_time", m.reload_time},
                  {"perception_radius", m.perception_radius},
                  {"heal_seek_threshold", m.heal_seek_threshold},
                  {"healing_amount", m.healing_amount},
                  {"armor_amount", m.armor_amount},
                  {"double_damage_duration", m.double_damage_duration},
                  {"double_damage_multiplier", m.double_damage_multiplier},
                  {"healing_respawn", m.healing_respawn},
                  {"armor_respawn", m.armor_respawn},
                  {"double_damage_respawn", m.double_damage_respawn}};
    j["train"] = {{"max_epochs", cfg.train.max_epochs},
                  {"patience", cfg.train.patience},
                  {"early_stopping", cfg.train.early_stopping},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"adam_epsilon", cfg.train.adam_epsilon}};
    j["evolution"] = {{"population", cfg.evolution.population},
                      {"generations", cfg.evolution.generations},
                      {"crossover_probability", cfg.evolution.crossover_probability},
                      {"mutation_probability", cfg.evolution.mutation_probability},
                      {"mutation_sigma", cfg.evolution.mutation_sigma}};
    j["tf2"] = json::array();
    for (const TF2Reference& r : cfg.tf2) j["tf2"].push_back({{"label", r.label}, {"vector", r.vector}});
    j["tf2_threshold"] = cfg.tf2_threshold;
    j["generated_eval_levels"] = cfg.generated_eval_levels;
    j["designed_levels"] = cfg.designed_levels;
    j["ground_truth_runs"] = cfg.ground_truth_runs;
    return j.dump(2) + "\n";
}

}  // namespace classpair
