#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "classpair/classes.hpp"
#include "classpair/corpus.hpp"
#include "classpair/evolve.hpp"
#include "classpair/surrogate.hpp"

namespace classpair {

struct ExperimentConfig {
    std::string id = "desk";
    std::uint64_t master_seed = 2024;
    std::string output_dir = "experiments";

    CorpusSettings settings;  // generator, parameter ranges, match rules
    int corpus_configs = 2500;
    double validation_fraction = 0.1;

    ModelKind model = ModelKind::cnn;
    TrainConfig train;
    EvolutionConfig evolution;

    std::vector<TF2Reference> tf2 = default_tf2_references();
    double tf2_threshold = 1.5;

    int generated_eval_levels = 5;
    std::vector<std::string> designed_levels;  // level files; relative paths resolve against the config file
    int ground_truth_runs = 10;

    void validate() const;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Keys absent from the JSON keep their defaults; unknown keys are errors.
ExperimentConfig parse_config(std::string_view json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace classpair
