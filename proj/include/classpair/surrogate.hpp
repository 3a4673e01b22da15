#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "classpair/classes.hpp"
#include "classpair/corpus.hpp"
#include "classpair/level.hpp"

namespace classpair {

enum class ModelKind : std::uint8_t { cnn, mlp16, perceptron, linear };

std::string_view to_string(ModelKind kind);
/// Throws std::invalid_argument for unknown names.
ModelKind parse_model_kind(std::string_view name);

inline constexpr int kFlattenWidth = 800;
inline constexpr int kOutputWidth = 2;
inline constexpr int kFlatInputWidth = kChannelCount * kTileCount + kPairParams;  // 3216

// Output 0 is the score (kill ratio of player 1), output 1 the normalized
// duration.
struct Prediction {
    double p_s = 0.0;
    double p_t = 0.0;
    double s = 0.0;  // p_s clamped to [0,1]
    double t = 0.0;  // p_t clamped to [0,1]
};

Prediction make_prediction(double raw_score, double raw_duration);

struct LayerShape {
    std::string name;
    int rows = 0;
    int cols = 0;
};

/// Parameter tensors of a model kind, in storage order.
std::vector<LayerShape> network_spec(ModelKind kind);
std::uint64_t spec_digest(ModelKind kind);

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sizes of every intermediate activation of one forward pass.
struct TraceEntry {
    std::string name;
    std::vector<int> dims;

    int width() const;
};

/// Predicts (score, duration) for genotypes on one fixed level.
class LevelPredictor {
public:
    virtual ~LevelPredictor() = default;
    virtual void predict(std::span<const Genotype> genotypes, std::span<Prediction> out) const = 0;
};

/// Anything the GA can query. Implementations are immutable and may be shared
/// across threads.
class Surrogate {
public:
    virtual ~Surrogate() = default;
    virtual std::unique_ptr<LevelPredictor> bind(const ChannelStack& level) const = 0;
};

struct Gradients;

class Model final : public Surrogate {
public:
    /// Zero-initialized parameters.
    explicit Model(ModelKind kind);

    /// Zero biases and He-scaled Gaussian weights.
    static Model initialized(ModelKind kind, std::uint64_t seed);

    ModelKind kind() const { return kind_; }
    std::vector<Eigen::MatrixXd>& params() { return params_; }
    const std::vector<Eigen::MatrixXd>& params() const { return params_; }
    std::size_t parameter_count() const;

    /// Throws ShapeError naming the first tensor that does not match the spec.
    void check_shapes() const;

    /// Rounds every parameter to the nearest float32 so files reproduce the
    /// in-memory model exactly.
    void round_to_float();

    /// Raw outputs, 2 x n.
    Eigen::MatrixXd forward(std::span<const ChannelStack* const> maps, const Eigen::MatrixXd& params) const;
    Prediction predict(const ChannelStack& level, const Genotype& genes) const;
    std::vector<TraceEntry> trace(const ChannelStack& level, const Genotype& genes) const;

    std::unique_ptr<LevelPredictor> bind(const ChannelStack& level) const override;

    friend bool operator==(const Model& a, const Model& b);

private:
    ModelKind kind_;
    std::vector<Eigen::MatrixXd> params_;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> tensors;  // same layout as Model::params()
};

/// Mean over the batch of the squared error summed over both outputs, times
/// `loss_scale`. Fills `grads` (if non-null) with the analytic gradient.
/// Throws NumericError naming the layer if a gradient is not finite.
double loss_and_gradients(const Model& model, std::span<const ChannelStack* const> maps,
                          const Eigen::MatrixXd& params, const Eigen::MatrixXd& targets, Gradients* grads,
                          double loss_scale = 1.0);

struct GradientCheckConfig {
    double epsilon = 1e-5;
    int entries_per_tensor = 48;  // sampled entries; <= 0 checks every entry
    double denominator_floor = 1e-6;
    std::uint64_t seed = 1;
};

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::string worst_tensor;
    std::size_t checked = 0;
};

/// Central finite differences against loss_and_gradients, in double precision.
GradientCheckResult gradient_check(const Model& model, std::span<const Sample> samples,
                                   const GradientCheckConfig& cfg = {});

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int max_epochs = 100;
    int patience = 5;
    bool early_stopping = true;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 1;
    // Stop as soon as the full-pass training loss drops below this (0 = off).
    double target_train_loss = 0.0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;  // full pass after the epoch's updates
    double validation_loss = 0.0;
};

struct Metrics {
    double mae_t = 0.0;
    double mae_s = 0.0;
    std::optional<double> r2_t;  // empty when the target variance is zero
    std::optional<double> r2_s;
};

struct RegressionMetrics {
    double mae = 0.0;
    std::optional<double> r2;
};

/// MAE and R^2 = 1 - SSE/SST. Needs at least two values.
RegressionMetrics regression_metrics(std::span<const double> predictions, std::span<const double> targets);
Metrics metrics(std::span<const Prediction> predictions, std::span<const Sample> targets);

struct TrainResult {
    std::vector<EpochRecord> log;
    int best_epoch = 0;
    double best_validation_loss = 0.0;
    Metrics validation_metrics;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on mini-batches; restores the best-validation weights when early
/// stopping is on. Weights are rounded to float32 at the end.
TrainResult train(Model& model, std::span<const Sample> train_set, std::span<const Sample> validation_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

double evaluate_loss(const Model& model, std::span<const Sample> samples);
std::vector<Prediction> predict_samples(const Model& model, std::span<const Sample> samples);

void write_epoch_log(std::ostream& out, std::span<const EpochRecord> log);
void write_metrics_csv(std::ostream& out, const Metrics& m);

// ---------------------------------------------------------------------------
// Files

void save_model(std::ostream& out, const Model& model);
Model load_model(std::istream& in);
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace classpair
