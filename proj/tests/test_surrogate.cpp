#include <cmath>
#include <sstream>

#include "classpair/random.hpp"
#include "classpair/surrogate.hpp"
#include "doctest.h"

using namespace classpair;

namespace {

constexpr ModelKind kAllKinds[] = {ModelKind::cnn, ModelKind::mlp16, ModelKind::perceptron, ModelKind::linear};

std::vector<Sample> synthetic_samples(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.channels = encode_level(generate_level(seed * 100 + static_cast<std::uint64_t>(i)));
        for (float& p : s.params) p = static_cast<float>(uniform01(rng));
        s.score = static_cast<float>(uniform01(rng));
        s.duration_norm = static_cast<float>(uniform01(rng));
        out.push_back(s);
    }
    return out;
}

Genotype uniform_genotype(Rng& rng) {
    Genotype g{};
    for (double& v : g) v = uniform01(rng);
    return g;
}

struct Batch {
    std::vector<const ChannelStack*> maps;
    Eigen::MatrixXd params;
    Eigen::MatrixXd targets;
};

Batch batch_of(const std::vector<Sample>& samples) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(samples.size());
    b.params.resize(kPairParams, n);
    b.targets.resize(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = samples[static_cast<std::size_t>(i)];
        b.maps.push_back(&s.channels);
        for (int k = 0; k < kPairParams; ++k) b.params(k, i) = s.params[static_cast<std::size_t>(k)];
        b.targets(0, i) = s.score;
        b.targets(1, i) = s.duration_norm;
    }
    return b;
}

Model with_random_biases(ModelKind kind, std::uint64_t seed) {
    Model m = Model::initialized(kind, seed);
    Rng rng(seed + 1);
    std::normal_distribution<double> normal(0.0, 0.1);
    for (Eigen::MatrixXd& p : m.params())
        if (p.cols() == 1)
            for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = normal(rng);
    return m;
}

}  // namespace

TEST_CASE("model kinds and layer layout") {
    for (ModelKind k : kAllKinds) CHECK(parse_model_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_model_kind("resnet"), std::invalid_argument);

    CHECK(Model(ModelKind::cnn).parameter_count() ==
          16 * 200 + 16 + 32 * 400 + 32 + 8 * 16 + 8 + 128 * 808 + 128 + 2 * 128 + 2);
    CHECK(Model(ModelKind::mlp16).parameter_count() == 16 * 3216 + 16 + 2 * 16 + 2);
    CHECK(Model(ModelKind::linear).parameter_count() == 2 * 3216 + 2);
    CHECK(spec_digest(ModelKind::cnn) != spec_digest(ModelKind::mlp16));
    CHECK(spec_digest(ModelKind::perceptron) != spec_digest(ModelKind::linear));
}

TEST_CASE("zero weights predict zero") {
    const ChannelStack level = encode_level(generate_level(1));
    Rng rng(3);
    for (ModelKind k : kAllKinds) {
        const Prediction p = Model(k).predict(level, uniform_genotype(rng));
        CHECK(p.p_s == 0.0);
        CHECK(p.p_t == 0.0);
    }
}

TEST_CASE("final-layer bias passes through the output activation") {
    const ChannelStack level = encode_level(generate_level(2));
    Rng rng(4);
    Model cnn(ModelKind::cnn);
    cnn.params().back() << 0.3, 0.7;
    Prediction p = cnn.predict(level, uniform_genotype(rng));
    CHECK(p.p_s == doctest::Approx(0.3));
    CHECK(p.p_t == doctest::Approx(0.7));

    cnn.params().back() << -1.0, 2.0;
    p = cnn.predict(level, uniform_genotype(rng));
    CHECK(p.p_s == doctest::Approx(std::expm1(-1.0)));
    CHECK(p.s == 0.0);
    CHECK(p.t == 1.0);

    Model linear(ModelKind::linear);
    linear.params().back() << -0.2, 1.5;
    p = linear.predict(level, uniform_genotype(rng));
    CHECK(p.p_s == doctest::Approx(-0.2));
    CHECK(p.p_t == doctest::Approx(1.5));
    CHECK(p.s == 0.0);
    CHECK(p.t == 1.0);
}

TEST_CASE("cnn activation trace") {
    const Model m = Model::initialized(ModelKind::cnn, 5);
    Rng rng(5);
    const auto trace = m.trace(encode_level(generate_level(5)), uniform_genotype(rng));
    auto find = [&](const std::string& name) {
        for (const TraceEntry& e : trace)
            if (e.name == name) return e;
        FAIL("missing trace entry " << name);
        return TraceEntry{};
    };
    CHECK(find("conv1").dims == std::vector<int>{16, 20, 20});
    CHECK(find("pool1").dims == std::vector<int>{16, 10, 10});
    CHECK(find("conv2").dims == std::vector<int>{32, 10, 10});
    CHECK(find("pool2").dims == std::vector<int>{32, 5, 5});
    CHECK(find("flatten").width() == 800);
    CHECK(find("concat").width() == 808);
    CHECK(find("hidden").width() == 128);
    CHECK(find("output").width() == 2);
}

TEST_CASE("shape and numeric errors name the layer") {
    Model m = Model::initialized(ModelKind::cnn, 1);
    m.params()[2].resize(31, 400);
    try {
        m.check_shapes();
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("conv2.weight") != std::string::npos);
    }

    Model bad = Model::initialized(ModelKind::mlp16, 1);
    bad.params()[2](0, 0) = std::nan("");
    const auto samples = synthetic_samples(2, 1);
    const Batch b = batch_of(samples);
    Gradients g;
    CHECK_THROWS_AS(loss_and_gradients(bad, b.maps, b.params, b.targets, &g), NumericError);

    const Model ok(ModelKind::linear);
    const Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(15, 2);
    CHECK_THROWS_AS(ok.forward(b.maps, wrong), ShapeError);
}

TEST_CASE("analytic gradients match finite differences") {
    const auto samples = synthetic_samples(3, 7);
    for (ModelKind k : kAllKinds) {
        CAPTURE(to_string(k));
        const Model m = with_random_biases(k, 11);
        const GradientCheckResult r = gradient_check(m, samples);
        CAPTURE(r.worst_tensor);
        CHECK(r.checked > 0);
        CHECK(r.max_relative_error < 1e-4);
    }
}

TEST_CASE("zero loss gives zero gradients and loss scale is linear") {
    const auto samples = synthetic_samples(4, 9);
    for (ModelKind k : kAllKinds) {
        CAPTURE(to_string(k));
        const Model m = with_random_biases(k, 2);
        Batch b = batch_of(samples);
        b.targets = m.forward(b.maps, b.params);
        Gradients g;
        CHECK(loss_and_gradients(m, b.maps, b.params, b.targets, &g) == 0.0);
        for (const Eigen::MatrixXd& t : g.tensors) CHECK(t.cwiseAbs().maxCoeff() == 0.0);

        const Batch real = batch_of(samples);
        Gradients g1;
        Gradients g2;
        const double l1 = loss_and_gradients(m, real.maps, real.params, real.targets, &g1);
        const double l2 = loss_and_gradients(m, real.maps, real.params, real.targets, &g2, 2.0);
        CHECK(l2 == doctest::Approx(2.0 * l1).epsilon(1e-12));
        for (std::size_t i = 0; i < g1.tensors.size(); ++i)
            CHECK((g2.tensors[i] - 2.0 * g1.tensors[i]).cwiseAbs().maxCoeff() <=
                  1e-12 * (1.0 + g1.tensors[i].cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("loss is the batch mean of the summed squared error") {
    const auto samples = synthetic_samples(3, 12);
    Model m(ModelKind::linear);
    m.params().back() << 0.25, 0.5;
    const Batch b = batch_of(samples);
    double expected = 0.0;
    for (const Sample& s : samples)
        expected += (0.25 - s.score) * (0.25 - s.score) + (0.5 - s.duration_norm) * (0.5 - s.duration_norm);
    expected /= 3.0;
    CHECK(loss_and_gradients(m, b.maps, b.params, b.targets, nullptr) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("linear baseline is affine in the class parameters") {
    const Model m = with_random_biases(ModelKind::linear, 6);
    const ChannelStack level = encode_level(generate_level(6));
    Rng rng(6);
    const Genotype a = uniform_genotype(rng);
    const Genotype c = uniform_genotype(rng);
    Genotype mid{};
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.3 * a[i] + 0.7 * c[i];
    const Prediction pa = m.predict(level, a);
    const Prediction pc = m.predict(level, c);
    const Prediction pm = m.predict(level, mid);
    CHECK(pm.p_s == doctest::Approx(0.3 * pa.p_s + 0.7 * pc.p_s).epsilon(1e-10));
    CHECK(pm.p_t == doctest::Approx(0.3 * pa.p_t + 0.7 * pc.p_t).epsilon(1e-10));
}

TEST_CASE("bound predictors agree with the full forward pass") {
    const ChannelStack level = encode_level(generate_level(8));
    Rng rng(8);
    std::vector<Genotype> genes;
    for (int i = 0; i < 20; ++i) genes.push_back(uniform_genotype(rng));
    for (ModelKind k : kAllKinds) {
        CAPTURE(to_string(k));
        const Model m = with_random_biases(k, 8);
        const auto bound = m.bind(level);
        std::vector<Prediction> out(genes.size());
        bound->predict(genes, out);
        for (std::size_t i = 0; i < genes.size(); ++i) {
            const Prediction p = m.predict(level, genes[i]);
            CHECK(out[i].p_s == doctest::Approx(p.p_s).epsilon(1e-12));
            CHECK(out[i].p_t == doctest::Approx(p.p_t).epsilon(1e-12));
        }
    }
}

TEST_CASE("regression metrics") {
    const std::vector<double> target{0.0, 1.0};
    auto m = regression_metrics(std::vector<double>{1.0, 0.0}, target);
    CHECK(m.mae == doctest::Approx(1.0));
    REQUIRE(m.r2);
    CHECK(*m.r2 == doctest::Approx(-3.0));

    m = regression_metrics(std::vector<double>{0.5, 0.5}, target);
    CHECK(m.mae == doctest::Approx(0.5));
    CHECK(*m.r2 == doctest::Approx(0.0));

    m = regression_metrics(target, target);
    CHECK(m.mae == 0.0);
    CHECK(*m.r2 == 1.0);

    m = regression_metrics(std::vector<double>{0.1, 0.3}, std::vector<double>{0.2, 0.2});
    CHECK_FALSE(m.r2.has_value());
    CHECK(m.mae == doctest::Approx(0.1));

    CHECK_THROWS_AS(regression_metrics(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);

    std::ostringstream csv;
    write_metrics_csv(csv, Metrics{0.1, 0.2, std::nullopt, 0.5});
    CHECK(csv.str().find("undefined") != std::string::npos);
}

TEST_CASE("model files round trip exactly") {
    for (ModelKind k : kAllKinds) {
        Model m = with_random_biases(k, 21);
        m.round_to_float();
        std::stringstream buf;
        save_model(buf, m);
        const std::string bytes = buf.str();
        const Model loaded = load_model(buf);
        CHECK(loaded == m);

        std::string corrupt = bytes;
        corrupt[0] = 'X';
        std::stringstream bad(corrupt);
        CHECK_THROWS_AS(load_model(bad), std::runtime_error);

        std::stringstream cut(bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_AS(load_model(cut), std::runtime_error);

        std::string other = bytes;
        other[4] ^= 1;  // spec digest
        std::stringstream mismatched(other);
        CHECK_THROWS_AS(load_model(mismatched), ShapeError);
    }
}

TEST_CASE("training is deterministic and restores the best epoch") {
    const auto train_set = synthetic_samples(40, 31);
    const auto val_set = synthetic_samples(10, 32);
    TrainConfig cfg;
    cfg.max_epochs = 12;
    cfg.patience = 2;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.05;  // large enough to overshoot and trigger early stopping
    for (ModelKind k : {ModelKind::linear, ModelKind::mlp16}) {
        CAPTURE(to_string(k));
        Model a = Model::initialized(k, 3);
        Model b = Model::initialized(k, 3);
        const TrainResult ra = train(a, train_set, val_set, cfg);
        const TrainResult rb = train(b, train_set, val_set, cfg);
        CHECK(a == b);
        REQUIRE(ra.log.size() == rb.log.size());
        double best = ra.log.front().validation_loss;
        for (std::size_t i = 0; i < ra.log.size(); ++i) {
            CHECK(ra.log[i].validation_loss == rb.log[i].validation_loss);
            best = std::min(best, ra.log[i].validation_loss);
        }
        CHECK(ra.best_validation_loss == best);
        CHECK(ra.log[static_cast<std::size_t>(ra.best_epoch - 1)].validation_loss == best);
        CHECK(evaluate_loss(a, val_set) == doctest::Approx(best).epsilon(1e-4));
    }
}

TEST_CASE("training reduces the loss") {
    const auto samples = synthetic_samples(32, 41);
    TrainConfig cfg;
    cfg.max_epochs = 60;
    cfg.early_stopping = false;
    cfg.batch_size = 8;
    Model m = Model::initialized(ModelKind::cnn, 4);
    const double before = evaluate_loss(m, samples);
    const TrainResult r = train(m, samples, samples, cfg);
    CHECK(r.log.size() == 60);
    CHECK(r.log.back().train_loss < 0.1 * before);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.early_stopping = false;
    cfg.patience = 0;
    CHECK_NOTHROW(cfg.validate());
}
