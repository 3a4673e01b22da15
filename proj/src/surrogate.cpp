#include "classpair/surrogate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "classpair/random.hpp"

namespace classpair {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::cnn: return "cnn";
        case ModelKind::mlp16: return "mlp16";
        case ModelKind::perceptron: return "perceptron";
        case ModelKind::linear: return "linear";
    }
    return "cnn";
}

ModelKind parse_model_kind(std::string_view name) {
    for (ModelKind k : {ModelKind::cnn, ModelKind::mlp16, ModelKind::perceptron, ModelKind::linear})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown model kind: " + std::string(name));
}

Prediction make_prediction(double raw_score, double raw_duration) {
    return {raw_score, raw_duration, std::clamp(raw_score, 0.0, 1.0), std::clamp(raw_duration, 0.0, 1.0)};
}

namespace {

// Map branch geometry.
constexpr int kKernel = 5;
constexpr int kPad = 2;
constexpr int kConv1Out = 16;
constexpr int kConv2Out = 32;
constexpr int kSide1 = kLevelSize;   // 20
constexpr int kSide2 = kSide1 / 2;   // 10
constexpr int kSide3 = kSide2 / 2;   // 5
constexpr int kClassHidden = 8;
constexpr int kHeadHidden = 128;
constexpr int kMlpHidden = 16;
constexpr int kMapBits = kChannelCount * kTileCount;

enum CnnTensor { kW1, kB1, kW2, kB2, kWc, kBc, kWh, kBh, kWo, kBo };

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

MatrixXd elu(const MatrixXd& m) { return m.unaryExpr([](double x) { return elu(x); }); }
MatrixXd elu_grad(const MatrixXd& m) { return m.unaryExpr([](double x) { return elu_grad(x); }); }

std::vector<int> active_bits(const ChannelStack& stack) {
    std::vector<int> bits;
    bits.reserve(kTileCount + 32);
    for (int i = 0; i < kMapBits; ++i)
        if (stack.bits[static_cast<std::size_t>(i)]) bits.push_back(i);
    return bits;
}

// --- convolution helpers ---------------------------------------------------

// Sparse first convolution: the input is binary, so each active bit adds one
// weight column to the up to 25 outputs whose window covers it.
MatrixXd conv1_forward(const MatrixXd& w, const MatrixXd& b, const std::vector<int>& bits) {
    MatrixXd a = b.col(0).replicate(1, kTileCount);
    for (const int bit : bits) {
        const int c = bit / kTileCount;
        const int y = (bit % kTileCount) / kSide1;
        const int x = bit % kSide1;
        for (int ky = 0; ky < kKernel; ++ky) {
            const int oy = y - ky + kPad;
            if (oy < 0 || oy >= kSide1) continue;
            for (int kx = 0; kx < kKernel; ++kx) {
                const int ox = x - kx + kPad;
                if (ox < 0 || ox >= kSide1) continue;
                a.col(oy * kSide1 + ox) += w.col(c * kKernel * kKernel + ky * kKernel + kx);
            }
        }
    }
    return a;
}

void conv1_backward(MatrixXd& dw, const MatrixXd& da, const std::vector<int>& bits) {
    for (const int bit : bits) {
        const int c = bit / kTileCount;
        const int y = (bit % kTileCount) / kSide1;
        const int x = bit % kSide1;
        for (int ky = 0; ky < kKernel; ++ky) {
            const int oy = y - ky + kPad;
            if (oy < 0 || oy >= kSide1) continue;
            for (int kx = 0; kx < kKernel; ++kx) {
                const int ox = x - kx + kPad;
                if (ox < 0 || ox >= kSide1) continue;
                dw.col(c * kKernel * kKernel + ky * kKernel + kx) += da.col(oy * kSide1 + ox);
            }
        }
    }
}

// channels x (side*side) -> (channels*25) x (side*side), same padding.
MatrixXd im2col(const MatrixXd& in, int side) {
    const int channels = static_cast<int>(in.rows());
    MatrixXd cols = MatrixXd::Zero(channels * kKernel * kKernel, side * side);
    for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < kKernel; ++ky)
            for (int kx = 0; kx < kKernel; ++kx) {
                const int row = c * kKernel * kKernel + ky * kKernel + kx;
                for (int y = 0; y < side; ++y) {
                    const int iy = y + ky - kPad;
                    if (iy < 0 || iy >= side) continue;
                    for (int x = 0; x < side; ++x) {
                        const int ix = x + kx - kPad;
                        if (ix < 0 || ix >= side) continue;
                        cols(row, y * side + x) = in(c, iy * side + ix);
                    }
                }
            }
    return cols;
}

MatrixXd col2im(const MatrixXd& cols, int channels, int side) {
    MatrixXd out = MatrixXd::Zero(channels, side * side);
    for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < kKernel; ++ky)
            for (int kx = 0; kx < kKernel; ++kx) {
                const int row = c * kKernel * kKernel + ky * kKernel + kx;
                for (int y = 0; y < side; ++y) {
                    const int iy = y + ky - kPad;
                    if (iy < 0 || iy >= side) continue;
                    for (int x = 0; x < side; ++x) {
                        const int ix = x + kx - kPad;
                        if (ix < 0 || ix >= side) continue;
                        out(c, iy * side + ix) += cols(row, y * side + x);
                    }
                }
            }
    return out;
}

struct Pooled {
    MatrixXd out;                 // channels x (side/2)^2
    Eigen::MatrixXi argmax;       // index into the input columns
};

Pooled maxpool(const MatrixXd& in, int side) {
    const int half = side / 2;
    Pooled p{MatrixXd(in.rows(), half * half), Eigen::MatrixXi(in.rows(), half * half)};
    for (int c = 0; c < in.rows(); ++c)
        for (int py = 0; py < half; ++py)
            for (int px = 0; px < half; ++px) {
                int best = (2 * py) * side + 2 * px;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (2 * py + dy) * side + 2 * px + dx;
                        if (in(c, idx) > in(c, best)) best = idx;
                    }
                p.out(c, py * half + px) = in(c, best);
                p.argmax(c, py * half + px) = best;
            }
    return p;
}

MatrixXd unpool(const MatrixXd& d, const Eigen::MatrixXi& argmax, int side) {
    MatrixXd out = MatrixXd::Zero(d.rows(), side * side);
    for (int c = 0; c < d.rows(); ++c)
        for (int j = 0; j < d.cols(); ++j) out(c, argmax(c, j)) += d(c, j);
    return out;
}

// Flatten in (channel, y, x) order.
VectorXd flatten(const MatrixXd& m) {
    VectorXd f(m.size());
    for (int c = 0; c < m.rows(); ++c)
        for (int j = 0; j < m.cols(); ++j) f(c * m.cols() + j) = m(c, j);
    return f;
}

MatrixXd unflatten(const VectorXd& f, int rows, int cols) {
    MatrixXd m(rows, cols);
    for (int c = 0; c < rows; ++c)
        for (int j = 0; j < cols; ++j) m(c, j) = f(c * cols + j);
    return m;
}

// --- map branch ------------------------------------------------------------

struct MapCache {
    std::vector<int> bits;
    MatrixXd a1;
    Pooled pool1;
    MatrixXd a2;
    Pooled pool2;
};

VectorXd map_features(const std::vector<MatrixXd>& p, const ChannelStack& stack, MapCache* cache) {
    MapCache local;
    MapCache& c = cache ? *cache : local;
    c.bits = active_bits(stack);
    c.a1 = conv1_forward(p[kW1], p[kB1], c.bits);
    c.pool1 = maxpool(elu(c.a1), kSide1);
    c.a2 = (p[kW2] * im2col(c.pool1.out, kSide2)).colwise() + p[kB2].col(0);
    c.pool2 = maxpool(elu(c.a2), kSide2);
    return flatten(c.pool2.out);
}

void map_backward(const std::vector<MatrixXd>& p, const MapCache& c, const VectorXd& df, std::vector<MatrixXd>& g) {
    const MatrixXd dpool2 = unflatten(df, kConv2Out, kSide3 * kSide3);
    const MatrixXd da2 = unpool(dpool2, c.pool2.argmax, kSide2).cwiseProduct(elu_grad(c.a2));
    g[kW2].noalias() += da2 * im2col(c.pool1.out, kSide2).transpose();
    g[kB2] += da2.rowwise().sum();
    const MatrixXd dpool1 = col2im(p[kW2].transpose() * da2, kConv1Out, kSide2);
    const MatrixXd da1 = unpool(dpool1, c.pool1.argmax, kSide1).cwiseProduct(elu_grad(c.a1));
    conv1_backward(g[kW1], da1, c.bits);
    g[kB1] += da1.rowwise().sum();
}

// First flat layer for the baselines: W[:, :3200] x_map + W[:, 3200:] g + b.
MatrixXd flat_affine(const MatrixXd& w, const MatrixXd& b, std::span<const ChannelStack* const> maps,
                     const MatrixXd& params) {
    MatrixXd z = w.rightCols(kPairParams) * params;
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
        z.col(i) += b.col(0);
        for (const int bit : active_bits(*maps[static_cast<std::size_t>(i)])) z.col(i) += w.col(bit);
    }
    return z;
}

void flat_affine_backward(MatrixXd& dw, MatrixXd& db, const MatrixXd& dz, std::span<const ChannelStack* const> maps,
                          const MatrixXd& params) {
    dw.rightCols(kPairParams).noalias() += dz * params.transpose();
    db += dz.rowwise().sum();
    for (Eigen::Index i = 0; i < dz.cols(); ++i)
        for (const int bit : active_bits(*maps[static_cast<std::size_t>(i)])) dw.col(bit) += dz.col(i);
}

struct HeadCache {
    MatrixXd features;  // 800 x n
    MatrixXd ac, hc, z, ah, hh, ao;
};

MatrixXd cnn_forward(const std::vector<MatrixXd>& p, std::span<const ChannelStack* const> maps,
                     const MatrixXd& params, std::vector<MapCache>* map_caches, HeadCache* head) {
    const auto n = static_cast<Eigen::Index>(maps.size());
    HeadCache local;
    HeadCache& h = head ? *head : local;
    h.features.resize(kFlattenWidth, n);
    if (map_caches) map_caches->resize(maps.size());
    for (Eigen::Index i = 0; i < n; ++i)
        h.features.col(i) = map_features(p, *maps[static_cast<std::size_t>(i)],
                                         map_caches ? &(*map_caches)[static_cast<std::size_t>(i)] : nullptr);
    h.ac = (p[kWc] * params).colwise() + p[kBc].col(0);
    h.hc = elu(h.ac);
    h.z.resize(kFlattenWidth + kClassHidden, n);
    h.z << h.features, h.hc;
    h.ah = (p[kWh] * h.z).colwise() + p[kBh].col(0);
    h.hh = elu(h.ah);
    h.ao = (p[kWo] * h.hh).colwise() + p[kBo].col(0);
    return elu(h.ao);
}

int input_rows(const MatrixXd& params, std::span<const ChannelStack* const> maps) {
    if (params.rows() != kPairParams)
        throw ShapeError("input: class parameter block must have 16 rows, got " + std::to_string(params.rows()));
    if (params.cols() != static_cast<Eigen::Index>(maps.size()))
        throw ShapeError("input: " + std::to_string(maps.size()) + " maps but " + std::to_string(params.cols()) +
                         " parameter columns");
    return static_cast<int>(params.cols());
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<LayerShape> network_spec(ModelKind kind) {
    switch (kind) {
        case ModelKind::cnn:
            return {{"conv1.weight", kConv1Out, kChannelCount * kKernel * kKernel},
                    {"conv1.bias", kConv1Out, 1},
                    {"conv2.weight", kConv2Out, kConv1Out * kKernel * kKernel},
                    {"conv2.bias", kConv2Out, 1},
                    {"class.weight", kClassHidden, kPairParams},
                    {"class.bias", kClassHidden, 1},
                    {"hidden.weight", kHeadHidden, kFlattenWidth + kClassHidden},
                    {"hidden.bias", kHeadHidden, 1},
                    {"output.weight", kOutputWidth, kHeadHidden},
                    {"output.bias", kOutputWidth, 1}};
        case ModelKind::mlp16:
            return {{"hidden.weight", kMlpHidden, kFlatInputWidth},
                    {"hidden.bias", kMlpHidden, 1},
                    {"output.weight", kOutputWidth, kMlpHidden},
                    {"output.bias", kOutputWidth, 1}};
        case ModelKind::perceptron:
        case ModelKind::linear:
            return {{"output.weight", kOutputWidth, kFlatInputWidth}, {"output.bias", kOutputWidth, 1}};
    }
    return {};
}

std::uint64_t spec_digest(ModelKind kind) {
    std::string text(to_string(kind));
    for (const LayerShape& s : network_spec(kind))
        text += ";" + s.name + ":" + std::to_string(s.rows) + "x" + std::to_string(s.cols);
    return fnv1a64(text);
}

int TraceEntry::width() const {
    return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<>());
}

Model::Model(ModelKind kind) : kind_(kind) {
    for (const LayerShape& s : network_spec(kind)) params_.push_back(MatrixXd::Zero(s.rows, s.cols));
}

Model Model::initialized(ModelKind kind, std::uint64_t seed) {
    Model m(kind);
    Rng rng(seed);
    const auto spec = network_spec(kind);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (spec[i].cols == 1) continue;  // biases stay zero
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / spec[i].cols));
        for (Eigen::Index k = 0; k < m.params_[i].size(); ++k) m.params_[i].data()[k] = normal(rng);
    }
    return m;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const MatrixXd& p : params_) n += static_cast<std::size_t>(p.size());
    return n;
}

void Model::check_shapes() const {
    const auto spec = network_spec(kind_);
    if (params_.size() != spec.size())
        throw ShapeError("model has " + std::to_string(params_.size()) + " tensors, expected " +
                         std::to_string(spec.size()));
    for (std::size_t i = 0; i < spec.size(); ++i)
        if (params_[i].rows() != spec[i].rows || params_[i].cols() != spec[i].cols)
            throw ShapeError(spec[i].name + ": expected " + std::to_string(spec[i].rows) + "x" +
                             std::to_string(spec[i].cols) + ", got " + std::to_string(params_[i].rows()) + "x" +
                             std::to_string(params_[i].cols()));
}

void Model::round_to_float() {
    for (MatrixXd& p : params_) p = p.cast<float>().cast<double>();
}

bool operator==(const Model& a, const Model& b) {
    if (a.kind_ != b.kind_ || a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i)
        if (a.params_[i].rows() != b.params_[i].rows() || a.params_[i].cols() != b.params_[i].cols() ||
            a.params_[i] != b.params_[i])
            return false;
    return true;
}

MatrixXd Model::forward(std::span<const ChannelStack* const> maps, const MatrixXd& params) const {
    check_shapes();
    input_rows(params, maps);
    const auto& p = params_;
    switch (kind_) {
        case ModelKind::cnn: return cnn_forward(p, maps, params, nullptr, nullptr);
        case ModelKind::mlp16: {
            const MatrixXd h = elu(flat_affine(p[0], p[1], maps, params));
            return (p[2] * h).colwise() + p[3].col(0);
        }
        case ModelKind::perceptron: return elu(flat_affine(p[0], p[1], maps, params));
        case ModelKind::linear: return flat_affine(p[0], p[1], maps, params);
    }
    return {};
}

namespace {

MatrixXd genotype_matrix(std::span<const Genotype> genotypes) {
    MatrixXd m(kPairParams, static_cast<Eigen::Index>(genotypes.size()));
    for (std::size_t i = 0; i < genotypes.size(); ++i)
        for (int k = 0; k < kPairParams; ++k) m(k, static_cast<Eigen::Index>(i)) = genotypes[i][static_cast<std::size_t>(k)];
    return m;
}

}  // namespace

Prediction Model::predict(const ChannelStack& level, const Genotype& genes) const {
    const ChannelStack* maps[] = {&level};
    const MatrixXd y = forward(maps, genotype_matrix(std::span(&genes, 1)));
    return make_prediction(y(0, 0), y(1, 0));
}

std::vector<TraceEntry> Model::trace(const ChannelStack& level, const Genotype& genes) const {
    check_shapes();
    const ChannelStack* maps[] = {&level};
    const MatrixXd g = genotype_matrix(std::span(&genes, 1));
    auto dims = [](const MatrixXd& m, int side) {
        return side ? std::vector<int>{static_cast<int>(m.rows()), side, side}
                    : std::vector<int>{static_cast<int>(m.size())};
    };
    std::vector<TraceEntry> t;
    t.push_back({"input.map", {kChannelCount, kLevelSize, kLevelSize}});
    t.push_back({"input.classes", {kPairParams}});
    if (kind_ != ModelKind::cnn) {
        t.push_back({"input.flat", {kFlatInputWidth}});
        const MatrixXd y = forward(maps, g);
        if (kind_ == ModelKind::mlp16) t.push_back({"hidden", {static_cast<int>(params_[0].rows())}});
        t.push_back({"output", {static_cast<int>(y.rows())}});
        return t;
    }
    std::vector<MapCache> caches;
    HeadCache h;
    const MatrixXd y = cnn_forward(params_, maps, g, &caches, &h);
    const MapCache& c = caches[0];
    t.push_back({"conv1", dims(c.a1, static_cast<int>(std::lround(std::sqrt(c.a1.cols()))))});
    t.push_back({"pool1", dims(c.pool1.out, static_cast<int>(std::lround(std::sqrt(c.pool1.out.cols()))))});
    t.push_back({"conv2", dims(c.a2, static_cast<int>(std::lround(std::sqrt(c.a2.cols()))))});
    t.push_back({"pool2", dims(c.pool2.out, static_cast<int>(std::lround(std::sqrt(c.pool2.out.cols()))))});
    t.push_back({"flatten", {static_cast<int>(h.features.rows())}});
    t.push_back({"class", {static_cast<int>(h.hc.rows())}});
    t.push_back({"concat", {static_cast<int>(h.z.rows())}});
    t.push_back({"hidden", {static_cast<int>(h.hh.rows())}});
    t.push_back({"output", {static_cast<int>(y.rows())}});
    return t;
}

// ---------------------------------------------------------------------------
// Level-bound inference: everything that depends only on the map is computed
// once, so each genotype costs a few small matrix products.

namespace {

class BoundCnn final : public LevelPredictor {
public:
    BoundCnn(const std::vector<MatrixXd>& p, const ChannelStack& level) : p_(p) {
        const VectorXd f = map_features(p, level, nullptr);
        partial_ = p[kWh].leftCols(kFlattenWidth) * f + p[kBh].col(0);
    }

    void predict(std::span<const Genotype> genotypes, std::span<Prediction> out) const override {
        const MatrixXd g = genotype_matrix(genotypes);
        const MatrixXd hc = elu((p_[kWc] * g).colwise() + p_[kBc].col(0));
        const MatrixXd hh = elu((p_[kWh].rightCols(kClassHidden) * hc).colwise() + partial_);
        const MatrixXd y = elu((p_[kWo] * hh).colwise() + p_[kBo].col(0));
        for (std::size_t i = 0; i < genotypes.size(); ++i)
            out[i] = make_prediction(y(0, static_cast<Eigen::Index>(i)), y(1, static_cast<Eigen::Index>(i)));
    }

private:
    const std::vector<MatrixXd>& p_;
    VectorXd partial_;
};

class BoundFlat final : public LevelPredictor {
public:
    BoundFlat(ModelKind kind, const std::vector<MatrixXd>& p, const ChannelStack& level) : kind_(kind), p_(p) {
        partial_ = p[0 + 1].col(0);
        for (const int bit : active_bits(level)) partial_ += p[0].col(bit);
    }

    void predict(std::span<const Genotype> genotypes, std::span<Prediction> out) const override {
        const MatrixXd g = genotype_matrix(genotypes);
        MatrixXd z = (p_[0].rightCols(kPairParams) * g).colwise() + partial_;
        MatrixXd y;
        switch (kind_) {
            case ModelKind::mlp16: y = (p_[2] * elu(z)).colwise() + p_[3].col(0); break;
            case ModelKind::perceptron: y = elu(z); break;
            default: y = z; break;
        }
        for (std::size_t i = 0; i < genotypes.size(); ++i)
            out[i] = make_prediction(y(0, static_cast<Eigen::Index>(i)), y(1, static_cast<Eigen::Index>(i)));
    }

private:
    ModelKind kind_;
    const std::vector<MatrixXd>& p_;
    VectorXd partial_;
};

}  // namespace

std::unique_ptr<LevelPredictor> Model::bind(const ChannelStack& level) const {
    check_shapes();
    if (kind_ == ModelKind::cnn) return std::make_unique<BoundCnn>(params_, level);
    return std::make_unique<BoundFlat>(kind_, params_, level);
}

// ---------------------------------------------------------------------------

double loss_and_gradients(const Model& model, std::span<const ChannelStack* const> maps, const MatrixXd& params,
                          const MatrixXd& targets, Gradients* grads, double loss_scale) {
    model.check_shapes();
    const int n = input_rows(params, maps);
    if (n == 0) throw std::invalid_argument("empty batch");
    if (targets.rows() != kOutputWidth || targets.cols() != n) throw ShapeError("targets: expected 2 x batch");
    const auto& p = model.params();
    const auto spec = network_spec(model.kind());

    std::vector<MapCache> map_caches;
    HeadCache head;
    MatrixXd z1;  // flat models: first pre-activation
    MatrixXd y;
    switch (model.kind()) {
        case ModelKind::cnn: y = cnn_forward(p, maps, params, grads ? &map_caches : nullptr, &head); break;
        case ModelKind::mlp16:
            z1 = flat_affine(p[0], p[1], maps, params);
            y = (p[2] * elu(z1)).colwise() + p[3].col(0);
            break;
        case ModelKind::perceptron:
            z1 = flat_affine(p[0], p[1], maps, params);
            y = elu(z1);
            break;
        case ModelKind::linear:
            z1 = flat_affine(p[0], p[1], maps, params);
            y = z1;
            break;
    }
    const MatrixXd err = y - targets;
    const double loss = loss_scale * err.squaredNorm() / n;
    if (!grads) return loss;

    grads->tensors.clear();
    for (const MatrixXd& t : p) grads->tensors.push_back(MatrixXd::Zero(t.rows(), t.cols()));
    auto& g = grads->tensors;
    const MatrixXd dy = (2.0 * loss_scale / n) * err;

    switch (model.kind()) {
        case ModelKind::cnn: {
            const MatrixXd dao = dy.cwiseProduct(elu_grad(head.ao));
            g[kWo].noalias() = dao * head.hh.transpose();
            g[kBo] = dao.rowwise().sum();
            const MatrixXd dah = (p[kWo].transpose() * dao).cwiseProduct(elu_grad(head.ah));
            g[kWh].noalias() = dah * head.z.transpose();
            g[kBh] = dah.rowwise().sum();
            const MatrixXd dz = p[kWh].transpose() * dah;
            const MatrixXd dac = dz.bottomRows(kClassHidden).cwiseProduct(elu_grad(head.ac));
            g[kWc].noalias() = dac * params.transpose();
            g[kBc] = dac.rowwise().sum();
            for (int i = 0; i < n; ++i)
                map_backward(p, map_caches[static_cast<std::size_t>(i)], dz.col(i).head(kFlattenWidth), g);
            break;
        }
        case ModelKind::mlp16: {
            const MatrixXd h = elu(z1);
            g[2].noalias() = dy * h.transpose();
            g[3] = dy.rowwise().sum();
            const MatrixXd dz = (p[2].transpose() * dy).cwiseProduct(elu_grad(z1));
            flat_affine_backward(g[0], g[1], dz, maps, params);
            break;
        }
        case ModelKind::perceptron:
            flat_affine_backward(g[0], g[1], dy.cwiseProduct(elu_grad(z1)), maps, params);
            break;
        case ModelKind::linear: flat_affine_backward(g[0], g[1], dy, maps, params); break;
    }
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!g[i].allFinite()) throw NumericError("non-finite gradient in " + spec[i].name);
    return loss;
}

namespace {

struct BatchData {
    std::vector<const ChannelStack*> maps;
    MatrixXd params;
    MatrixXd targets;
};

BatchData make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    BatchData b;
    const auto n = static_cast<Eigen::Index>(indices.size());
    b.params.resize(kPairParams, n);
    b.targets.resize(kOutputWidth, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = samples[indices[static_cast<std::size_t>(i)]];
        b.maps.push_back(&s.channels);
        for (int k = 0; k < kPairParams; ++k) b.params(k, i) = s.params[static_cast<std::size_t>(k)];
        b.targets(0, i) = s.score;
        b.targets(1, i) = s.duration_norm;
    }
    return b;
}

template <typename Fn>
void for_each_chunk(std::size_t count, std::size_t chunk, Fn&& fn) {
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < count; start += chunk) {
        idx.resize(std::min(chunk, count - start));
        std::iota(idx.begin(), idx.end(), start);
        fn(idx);
    }
}

}  // namespace

GradientCheckResult gradient_check(const Model& model, std::span<const Sample> samples,
                                   const GradientCheckConfig& cfg) {
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    const BatchData batch = make_batch(samples, all);
    Gradients analytic;
    loss_and_gradients(model, batch.maps, batch.params, batch.targets, &analytic);

    Model probe = model;
    const auto spec = network_spec(model.kind());
    Rng rng(cfg.seed);
    GradientCheckResult result;
    for (std::size_t t = 0; t < spec.size(); ++t) {
        auto& tensor = probe.params()[t];
        const auto size = static_cast<std::size_t>(tensor.size());
        std::vector<std::size_t> entries(size);
        std::iota(entries.begin(), entries.end(), 0);
        if (cfg.entries_per_tensor > 0 && size > static_cast<std::size_t>(cfg.entries_per_tensor)) {
            std::shuffle(entries.begin(), entries.end(), rng);
            entries.resize(static_cast<std::size_t>(cfg.entries_per_tensor));
        }
        for (const std::size_t k : entries) {
            double& w = tensor.data()[k];
            const double saved = w;
            w = saved + cfg.epsilon;
            const double up = loss_and_gradients(probe, batch.maps, batch.params, batch.targets, nullptr);
            w = saved - cfg.epsilon;
            const double down = loss_and_gradients(probe, batch.maps, batch.params, batch.targets, nullptr);
            w = saved;
            const double numeric = (up - down) / (2.0 * cfg.epsilon);
            const double exact = analytic.tensors[t].data()[k];
            const double rel = std::abs(numeric - exact) /
                               std::max({std::abs(numeric), std::abs(exact), cfg.denominator_floor});
            ++result.checked;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_tensor = spec[t].name;
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be positive");
    if (early_stopping && !(patience >= 1 && patience < max_epochs))
        throw std::invalid_argument("patience must lie in [1, max_epochs)");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("Adam moment decays must lie in [0,1)");
}

double evaluate_loss(const Model& model, std::span<const Sample> samples) {
    if (samples.empty()) throw std::invalid_argument("cannot evaluate an empty set");
    double total = 0.0;
    for_each_chunk(samples.size(), 256, [&](std::span<const std::size_t> idx) {
        const BatchData b = make_batch(samples, idx);
        total += loss_and_gradients(model, b.maps, b.params, b.targets, nullptr) * static_cast<double>(idx.size());
    });
    return total / static_cast<double>(samples.size());
}

std::vector<Prediction> predict_samples(const Model& model, std::span<const Sample> samples) {
    std::vector<Prediction> out;
    out.reserve(samples.size());
    for_each_chunk(samples.size(), 256, [&](std::span<const std::size_t> idx) {
        const BatchData b = make_batch(samples, idx);
        const MatrixXd y = model.forward(b.maps, b.params);
        for (Eigen::Index i = 0; i < y.cols(); ++i) out.push_back(make_prediction(y(0, i), y(1, i)));
    });
    return out;
}

RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw std::invalid_argument("metrics: length mismatch");
    if (pred.size() < 2) throw std::invalid_argument("metrics: need at least two values");
    const double n = static_cast<double>(pred.size());
    const double mean = std::accumulate(target.begin(), target.end(), 0.0) / n;
    double abs_sum = 0.0;
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        abs_sum += std::abs(pred[i] - target[i]);
        sse += (pred[i] - target[i]) * (pred[i] - target[i]);
        sst += (target[i] - mean) * (target[i] - mean);
    }
    RegressionMetrics m;
    m.mae = abs_sum / n;
    if (sst > 0.0) m.r2 = 1.0 - sse / sst;
    return m;
}

Metrics metrics(std::span<const Prediction> predictions, std::span<const Sample> targets) {
    std::vector<double> ps, pt, ts, tt;
    for (const Prediction& p : predictions) {
        ps.push_back(p.p_s);
        pt.push_back(p.p_t);
    }
    for (const Sample& s : targets) {
        ts.push_back(s.score);
        tt.push_back(s.duration_norm);
    }
    const RegressionMetrics score = regression_metrics(ps, ts);
    const RegressionMetrics duration = regression_metrics(pt, tt);
    return {duration.mae, score.mae, duration.r2, score.r2};
}

TrainResult train(Model& model, std::span<const Sample> train_set, std::span<const Sample> validation_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    model.check_shapes();
    if (train_set.empty() || validation_set.empty()) throw std::invalid_argument("training needs non-empty sets");

    const auto spec = network_spec(model.kind());
    std::vector<MatrixXd> m1;
    std::vector<MatrixXd> m2;
    for (const MatrixXd& p : model.params()) {
        m1.push_back(MatrixXd::Zero(p.rows(), p.cols()));
        m2.push_back(MatrixXd::Zero(p.rows(), p.cols()));
    }
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.best_validation_loss = std::numeric_limits<double>::infinity();
    Model best = model;
    int since_best = 0;
    long step = 0;
    Gradients grads;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t len = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
            const BatchData b = make_batch(train_set, std::span(order).subspan(start, len));
            const double loss = loss_and_gradients(model, b.maps, b.params, b.targets, &grads);
            if (!std::isfinite(loss)) throw NumericError("training diverged in epoch " + std::to_string(epoch));
            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t t = 0; t < spec.size(); ++t) {
                const MatrixXd& g = grads.tensors[t];
                m1[t] = cfg.beta1 * m1[t] + (1.0 - cfg.beta1) * g;
                m2[t] = cfg.beta2 * m2[t] + (1.0 - cfg.beta2) * g.cwiseAbs2();
                model.params()[t].array() -=
                    cfg.learning_rate * (m1[t].array() / c1) / ((m2[t].array() / c2).sqrt() + cfg.adam_epsilon);
            }
        }

        EpochRecord rec{epoch, evaluate_loss(model, train_set), evaluate_loss(model, validation_set)};
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.validation_loss))
            throw NumericError("training diverged in epoch " + std::to_string(epoch));
        result.log.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.validation_loss < result.best_validation_loss) {
            result.best_validation_loss = rec.validation_loss;
            result.best_epoch = epoch;
            if (cfg.early_stopping) best = model;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (cfg.target_train_loss > 0.0 && rec.train_loss < cfg.target_train_loss) break;
        if (cfg.early_stopping && since_best >= cfg.patience) break;
    }
    if (cfg.early_stopping) model = best;
    model.round_to_float();
    result.validation_metrics = metrics(predict_samples(model, validation_set), validation_set);
    return result;
}

void write_epoch_log(std::ostream& out, std::span<const EpochRecord> log) {
    out << "epoch,train_loss,validation_loss\n" << std::setprecision(10);
    for (const EpochRecord& r : log) out << r.epoch << ',' << r.train_loss << ',' << r.validation_loss << '\n';
}

void write_metrics_csv(std::ostream& out, const Metrics& m) {
    auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("undefined"); };
    out << "MAE_t,MAE_s,R2_t,R2_s\n" << std::setprecision(6) << m.mae_t << ',' << m.mae_s << ',' << opt(m.r2_t)
        << ',' << opt(m.r2_s) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kModelMagic[4] = {'C', 'F', 'W', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw std::runtime_error("model file truncated");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::uint64_t get_u64(std::istream& in) {
    const std::uint64_t lo = get_u32(in);
    return lo | static_cast<std::uint64_t>(get_u32(in)) << 32;
}

}  // namespace

void save_model(std::ostream& out, const Model& model) {
    model.check_shapes();
    out.write(kModelMagic, 4);
    put_u64(out, spec_digest(model.kind()));
    put_u32(out, static_cast<std::uint32_t>(model.kind()));
    put_u32(out, static_cast<std::uint32_t>(model.params().size()));
    for (const MatrixXd& p : model.params()) {
        put_u32(out, static_cast<std::uint32_t>(p.rows()));
        put_u32(out, static_cast<std::uint32_t>(p.cols()));
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (Eigen::Index c = 0; c < p.cols(); ++c)
                put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p(r, c))));
    }
}

Model load_model(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kModelMagic, 4) != 0)
        throw std::runtime_error("not a model file (bad magic)");
    const std::uint64_t digest = get_u64(in);
    const std::uint32_t kind_id = get_u32(in);
    if (kind_id > static_cast<std::uint32_t>(ModelKind::linear)) throw std::runtime_error("unknown model kind in file");
    const auto kind = static_cast<ModelKind>(kind_id);
    if (digest != spec_digest(kind)) throw ShapeError("model file was written for a different network layout");
    Model model(kind);
    const auto spec = network_spec(kind);
    if (get_u32(in) != spec.size()) throw ShapeError("model file has the wrong number of tensors");
    for (std::size_t t = 0; t < spec.size(); ++t) {
        const std::uint32_t rows = get_u32(in);
        const std::uint32_t cols = get_u32(in);
        if (static_cast<int>(rows) != spec[t].rows || static_cast<int>(cols) != spec[t].cols)
            throw ShapeError(spec[t].name + ": stored shape does not match the network");
        MatrixXd& p = model.params()[t];
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = std::bit_cast<float>(get_u32(in));
    }
    return model;
}

void save_model(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    save_model(out, model);
    if (!out) throw std::runtime_error("failed writing model file: " + path);
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    return load_model(in);
}

}  // namespace classpair
