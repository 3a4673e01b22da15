#include "classpair/classes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace classpair {

std::string_view to_string(WeaponRange range) {
    switch (range) {
        case WeaponRange::Short: return "short";
        case WeaponRange::Medium: return "medium";
        case WeaponRange::Long: return "long";
    }
    return "medium";
}

WeaponRange parse_weapon_range(std::string_view text) {
    if (text == "short") return WeaponRange::Short;
    if (text == "medium") return WeaponRange::Medium;
    if (text == "long") return WeaponRange::Long;
    throw std::invalid_argument("unknown weapon range: " + std::string(text));
}

double range_embedding(WeaponRange range) {
    switch (range) {
        case WeaponRange::Short: return 0.0;
        case WeaponRange::Medium: return 0.5;
        case WeaponRange::Long: return 1.0;
    }
    return 0.5;
}

WeaponRange range_from_embedding(double value) {
    if (value < 0.25) return WeaponRange::Short;
    if (value < 0.75) return WeaponRange::Medium;
    return WeaponRange::Long;
}

std::array<double, kClassParams> to_vector(const CharacterClass& c) {
    return {c.hit_points, c.speed,     c.damage,           c.accuracy,
            c.rate_of_fire, c.clip_size, c.bullets_per_shot, range_embedding(c.weapon_range)};
}

CharacterClass from_vector(std::span<const double, kClassParams> v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], range_from_embedding(v[7])};
}

void ParamRanges::validate() const {
    for (const Interval* i : {&hit_points, &speed, &damage, &accuracy, &rate_of_fire, &clip_size, &bullets_per_shot})
        if (!(i->min < i->max)) throw std::invalid_argument("parameter range requires min < max");
    for (double r : range_tiles)
        if (!(r > 0.0)) throw std::invalid_argument("weapon range distances must be positive");
}

PhysicalClass denormalize(const CharacterClass& c, const ParamRanges& r) {
    PhysicalClass p;
    p.hit_points = r.hit_points.denormalize(c.hit_points);
    p.speed = r.speed.denormalize(c.speed);
    p.damage = r.damage.denormalize(c.damage);
    p.accuracy = r.accuracy.denormalize(c.accuracy);
    p.rate_of_fire = r.rate_of_fire.denormalize(c.rate_of_fire);
    p.clip_size = static_cast<int>(std::lround(r.clip_size.denormalize(c.clip_size)));
    p.bullets_per_shot = static_cast<int>(std::lround(r.bullets_per_shot.denormalize(c.bullets_per_shot)));
    p.weapon_range = r.range_tiles[static_cast<std::size_t>(c.weapon_range)];
    return p;
}

CharacterClass random_class(Rng& rng) {
    CharacterClass c;
    c.hit_points = uniform01(rng);
    c.speed = uniform01(rng);
    c.damage = uniform01(rng);
    c.accuracy = uniform01(rng);
    c.rate_of_fire = uniform01(rng);
    c.clip_size = uniform01(rng);
    c.bullets_per_shot = uniform01(rng);
    c.weapon_range = static_cast<WeaponRange>(uniform_int(rng, 0, 2));
    return c;
}

ClassPair random_pair(Rng& rng) {
    ClassPair pair;
    pair.player1 = random_class(rng);
    pair.player2 = random_class(rng);
    return pair;
}

Genotype encode_genotype(const ClassPair& pair) {
    Genotype g{};
    const auto a = to_vector(pair.player1);
    const auto b = to_vector(pair.player2);
    std::copy(a.begin(), a.end(), g.begin());
    std::copy(b.begin(), b.end(), g.begin() + kClassParams);
    return g;
}

ClassPair decode_genotype(const Genotype& g) {
    const std::span<const double, kPairParams> all(g);
    return {from_vector(all.subspan<0, kClassParams>()), from_vector(all.subspan<kClassParams, kClassParams>())};
}

Genotype clamp_genotype(const Genotype& genes) {
    Genotype out = genes;
    for (int i = 0; i < kPairParams; ++i) {
        auto& v = out[static_cast<std::size_t>(i)];
        v = is_range_gene(i) ? range_embedding(range_from_embedding(v)) : std::clamp(v, 0.0, 1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<TF2Reference> default_tf2_references() {
    return {
        {"sniper", {0.3, 0.5, 1.0, 1.0, 0.05, 0.0, 0.0, 1.0}},
        {"heavy", {1.0, 0.2, 0.35, 0.3, 1.0, 1.0, 0.3, 0.0}},
        {"scout", {0.1, 1.0, 0.5, 0.6, 0.3, 0.1, 0.6, 0.5}},
        {"soldier", {0.6, 0.4, 0.9, 0.7, 0.1, 0.05, 0.1, 1.0}},
        {"pyro", {0.55, 0.5, 0.25, 0.2, 0.9, 0.8, 1.0, 0.0}},
    };
}

namespace {

int tie_rank(std::string_view label) {
    constexpr std::array<std::string_view, 5> kOrder{"scout", "soldier", "pyro", "heavy", "sniper"};
    const auto it = std::find(kOrder.begin(), kOrder.end(), label);
    return static_cast<int>(it - kOrder.begin());
}

}  // namespace

TF2Match match_tf2(const CharacterClass& cls, std::span<const TF2Reference> refs, double threshold) {
    if (refs.empty()) throw std::invalid_argument("match_tf2 needs at least one reference");
    const auto v = to_vector(cls);
    const TF2Reference* best = nullptr;
    double best_distance = std::numeric_limits<double>::infinity();
    for (const TF2Reference& ref : refs) {
        double sum = 0.0;
        for (int i = 0; i < kClassParams; ++i) {
            const double d = v[static_cast<std::size_t>(i)] - ref.vector[static_cast<std::size_t>(i)];
            sum += d * d;
        }
        const double distance = std::sqrt(sum);
        const bool better = distance < best_distance ||
                            (distance == best_distance && best != nullptr &&
                             std::pair(tie_rank(ref.label), ref.label) < std::pair(tie_rank(best->label), best->label));
        if (best == nullptr || better) {
            best = &ref;
            best_distance = distance;
        }
    }
    TF2Match match;
    match.nearest = best->label;
    match.distance = best_distance;
    match.label = best_distance > threshold ? std::string(kUndefinedLabel) : best->label;
    return match;
}

// ---------------------------------------------------------------------------

std::string class_to_json_line(const CharacterClass& c) {
    nlohmann::ordered_json j;
    j["hit_points"] = c.hit_points;
    j["speed"] = c.speed;
    j["damage"] = c.damage;
    j["accuracy"] = c.accuracy;
    j["rate_of_fire"] = c.rate_of_fire;
    j["clip_size"] = c.clip_size;
    j["bullets_per_shot"] = c.bullets_per_shot;
    j["weapon_range"] = std::string(to_string(c.weapon_range));
    return j.dump();
}

CharacterClass class_from_json_line(std::string_view line) {
    const auto j = nlohmann::json::parse(line);
    CharacterClass c;
    auto unit = [&j](const char* key) {
        const double v = j.at(key).get<double>();
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(key) + " must lie in [0,1]");
        return v;
    };
    c.hit_points = unit("hit_points");
    c.speed = unit("speed");
    c.damage = unit("damage");
    c.accuracy = unit("accuracy");
    c.rate_of_fire = unit("rate_of_fire");
    c.clip_size = unit("clip_size");
    c.bullets_per_shot = unit("bullets_per_shot");
    c.weapon_range = parse_weapon_range(j.at("weapon_range").get<std::string>());
    return c;
}

std::vector<CharacterClass> read_class_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open class file: " + path);
    std::vector<CharacterClass> classes;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            classes.push_back(class_from_json_line(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return classes;
}

void write_class_file(const std::string& path, std::span<const CharacterClass> classes) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write class file: " + path);
    for (const auto& c : classes) out << class_to_json_line(c) << '\n';
    if (!out) throw std::runtime_error("failed writing class file: " + path);
}

}  // namespace classpair
