#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "classpair/random.hpp"

namespace classpair {

enum class WeaponRange : std::uint8_t { Short, Medium, Long };

std::string_view to_string(WeaponRange range);
WeaponRange parse_weapon_range(std::string_view text);

/// Numeric embedding of the categorical range used by the genotype, the
/// surrogate input and every distance computation: short 0, medium 0.5, long 1.
double range_embedding(WeaponRange range);
WeaponRange range_from_embedding(double value);

inline constexpr int kClassParams = 8;
inline constexpr int kPairParams = 2 * kClassParams;
inline constexpr int kRangeGene = 7;

/// All continuous fields are normalized to [0,1].
struct CharacterClass {
    double hit_points = 0.5;
    double speed = 0.5;
    double damage = 0.5;
    double accuracy = 0.5;
    double rate_of_fire = 0.5;
    double clip_size = 0.5;
    double bullets_per_shot = 0.5;
    WeaponRange weapon_range = WeaponRange::Medium;

    friend bool operator==(const CharacterClass&, const CharacterClass&) = default;
};

/// Parameter names in genotype order.
inline constexpr std::array<std::string_view, kClassParams> kParamNames{
    "hit_points", "speed", "damage", "accuracy", "rate_of_fire", "clip_size", "bullets_per_shot", "weapon_range"};

std::array<double, kClassParams> to_vector(const CharacterClass& cls);
CharacterClass from_vector(std::span<const double, kClassParams> values);

struct ClassPair {
    CharacterClass player1;
    CharacterClass player2;

    friend bool operator==(const ClassPair&, const ClassPair&) = default;
};

inline ClassPair swapped(const ClassPair& pair) { return {pair.player2, pair.player1}; }

struct Interval {
    double min = 0.0;
    double max = 1.0;

    double denormalize(double unit) const { return unit * (max - min) + min; }
};

/// Physical ranges each normalized parameter maps onto.
struct ParamRanges {
    Interval hit_points{100.0, 300.0};
    Interval speed{1.0, 4.0};          // tiles per second
    Interval damage{10.0, 30.0};       // per bullet
    Interval accuracy{0.1, 1.0};       // hit probability scale
    Interval rate_of_fire{0.5, 3.0};   // shots per second
    Interval clip_size{5.0, 50.0};
    Interval bullets_per_shot{1.0, 4.0};
    std::array<double, 3> range_tiles{4.0, 8.0, 16.0};  // short, medium, long

    void validate() const;
};

struct PhysicalClass {
    double hit_points = 0.0;
    double speed = 0.0;
    double damage = 0.0;
    double accuracy = 0.0;
    double rate_of_fire = 0.0;
    int clip_size = 0;
    int bullets_per_shot = 0;
    double weapon_range = 0.0;
};

/// value * (max - min) + min per parameter; clip and bullet counts are
/// rounded to the nearest integer.
PhysicalClass denormalize(const CharacterClass& cls, const ParamRanges& ranges);

CharacterClass random_class(Rng& rng);
ClassPair random_pair(Rng& rng);

// ---------------------------------------------------------------------------
// Genotype: [hp, speed, damage, accuracy, rof, clip, bullets, range] for
// player 1 then player 2. Genes 7 and 15 hold the range embedding 0/0.5/1.

using Genotype = std::array<double, kPairParams>;

inline bool is_range_gene(int index) { return index % kClassParams == kRangeGene; }

Genotype encode_genotype(const ClassPair& pair);
ClassPair decode_genotype(const Genotype& genes);

/// Clamps continuous genes to [0,1] and snaps range genes to the nearest
/// category. Idempotent.
Genotype clamp_genotype(const Genotype& genes);

// ---------------------------------------------------------------------------
// Team Fortress 2 reference classes

struct TF2Reference {
    std::string label;
    std::array<double, kClassParams> vector{};
};

/// Implementer-estimated defaults for sniper, soldier, scout, heavy and pyro.
std::vector<TF2Reference> default_tf2_references();

inline constexpr std::string_view kUndefinedLabel = "undefined";

struct TF2Match {
    std::string label;  // kUndefinedLabel when nothing is close enough
    std::string nearest;
    double distance = 0.0;
};

/// Nearest reference by Euclidean distance in normalized space. Ties go to the
/// first label in the order scout, soldier, pyro, heavy, sniper.
TF2Match match_tf2(const CharacterClass& cls, std::span<const TF2Reference> refs, double threshold = 1.5);

// ---------------------------------------------------------------------------
// Class files: one JSON object per line.

std::string class_to_json_line(const CharacterClass& cls);
CharacterClass class_from_json_line(std::string_view line);

std::vector<CharacterClass> read_class_file(const std::string& path);
void write_class_file(const std::string& path, std::span<const CharacterClass> classes);

}  // namespace classpair
