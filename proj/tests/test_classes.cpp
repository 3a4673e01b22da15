#include <array>
#include <cmath>
#include <filesystem>

#include "classpair/classes.hpp"
#include "doctest.h"

using namespace classpair;

TEST_CASE("denormalize maps onto the configured ranges") {
    const ParamRanges ranges;
    CharacterClass lo{0, 0, 0, 0, 0, 0, 0, WeaponRange::Short};
    CharacterClass hi{1, 1, 1, 1, 1, 1, 1, WeaponRange::Long};
    const PhysicalClass a = denormalize(lo, ranges);
    const PhysicalClass b = denormalize(hi, ranges);
    CHECK(a.hit_points == 100.0);
    CHECK(a.speed == 1.0);
    CHECK(a.damage == 10.0);
    CHECK(a.accuracy == doctest::Approx(0.1));
    CHECK(a.rate_of_fire == 0.5);
    CHECK(a.clip_size == 5);
    CHECK(a.bullets_per_shot == 1);
    CHECK(a.weapon_range == 4.0);
    CHECK(b.hit_points == 300.0);
    CHECK(b.clip_size == 50);
    CHECK(b.bullets_per_shot == 4);
    CHECK(b.weapon_range == 16.0);

    CharacterClass mid;
    CHECK(denormalize(mid, ranges).hit_points == 200.0);
    CHECK(denormalize(mid, ranges).weapon_range == 8.0);
}

TEST_CASE("random classes are deterministic and bounded") {
    Rng a(5);
    Rng b(5);
    CHECK(random_class(a) == random_class(b));

    Rng rng(11);
    std::array<int, 3> counts{};
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) {
        const CharacterClass c = random_class(rng);
        for (double v : to_vector(c)) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        ++counts[static_cast<std::size_t>(c.weapon_range)];
    }
    for (int n : counts) CHECK(std::abs(n / double(kDraws) - 1.0 / 3.0) < 0.02);
}

TEST_CASE("genotype layout and round trip") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const ClassPair pair = random_pair(rng);
        const Genotype g = encode_genotype(pair);
        CHECK(decode_genotype(g) == pair);
        CHECK(clamp_genotype(g) == g);
    }
    for (int i = 0; i < kPairParams; ++i) CHECK(is_range_gene(i) == (i == 7 || i == 15));

    ClassPair pair;
    pair.player1.hit_points = 0.25;
    pair.player2.weapon_range = WeaponRange::Long;
    const Genotype g = encode_genotype(pair);
    CHECK(g[0] == 0.25);
    CHECK(g[15] == 1.0);
    CHECK(g[7] == 0.5);
}

TEST_CASE("clamping is idempotent and snaps range genes") {
    Genotype g{};
    g[0] = -0.3;
    g[1] = 1.7;
    g[7] = 0.8;
    g[15] = 0.3;
    const Genotype c = clamp_genotype(g);
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 1.0);
    CHECK(c[7] == 1.0);
    CHECK(c[15] == 0.5);
    CHECK(clamp_genotype(c) == c);
}

TEST_CASE("tf2 matching") {
    const auto refs = default_tf2_references();
    REQUIRE(refs.size() == 5);

    SUBCASE("self distance") {
        for (const auto& ref : refs) {
            const CharacterClass c = from_vector(ref.vector);
            const TF2Match m = match_tf2(c, refs);
            CHECK(m.label == ref.label);
            CHECK(m.distance == 0.0);
        }
    }
    SUBCASE("far away is undefined") {
        const std::vector<TF2Reference> one{{"heavy", {0, 0, 0, 0, 0, 0, 0, 0}}};
        const CharacterClass far{1, 1, 1, 1, 1, 1, 1, WeaponRange::Long};
        const TF2Match m = match_tf2(far, one);
        CHECK(m.distance == doctest::Approx(std::sqrt(8.0)));
        CHECK(m.label == kUndefinedLabel);
        CHECK(m.nearest == "heavy");
        CHECK(match_tf2(far, one, INFINITY).label == "heavy");
    }
    SUBCASE("ties follow the fixed order") {
        // Two references mirrored around the class vector.
        const std::vector<TF2Reference> pair{{"sniper", {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.25, 0.5}},
                                             {"pyro", {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.75, 0.5}}};
        const CharacterClass c;
        const TF2Match m = match_tf2(c, pair);
        CHECK(m.label == "pyro");
        const std::vector<TF2Reference> reversed{pair[1], pair[0]};
        CHECK(match_tf2(c, reversed).label == "pyro");
    }
    SUBCASE("translation invariance") {
        Rng rng(9);
        for (int i = 0; i < 100; ++i) {
            const CharacterClass c = random_class(rng);
            auto shifted = refs;
            auto v = to_vector(c);
            for (auto& r : shifted)
                for (int k = 0; k < kClassParams - 1; ++k) r.vector[static_cast<std::size_t>(k)] += 0.2;
            for (int k = 0; k < kClassParams - 1; ++k) v[static_cast<std::size_t>(k)] += 0.2;
            // from_vector keeps continuous values as given, so the shift carries over.
            CHECK(match_tf2(from_vector(v), shifted).label == match_tf2(c, refs).label);
        }
    }
}

TEST_CASE("class files round trip") {
    Rng rng(21);
    std::vector<CharacterClass> classes;
    for (int i = 0; i < 10; ++i) classes.push_back(random_class(rng));
    const auto path = (std::filesystem::temp_directory_path() / "classpair_classes.jsonl").string();
    write_class_file(path, classes);
    CHECK(read_class_file(path) == classes);
    std::filesystem::remove(path);

    CHECK_THROWS(class_from_json_line(R"({"hit_points":2})"));
    CHECK_THROWS(class_from_json_line(
        R"({"hit_points":0.5,"speed":0.5,"damage":0.5,"accuracy":0.5,"rate_of_fire":0.5,"clip_size":0.5,"bullets_per_shot":0.5,"weapon_range":"far"})"));
}
