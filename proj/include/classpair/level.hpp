#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace classpair {

inline constexpr int kLevelSize = 20;
inline constexpr int kTileCount = kLevelSize * kLevelSize;
inline constexpr int kBaseSize = 5;
inline constexpr int kChannelCount = 8;

enum class Entity : std::uint8_t { none, stairs, double_damage, healing, armor };
enum class BaseOwner : std::uint8_t { none, player1, player2 };

/// Elevation: 0 ground, 1 first floor, 2 second floor (wall).
struct Tile {
    int elevation = 0;
    Entity entity = Entity::none;

    bool walkable() const { return elevation <= 1; }
    friend bool operator==(const Tile&, const Tile&) = default;
};

struct Coord {
    int x = 0;  // column
    int y = 0;  // row

    friend bool operator==(const Coord&, const Coord&) = default;
};

inline int tile_index(int x, int y) { return y * kLevelSize + x; }
inline Coord tile_coord(int index) { return {index % kLevelSize, index / kLevelSize}; }
inline bool in_bounds(int x, int y) { return x >= 0 && y >= 0 && x < kLevelSize && y < kLevelSize; }

/// Player 1 owns the north-west 5x5 corner, player 2 the south-east one.
BaseOwner base_owner(int x, int y);
inline bool in_base(int x, int y) { return base_owner(x, y) != BaseOwner::none; }

/// Neighbor order used everywhere a direction tie must be broken: N, E, S, W.
inline constexpr std::array<Coord, 4> kDirections{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

struct Level {
    std::array<Tile, kTileCount> tiles{};
    std::uint64_t seed = 0;  // provenance only; not part of equality

    Tile& at(int x, int y) { return tiles[static_cast<std::size_t>(tile_index(x, y))]; }
    const Tile& at(int x, int y) const { return tiles[static_cast<std::size_t>(tile_index(x, y))]; }
    Tile& at(int index) { return tiles[static_cast<std::size_t>(index)]; }
    const Tile& at(int index) const { return tiles[static_cast<std::size_t>(index)]; }

    friend bool operator==(const Level& a, const Level& b) { return a.tiles == b.tiles; }
};

Level all_ground_level();

/// The first-floor tile a stairs tile leads to: the first first-floor
/// 4-neighbor in N, E, S, W order. Empty when the tile is not stairs or has
/// no first-floor neighbor.
std::optional<int> stairs_target(const Level& level, int index);

/// Rotates the level by 180 degrees, which also swaps the two bases.
Level rotate_180(const Level& level);

struct LevelViolation {
    int row = 0;
    int col = 0;
    std::string message;
};

/// Checks every tile and level invariant (bases, entity placement, stairs
/// links, strong connectivity of walkable tiles). Returns the first violation.
std::optional<LevelViolation> find_violation(const Level& level);

// ---------------------------------------------------------------------------
// Movement graph

/// Directed graph over the 400 tile indices; non-walkable tiles have no edges.
/// Out-edges of each node are sorted by node index.
class MovementGraph {
public:
    static constexpr int kMaxDegree = 5;

    explicit MovementGraph(const Level& level);

    bool walkable(int node) const { return walkable_[static_cast<std::size_t>(node)]; }
    int node_count() const;  // number of walkable tiles
    std::span<const int> successors(int node) const;
    std::span<const int> predecessors(int node) const;
    bool has_edge(int from, int to) const;

private:
    std::array<bool, kTileCount> walkable_{};
    std::array<std::array<int, kMaxDegree>, kTileCount> out_{};
    std::array<int, kTileCount> out_count_{};
    std::array<std::array<int, kMaxDegree>, kTileCount> in_{};
    std::array<int, kTileCount> in_count_{};
};

MovementGraph movement_graph(const Level& level);

/// Nodes reachable from `start` following edges forward (or backward).
std::array<bool, kTileCount> reachable_from(const MovementGraph& graph, int start, bool reverse = false);

// ---------------------------------------------------------------------------
// Channel encoding

enum Channel : int {
    kGround = 0,
    kFirstFloor = 1,
    kSecondFloor = 2,
    kStairs = 3,
    kDoubleDamage = 4,
    kHealing = 5,
    kArmor = 6,
    kCover = 7,
};

struct ChannelStack {
    std::array<std::uint8_t, kChannelCount * kTileCount> bits{};

    std::uint8_t at(int channel, int x, int y) const {
        return bits[static_cast<std::size_t>(channel * kTileCount + tile_index(x, y))];
    }
    std::uint8_t& at(int channel, int x, int y) {
        return bits[static_cast<std::size_t>(channel * kTileCount + tile_index(x, y))];
    }
    friend bool operator==(const ChannelStack&, const ChannelStack&) = default;
};

ChannelStack encode_level(const Level& level);

/// Checks the one-hot elevation planes, the entity planes and the empty
/// cover plane. Used when reading stored corpora.
bool is_valid_channel_stack(const ChannelStack& stack);

/// Inverse of encode_level for valid stacks (seed is not recoverable).
Level decode_level(const ChannelStack& stack);

// ---------------------------------------------------------------------------
// Text format

class LevelParseError : public std::runtime_error {
public:
    LevelParseError(int row, int col, const std::string& message);
    int row() const { return row_; }
    int col() const { return col_; }

private:
    int row_;
    int col_;
};

Level parse_level(std::string_view text);
std::string render_level(const Level& level);

Level read_level_file(const std::string& path);
void write_level_file(const std::string& path, const Level& level);

// ---------------------------------------------------------------------------
// Generation

struct GeneratorConfig {
    double stairs_probability = 0.2;
    double powerup_probability = 0.33;
    double digger_target_bias = 0.7;
    int ca_iterations = 3;
    int ca_wall_threshold = 5;
    int ca_revert_threshold = 2;
    double ca_wall_probability = 0.8;
    double ca_revert_probability = 0.8;
    int max_attempts = 20;

    void validate() const;
};

inline constexpr int kSketchSize = 4;
inline constexpr int kCellSize = kLevelSize / kSketchSize;

enum DirectionBit : std::uint8_t { kNorth = 1, kEast = 2, kSouth = 4, kWest = 8 };

struct SketchCell {
    bool is_base = false;
    std::uint8_t connections = 0;  // DirectionBit mask
    bool has_powerup = false;
};

struct SketchGrid {
    std::array<SketchCell, kSketchSize * kSketchSize> cells{};

    SketchCell& at(int cx, int cy) { return cells[static_cast<std::size_t>(cy * kSketchSize + cx)]; }
    const SketchCell& at(int cx, int cy) const { return cells[static_cast<std::size_t>(cy * kSketchSize + cx)]; }
};

class GenerationError : public std::runtime_error {
public:
    GenerationError(std::uint64_t seed, int attempts);
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

/// Pure function of (seed, cfg). Throws GenerationError if no attempt yields a
/// valid level.
Level generate_level(std::uint64_t seed, const GeneratorConfig& cfg = {});

/// The sketch stage alone; exposed for tests.
SketchGrid generate_sketch(std::uint64_t seed, const GeneratorConfig& cfg = {});

}  // namespace classpair
