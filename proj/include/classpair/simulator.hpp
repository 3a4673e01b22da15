#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "classpair/classes.hpp"
#include "classpair/level.hpp"
#include "classpair/random.hpp"

namespace classpair {

struct MatchConfig {
    int kill_limit = 20;
    double time_limit = 600.0;  // seconds
    double tick = 0.1;          // seconds
    double respawn_delay = 3.0;
    double reload_time = 2.0;
    double perception_radius = 10.0;  // tiles
    double heal_seek_threshold = 0.35;
    double healing_amount = 100.0;
    double armor_amount = 50.0;
    double double_damage_duration = 10.0;
    double double_damage_multiplier = 2.0;
    double healing_respawn = 15.0;
    double armor_respawn = 20.0;
    double double_damage_respawn = 30.0;

    void validate() const;
    int to_ticks(double seconds) const;
    double respawn_seconds(Entity powerup) const;
};

struct AgentState {
    PhysicalClass cls;
    int tile = 0;
    int next_tile = -1;     // tile being moved towards, -1 when standing
    double progress = 0.0;  // fraction of the current step already covered
    double hp = 0.0;
    double armor = 0.0;
    int clip = 0;
    double reload_timer = 0.0;
    double fire_cooldown = 0.0;
    double double_damage_timer = 0.0;
    double respawn_timer = 0.0;
    bool alive = true;
    int kills = 0;
    int deaths = 0;
};

/// Fresh agent at `tile`: full hp and clip, no armor.
AgentState spawn_agent(const PhysicalClass& cls, int tile);

struct MatchOutcome {
    int kills_p1 = 0;
    int kills_p2 = 0;
    int deaths_p1 = 0;
    int deaths_p2 = 0;
    double duration = 0.0;  // seconds
    bool completed = false;
    double score = 0.5;     // kills_p1 / (kills_p1 + kills_p2); 0.5 without kills

    friend bool operator==(const MatchOutcome&, const MatchOutcome&) = default;
};

/// True iff the supercover ray between the tile centers touches no wall and
/// the elevations differ by at most one.
bool line_of_sight(const Level& level, int from, int to);

/// 1 inside the weapon range, linear decay to 0 at twice the range.
double hit_falloff(double distance, double range);

struct ShotResult {
    bool fired = false;
    int hits = 0;
    double damage = 0.0;
    std::string diagnostic;  // set when a precondition blocked the shot
};

/// Fires one shot of `bullets_per_shot` bullets. Damage drains armor before
/// hp. Leaves both agents untouched when the attacker cannot fire.
ShotResult resolve_shot(AgentState& attacker, AgentState& defender, double distance, Rng& rng,
                        const MatchConfig& cfg);

struct Pickup {
    int tile = 0;
    Entity type = Entity::none;
    int respawn_ticks = 0;  // 0 when the powerup is present

    bool live() const { return respawn_ticks == 0; }
};

std::vector<Pickup> collect_pickups(const Level& level);

/// Advances respawn countdowns by one tick, then lets each living agent (in
/// the given priority order) consume a live powerup on its tile. Returns the
/// number of powerups consumed.
int powerup_tick(std::vector<Pickup>& pickups, std::span<AgentState* const> agents, const MatchConfig& cfg);

/// Minimal-hop path (excluding `from`, including `to`); ties go to the lowest
/// node index. Empty path when from == to, nullopt when `to` is unreachable.
std::optional<std::vector<int>> shortest_path(const MovementGraph& graph, int from, int to);

/// All-pairs hop distances and next hops over the movement graph.
class PathTable {
public:
    static constexpr std::uint16_t kUnreachable = 0xffff;

    /// prefer_high_index mirrors the tie-breaking rule (used by player 2 so
    /// that both players see the same rule in their own rotated frame).
    PathTable(const MovementGraph& graph, bool prefer_high_index = false);

    std::uint16_t distance(int from, int to) const { return dist_[index(from, to)]; }
    bool reachable(int from, int to) const { return distance(from, to) != kUnreachable; }
    int next_hop(int from, int to) const { return next_[index(from, to)]; }

private:
    static std::size_t index(int from, int to) {
        return static_cast<std::size_t>(to) * kTileCount + static_cast<std::size_t>(from);
    }
    std::vector<std::uint16_t> dist_;
    std::vector<std::int16_t> next_;
};

/// Level-dependent precomputation shared by every match on that level.
class Arena {
public:
    explicit Arena(const Level& level);

    const Level& level() const { return level_; }
    const MovementGraph& graph() const { return graph_; }
    const PathTable& paths(int player) const { return player == 0 ? paths_p1_ : paths_p2_; }
    const std::vector<Pickup>& pickups() const { return pickups_; }
    int center_waypoint(int player) const { return center_[static_cast<std::size_t>(player)]; }
    std::span<const int> base_tiles(int player) const { return base_tiles_[static_cast<std::size_t>(player)]; }
    int base_center(int player) const;

private:
    Level level_;
    MovementGraph graph_;
    PathTable paths_p1_;
    PathTable paths_p2_;
    std::vector<Pickup> pickups_;
    std::array<int, 2> center_{};
    std::array<std::vector<int>, 2> base_tiles_;
};

/// Deterministic fixed-tick 1v1 deathmatch. Same inputs give a bit-identical
/// outcome. `event_log` receives one line per notable event when non-null.
MatchOutcome simulate_match(const Arena& arena, const PhysicalClass& player1, const PhysicalClass& player2,
                            std::uint64_t seed, const MatchConfig& cfg, std::ostream* event_log = nullptr);

MatchOutcome simulate_match(const Level& level, const ClassPair& pair, std::uint64_t seed, const MatchConfig& cfg,
                            const ParamRanges& ranges = {}, std::ostream* event_log = nullptr);

}  // namespace classpair
