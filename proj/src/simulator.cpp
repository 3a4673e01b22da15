#include "classpair/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace classpair {

namespace {
constexpr double kTimerEpsilon = 1e-9;
}

void MatchConfig::validate() const {
    if (kill_limit <= 0) throw std::invalid_argument("kill_limit must be positive");
    if (!(tick > 0.0)) throw std::invalid_argument("tick must be positive");
    if (!(time_limit >= 150.0)) throw std::invalid_argument("time_limit must be at least 150 seconds");
    if (respawn_delay < 0.0 || reload_time < 0.0 || double_damage_duration < 0.0)
        throw std::invalid_argument("delays must be non-negative");
    if (healing_respawn < 0.0 || armor_respawn < 0.0 || double_damage_respawn < 0.0)
        throw std::invalid_argument("powerup respawn delays must be non-negative");
    if (!(heal_seek_threshold >= 0.0 && heal_seek_threshold <= 1.0))
        throw std::invalid_argument("heal_seek_threshold must lie in [0,1]");
    if (!(perception_radius >= 0.0)) throw std::invalid_argument("perception_radius must be non-negative");
}

int MatchConfig::to_ticks(double seconds) const { return static_cast<int>(std::lround(seconds / tick)); }

double MatchConfig::respawn_seconds(Entity powerup) const {
    switch (powerup) {
        case Entity::healing: return healing_respawn;
        case Entity::armor: return armor_respawn;
        case Entity::double_damage: return double_damage_respawn;
        default: return 0.0;
    }
}

AgentState spawn_agent(const PhysicalClass& cls, int tile) {
    AgentState a;
    a.cls = cls;
    a.tile = tile;
    a.hp = cls.hit_points;
    a.clip = cls.clip_size;
    return a;
}

// ---------------------------------------------------------------------------

bool line_of_sight(const Level& level, int from, int to) {
    const Tile& a = level.at(from);
    const Tile& b = level.at(to);
    if (!a.walkable() || !b.walkable()) return false;
    if (std::abs(a.elevation - b.elevation) > 1) return false;
    if (from == to) return true;

    const Coord p0 = tile_coord(from);
    const Coord p1 = tile_coord(to);
    auto blocked = [&level](int x, int y) { return level.at(x, y).elevation >= 2; };

    // Supercover traversal: visits every tile the center-to-center segment
    // touches; a segment through a corner touches both side tiles.
    int dx = std::abs(p1.x - p0.x);
    int dy = std::abs(p1.y - p0.y);
    const int sx = p1.x > p0.x ? 1 : -1;
    const int sy = p1.y > p0.y ? 1 : -1;
    int x = p0.x;
    int y = p0.y;
    int error = dx - dy;
    dx *= 2;
    dy *= 2;
    for (int n = 1 + (dx + dy) / 2; n > 0; --n) {
        if (blocked(x, y)) return false;
        if (x == p1.x && y == p1.y) break;
        if (error > 0) {
            x += sx;
            error -= dy;
        } else if (error < 0) {
            y += sy;
            error += dx;
        } else {
            if (blocked(x + sx, y) || blocked(x, y + sy)) return false;
            x += sx;
            y += sy;
            error += dx - dy;
            --n;
        }
    }
    return true;
}

double hit_falloff(double distance, double range) {
    if (distance <= range) return 1.0;
    if (distance >= 2.0 * range) return 0.0;
    return (2.0 * range - distance) / range;
}

ShotResult resolve_shot(AgentState& attacker, AgentState& defender, double distance, Rng& rng,
                        const MatchConfig& cfg) {
    ShotResult result;
    if (!attacker.alive || !defender.alive) {
        result.diagnostic = "attacker or defender is dead";
        return result;
    }
    if (attacker.clip <= 0) {
        result.diagnostic = "clip empty";
        return result;
    }
    if (attacker.reload_timer > kTimerEpsilon) {
        result.diagnostic = "reloading";
        return result;
    }
    if (attacker.fire_cooldown > kTimerEpsilon) {
        result.diagnostic = "weapon cooling down";
        return result;
    }

    result.fired = true;
    const double p_hit = attacker.cls.accuracy * hit_falloff(distance, attacker.cls.weapon_range);
    const double per_bullet =
        attacker.cls.damage * (attacker.double_damage_timer > kTimerEpsilon ? cfg.double_damage_multiplier : 1.0);
    for (int b = 0; b < attacker.cls.bullets_per_shot; ++b) {
        if (!bernoulli(rng, p_hit)) continue;
        ++result.hits;
        result.damage += per_bullet;
        const double absorbed = std::min(defender.armor, per_bullet);
        defender.armor -= absorbed;
        defender.hp -= per_bullet - absorbed;
    }

    attacker.clip -= 1;
    // Carry at most one tick of overshoot so the average rate matches the
    // class rate of fire despite tick quantization.
    attacker.fire_cooldown = std::max(attacker.fire_cooldown, -cfg.tick) + 1.0 / attacker.cls.rate_of_fire;
    if (attacker.clip == 0) attacker.reload_timer = cfg.reload_time;
    return result;
}

// ---------------------------------------------------------------------------

std::vector<Pickup> collect_pickups(const Level& level) {
    std::vector<Pickup> pickups;
    for (int i = 0; i < kTileCount; ++i) {
        const Entity e = level.at(i).entity;
        if (e == Entity::healing || e == Entity::armor || e == Entity::double_damage) pickups.push_back({i, e, 0});
    }
    return pickups;
}

int powerup_tick(std::vector<Pickup>& pickups, std::span<AgentState* const> agents, const MatchConfig& cfg) {
    int consumed = 0;
    for (Pickup& p : pickups)
        if (p.respawn_ticks > 0) --p.respawn_ticks;
    for (AgentState* agent : agents) {
        if (!agent->alive) continue;
        for (Pickup& p : pickups) {
            if (p.tile != agent->tile || !p.live()) continue;
            switch (p.type) {
                case Entity::healing: agent->hp = std::min(agent->cls.hit_points, agent->hp + cfg.healing_amount); break;
                case Entity::armor: agent->armor = cfg.armor_amount; break;
                case Entity::double_damage: agent->double_damage_timer = cfg.double_damage_duration; break;
                default: break;
            }
            p.respawn_ticks = cfg.to_ticks(cfg.respawn_seconds(p.type));
            ++consumed;
        }
    }
    return consumed;
}

// ---------------------------------------------------------------------------

namespace {

std::array<std::uint16_t, kTileCount> distances_to(const MovementGraph& graph, int target) {
    std::array<std::uint16_t, kTileCount> dist;
    dist.fill(PathTable::kUnreachable);
    if (!graph.walkable(target)) return dist;
    std::deque<int> queue{target};
    dist[static_cast<std::size_t>(target)] = 0;
    while (!queue.empty()) {
        const int node = queue.front();
        queue.pop_front();
        for (const int prev : graph.predecessors(node)) {
            if (dist[static_cast<std::size_t>(prev)] != PathTable::kUnreachable) continue;
            dist[static_cast<std::size_t>(prev)] = static_cast<std::uint16_t>(dist[static_cast<std::size_t>(node)] + 1);
            queue.push_back(prev);
        }
    }
    return dist;
}

int pick_next(const MovementGraph& graph, const std::array<std::uint16_t, kTileCount>& dist, int from,
              bool prefer_high) {
    const auto d = dist[static_cast<std::size_t>(from)];
    if (d == PathTable::kUnreachable || d == 0) return -1;
    int best = -1;
    for (const int next : graph.successors(from)) {
        if (dist[static_cast<std::size_t>(next)] != d - 1) continue;
        if (best < 0 || (prefer_high ? next > best : next < best)) best = next;
    }
    return best;
}

}  // namespace

std::optional<std::vector<int>> shortest_path(const MovementGraph& graph, int from, int to) {
    if (!graph.walkable(from) || !graph.walkable(to)) return std::nullopt;
    if (from == to) return std::vector<int>{};
    const auto dist = distances_to(graph, to);
    if (dist[static_cast<std::size_t>(from)] == PathTable::kUnreachable) return std::nullopt;
    std::vector<int> path;
    for (int node = from; node != to;) {
        node = pick_next(graph, dist, node, false);
        path.push_back(node);
    }
    return path;
}

PathTable::PathTable(const MovementGraph& graph, bool prefer_high_index)
    : dist_(static_cast<std::size_t>(kTileCount) * kTileCount, kUnreachable),
      next_(static_cast<std::size_t>(kTileCount) * kTileCount, -1) {
    for (int target = 0; target < kTileCount; ++target) {
        if (!graph.walkable(target)) continue;
        const auto dist = distances_to(graph, target);
        for (int from = 0; from < kTileCount; ++from) {
            dist_[index(from, target)] = dist[static_cast<std::size_t>(from)];
            next_[index(from, target)] = static_cast<std::int16_t>(pick_next(graph, dist, from, prefer_high_index));
        }
    }
}

// ---------------------------------------------------------------------------

Arena::Arena(const Level& level)
    : level_(level), graph_(level), paths_p1_(graph_, false), paths_p2_(graph_, true), pickups_(collect_pickups(level)) {
    if (const auto v = find_violation(level))
        throw std::invalid_argument("invalid level at row " + std::to_string(v->row) + ", column " +
                                    std::to_string(v->col) + ": " + v->message);
    for (int i = 0; i < kTileCount; ++i) {
        const Coord c = tile_coord(i);
        if (base_owner(c.x, c.y) == BaseOwner::player1) base_tiles_[0].push_back(i);
        if (base_owner(c.x, c.y) == BaseOwner::player2) base_tiles_[1].push_back(i);
    }
    // Closest walkable tile to the map center; player 2 breaks ties in its
    // rotated frame so both players patrol symmetric waypoints.
    for (int player = 0; player < 2; ++player) {
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < kTileCount; ++k) {
            const int i = player == 0 ? k : kTileCount - 1 - k;
            if (!level.at(i).walkable()) continue;
            const Coord c = tile_coord(i);
            const double d = std::hypot(c.x - 9.5, c.y - 9.5);
            if (d < best - 1e-12) {
                best = d;
                center_[static_cast<std::size_t>(player)] = i;
            }
        }
    }
}

int Arena::base_center(int player) const {
    return player == 0 ? tile_index(kBaseSize / 2, kBaseSize / 2)
                       : tile_index(kLevelSize - 1 - kBaseSize / 2, kLevelSize - 1 - kBaseSize / 2);
}

// ---------------------------------------------------------------------------

namespace {

double tile_distance(int a, int b) {
    const Coord ca = tile_coord(a);
    const Coord cb = tile_coord(b);
    return std::hypot(ca.x - cb.x, ca.y - cb.y);
}

class Match {
public:
    Match(const Arena& arena, const PhysicalClass& p1, const PhysicalClass& p2, std::uint64_t seed,
          const MatchConfig& cfg, std::ostream* log)
        : arena_(arena), cfg_(cfg), rng_(seed), log_(log), pickups_(arena.pickups()) {
        agents_[0] = spawn_agent(p1, random_base_tile(0));
        agents_[1] = spawn_agent(p2, random_base_tile(1));
    }

    MatchOutcome run() {
        const int limit = cfg_.to_ticks(cfg_.time_limit);
        int tick = 0;
        bool completed = false;
        while (tick < limit && !completed) {
            ++tick;
            time_ = tick * cfg_.tick;
            for (int a = 0; a < 2; ++a) advance_timers(a);
            const int first = bernoulli(rng_, 0.5) ? 0 : 1;
            for (int a : {first, 1 - first}) {
                if (agents_[static_cast<std::size_t>(a)].alive) act(a);
                if (total_kills() >= cfg_.kill_limit) {
                    completed = true;
                    break;
                }
            }
            if (completed) break;
            std::array<AgentState*, 2> order{&agents_[static_cast<std::size_t>(first)],
                                             &agents_[static_cast<std::size_t>(1 - first)]};
            const int taken = powerup_tick(pickups_, order, cfg_);
            if (taken > 0 && log_) *log_ << "t=" << time_ << " powerup consumed\n";
        }
        MatchOutcome out;
        out.kills_p1 = agents_[0].kills;
        out.kills_p2 = agents_[1].kills;
        out.deaths_p1 = agents_[0].deaths;
        out.deaths_p2 = agents_[1].deaths;
        out.completed = completed;
        out.duration = completed ? tick * cfg_.tick : cfg_.time_limit;
        const int total = out.kills_p1 + out.kills_p2;
        out.score = total > 0 ? static_cast<double>(out.kills_p1) / total : 0.5;
        if (log_) *log_ << "end t=" << out.duration << " kills " << out.kills_p1 << ":" << out.kills_p2 << '\n';
        return out;
    }

private:
    int total_kills() const { return agents_[0].kills + agents_[1].kills; }

    int random_base_tile(int player) {
        const auto tiles = arena_.base_tiles(player);
        return tiles[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<int>(tiles.size()) - 1))];
    }

    // Index of a tile in the player's own rotated frame, for tie-breaking.
    static int frame_index(int player, int tile) { return player == 0 ? tile : kTileCount - 1 - tile; }

    void advance_timers(int a) {
        AgentState& s = agents_[static_cast<std::size_t>(a)];
        const double dt = cfg_.tick;
        if (!s.alive) {
            s.respawn_timer -= dt;
            if (s.respawn_timer <= kTimerEpsilon) {
                const int kills = s.kills;
                const int deaths = s.deaths;
                s = spawn_agent(s.cls, random_base_tile(a));
                s.kills = kills;
                s.deaths = deaths;
                patrol_phase_[static_cast<std::size_t>(a)] = 0;
                if (log_) *log_ << "t=" << time_ << " p" << a + 1 << " respawns\n";
            }
            return;
        }
        s.fire_cooldown = std::max(s.fire_cooldown - dt, -dt);
        if (s.reload_timer > kTimerEpsilon) {
            s.reload_timer -= dt;
            if (s.reload_timer <= kTimerEpsilon) {
                s.reload_timer = 0.0;
                s.clip = s.cls.clip_size;
            }
        }
        s.double_damage_timer = std::max(0.0, s.double_damage_timer - dt);
    }

    bool desirable(const AgentState& s, const Pickup& p) const {
        if (!p.live()) return false;
        switch (p.type) {
            case Entity::healing: return s.hp < s.cls.hit_points;
            case Entity::armor: return s.armor < cfg_.armor_amount;
            case Entity::double_damage: return true;
            default: return false;
        }
    }

    // Nearest qualifying pickup by path length; -1 if none is reachable.
    template <typename Pred>
    int nearest_pickup(int a, Pred&& qualifies) const {
        const AgentState& s = agents_[static_cast<std::size_t>(a)];
        const PathTable& paths = arena_.paths(a);
        int best = -1;
        std::uint16_t best_dist = PathTable::kUnreachable;
        for (const Pickup& p : pickups_) {
            if (!qualifies(p) || !paths.reachable(s.tile, p.tile)) continue;
            const auto d = paths.distance(s.tile, p.tile);
            if (best < 0 || d < best_dist || (d == best_dist && frame_index(a, p.tile) < frame_index(a, best))) {
                best = p.tile;
                best_dist = d;
            }
        }
        return best;
    }

    void act(int a) {
        AgentState& self = agents_[static_cast<std::size_t>(a)];
        AgentState& opponent = agents_[static_cast<std::size_t>(1 - a)];
        const int here = self.tile;
        const PathTable& paths = arena_.paths(a);
        int target = -1;

        // (a) low health: go for healing
        if (self.hp < cfg_.heal_seek_threshold * self.cls.hit_points)
            target = nearest_pickup(a, [](const Pickup& p) { return p.live() && p.type == Entity::healing; });

        // (b) nearby powerups
        if (target < 0) {
            target = nearest_pickup(a, [&](const Pickup& p) {
                return desirable(self, p) && tile_distance(here, p.tile) <= cfg_.perception_radius;
            });
        }

        // (c) opponent in sight
        bool holding = false;
        if (target < 0 && opponent.alive && line_of_sight(arena_.level(), here, opponent.tile)) {
            const double distance = tile_distance(here, opponent.tile);
            if (distance < 2.0 * self.cls.weapon_range) shoot(a, distance);
            if (!opponent.alive) return;
            if (distance > self.cls.weapon_range && paths.reachable(here, opponent.tile))
                target = opponent.tile;
            else
                holding = true;
        }

        // (d) far powerups, then (e) patrol
        if (target < 0 && !holding) target = nearest_pickup(a, [&](const Pickup& p) { return desirable(self, p); });
        if (target < 0 && !holding) target = patrol_target(a);

        move(a, target);
    }

    int patrol_target(int a) {
        auto& phase = patrol_phase_[static_cast<std::size_t>(a)];
        const int here = agents_[static_cast<std::size_t>(a)].tile;
        for (int attempt = 0; attempt < 2; ++attempt) {
            const int waypoint = phase == 0 ? arena_.center_waypoint(a) : arena_.base_center(1 - a);
            if (waypoint != here && arena_.paths(a).reachable(here, waypoint)) return waypoint;
            phase = 1 - phase;
        }
        return -1;
    }

    void shoot(int a, double distance) {
        AgentState& self = agents_[static_cast<std::size_t>(a)];
        AgentState& opponent = agents_[static_cast<std::size_t>(1 - a)];
        if (self.clip <= 0 || self.reload_timer > kTimerEpsilon || self.fire_cooldown > kTimerEpsilon) return;
        const ShotResult shot = resolve_shot(self, opponent, distance, rng_, cfg_);
        if (log_ && shot.fired)
            *log_ << "t=" << time_ << " p" << a + 1 << " fires hits=" << shot.hits << " dmg=" << shot.damage
                  << " target_hp=" << opponent.hp << '\n';
        if (opponent.hp <= 0.0) {
            opponent.alive = false;
            opponent.deaths += 1;
            opponent.respawn_timer = cfg_.respawn_delay;
            opponent.next_tile = -1;
            opponent.progress = 0.0;
            self.kills += 1;
            if (log_) *log_ << "t=" << time_ << " p" << a + 1 << " kills p" << 2 - a << '\n';
        }
    }

    void move(int a, int target) {
        AgentState& s = agents_[static_cast<std::size_t>(a)];
        const PathTable& paths = arena_.paths(a);
        if (s.next_tile < 0) {
            if (target < 0 || target == s.tile) return;
            s.next_tile = paths.next_hop(s.tile, target);
            s.progress = 0.0;
            if (s.next_tile < 0) return;
        }
        s.progress += s.cls.speed * cfg_.tick;
        if (s.progress >= 1.0) {
            s.tile = s.next_tile;
            s.progress -= 1.0;
            s.next_tile = (target >= 0 && target != s.tile) ? paths.next_hop(s.tile, target) : -1;
            if (s.next_tile < 0) s.progress = 0.0;
        }
    }

    const Arena& arena_;
    const MatchConfig& cfg_;
    Rng rng_;
    std::ostream* log_;
    std::vector<Pickup> pickups_;
    std::array<AgentState, 2> agents_;
    std::array<int, 2> patrol_phase_{};
    double time_ = 0.0;
};

}  // namespace

MatchOutcome simulate_match(const Arena& arena, const PhysicalClass& player1, const PhysicalClass& player2,
                            std::uint64_t seed, const MatchConfig& cfg, std::ostream* event_log) {
    cfg.validate();
    return Match(arena, player1, player2, seed, cfg, event_log).run();
}

MatchOutcome simulate_match(const Level& level, const ClassPair& pair, std::uint64_t seed, const MatchConfig& cfg,
                            const ParamRanges& ranges, std::ostream* event_log) {
    const Arena arena(level);
    return simulate_match(arena, denormalize(pair.player1, ranges), denormalize(pair.player2, ranges), seed, cfg,
                          event_log);
}

}  // namespace classpair
