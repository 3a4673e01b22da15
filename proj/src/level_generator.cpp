#include "classpair/level.hpp"

#include <deque>
#include <string>

#include "classpair/random.hpp"

namespace classpair {

GenerationError::GenerationError(std::uint64_t seed, int attempts)
    : std::runtime_error("level generation failed for seed " + std::to_string(seed) + " after " +
                         std::to_string(attempts) + " attempts"),
      attempts_(attempts) {}

void GeneratorConfig::validate() const {
    auto probability = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
    };
    probability(stairs_probability, "stairs_probability");
    probability(powerup_probability, "powerup_probability");
    probability(digger_target_bias, "digger_target_bias");
    probability(ca_wall_probability, "ca_wall_probability");
    probability(ca_revert_probability, "ca_revert_probability");
    if (ca_iterations < 0) throw std::invalid_argument("ca_iterations must be >= 0");
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

namespace {

constexpr std::array<DirectionBit, 4> kDirectionBits{kNorth, kEast, kSouth, kWest};

DirectionBit opposite(DirectionBit d) {
    switch (d) {
        case kNorth: return kSouth;
        case kEast: return kWest;
        case kSouth: return kNorth;
        case kWest: return kEast;
    }
    return kNorth;
}

// Carves a path of sketch cells from the player-1 base cell to the player-2
// base cell, never leaving one side of the base-to-base diagonal.
void dig_sketch_path(SketchGrid& sketch, Rng& rng, bool upper_side, double bias) {
    auto allowed = [upper_side](int cx, int cy) {
        if (cx < 0 || cy < 0 || cx >= kSketchSize || cy >= kSketchSize) return false;
        return upper_side ? cx >= cy : cy >= cx;
    };
    int cx = 0;
    int cy = 0;
    constexpr int target = kSketchSize - 1;
    for (int step = 0; cx != target || cy != target; ++step) {
        std::vector<int> toward;
        std::vector<int> any;
        for (int d = 0; d < 4; ++d) {
            const int nx = cx + kDirections[static_cast<std::size_t>(d)].x;
            const int ny = cy + kDirections[static_cast<std::size_t>(d)].y;
            if (!allowed(nx, ny)) continue;
            any.push_back(d);
            if (nx > cx || ny > cy) toward.push_back(d);
        }
        const bool go_toward = step > 64 || bernoulli(rng, bias);
        const auto& options = (go_toward && !toward.empty()) ? toward : any;
        const int d = options[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(options.size()) - 1))];
        const int nx = cx + kDirections[static_cast<std::size_t>(d)].x;
        const int ny = cy + kDirections[static_cast<std::size_t>(d)].y;
        sketch.at(cx, cy).connections |= kDirectionBits[static_cast<std::size_t>(d)];
        sketch.at(nx, ny).connections |= opposite(kDirectionBits[static_cast<std::size_t>(d)]);
        cx = nx;
        cy = ny;
    }
}

SketchGrid dig_sketch(Rng& rng, const GeneratorConfig& cfg) {
    SketchGrid sketch;
    sketch.at(0, 0).is_base = true;
    sketch.at(kSketchSize - 1, kSketchSize - 1).is_base = true;
    dig_sketch_path(sketch, rng, true, cfg.digger_target_bias);
    dig_sketch_path(sketch, rng, false, cfg.digger_target_bias);
    return sketch;
}

struct Grid {
    std::array<int, kTileCount> elevation{};
    std::array<Entity, kTileCount> entity{};
    std::array<bool, kTileCount> candidate{};

    int& elev(int x, int y) { return elevation[static_cast<std::size_t>(tile_index(x, y))]; }
    int elev_or_wall(int x, int y) const {
        return in_bounds(x, y) ? elevation[static_cast<std::size_t>(tile_index(x, y))] : 2;
    }
};

// Random walk from `from` to `to` inside one sketch cell, carving ground.
void carve_walk(Grid& grid, Rng& rng, Coord from, Coord to, int cx, int cy, double bias) {
    const int x0 = cx * kCellSize;
    const int y0 = cy * kCellSize;
    Coord p = from;
    grid.elev(p.x, p.y) = 0;
    for (int step = 0; p != to; ++step) {
        std::vector<Coord> toward;
        if (to.x != p.x) toward.push_back({p.x + (to.x > p.x ? 1 : -1), p.y});
        if (to.y != p.y) toward.push_back({p.x, p.y + (to.y > p.y ? 1 : -1)});
        Coord next;
        if (step > 100 || bernoulli(rng, bias)) {
            next = toward[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(toward.size()) - 1))];
        } else {
            std::vector<Coord> inside;
            for (const Coord d : kDirections) {
                const Coord q{p.x + d.x, p.y + d.y};
                if (q.x >= x0 && q.y >= y0 && q.x < x0 + kCellSize && q.y < y0 + kCellSize) inside.push_back(q);
            }
            next = inside[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(inside.size()) - 1))];
        }
        p = next;
        grid.elev(p.x, p.y) = 0;
    }
}

void expand_sketch(Grid& grid, const SketchGrid& sketch, Rng& rng, const GeneratorConfig& cfg) {
    grid.elevation.fill(2);
    grid.entity.fill(Entity::none);

    // Door offset along each interior cell boundary, shared by both cells.
    std::array<std::array<int, kSketchSize>, kSketchSize> east_door{};
    std::array<std::array<int, kSketchSize>, kSketchSize> south_door{};
    for (int cy = 0; cy < kSketchSize; ++cy)
        for (int cx = 0; cx < kSketchSize; ++cx) {
            east_door[cy][cx] = uniform_int(rng, 0, kCellSize - 1);
            south_door[cy][cx] = uniform_int(rng, 0, kCellSize - 1);
        }

    for (int cy = 0; cy < kSketchSize; ++cy) {
        for (int cx = 0; cx < kSketchSize; ++cx) {
            const SketchCell& cell = sketch.at(cx, cy);
            const int x0 = cx * kCellSize;
            const int y0 = cy * kCellSize;
            if (cell.is_base) {
                for (int y = y0; y < y0 + kCellSize; ++y)
                    for (int x = x0; x < x0 + kCellSize; ++x) grid.elev(x, y) = 0;
                continue;
            }
            if (cell.connections == 0) continue;
            const Coord hub{x0 + uniform_int(rng, 1, kCellSize - 2), y0 + uniform_int(rng, 1, kCellSize - 2)};
            grid.elev(hub.x, hub.y) = 0;
            for (int d = 0; d < 4; ++d) {
                if (!(cell.connections & kDirectionBits[static_cast<std::size_t>(d)])) continue;
                Coord door;
                switch (kDirectionBits[static_cast<std::size_t>(d)]) {
                    case kNorth: door = {x0 + south_door[cy - 1][cx], y0}; break;
                    case kEast: door = {x0 + kCellSize - 1, y0 + east_door[cy][cx]}; break;
                    case kSouth: door = {x0 + south_door[cy][cx], y0 + kCellSize - 1}; break;
                    case kWest: door = {x0, y0 + east_door[cy][cx - 1]}; break;
                }
                carve_walk(grid, rng, hub, door, cx, cy, cfg.digger_target_bias);
            }
        }
    }
}

void mark_first_floor_candidates(Grid& grid) {
    for (int y = 0; y < kLevelSize; ++y) {
        for (int x = 0; x < kLevelSize; ++x) {
            if (grid.elev(x, y) != 2 || in_base(x, y)) continue;
            int ground = 0;
            for (const Coord d : kDirections)
                if (in_bounds(x + d.x, y + d.y) && grid.elev(x + d.x, y + d.y) == 0) ++ground;
            if (ground >= 2) {
                grid.elev(x, y) = 1;
                grid.candidate[static_cast<std::size_t>(tile_index(x, y))] = true;
            }
        }
    }
}

bool has_first_floor_neighbor(Grid& grid, int x, int y) {
    for (const Coord d : kDirections)
        if (in_bounds(x + d.x, y + d.y) && grid.elev(x + d.x, y + d.y) == 1) return true;
    return false;
}

void place_stairs(Grid& grid, Rng& rng, const GeneratorConfig& cfg) {
    for (int y = 0; y < kLevelSize; ++y)
        for (int x = 0; x < kLevelSize; ++x) {
            if (grid.elev(x, y) != 0 || in_base(x, y) || !has_first_floor_neighbor(grid, x, y)) continue;
            if (bernoulli(rng, cfg.stairs_probability))
                grid.entity[static_cast<std::size_t>(tile_index(x, y))] = Entity::stairs;
        }
}

void run_cellular_automaton(Grid& grid, Rng& rng, const GeneratorConfig& cfg) {
    for (int iteration = 0; iteration < cfg.ca_iterations; ++iteration) {
        Grid next = grid;
        for (int y = 0; y < kLevelSize; ++y) {
            for (int x = 0; x < kLevelSize; ++x) {
                if (!grid.candidate[static_cast<std::size_t>(tile_index(x, y))]) continue;
                int walls = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        if ((dx != 0 || dy != 0) && grid.elev_or_wall(x + dx, y + dy) == 2) ++walls;
                const int current = grid.elev(x, y);
                if (current == 1 && walls >= cfg.ca_wall_threshold && bernoulli(rng, cfg.ca_wall_probability)) {
                    next.elev(x, y) = 2;
                } else if (current == 2 && walls <= cfg.ca_revert_threshold &&
                           bernoulli(rng, cfg.ca_revert_probability)) {
                    next.elev(x, y) = 1;
                }
            }
        }
        grid = next;
    }
}

Level to_level(const Grid& grid) {
    Level level;
    for (int i = 0; i < kTileCount; ++i) {
        level.at(i).elevation = grid.elevation[static_cast<std::size_t>(i)];
        level.at(i).entity = grid.entity[static_cast<std::size_t>(i)];
    }
    return level;
}

// After the automaton, drops stairs that lost their first floor and gives
// every first-floor region at least one stairs (or walls it in when no valid
// stairs position exists), so every walkable tile stays reachable.
void link_first_floor_regions(Level& level, Rng& rng) {
    for (int i = 0; i < kTileCount; ++i)
        if (level.at(i).entity == Entity::stairs && !stairs_target(level, i)) level.at(i).entity = Entity::none;

    std::array<int, kTileCount> region{};
    region.fill(-1);
    int region_count = 0;
    for (int i = 0; i < kTileCount; ++i) {
        if (level.at(i).elevation != 1 || region[static_cast<std::size_t>(i)] >= 0) continue;
        std::deque<int> queue{i};
        region[static_cast<std::size_t>(i)] = region_count;
        while (!queue.empty()) {
            const Coord c = tile_coord(queue.front());
            queue.pop_front();
            for (const Coord d : kDirections) {
                if (!in_bounds(c.x + d.x, c.y + d.y)) continue;
                const int j = tile_index(c.x + d.x, c.y + d.y);
                if (level.at(j).elevation == 1 && region[static_cast<std::size_t>(j)] < 0) {
                    region[static_cast<std::size_t>(j)] = region_count;
                    queue.push_back(j);
                }
            }
        }
        ++region_count;
    }

    std::vector<bool> linked(static_cast<std::size_t>(region_count), false);
    for (int i = 0; i < kTileCount; ++i)
        if (const auto target = stairs_target(level, i)) linked[static_cast<std::size_t>(region[*target])] = true;

    for (int r = 0; r < region_count; ++r) {
        if (linked[static_cast<std::size_t>(r)]) continue;
        std::vector<int> positions;
        for (int i = 0; i < kTileCount; ++i) {
            const Coord c = tile_coord(i);
            if (level.at(i).elevation != 0 || level.at(i).entity != Entity::none || in_base(c.x, c.y)) continue;
            level.at(i).entity = Entity::stairs;
            const auto target = stairs_target(level, i);
            level.at(i).entity = Entity::none;
            if (target && region[static_cast<std::size_t>(*target)] == r) positions.push_back(i);
        }
        if (positions.empty()) {
            for (int i = 0; i < kTileCount; ++i)
                if (region[static_cast<std::size_t>(i)] == r) level.at(i).elevation = 2;
            continue;
        }
        const int pick = positions[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(positions.size()) - 1))];
        level.at(pick).entity = Entity::stairs;
    }
}

void place_powerups(Level& level, SketchGrid& sketch, Rng& rng, const GeneratorConfig& cfg) {
    constexpr std::array<Entity, 3> kPowerups{Entity::double_damage, Entity::healing, Entity::armor};
    for (int cy = 0; cy < kSketchSize; ++cy) {
        for (int cx = 0; cx < kSketchSize; ++cx) {
            if (sketch.at(cx, cy).is_base) continue;
            if (!bernoulli(rng, cfg.powerup_probability)) continue;
            std::vector<int> spots;
            for (int y = cy * kCellSize; y < (cy + 1) * kCellSize; ++y)
                for (int x = cx * kCellSize; x < (cx + 1) * kCellSize; ++x)
                    if (level.at(x, y).walkable() && level.at(x, y).entity == Entity::none)
                        spots.push_back(tile_index(x, y));
            if (spots.empty()) continue;
            const int spot = spots[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(spots.size()) - 1))];
            level.at(spot).entity = kPowerups[static_cast<std::size_t>(uniform_int(rng, 0, 2))];
            sketch.at(cx, cy).has_powerup = true;
        }
    }
}

}  // namespace

SketchGrid generate_sketch(std::uint64_t seed, const GeneratorConfig& cfg) {
    cfg.validate();
    Rng rng(seed);
    return dig_sketch(rng, cfg);
}

Level generate_level(std::uint64_t seed, const GeneratorConfig& cfg) {
    cfg.validate();
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        Rng rng(seed ^ static_cast<std::uint64_t>(attempt));
        SketchGrid sketch = dig_sketch(rng, cfg);
        Grid grid;
        expand_sketch(grid, sketch, rng, cfg);
        mark_first_floor_candidates(grid);
        place_stairs(grid, rng, cfg);
        run_cellular_automaton(grid, rng, cfg);
        Level level = to_level(grid);
        link_first_floor_regions(level, rng);
        place_powerups(level, sketch, rng, cfg);
        level.seed = seed;
        if (!find_violation(level)) return level;
    }
    throw GenerationError(seed, cfg.max_attempts);
}

}  // namespace classpair
