#include "classpair/level.hpp"

#include <algorithm>
#include <deque>

namespace classpair {

BaseOwner base_owner(int x, int y) {
    if (x < kBaseSize && y < kBaseSize) return BaseOwner::player1;
    if (x >= kLevelSize - kBaseSize && y >= kLevelSize - kBaseSize) return BaseOwner::player2;
    return BaseOwner::none;
}

Level all_ground_level() { return Level{}; }

std::optional<int> stairs_target(const Level& level, int index) {
    if (level.at(index).entity != Entity::stairs) return std::nullopt;
    const Coord c = tile_coord(index);
    for (const Coord d : kDirections) {
        const int nx = c.x + d.x;
        const int ny = c.y + d.y;
        if (in_bounds(nx, ny) && level.at(nx, ny).elevation == 1) return tile_index(nx, ny);
    }
    return std::nullopt;
}

Level rotate_180(const Level& level) {
    Level out;
    out.seed = level.seed;
    for (int i = 0; i < kTileCount; ++i) out.at(kTileCount - 1 - i) = level.at(i);
    return out;
}

std::optional<LevelViolation> find_violation(const Level& level) {
    for (int y = 0; y < kLevelSize; ++y) {
        for (int x = 0; x < kLevelSize; ++x) {
            const Tile& t = level.at(x, y);
            if (t.elevation < 0 || t.elevation > 2) return LevelViolation{y, x, "elevation out of range"};
            if (in_base(x, y) && (t.elevation != 0 || t.entity != Entity::none))
                return LevelViolation{y, x, "base tiles must be empty ground"};
            if (t.entity == Entity::stairs && t.elevation != 0)
                return LevelViolation{y, x, "stairs must be on the ground floor"};
            if (t.entity != Entity::none && t.elevation == 2)
                return LevelViolation{y, x, "entity placed on a wall"};
            if (t.entity == Entity::stairs && !stairs_target(level, tile_index(x, y)))
                return LevelViolation{y, x, "stairs without an adjacent first-floor tile"};
        }
    }
    const MovementGraph graph(level);
    const auto forward = reachable_from(graph, 0);
    const auto backward = reachable_from(graph, 0, true);
    for (int i = 0; i < kTileCount; ++i) {
        if (!graph.walkable(i)) continue;
        if (!forward[static_cast<std::size_t>(i)] || !backward[static_cast<std::size_t>(i)]) {
            const Coord c = tile_coord(i);
            return LevelViolation{c.y, c.x, "walkable tile not connected to the rest of the level"};
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

MovementGraph::MovementGraph(const Level& level) {
    auto add_edge = [this](int from, int to) {
        auto& out = out_[static_cast<std::size_t>(from)];
        auto& n = out_count_[static_cast<std::size_t>(from)];
        if (std::find(out.begin(), out.begin() + n, to) != out.begin() + n) return;
        out[static_cast<std::size_t>(n++)] = to;
        auto& in = in_[static_cast<std::size_t>(to)];
        in[static_cast<std::size_t>(in_count_[static_cast<std::size_t>(to)]++)] = from;
    };

    for (int i = 0; i < kTileCount; ++i) walkable_[static_cast<std::size_t>(i)] = level.at(i).walkable();

    for (int i = 0; i < kTileCount; ++i) {
        if (!walkable(i)) continue;
        const Coord c = tile_coord(i);
        const int elevation = level.at(i).elevation;
        for (const Coord d : kDirections) {
            const int nx = c.x + d.x;
            const int ny = c.y + d.y;
            if (!in_bounds(nx, ny)) continue;
            const int j = tile_index(nx, ny);
            const int other = level.at(j).elevation;
            if (other == elevation) {
                add_edge(i, j);
            } else if (elevation == 1 && other == 0) {
                add_edge(i, j);  // jump down
            }
        }
        if (const auto target = stairs_target(level, i)) {
            add_edge(i, *target);
            add_edge(*target, i);
        }
    }
    for (int i = 0; i < kTileCount; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        std::sort(out_[idx].begin(), out_[idx].begin() + out_count_[idx]);
        std::sort(in_[idx].begin(), in_[idx].begin() + in_count_[idx]);
    }
}

int MovementGraph::node_count() const {
    return static_cast<int>(std::count(walkable_.begin(), walkable_.end(), true));
}

std::span<const int> MovementGraph::successors(int node) const {
    const auto idx = static_cast<std::size_t>(node);
    return {out_[idx].data(), static_cast<std::size_t>(out_count_[idx])};
}

std::span<const int> MovementGraph::predecessors(int node) const {
    const auto idx = static_cast<std::size_t>(node);
    return {in_[idx].data(), static_cast<std::size_t>(in_count_[idx])};
}

bool MovementGraph::has_edge(int from, int to) const {
    const auto s = successors(from);
    return std::find(s.begin(), s.end(), to) != s.end();
}

MovementGraph movement_graph(const Level& level) { return MovementGraph(level); }

std::array<bool, kTileCount> reachable_from(const MovementGraph& graph, int start, bool reverse) {
    std::array<bool, kTileCount> seen{};
    if (!graph.walkable(start)) return seen;
    std::deque<int> queue{start};
    seen[static_cast<std::size_t>(start)] = true;
    while (!queue.empty()) {
        const int node = queue.front();
        queue.pop_front();
        for (const int next : reverse ? graph.predecessors(node) : graph.successors(node)) {
            if (seen[static_cast<std::size_t>(next)]) continue;
            seen[static_cast<std::size_t>(next)] = true;
            queue.push_back(next);
        }
    }
    return seen;
}

// ---------------------------------------------------------------------------

ChannelStack encode_level(const Level& level) {
    ChannelStack stack;
    for (int y = 0; y < kLevelSize; ++y) {
        for (int x = 0; x < kLevelSize; ++x) {
            const Tile& t = level.at(x, y);
            stack.at(std::clamp(t.elevation, 0, 2), x, y) = 1;
            switch (t.entity) {
                case Entity::stairs: stack.at(kStairs, x, y) = 1; break;
                case Entity::double_damage: stack.at(kDoubleDamage, x, y) = 1; break;
                case Entity::healing: stack.at(kHealing, x, y) = 1; break;
                case Entity::armor: stack.at(kArmor, x, y) = 1; break;
                case Entity::none: break;
            }
        }
    }
    return stack;
}

bool is_valid_channel_stack(const ChannelStack& stack) {
    for (int y = 0; y < kLevelSize; ++y) {
        for (int x = 0; x < kLevelSize; ++x) {
            int elevation_sum = 0;
            for (int c = 0; c < 3; ++c) elevation_sum += stack.at(c, x, y);
            if (elevation_sum != 1) return false;
            int entities = 0;
            for (int c = kStairs; c <= kArmor; ++c) entities += stack.at(c, x, y);
            if (entities > 1) return false;
            if (stack.at(kCover, x, y) != 0) return false;
        }
    }
    return std::all_of(stack.bits.begin(), stack.bits.end(), [](std::uint8_t b) { return b <= 1; });
}

Level decode_level(const ChannelStack& stack) {
    if (!is_valid_channel_stack(stack)) throw std::invalid_argument("channel stack is not a valid level encoding");
    Level level;
    for (int y = 0; y < kLevelSize; ++y) {
        for (int x = 0; x < kLevelSize; ++x) {
            Tile& t = level.at(x, y);
            t.elevation = stack.at(kFirstFloor, x, y) ? 1 : stack.at(kSecondFloor, x, y) ? 2 : 0;
            if (stack.at(kStairs, x, y)) t.entity = Entity::stairs;
            if (stack.at(kDoubleDamage, x, y)) t.entity = Entity::double_damage;
            if (stack.at(kHealing, x, y)) t.entity = Entity::healing;
            if (stack.at(kArmor, x, y)) t.entity = Entity::armor;
        }
    }
    return level;
}

}  // namespace classpair
