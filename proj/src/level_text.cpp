#include "classpair/level.hpp"

#include <fstream>
#include <sstream>

namespace classpair {

LevelParseError::LevelParseError(int row, int col, const std::string& message)
    : std::runtime_error("level parse error at row " + std::to_string(row) + ", column " + std::to_string(col) +
                         ": " + message),
      row_(row),
      col_(col) {}

namespace {

char tile_char(const Tile& t) {
    switch (t.entity) {
        case Entity::stairs: return 'S';
        case Entity::double_damage: return t.elevation == 1 ? 'd' : 'D';
        case Entity::healing: return t.elevation == 1 ? 'h' : 'H';
        case Entity::armor: return t.elevation == 1 ? 'a' : 'A';
        case Entity::none: break;
    }
    switch (t.elevation) {
        case 0: return '.';
        case 1: return '=';
        default: return '#';
    }
}

std::optional<Tile> char_tile(char c) {
    switch (c) {
        case '.': return Tile{0, Entity::none};
        case '=': return Tile{1, Entity::none};
        case '#': return Tile{2, Entity::none};
        case 'S': return Tile{0, Entity::stairs};
        case 'D': return Tile{0, Entity::double_damage};
        case 'H': return Tile{0, Entity::healing};
        case 'A': return Tile{0, Entity::armor};
        case 'd': return Tile{1, Entity::double_damage};
        case 'h': return Tile{1, Entity::healing};
        case 'a': return Tile{1, Entity::armor};
        default: return std::nullopt;
    }
}

}  // namespace

Level parse_level(std::string_view text) {
    Level level;
    int row = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        if (row >= kLevelSize) {
            if (line.empty() && pos >= text.size()) break;
            throw LevelParseError(row, 0, "expected exactly 20 rows");
        }
        if (line.size() != static_cast<std::size_t>(kLevelSize))
            throw LevelParseError(row, static_cast<int>(std::min(line.size(), std::size_t{kLevelSize})),
                                  "expected 20 characters, got " + std::to_string(line.size()));
        for (int col = 0; col < kLevelSize; ++col) {
            const auto tile = char_tile(line[static_cast<std::size_t>(col)]);
            if (!tile) throw LevelParseError(row, col, std::string("unknown tile character '") + line[col] + "'");
            level.at(col, row) = *tile;
        }
        ++row;
    }
    if (row != kLevelSize) throw LevelParseError(row, 0, "expected exactly 20 rows, got " + std::to_string(row));
    if (const auto violation = find_violation(level))
        throw LevelParseError(violation->row, violation->col, violation->message);
    return level;
}

std::string render_level(const Level& level) {
    std::string out;
    out.reserve(static_cast<std::size_t>(kTileCount + kLevelSize));
    for (int y = 0; y < kLevelSize; ++y) {
        for (int x = 0; x < kLevelSize; ++x) out.push_back(tile_char(level.at(x, y)));
        out.push_back('\n');
    }
    return out;
}

Level read_level_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open level file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_level(buffer.str());
}

void write_level_file(const std::string& path, const Level& level) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write level file: " + path);
    out << render_level(level);
    if (!out) throw std::runtime_error("failed writing level file: " + path);
}

}  // namespace classpair
