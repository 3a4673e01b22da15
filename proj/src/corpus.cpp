#include "classpair/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "classpair/parallel.hpp"
#include "json.hpp"

namespace classpair {

double normalize_duration(double seconds) {
    return std::clamp((seconds - kDurationFloor) / (kDurationCeiling - kDurationFloor), 0.0, 1.0);
}

double denormalize_duration(double normalized) {
    return kDurationFloor + normalized * (kDurationCeiling - kDurationFloor);
}

std::uint64_t corpus_digest(const CorpusSettings& s, std::uint64_t master_seed, int n_configs) {
    std::ostringstream text;
    text << std::hexfloat;
    const GeneratorConfig& g = s.generator;
    text << "gen " << g.stairs_probability << ' ' << g.powerup_probability << ' ' << g.digger_target_bias << ' '
         << g.ca_iterations << ' ' << g.ca_wall_threshold << ' ' << g.ca_revert_threshold << ' '
         << g.ca_wall_probability << ' ' << g.ca_revert_probability << ' ' << g.max_attempts << '\n';
    const ParamRanges& r = s.ranges;
    text << "ranges";
    for (const Interval* i : {&r.hit_points, &r.speed, &r.damage, &r.accuracy, &r.rate_of_fire, &r.clip_size,
                              &r.bullets_per_shot})
        text << ' ' << i->min << ' ' << i->max;
    for (double d : r.range_tiles) text << ' ' << d;
    const MatchConfig& m = s.match;
    text << "\nmatch " << m.kill_limit << ' ' << m.time_limit << ' ' << m.tick << ' ' << m.respawn_delay << ' '
         << m.reload_time << ' ' << m.perception_radius << ' ' << m.heal_seek_threshold << ' ' << m.healing_amount
         << ' ' << m.armor_amount << ' ' << m.double_damage_duration << ' ' << m.double_damage_multiplier << ' '
         << m.healing_respawn << ' ' << m.armor_respawn << ' ' << m.double_damage_respawn << '\n';
    text << "run " << master_seed << ' ' << n_configs << '\n';
    return fnv1a64(text.str());
}

ConfigResult simulate_config(const Level& level, const ClassPair& pair, std::uint64_t level_seed,
                             std::uint64_t class_seed, std::array<std::uint64_t, 2> sim_seeds,
                             const CorpusSettings& settings) {
    const Arena arena(level);
    const ChannelStack channels = encode_level(level);
    ConfigResult result;
    const std::array<ClassPair, 2> roles{pair, swapped(pair)};
    for (std::size_t k = 0; k < roles.size(); ++k) {
        const MatchOutcome out =
            simulate_match(arena, denormalize(roles[k].player1, settings.ranges),
                           denormalize(roles[k].player2, settings.ranges), sim_seeds[k], settings.match);
        if (!out.completed) {
            ++result.dropped;
            continue;
        }
        Sample s;
        s.channels = channels;
        const Genotype g = encode_genotype(roles[k]);
        std::transform(g.begin(), g.end(), s.params.begin(), [](double v) { return static_cast<float>(v); });
        s.score = static_cast<float>(out.score);
        s.duration_norm = static_cast<float>(normalize_duration(out.duration));
        s.level_seed = level_seed;
        s.class_seed = class_seed;
        s.sim_seed = sim_seeds[k];
        result.samples.push_back(s);
        result.durations.push_back(out.duration);
    }
    return result;
}

Corpus build_corpus(int n_configs, std::uint64_t master_seed, const CorpusSettings& settings, int jobs,
                    const ProgressFn& progress) {
    if (n_configs < 1) throw std::invalid_argument("n_configs must be at least 1");
    settings.generator.validate();
    settings.ranges.validate();
    settings.match.validate();

    const auto n = static_cast<std::size_t>(n_configs);
    std::vector<ConfigResult> results(n);
    std::atomic<std::size_t> done{0};
    parallel_for(n, jobs, [&](std::size_t i) {
        const std::uint64_t level_seed = derive_seed(master_seed, "corpus.level", i);
        const std::uint64_t class_seed = derive_seed(master_seed, "corpus.classes", i);
        const std::array<std::uint64_t, 2> sim_seeds{derive_seed(master_seed, "corpus.match", 2 * i),
                                                     derive_seed(master_seed, "corpus.match", 2 * i + 1)};
        Level level;
        try {
            level = generate_level(level_seed, settings.generator);
        } catch (const GenerationError& e) {
            throw std::runtime_error("corpus config " + std::to_string(i) + ": " + e.what());
        }
        Rng rng(class_seed);
        results[i] = simulate_config(level, random_pair(rng), level_seed, class_seed, sim_seeds, settings);
        const std::size_t finished = ++done;
        if (progress) progress(finished, n);
    });

    Corpus corpus;
    corpus.config_digest = corpus_digest(settings, master_seed, n_configs);
    for (ConfigResult& r : results) {
        corpus.dropped += static_cast<std::uint64_t>(r.dropped);
        corpus.samples.insert(corpus.samples.end(), r.samples.begin(), r.samples.end());
        corpus.durations.insert(corpus.durations.end(), r.durations.begin(), r.durations.end());
    }
    return corpus;
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0,1)");
    std::vector<std::size_t> order(corpus.samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(order.size()) * fraction));

    Corpus train;
    Corpus validation;
    for (Corpus* c : {&train, &validation}) {
        c->dropped = corpus.dropped;
        c->config_digest = corpus.config_digest;
    }
    const bool has_durations = corpus.durations.size() == corpus.samples.size();
    for (std::size_t k = 0; k < order.size(); ++k) {
        Corpus& dest = k < n_val ? validation : train;
        dest.samples.push_back(corpus.samples[order[k]]);
        if (has_durations) dest.durations.push_back(corpus.durations[order[k]]);
    }
    return {std::move(train), std::move(validation)};
}

// ---------------------------------------------------------------------------

namespace {

std::size_t bin_of(double v) {
    const auto b = static_cast<long>(std::floor(v * DistributionReport::kBins));
    return static_cast<std::size_t>(std::clamp<long>(b, 0, DistributionReport::kBins - 1));
}

}  // namespace

DistributionReport distribution_report(const Corpus& corpus) {
    if (corpus.samples.empty()) throw std::invalid_argument("distribution report needs a non-empty corpus");
    DistributionReport report;
    report.count = corpus.samples.size();
    report.raw_durations = corpus.durations.size() == corpus.samples.size();
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        const Sample& s = corpus.samples[i];
        ++report.score_bins[bin_of(s.score)];
        ++report.duration_bins[bin_of(s.duration_norm)];
        const double d = report.raw_durations ? corpus.durations[i] : denormalize_duration(s.duration_norm);
        sum += d;
        sum_sq += d * d;
    }
    const double n = static_cast<double>(report.count);
    report.duration_mean = sum / n;
    report.duration_std = report.count > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * report.duration_mean * report.duration_mean) / (n - 1))) : 0.0;
    return report;
}

void write_distribution_csv(std::ostream& out, const DistributionReport& r) {
    out << "bin_low,bin_high,score_count,duration_count\n";
    for (int b = 0; b < DistributionReport::kBins; ++b) {
        out << b / double(DistributionReport::kBins) << ',' << (b + 1) / double(DistributionReport::kBins) << ','
            << r.score_bins[static_cast<std::size_t>(b)] << ',' << r.duration_bins[static_cast<std::size_t>(b)]
            << '\n';
    }
}

void write_distribution_text(std::ostream& out, const DistributionReport& r) {
    out << "samples: " << r.count << '\n';
    out << "duration mean " << std::fixed << std::setprecision(1) << r.duration_mean << " s, std "
        << r.duration_std << " s" << (r.raw_durations ? "" : " (from clamped normalized values)") << '\n';
    out << std::defaultfloat;
    const std::size_t peak = std::max(*std::max_element(r.score_bins.begin(), r.score_bins.end()),
                                      *std::max_element(r.duration_bins.begin(), r.duration_bins.end()));
    auto bar = [peak](std::size_t n) { return std::string(peak ? n * 40 / peak : 0, '*'); };
    for (const auto& [title, bins] : {std::pair{"score", &r.score_bins}, std::pair{"duration", &r.duration_bins}}) {
        out << title << '\n';
        for (int b = 0; b < DistributionReport::kBins; ++b) {
            const std::size_t n = (*bins)[static_cast<std::size_t>(b)];
            out << "  [" << std::setw(4) << b * 5 << "%," << std::setw(4) << (b + 1) * 5 << "%) " << std::setw(6) << n
                << ' ' << bar(n) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'F', 'C', '1'};
constexpr std::size_t kPlaneBytes = (kTileCount + 7) / 8;

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

void put_f32(std::ostream& out, float f) {
    const auto v = std::bit_cast<std::uint32_t>(f);
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void read_exact(std::istream& in, char* buf, std::size_t n) {
    in.read(buf, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw CorpusFormatError("corpus file truncated");
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    read_exact(in, reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

float get_f32(std::istream& in) {
    unsigned char b[4];
    read_exact(in, reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return std::bit_cast<float>(v);
}

}  // namespace

void write_corpus(std::ostream& out, const Corpus& corpus) {
    out.write(kMagic, 4);
    put_u64(out, corpus.samples.size());
    put_u64(out, corpus.dropped);
    put_u64(out, corpus.config_digest);
    for (const Sample& s : corpus.samples) {
        for (int c = 0; c < kChannelCount; ++c) {
            std::array<char, kPlaneBytes> plane{};
            for (int t = 0; t < kTileCount; ++t)
                if (s.channels.bits[static_cast<std::size_t>(c * kTileCount + t)])
                    plane[static_cast<std::size_t>(t / 8)] |= static_cast<char>(1 << (t % 8));
            out.write(plane.data(), plane.size());
        }
        for (float p : s.params) put_f32(out, p);
        put_f32(out, s.score);
        put_f32(out, s.duration_norm);
        put_u64(out, s.level_seed);
        put_u64(out, s.class_seed);
        put_u64(out, s.sim_seed);
    }
}

Corpus read_corpus(std::istream& in) {
    char magic[4];
    read_exact(in, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw CorpusFormatError("not a corpus file (bad magic)");
    const std::uint64_t count = get_u64(in);
    Corpus corpus;
    corpus.dropped = get_u64(in);
    corpus.config_digest = get_u64(in);
    if (count > (1ULL << 32)) throw CorpusFormatError("implausible sample count");
    corpus.samples.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        Sample s;
        for (int c = 0; c < kChannelCount; ++c) {
            std::array<char, kPlaneBytes> plane{};
            read_exact(in, plane.data(), plane.size());
            for (int t = 0; t < kTileCount; ++t)
                s.channels.bits[static_cast<std::size_t>(c * kTileCount + t)] =
                    (static_cast<unsigned char>(plane[static_cast<std::size_t>(t / 8)]) >> (t % 8)) & 1;
        }
        for (float& p : s.params) p = get_f32(in);
        s.score = get_f32(in);
        s.duration_norm = get_f32(in);
        s.level_seed = get_u64(in);
        s.class_seed = get_u64(in);
        s.sim_seed = get_u64(in);
        if (!is_valid_channel_stack(s.channels))
            throw CorpusFormatError("sample " + std::to_string(i) + " has an invalid channel stack");
        const bool in_unit = std::all_of(s.params.begin(), s.params.end(), [](float v) { return v >= 0 && v <= 1; }) &&
                             s.score >= 0 && s.score <= 1 && s.duration_norm >= 0 && s.duration_norm <= 1;
        if (!in_unit) throw CorpusFormatError("sample " + std::to_string(i) + " has values outside [0,1]");
        corpus.samples.push_back(s);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw CorpusFormatError("trailing bytes after last sample");
    return corpus;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    write_corpus(out, corpus);
    if (!out) throw std::runtime_error("failed writing corpus file: " + path);
}

Corpus read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    return read_corpus(in);
}

void export_corpus_text(std::ostream& out, const Corpus& corpus) {
    for (const Sample& s : corpus.samples) {
        nlohmann::ordered_json j;
        j["level_seed"] = s.level_seed;
        j["class_seed"] = s.class_seed;
        j["sim_seed"] = s.sim_seed;
        j["score"] = s.score;
        j["duration_norm"] = s.duration_norm;
        j["params"] = s.params;
        j["level"] = render_level(decode_level(s.channels));
        out << j.dump() << '\n';
    }
}

}  // namespace classpair
