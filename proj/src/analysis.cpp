#include "classpair/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "classpair/corpus.hpp"
#include "classpair/parallel.hpp"

namespace classpair {

double t_critical(double dof, double confidence) {
    if (!(dof > 0.0)) throw std::invalid_argument("t_critical needs positive degrees of freedom");
    if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0,1)");
    const boost::math::students_t dist(dof);
    return boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
}

namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

MeanCI mean_ci(std::span<const double> values, double confidence) {
    if (values.empty()) throw std::invalid_argument("mean_ci of an empty sample");
    MeanCI r;
    r.n = values.size();
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) {
        r.mean = *lo;
        return r;
    }
    r.mean = mean_of(values);
    if (values.size() >= 2) {
        const double se = std::sqrt(sample_variance(values, r.mean) / static_cast<double>(values.size()));
        r.half_width = t_critical(static_cast<double>(values.size() - 1), confidence) * se;
    }
    return r;
}

GroundTruthStats summarize_ground_truth(std::span<const double> durations_norm, std::span<const double> scores,
                                        int incomplete) {
    if (durations_norm.size() != scores.size()) throw std::invalid_argument("ground truth: length mismatch");
    if (durations_norm.size() < 2) throw std::invalid_argument("ground truth needs at least two simulations");
    const MeanCI t = mean_ci(durations_norm);
    const MeanCI s = mean_ci(scores);
    return {t.mean, s.mean, t.half_width, s.half_width, static_cast<int>(t.n), incomplete};
}

GroundTruthStats ground_truth(const Level& level, const ClassPair& pair, std::span<const std::uint64_t> seeds,
                              const MatchConfig& match, const ParamRanges& ranges, int jobs) {
    if (seeds.size() < 2) throw std::invalid_argument("ground truth needs at least two simulations");
    const Arena arena(level);
    const PhysicalClass p1 = denormalize(pair.player1, ranges);
    const PhysicalClass p2 = denormalize(pair.player2, ranges);
    std::vector<MatchOutcome> outcomes(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) { outcomes[i] = simulate_match(arena, p1, p2, seeds[i], match); });
    std::vector<double> durations;
    std::vector<double> scores;
    int incomplete = 0;
    for (const MatchOutcome& o : outcomes) {
        durations.push_back(normalize_duration(o.completed ? o.duration : match.time_limit));
        scores.push_back(o.score);
        if (!o.completed) ++incomplete;
    }
    return summarize_ground_truth(durations, scores, incomplete);
}

Accuracy accuracy(const Prediction& p, const GroundTruthStats& stats) {
    auto inside = [](double v, double mean, double ci) { return v >= mean - ci && v <= mean + ci; };
    return {inside(p.t, stats.a_t, stats.ci_t), inside(p.s, stats.a_s, stats.ci_s)};
}

std::string_view to_string(MapOrigin origin) {
    return origin == MapOrigin::designed ? "designed" : "generated";
}

AccuracyRecord make_record(std::string level_id, MapOrigin origin, std::string preset, const DesiredOutcome& desired,
                           const Prediction& prediction, const GroundTruthStats& stats) {
    AccuracyRecord r{std::move(level_id), origin, std::move(preset), desired, prediction, stats, {}, {}};
    r.accurate = accuracy(prediction, stats);
    const double dt = std::abs(stats.a_t - desired.d_t);
    const double ds = std::abs(stats.a_s - desired.d_s);
    const double pt = std::abs(stats.a_t - prediction.t);
    const double ps = std::abs(stats.a_s - prediction.s);
    r.distances = {dt, ds, std::hypot(dt, ds), pt, ps, std::hypot(pt, ps)};
    return r;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_std of an empty sample");
    const double m = mean_of(values);
    return {m, std::sqrt(sample_variance(values, m))};
}

DistanceReport distance_report(std::span<const AccuracyRecord> records) {
    DistanceReport report;
    for (const TargetPreset& preset : kTargetPresets)
        for (MapOrigin origin : {MapOrigin::designed, MapOrigin::generated}) {
            std::array<std::vector<double>, 6> columns;
            for (const AccuracyRecord& r : records)
                if (r.preset == preset.name && r.origin == origin)
                    for (std::size_t c = 0; c < 6; ++c) columns[c].push_back(r.distances[c]);
            if (columns[0].empty()) {
                report.notes.push_back("no runs for " + std::string(preset.name) + "/" + std::string(to_string(origin)));
                continue;
            }
            DistanceRow row{std::string(preset.name), origin, columns[0].size(), {}};
            for (std::size_t c = 0; c < 6; ++c) row.cells[c] = mean_std(columns[c]);
            report.rows.push_back(row);
        }
    return report;
}

namespace {

constexpr std::array<std::string_view, 6> kDistanceColumns{"gt_desired_t", "gt_desired_s", "gt_desired_euclid",
                                                           "gt_predicted_t", "gt_predicted_s", "gt_predicted_euclid"};

}  // namespace

void write_distance_csv(std::ostream& out, const DistanceReport& report) {
    out << "duration,map,runs";
    for (std::string_view c : kDistanceColumns) out << ',' << c << "_mean," << c << "_std";
    out << '\n' << std::fixed << std::setprecision(6);
    for (const DistanceRow& r : report.rows) {
        out << r.preset << ',' << to_string(r.origin) << ',' << r.runs;
        for (const MeanStd& c : r.cells) out << ',' << c.mean << ',' << c.std;
        out << '\n';
    }
}

void write_distance_text(std::ostream& out, const DistanceReport& report) {
    out << std::left << std::setw(10) << "Duration" << std::setw(11) << "Map" << std::right;
    for (const char* h : {"|at-dt|", "|as-ds|", "Eucl.", "|at-pt|", "|as-ps|", "Eucl."}) out << std::setw(16) << h;
    out << '\n' << std::fixed << std::setprecision(3);
    for (const DistanceRow& r : report.rows) {
        out << std::left << std::setw(10) << r.preset << std::setw(11) << to_string(r.origin) << std::right;
        for (const MeanStd& c : r.cells) {
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(3) << c.mean << "+-" << c.std;
            out << std::setw(16) << cell.str();
        }
        out << '\n';
    }
    for (const std::string& note : report.notes) out << "note: " << note << '\n';
}

void write_accuracy_csv(std::ostream& out, std::span<const AccuracyRecord> records) {
    out << "level,map,target,d_t,d_s,p_t,p_s,a_t,ci_t,a_s,ci_s,n,incomplete,duration_accurate,score_accurate\n"
        << std::fixed << std::setprecision(6);
    for (const AccuracyRecord& r : records)
        out << r.level_id << ',' << to_string(r.origin) << ',' << r.preset << ',' << r.desired.d_t << ','
            << r.desired.d_s << ',' << r.prediction.t << ',' << r.prediction.s << ',' << r.stats.a_t << ','
            << r.stats.ci_t << ',' << r.stats.a_s << ',' << r.stats.ci_s << ',' << r.stats.n << ','
            << r.stats.incomplete << ',' << (r.accurate.duration ? 1 : 0) << ',' << (r.accurate.score ? 1 : 0)
            << '\n';
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("pearson needs at least three pairs");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

WelchResult welch_test(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 2 || y.size() < 2) throw std::invalid_argument("welch test needs two values per sample");
    WelchResult r;
    r.mean_x = mean_of(x);
    r.mean_y = mean_of(y);
    const double vx = sample_variance(x, r.mean_x) / static_cast<double>(x.size());
    const double vy = sample_variance(y, r.mean_y) / static_cast<double>(y.size());
    if (vx + vy == 0.0) throw std::invalid_argument("welch test undefined for zero variance");
    r.t = (r.mean_x - r.mean_y) / std::sqrt(vx + vy);
    r.dof = (vx + vy) * (vx + vy) /
            (vx * vx / static_cast<double>(x.size() - 1) + vy * vy / static_cast<double>(y.size() - 1));
    const boost::math::students_t dist(r.dof);
    r.p_greater = boost::math::cdf(boost::math::complement(dist, r.t));
    r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
    return r;
}

std::vector<TrendRow> trend_report(std::span<const PresetGroup> groups) {
    std::vector<TrendRow> rows;
    for (const PresetGroup& g : groups) {
        if (g.pairs.size() < 2) throw std::invalid_argument("trend report needs two pairs per preset");
        for (int player = 1; player <= 2; ++player)
            for (int k = 0; k < kClassParams; ++k) {
                std::vector<double> values;
                for (const Genotype& pair : g.pairs)
                    values.push_back(pair[static_cast<std::size_t>((player - 1) * kClassParams + k)]);
                rows.push_back({g.preset, player, std::string(kParamNames[static_cast<std::size_t>(k)]), mean_ci(values)});
            }
    }
    return rows;
}

void write_trend_csv(std::ostream& out, std::span<const TrendRow> rows) {
    out << "target,player,parameter,mean,ci,n\n" << std::fixed << std::setprecision(6);
    for (const TrendRow& r : rows)
        out << r.preset << ',' << r.player << ',' << r.parameter << ',' << r.value.mean << ',' << r.value.half_width
            << ',' << r.value.n << '\n';
}

std::vector<TF2Counts> tf2_report(std::span<const PresetGroup> groups, std::span<const TF2Reference> refs,
                                  double threshold) {
    std::vector<TF2Counts> rows;
    for (const PresetGroup& g : groups) {
        TF2Counts both{g.preset, 0, {}};
        for (int player = 1; player <= 2; ++player) {
            TF2Counts row{g.preset, player, {}};
            for (const TF2Reference& r : refs) row.counts[r.label] = 0;
            row.counts[std::string(kUndefinedLabel)] = 0;
            for (const Genotype& genes : g.pairs) {
                const ClassPair pair = decode_genotype(genes);
                const TF2Match m = match_tf2(player == 1 ? pair.player1 : pair.player2, refs, threshold);
                ++row.counts[m.label];
                ++both.counts[m.label];
            }
            rows.push_back(row);
        }
        for (const auto& [label, count] : rows.back().counts) both.counts.try_emplace(label, 0);
        rows.push_back(both);
    }
    return rows;
}

void write_tf2_csv(std::ostream& out, std::span<const TF2Counts> rows, std::span<const TF2Reference> refs) {
    std::vector<std::string> labels;
    for (const TF2Reference& r : refs) labels.push_back(r.label);
    labels.emplace_back(kUndefinedLabel);
    out << "target,player";
    for (const std::string& l : labels) out << ',' << l;
    out << '\n';
    for (const TF2Counts& r : rows) {
        out << r.preset << ',' << (r.player == 0 ? std::string("both") : std::to_string(r.player));
        for (const std::string& l : labels) {
            const auto it = r.counts.find(l);
            out << ',' << (it == r.counts.end() ? 0 : it->second);
        }
        out << '\n';
    }
}

}  // namespace classpair
