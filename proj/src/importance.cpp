#include "fcprobe/importance.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fcprobe/error.h"
#include "fcprobe/io.h"
#include "fcprobe/parallel.h"
#include "fcprobe/rng.h"

namespace fcprobe {

void BrodmannTable::validate() const {
    if (entries.empty()) fail(ErrorKind::InvalidInput, "Brodmann table is empty");
    std::set<int> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.ba_id).second)
            fail(ErrorKind::InvalidInput, "duplicate Brodmann id " + std::to_string(e.ba_id));
        for (double c : e.centroid)
            if (!std::isfinite(c)) fail(ErrorKind::InvalidInput, "non-finite Brodmann centroid");
    }
}

BrodmannTable synthetic_brodmann_table() {
    // 4 x 4 x 3 lattice over the coordinate box with a fixed, seeded jitter.
    BrodmannTable table;
    Rng rng(0xb0d3a11);
    int id = 1;
    for (int zi = 0; zi < 3; ++zi) {
        for (int yi = 0; yi < 4; ++yi) {
            for (int xi = 0; xi < 4; ++xi) {
                BrodmannEntry e;
                e.ba_id = id;
                e.name = "BA" + std::to_string(id);
                const std::array<double, 3> frac{(xi + 0.5) / 4.0, (yi + 0.5) / 4.0, (zi + 0.5) / 3.0};
                for (std::size_t a = 0; a < 3; ++a) {
                    const double jitter = rng.uniform(-0.08, 0.08);
                    e.centroid[a] = (2.0 * (frac[a] + jitter) - 1.0) * kBrainHalfExtent[a];
                }
                table.entries.push_back(std::move(e));
                ++id;
            }
        }
    }
    return table;
}

void write_brodmann_csv(const std::filesystem::path& path, const BrodmannTable& table) {
    table.validate();
    std::string out = "ba_id,x,y,z,name\n";
    for (const auto& e : table.entries) {
        out += std::to_string(e.ba_id);
        for (double c : e.centroid) out += "," + io::format_double(c);
        out += "," + e.name + "\n";
    }
    io::write_text(path, out);
}

BrodmannTable read_brodmann_csv(const std::filesystem::path& path) {
    const auto t = io::read_csv(path);
    const auto c_id = t.column("ba_id");
    const auto c_x = t.column("x");
    const auto c_y = t.column("y");
    const auto c_z = t.column("z");
    const auto c_name = t.column("name");
    BrodmannTable table;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = r + 2;
        if (row.size() != t.header.size())
            fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line) + ": wrong field count");
        table.entries.push_back({static_cast<int>(io::parse_int(row[c_id], path, line)),
                                 {io::parse_double(row[c_x], path, line), io::parse_double(row[c_y], path, line),
                                  io::parse_double(row[c_z], path, line)},
                                 row[c_name]});
    }
    table.validate();
    return table;
}

Eigen::VectorXd pfi(const TrainedModel& model, const Dataset& test, const PfiOptions& options) {
    test.validate();
    const auto f = static_cast<Eigen::Index>(test.n_features());
    if (f == 0) fail(ErrorKind::InvalidInput, "pfi needs at least one feature");
    if (f != model.input_dim) fail(ErrorKind::InvalidInput, "test features do not match the model input dimension");
    if (options.repeats < 1) fail(ErrorKind::InvalidInput, "repeats must be >= 1");

    // Permuting column j only changes the first-layer pre-activation by a rank-one term,
    // (x_perm - x)_j * W0[j, :], so the permuted pass starts from the intact z0.
    const Eigen::MatrixXd standardized =
        (test.features.rowwise() - model.input_shift).array().rowwise() / model.input_scale.array();
    const Eigen::MatrixXd z0 = first_layer_preactivation(model, test.features);
    const double p_before = auroc(test.labels, predict_from_first_layer(model, z0));
    const Eigen::MatrixXd& w0 = model.layers.front().weights;
    const auto n = static_cast<std::size_t>(test.features.rows());

    Eigen::VectorXd importance(f);
    parallel_for(static_cast<std::size_t>(f), options.workers, [&](std::size_t j) {
        Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(j)}));
        const auto col = static_cast<Eigen::Index>(j);
        std::vector<std::size_t> perm(n);
        Eigen::VectorXd shift(static_cast<Eigen::Index>(n));
        double after = 0.0;
        for (int rep = 0; rep < options.repeats; ++rep) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(perm));
            for (std::size_t r = 0; r < n; ++r)
                shift(static_cast<Eigen::Index>(r)) =
                    standardized(static_cast<Eigen::Index>(perm[r]), col) - standardized(static_cast<Eigen::Index>(r), col);
            Eigen::MatrixXd z = z0;
            z.noalias() += shift * w0.row(col);
            after += auroc(test.labels, predict_from_first_layer(model, std::move(z)));
        }
        importance(col) = p_before - after / static_cast<double>(options.repeats);
    });
    return importance;
}

Eigen::VectorXd zscores(const Eigen::VectorXd& raw) {
    if (raw.size() < 2) fail(ErrorKind::InvalidInput, "z-scores need at least 2 features");
    if (!raw.allFinite()) fail(ErrorKind::InvalidInput, "non-finite importances");
    const double mean = raw.mean();
    const double sd = std::sqrt((raw.array() - mean).square().mean());
    if (!(sd > 0.0)) fail(ErrorKind::DegenerateImportances, "all importances are equal; z-scores are undefined");
    return (raw.array() - mean) / sd;
}

std::vector<ImportanceRecord> zscore_rank(const Eigen::VectorXd& raw, std::span<const RegionPair> pairs, int top_k) {
    if (static_cast<std::size_t>(raw.size()) != pairs.size())
        fail(ErrorKind::InvalidInput, "importances and region pairs differ in length");
    if (top_k < 0) fail(ErrorKind::InvalidInput, "top_k must be >= 0");
    const Eigen::VectorXd z = zscores(raw);
    std::vector<int> order(static_cast<std::size_t>(raw.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (z(a) != z(b)) return z(a) > z(b);
        return a < b;
    });
    const auto keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(top_k));
    std::vector<ImportanceRecord> out;
    for (std::size_t r = 0; r < keep; ++r) {
        const int idx = order[r];
        ImportanceRecord rec;
        rec.rank = static_cast<int>(r) + 1;
        rec.feature_index = idx;
        rec.region_pair = pairs[static_cast<std::size_t>(idx)];
        rec.raw_importance = raw(idx);
        rec.z_score = z(idx);
        out.push_back(rec);
    }
    return out;
}

std::vector<int> map_to_brodmann(const Atlas& atlas, const BrodmannTable& table) {
    table.validate();
    std::vector<const BrodmannEntry*> sorted;
    for (const auto& e : table.entries) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->ba_id < b->ba_id; });

    std::vector<int> mapping;
    mapping.reserve(atlas.regions.size());
    for (const auto& region : atlas.regions) {
        const BrodmannEntry* best = nullptr;
        double best_d2 = 0.0;
        for (const auto* e : sorted) {
            double d2 = 0.0;
            for (std::size_t a = 0; a < 3; ++a) d2 += (region.centroid[a] - e->centroid[a]) * (region.centroid[a] - e->centroid[a]);
            if (best == nullptr || d2 < best_d2) {
                best = e;
                best_d2 = d2;
            }
        }
        mapping.push_back(best->ba_id);
    }
    return mapping;
}

void label_records(std::vector<ImportanceRecord>& records, const Atlas& atlas, std::span<const int> region_to_ba) {
    for (auto& rec : records) {
        const auto i = static_cast<std::size_t>(rec.region_pair.i);
        const auto j = static_cast<std::size_t>(rec.region_pair.j);
        if (i >= atlas.regions.size() || j >= atlas.regions.size())
            fail(ErrorKind::InvalidInput, "feature region pair outside the atlas");
        rec.functional_pair = std::pair{atlas.regions[i].functional_label, atlas.regions[j].functional_label};
        if (i < region_to_ba.size() && j < region_to_ba.size())
            rec.ba_pair = std::minmax(region_to_ba[i], region_to_ba[j]);
    }
}

std::vector<Edge> threshold_edges(const Eigen::VectorXd& z, std::span<const RegionPair> pairs, const Atlas& atlas,
                                  double tau) {
    if (static_cast<std::size_t>(z.size()) != pairs.size())
        fail(ErrorKind::InvalidInput, "z-scores and region pairs differ in length");
    std::vector<Edge> out;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        if (!(z(k) >= tau)) continue;
        const auto& p = pairs[static_cast<std::size_t>(k)];
        if (p.i < 0 || p.j < 0 || p.i >= atlas.size() || p.j >= atlas.size())
            fail(ErrorKind::InvalidInput, "feature region pair outside the atlas");
        out.push_back({p, z(k), atlas.regions[static_cast<std::size_t>(p.i)].centroid,
                       atlas.regions[static_cast<std::size_t>(p.j)].centroid});
    }
    return out;
}

OverlapReport cross_granularity_overlap(std::span<const std::vector<BaPair>> rankings) {
    if (rankings.size() < 2) fail(ErrorKind::InvalidInput, "overlap needs at least 2 rankings");
    OverlapReport report;
    for (const auto& ranking : rankings) {
        std::set<BaPair> pairs;
        for (auto [a, b] : ranking) {
            const auto p = std::minmax(a, b);
            pairs.insert(p);
            ++report.ba_involvement[p.first];
            if (p.second != p.first) ++report.ba_involvement[p.second];
        }
        report.per_ranking.push_back(std::move(pairs));
    }
    report.common_pairs = report.per_ranking.front();
    for (std::size_t r = 1; r < report.per_ranking.size(); ++r) {
        std::set<BaPair> kept;
        std::set_intersection(report.common_pairs.begin(), report.common_pairs.end(), report.per_ranking[r].begin(),
                              report.per_ranking[r].end(), std::inserter(kept, kept.begin()));
        report.common_pairs = std::move(kept);
    }
    return report;
}

void write_importance_csv(const std::filesystem::path& path, std::span<const ImportanceRecord> records) {
    std::string out = "rank,feature_index,region_i,region_j,ba_i,ba_j,function_i,function_j,raw_importance,z_score\n";
    for (const auto& r : records) {
        out += std::to_string(r.rank) + "," + std::to_string(r.feature_index) + "," + std::to_string(r.region_pair.i) +
               "," + std::to_string(r.region_pair.j) + ",";
        if (r.ba_pair) out += std::to_string(r.ba_pair->first) + "," + std::to_string(r.ba_pair->second);
        else out += ",";
        out += ",";
        if (r.functional_pair) out += to_string(r.functional_pair->first) + "," + to_string(r.functional_pair->second);
        else out += ",";
        out += "," + io::format_double(r.raw_importance) + "," + io::format_double(r.z_score) + "\n";
    }
    io::write_text(path, out);
}

std::vector<ImportanceRecord> read_importance_csv(const std::filesystem::path& path) {
    const auto t = io::read_csv(path);
    const auto c_rank = t.column("rank");
    const auto c_feat = t.column("feature_index");
    const auto c_ri = t.column("region_i");
    const auto c_rj = t.column("region_j");
    const auto c_bi = t.column("ba_i");
    const auto c_bj = t.column("ba_j");
    const auto c_fi = t.column("function_i");
    const auto c_fj = t.column("function_j");
    const auto c_raw = t.column("raw_importance");
    const auto c_z = t.column("z_score");
    std::vector<ImportanceRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = r + 2;
        if (row.size() != t.header.size())
            fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line) + ": wrong field count");
        ImportanceRecord rec;
        rec.rank = static_cast<int>(io::parse_int(row[c_rank], path, line));
        rec.feature_index = static_cast<int>(io::parse_int(row[c_feat], path, line));
        rec.region_pair = {static_cast<int>(io::parse_int(row[c_ri], path, line)),
                           static_cast<int>(io::parse_int(row[c_rj], path, line))};
        if (!row[c_bi].empty() && !row[c_bj].empty())
            rec.ba_pair = std::minmax(static_cast<int>(io::parse_int(row[c_bi], path, line)),
                                      static_cast<int>(io::parse_int(row[c_bj], path, line)));
        if (!row[c_fi].empty() && !row[c_fj].empty())
            rec.functional_pair = std::pair{parse_functional_label(row[c_fi]), parse_functional_label(row[c_fj])};
        rec.raw_importance = io::parse_double(row[c_raw], path, line);
        rec.z_score = io::parse_double(row[c_z], path, line);
        out.push_back(rec);
    }
    return out;
}

nlohmann::json edges_json(std::span<const Edge> edges) {
    auto arr = nlohmann::json::array();
    for (const auto& e : edges) {
        arr.push_back({{"i", e.pair.i},
                       {"j", e.pair.j},
                       {"z", e.z},
                       {"xi", e.centroid_i[0]},
                       {"yi", e.centroid_i[1]},
                       {"zi", e.centroid_i[2]},
                       {"xj", e.centroid_j[0]},
                       {"yj", e.centroid_j[1]},
                       {"zj", e.centroid_j[2]}});
    }
    return arr;
}

nlohmann::json to_json(const OverlapReport& report) {
    nlohmann::json j;
    auto involvement = nlohmann::json::array();
    for (auto [ba, count] : report.ba_involvement) involvement.push_back({{"ba", ba}, {"count", count}});
    j["ba_involvement"] = std::move(involvement);
    auto common = nlohmann::json::array();
    for (auto [a, b] : report.common_pairs) common.push_back({a, b});
    j["common_pairs"] = std::move(common);
    auto per = nlohmann::json::array();
    for (const auto& set : report.per_ranking) {
        auto pairs = nlohmann::json::array();
        for (auto [a, b] : set) pairs.push_back({a, b});
        per.push_back(std::move(pairs));
    }
    j["per_ranking"] = std::move(per);
    return j;
}

namespace {

std::array<int, 3> base_color(FunctionalLabel label) {
    switch (label) {
        case FunctionalLabel::Motor: return {40, 80, 220};
        case FunctionalLabel::Language: return {220, 40, 40};
        case FunctionalLabel::Other: return {235, 200, 30};
    }
    return {128, 128, 128};
}

}  // namespace

std::string functional_color(FunctionalLabel a, FunctionalLabel b) {
    const auto ca = base_color(a);
    const auto cb = base_color(b);
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", (ca[0] + cb[0]) / 2, (ca[1] + cb[1]) / 2, (ca[2] + cb[2]) / 2);
    return buf;
}

std::string importance_svg(std::span<const ImportanceRecord> records) {
    constexpr double bar_h = 18.0;
    constexpr double left = 170.0;
    constexpr double width = 360.0;
    const double height = 50.0 + bar_h * static_cast<double>(records.size()) + 30.0;
    double zmax = 0.0;
    for (const auto& r : records) zmax = std::max(zmax, std::abs(r.z_score));
    if (zmax == 0.0) zmax = 1.0;

    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"" << height << "\" viewBox=\"0 0 600 "
      << height << "\">\n<rect width=\"600\" height=\"" << height << "\" fill=\"white\"/>\n"
      << "<text x=\"300\" y=\"25\" text-anchor=\"middle\" font-size=\"14\">feature importance (z-score)</text>\n";
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        const double y = 40.0 + bar_h * static_cast<double>(k);
        const double w = std::max(0.0, r.z_score) / zmax * width;
        const std::string color = r.functional_pair
                                      ? functional_color(r.functional_pair->first, r.functional_pair->second)
                                      : std::string("#999999");
        std::string label = "r" + std::to_string(r.region_pair.i) + "-r" + std::to_string(r.region_pair.j);
        if (r.ba_pair) label += " (BA" + std::to_string(r.ba_pair->first) + "-BA" + std::to_string(r.ba_pair->second) + ")";
        s << "<text x=\"" << left - 6 << "\" y=\"" << y + bar_h * 0.7 << "\" text-anchor=\"end\" font-size=\"11\">"
          << label << "</text>\n"
          << "<rect class=\"bar\" x=\"" << left << "\" y=\"" << y + 2 << "\" width=\"" << io::format_double(w, 6)
          << "\" height=\"" << bar_h - 4 << "\" fill=\"" << color << "\"/>\n"
          << "<text x=\"" << io::format_double(left + w + 4, 6) << "\" y=\"" << y + bar_h * 0.7
          << "\" font-size=\"10\">" << io::format_double(r.z_score, 3) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace fcprobe
