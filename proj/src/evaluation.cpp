#include "fcprobe/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fcprobe/error.h"
#include "fcprobe/io.h"
#include "fcprobe/rng.h"

namespace fcprobe {

void Dataset::validate() const {
    const auto n = labels.size();
    if (static_cast<std::size_t>(features.rows()) != n || subject_ids.size() != n)
        fail(ErrorKind::InvalidInput, "dataset row counts disagree (features " + std::to_string(features.rows()) +
                                          ", labels " + std::to_string(n) + ", ids " +
                                          std::to_string(subject_ids.size()) + ")");
    if (feature_pairs.size() != static_cast<std::size_t>(features.cols()))
        fail(ErrorKind::InvalidInput, "dataset has " + std::to_string(features.cols()) + " feature columns but " +
                                          std::to_string(feature_pairs.size()) + " region pairs");
    for (int y : labels)
        if (y != 0 && y != 1) fail(ErrorKind::InvalidInput, "labels must be 0 or 1");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    out.subject_ids.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = rows[r];
        if (src >= size()) fail(ErrorKind::InvalidInput, "row index out of range");
        out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(src));
        out.labels.push_back(labels[src]);
        out.subject_ids.push_back(subject_ids[src]);
    }
    out.feature_pairs = feature_pairs;
    return out;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(std::span<const int> labels) {
    std::vector<std::vector<std::size_t>> by_class(2);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) fail(ErrorKind::InvalidInput, "labels must be 0 or 1");
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    return by_class;
}

std::size_t rounded_test_count(std::size_t class_size, std::size_t other_size, double fraction, bool is_class0) {
    const double exact = fraction * static_cast<double>(class_size);
    const double lower = std::floor(exact);
    const double rem = exact - lower;
    if (std::abs(rem - 0.5) > 1e-9) return static_cast<std::size_t>(std::llround(exact));
    const bool larger = class_size > other_size || (class_size == other_size && is_class0);
    return static_cast<std::size_t>(lower) + (larger ? 1 : 0);
}

}  // namespace

SplitIndices stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        fail(ErrorKind::InvalidInput, "test_fraction must lie in (0, 1)");
    auto by_class = indices_by_class(labels);
    SplitIndices out;
    for (std::size_t c = 0; c < 2; ++c) {
        auto& members = by_class[c];
        if (members.size() < 2)
            fail(ErrorKind::InvalidSplit, "class " + std::to_string(c) + " has fewer than 2 subjects");
        const auto n_test = rounded_test_count(members.size(), by_class[1 - c].size(), test_fraction, c == 0);
        if (n_test == 0)
            fail(ErrorKind::InvalidSplit, "class " + std::to_string(c) + " would receive no test subjects");
        if (n_test >= members.size())
            fail(ErrorKind::InvalidSplit, "class " + std::to_string(c) + " would receive no training subjects");
        Rng rng(derive_seed(seed, {c}));
        rng.shuffle(std::span<std::size_t>(members));
        out.test.insert(out.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
        out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double test_fraction, std::uint64_t seed) {
    d.validate();
    const auto idx = stratified_split(d.labels, test_fraction, seed);
    return {d.subset(idx.train), d.subset(idx.test)};
}

std::vector<Fold> kfold_indices(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) fail(ErrorKind::InvalidInput, "k must be at least 2");
    auto by_class = indices_by_class(labels);
    std::vector<std::size_t> order;
    order.reserve(labels.size());
    for (std::size_t c = 0; c < 2; ++c) {
        auto& members = by_class[c];
        if (members.size() < static_cast<std::size_t>(k))
            fail(ErrorKind::InvalidSplit, "class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                                              " members, fewer than k=" + std::to_string(k));
        Rng rng(derive_seed(seed, {c}));
        rng.shuffle(std::span<std::size_t>(members));
        order.insert(order.end(), members.begin(), members.end());
    }
    std::vector<int> fold_of(labels.size());
    for (std::size_t p = 0; p < order.size(); ++p) fold_of[order[p]] = static_cast<int>(p % static_cast<std::size_t>(k));

    std::vector<Fold> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (int f = 0; f < k; ++f) {
            auto& fold = folds[static_cast<std::size_t>(f)];
            (fold_of[i] == f ? fold.val : fold.train).push_back(i);
        }
    }
    return folds;
}

std::vector<Fold> kfold(const Dataset& d, int k, std::uint64_t seed) {
    d.validate();
    return kfold_indices(d.labels, k, seed);
}

double auroc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) fail(ErrorKind::InvalidInput, "labels and scores differ in length");
    double n_pos = 0.0;
    double n_neg = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!std::isfinite(scores[i])) fail(ErrorKind::InvalidInput, "non-finite score");
        if (labels[i] == 1) {
            n_pos += 1.0;
        } else if (labels[i] == 0) {
            n_neg += 1.0;
        } else {
            fail(ErrorKind::InvalidInput, "labels must be 0 or 1");
        }
    }
    if (n_pos == 0.0 || n_neg == 0.0) fail(ErrorKind::Undefined, "AUROC needs both classes present");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sweep tie groups in ascending score order; each positive beats every negative
    // below its group and splits credit with negatives inside it.
    double u = 0.0;
    double neg_below = 0.0;
    for (std::size_t g = 0; g < order.size();) {
        std::size_t end = g;
        double pos_in = 0.0;
        double neg_in = 0.0;
        while (end < order.size() && scores[order[end]] == scores[order[g]]) {
            (labels[order[end]] == 1 ? pos_in : neg_in) += 1.0;
            ++end;
        }
        u += pos_in * neg_below + 0.5 * pos_in * neg_in;
        neg_below += neg_in;
        g = end;
    }
    return u / (n_pos * n_neg);
}

void write_features_csv(const std::filesystem::path& path, const Dataset& d) {
    d.validate();
    std::string out = "subject_id,label";
    for (const auto& p : d.feature_pairs) out += ",r" + std::to_string(p.i) + "_r" + std::to_string(p.j);
    out += '\n';
    for (std::size_t r = 0; r < d.size(); ++r) {
        out += d.subject_ids[r];
        out += ',';
        out += std::to_string(d.labels[r]);
        for (Eigen::Index c = 0; c < d.features.cols(); ++c) {
            out += ',';
            out += io::format_double(d.features(static_cast<Eigen::Index>(r), c));
        }
        out += '\n';
    }
    io::write_text(path, out);
}

Dataset read_features_csv(const std::filesystem::path& path) {
    const auto table = io::read_csv(path);
    if (table.header.size() < 3 || table.header[0] != "subject_id" || table.header[1] != "label")
        fail(ErrorKind::InvalidInput, path.string() + ": expected header subject_id,label,r{i}_r{j},...");
    Dataset d;
    for (std::size_t c = 2; c < table.header.size(); ++c) {
        const auto& name = table.header[c];
        const auto us = name.find("_r");
        if (name.size() < 4 || name[0] != 'r' || us == std::string::npos)
            fail(ErrorKind::InvalidInput, path.string() + ": bad feature column '" + name + "'");
        RegionPair p;
        p.i = static_cast<int>(io::parse_int(std::string_view(name).substr(1, us - 1), path, 1));
        p.j = static_cast<int>(io::parse_int(std::string_view(name).substr(us + 2), path, 1));
        d.feature_pairs.push_back(p);
    }
    const auto n_feat = static_cast<Eigen::Index>(d.feature_pairs.size());
    d.features.resize(static_cast<Eigen::Index>(table.rows.size()), n_feat);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        if (row.size() != table.header.size())
            fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line) + ": expected " +
                                              std::to_string(table.header.size()) + " fields, got " +
                                              std::to_string(row.size()));
        d.subject_ids.push_back(row[0]);
        d.labels.push_back(static_cast<int>(io::parse_int(row[1], path, line)));
        for (Eigen::Index c = 0; c < n_feat; ++c)
            d.features(static_cast<Eigen::Index>(r), c) = io::parse_double(row[static_cast<std::size_t>(c) + 2], path, line);
    }
    d.validate();
    return d;
}

}  // namespace fcprobe
