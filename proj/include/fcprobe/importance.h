#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fcprobe/evaluation.h"
#include "fcprobe/model.h"
#include "fcprobe/synthgen.h"

namespace fcprobe {

using BaPair = std::pair<int, int>;  // stored with first <= second

struct ImportanceRecord {
    int rank = 0;  // 1-based
    int feature_index = 0;
    RegionPair region_pair;
    double raw_importance = 0.0;
    double z_score = 0.0;
    std::optional<BaPair> ba_pair;
    std::optional<std::pair<FunctionalLabel, FunctionalLabel>> functional_pair;
};

struct BrodmannEntry {
    int ba_id = 0;
    std::array<double, 3> centroid{};
    std::string name;
};

struct BrodmannTable {
    std::vector<BrodmannEntry> entries;

    // Throws InvalidInput on an empty table or duplicate ids.
    void validate() const;
};

// Deterministic stand-in table: 48 areas spread over the synthetic coordinate box.
BrodmannTable synthetic_brodmann_table();

// CSV header: ba_id,x,y,z,name
void write_brodmann_csv(const std::filesystem::path& path, const BrodmannTable& table);
BrodmannTable read_brodmann_csv(const std::filesystem::path& path);

struct PfiOptions {
    int repeats = 5;
    std::uint64_t seed = 0;
    int workers = 1;
};

// Permutation importance: I_j = P_b - mean over repeats of P_a, where P_b is the AUROC on
// the intact set and P_a the AUROC after permuting column j alone. Column j's
// permutations come from a stream seeded by (seed, j).
Eigen::VectorXd pfi(const TrainedModel& model, const Dataset& test, const PfiOptions& options = {});

// (I - mean) / population sd over all features.
Eigen::VectorXd zscores(const Eigen::VectorXd& raw);

// Full ranking by descending z (ties: ascending feature index), truncated to top_k.
std::vector<ImportanceRecord> zscore_rank(const Eigen::VectorXd& raw, std::span<const RegionPair> pairs,
                                          int top_k = 15);

// Nearest BA centroid per region; ties go to the smaller ba_id.
std::vector<int> map_to_brodmann(const Atlas& atlas, const BrodmannTable& table);

// Fills ba_pair and functional_pair from the atlas and region->BA mapping.
void label_records(std::vector<ImportanceRecord>& records, const Atlas& atlas, std::span<const int> region_to_ba);

struct Edge {
    RegionPair pair;
    double z = 0.0;
    std::array<double, 3> centroid_i{};
    std::array<double, 3> centroid_j{};
};

// Every feature with z >= tau, in feature order.
std::vector<Edge> threshold_edges(const Eigen::VectorXd& z, std::span<const RegionPair> pairs, const Atlas& atlas,
                                  double tau = 6.0);

struct OverlapReport {
    std::map<int, int> ba_involvement;  // BA -> number of top-k features touching it, summed over rankings
    std::set<BaPair> common_pairs;      // BA pairs present in every ranking
    std::vector<std::set<BaPair>> per_ranking;
};

// Each inner vector is one model's top-k BA pairs.
OverlapReport cross_granularity_overlap(std::span<const std::vector<BaPair>> rankings);

// importance.csv header: rank,feature_index,region_i,region_j,ba_i,ba_j,function_i,function_j,raw_importance,z_score
void write_importance_csv(const std::filesystem::path& path, std::span<const ImportanceRecord> records);
std::vector<ImportanceRecord> read_importance_csv(const std::filesystem::path& path);

nlohmann::json edges_json(std::span<const Edge> edges);
nlohmann::json to_json(const OverlapReport& report);

// Fill colour of a connection: motor blue, language red, other yellow; mixed pairs blend.
std::string functional_color(FunctionalLabel a, FunctionalLabel b);

// Horizontal bar chart of z-scores, one bar per record.
std::string importance_svg(std::span<const ImportanceRecord> records);

}  // namespace fcprobe
