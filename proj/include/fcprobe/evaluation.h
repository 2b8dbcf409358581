#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fcprobe {

// Upper-triangle region pair (i <= j) naming one connectivity feature.
struct RegionPair {
    int i = 0;
    int j = 0;
    friend bool operator==(const RegionPair&, const RegionPair&) = default;
    friend auto operator<=>(const RegionPair&, const RegionPair&) = default;
};

struct Dataset {
    Eigen::MatrixXd features;  // N x F
    std::vector<int> labels;   // 0 = control, 1 = case
    std::vector<std::string> subject_ids;
    std::vector<RegionPair> feature_pairs;  // length F

    std::size_t size() const { return labels.size(); }
    std::size_t n_features() const { return static_cast<std::size_t>(features.cols()); }

    // Throws InvalidInput unless every field agrees on N and F.
    void validate() const;

    Dataset subset(std::span<const std::size_t> rows) const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

// Per-class test count: round(fraction * class_size). An exact .5 rounds up for the
// larger class and down for the smaller one. Indices come back sorted.
SplitIndices stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double test_fraction, std::uint64_t seed);

// Stratified k-fold. Each class is shuffled, the classes are concatenated, and position p
// goes to fold p % k, so both per-class and total fold sizes differ by at most one.
std::vector<Fold> kfold_indices(std::span<const int> labels, int k, std::uint64_t seed);

std::vector<Fold> kfold(const Dataset& d, int k, std::uint64_t seed);

// Mann-Whitney AUROC: fraction of (positive, negative) pairs ranked correctly, ties
// counted as one half. O(N log N).
double auroc(std::span<const int> labels, std::span<const double> scores);

inline double auroc(std::span<const int> labels, const Eigen::VectorXd& scores) {
    return auroc(labels, std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())));
}

// Features cache: header `subject_id,label,r{i}_r{j},...`.
void write_features_csv(const std::filesystem::path& path, const Dataset& d);
Dataset read_features_csv(const std::filesystem::path& path);

}  // namespace fcprobe
