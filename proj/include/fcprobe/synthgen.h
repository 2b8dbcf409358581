#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcprobe/connectivity.h"

namespace fcprobe {

enum class FunctionalLabel { Motor, Language, Other };

std::string to_string(FunctionalLabel label);
FunctionalLabel parse_functional_label(const std::string& s);

struct Region {
    int id = 0;
    std::string name;
    std::array<double, 3> centroid{};  // mm
    FunctionalLabel functional_label = FunctionalLabel::Other;
    std::optional<int> brodmann_hint;
};

struct Atlas {
    std::string name;
    std::vector<Region> regions;

    int size() const { return static_cast<int>(regions.size()); }
    void validate() const;
};

// Half-widths of the centroid bounding box, mm.
inline constexpr std::array<double, 3> kBrainHalfExtent{90.0, 108.0, 72.0};

// R regions with centroids uniform in the brain-sized box; labels round-robin
// motor, language, other.
Atlas make_atlas(int regions, std::uint64_t seed);

struct PlantedEffect {
    int i = 0;
    int j = 0;
    double delta = 0.0;
};

struct CohortSpec {
    int n_control = 497;
    int n_case = 418;
    int timepoints = 300;
    double noise_scale = 0.1;  // magnitude of the per-subject covariance jitter
    std::uint64_t seed = 0;
};

struct Cohort {
    std::vector<TimeSeriesMatrix> subjects;  // controls first, then cases
    std::vector<int> labels;
    Eigen::MatrixXd control_covariance;
    Eigen::MatrixXd case_covariance;
};

// Random correlation matrix: a random rotation of eigenvalues log-uniform in [0.5, 2],
// rescaled to unit diagonal.
Eigen::MatrixXd random_correlation(int regions, std::uint64_t seed);

// Case covariance = control covariance + symmetric additive effects. Each subject's
// group covariance is jittered by congruence with exp(noise_scale * A / 2) for a random
// symmetric A, then T Gaussian vectors are drawn from it.
Cohort generate_cohort(const Atlas& atlas, std::span<const PlantedEffect> effects, const CohortSpec& spec);

// Atlas CSV header: id,name,x,y,z,functional_label,brodmann_hint
void write_atlas_csv(const std::filesystem::path& path, const Atlas& atlas);
Atlas read_atlas_csv(const std::filesystem::path& path);

// JSON list of {i, j, delta}.
void write_effects_json(const std::filesystem::path& path, std::span<const PlantedEffect> effects);
std::vector<PlantedEffect> read_effects_json(const std::filesystem::path& path);

// Writes subjects/<id>.csv plus manifest.csv under `dir`; returns the manifest path.
std::filesystem::path write_cohort(const std::filesystem::path& dir, const Cohort& cohort);

}  // namespace fcprobe
