#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fcprobe/evaluation.h"
#include "fcprobe/model.h"
#include "fcprobe/rng.h"

namespace fcprobe {

struct SearchSpace {
    std::vector<int> layers_choices{1, 2, 3, 4, 5, 6};
    std::vector<int> neurons_choices{8, 16, 32, 64, 128, 256, 512};
    std::array<double, 2> dropout_range{0.0, 0.5};
    std::array<double, 2> lr_log10_range{-4.0, -2.0};

    // Throws InvalidInput unless choice sets are non-empty, positive and strictly
    // increasing, and ranges are ordered.
    void validate() const;
};

// Layers and neurons uniform over their choices, dropout uniform, learning rate
// log-uniform. Remaining fields are copied from `base`.
ModelConfig sample_config(const SearchSpace& space, Rng& rng, const ModelConfig& base = {});

struct TrialRecord {
    int trial_id = 0;
    ModelConfig config;
    std::vector<double> fold_aurocs;
    double mean_auroc = 0.0;
    std::vector<int> fold_epochs;  // epochs run per fold; 0 when the fold diverged
    std::string flags;             // e.g. "diverged_fold1"; empty when clean
};

struct SearchOptions {
    int n_trials = 50;
    int k = 3;
    std::uint64_t seed = 0;
    ModelConfig base;  // batch size, epochs and patience for every trial
    // Share of each fold's training rows held out for early stopping, so the fold's
    // validation rows are only ever used for scoring.
    double early_stop_fraction = 0.2;
    int workers = 1;
};

// n_trials sampled configs, each trained on every fold's training rows and scored by
// AUROC on the fold's validation rows. A fold whose training diverges scores 0.5 and
// is flagged. Records come back ordered by trial_id.
std::vector<TrialRecord> run_search(const Dataset& train, const SearchSpace& space, const SearchOptions& options);

// Trains one config on `fit_rows` with a stratified early-stopping split carved out of it.
TrainedModel train_with_holdout(const Dataset& fit_rows, const ModelConfig& config, double early_stop_fraction,
                                std::uint64_t split_seed);

struct QuantileSets {
    std::vector<TrialRecord> top;
    std::vector<TrialRecord> bottom;
};

// ceil(q * n) best and worst trials. Trials are ordered by (mean_auroc desc, trial_id asc);
// top is the head of that order and bottom the tail, so under ties top takes the lowest
// ids and bottom the highest.
QuantileSets select_quantiles(std::span<const TrialRecord> trials, double q = 0.2);

struct GridAxis {
    double start = 0.0;
    double step = 1.0;
    int count = 1;

    double at(int k) const { return start + step * static_cast<double>(k); }
};

struct KdeGrid {
    GridAxis layers;
    GridAxis log2_neurons;
};

struct Bandwidth {
    double layers = 0.0;
    double log2_neurons = 0.0;
};

struct KdePoint {
    double layers = 0.0;
    double log2_neurons = 0.0;
};

// Scott's rule per axis, h = sample sd * n^(-1/6), floored at a quarter grid cell.
Bandwidth scott_bandwidth(std::span<const KdePoint> points, const KdeGrid& grid);

// Product-Gaussian density on the grid; rows index layers, columns log2 neurons.
Eigen::MatrixXd kde2d(std::span<const KdePoint> points, const KdeGrid& grid,
                      std::optional<Bandwidth> bandwidth = std::nullopt);

// Trapezoidal integral of a density over the grid.
double grid_integral(const Eigen::MatrixXd& density, const KdeGrid& grid);

struct Peak {
    int layers = 0;
    int neurons = 0;
    double grid_layers = 0.0;
    double grid_log2_neurons = 0.0;
};

// Grid argmax (ties: smallest layers, then smallest neurons), snapped to the nearest
// available choices of `space`.
Peak kde_peak(const Eigen::MatrixXd& density, const KdeGrid& grid, const SearchSpace& space);

struct Adequacy {
    bool adequate = false;
    int margin_layers = 0;   // choice steps to the nearer boundary
    int margin_neurons = 0;
};

Adequacy range_adequacy(const Peak& peak, const SearchSpace& space);

struct KdeResult {
    KdeGrid grid;
    Eigen::MatrixXd density_top;
    Eigen::MatrixXd density_bottom;
    Peak peak_top;
    Peak peak_bottom;
    Bandwidth bandwidth_top;
    Bandwidth bandwidth_bottom;
    Adequacy adequacy_top;
    Adequacy adequacy_bottom;
    std::vector<int> top_trial_ids;
    std::vector<int> bottom_trial_ids;
};

// Quantile selection plus KDE surfaces for both sets on a shared grid of step
// `grid_step` that pads the search space and the data by four bandwidths.
KdeResult analyze_trials(std::span<const TrialRecord> trials, const SearchSpace& space, double q = 0.2,
                         double grid_step = 0.05);

KdePoint to_kde_point(const ModelConfig& config);

void write_trials_csv(const std::filesystem::path& path, std::span<const TrialRecord> trials, int k);
std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path, const ModelConfig& base = {});

nlohmann::json to_json(const KdeResult& result);
std::string kde_svg(const KdeResult& result);

}  // namespace fcprobe
