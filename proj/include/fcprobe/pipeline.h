#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcprobe/connectivity.h"
#include "fcprobe/importance.h"
#include "fcprobe/model.h"
#include "fcprobe/search.h"
#include "fcprobe/synthgen.h"

namespace fcprobe {

// Every knob of the pipeline. Loaded from a JSON file whose single `pipeline` object
// holds these fields flat; unset fields keep the defaults below.
struct RunConfig {
    std::filesystem::path out_dir = "run";
    // Empty paths resolve to the default location under out_dir.
    std::filesystem::path manifest;
    std::filesystem::path atlas;
    std::filesystem::path brodmann;
    std::filesystem::path features;
    std::vector<std::filesystem::path> compare_inputs;

    std::uint64_t seed = 0;
    int workers = 0;  // 0 = all available cores

    // generate
    int regions = 64;
    int n_control = 497;
    int n_case = 418;
    int timepoints = 300;
    double noise_scale = 0.1;
    int n_effects = 3;
    double effect_delta = 0.12;
    std::vector<PlantedEffect> effects;  // explicit effects; overrides n_effects/effect_delta
    bool anchor_effects = true;          // pin planted regions onto Brodmann centroids

    // features
    double shrinkage = 0.05;
    std::string mean_mode = "geometric";
    double mean_tol = 1e-6;
    int mean_max_iter = 50;
    double test_fraction = 0.2;

    // search
    int n_trials = 50;
    int k = 3;
    double q = 0.2;
    std::vector<int> layers_choices{1, 2, 3, 4, 5, 6};
    std::vector<int> neurons_choices{8, 16, 32, 64, 128, 256, 512};
    std::array<double, 2> dropout_range{0.0, 0.5};
    std::array<double, 2> lr_log10_range{-4.0, -2.0};
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 10;
    double early_stop_fraction = 0.2;
    double kde_grid_step = 0.05;

    // pfi
    int repeats = 5;
    double tau = 6.0;
    int top_k = 15;

    // Throws InvalidInput naming the offending field.
    void validate() const;

    std::filesystem::path manifest_path() const;
    std::filesystem::path atlas_path() const;
    std::filesystem::path brodmann_path() const;
    std::filesystem::path features_path() const;
    std::filesystem::path out(const std::string& name) const { return out_dir / name; }

    SearchSpace search_space() const;
    ModelConfig base_model_config() const;
    int worker_count() const;
};

nlohmann::json to_json(const RunConfig& config);

// Applies the fields present in `pipeline` onto `config`; `source` names the origin in errors.
void apply_json(RunConfig& config, const nlohmann::json& pipeline, const std::string& source);

RunConfig load_run_config(const std::filesystem::path& path);

// Sub-seeds derived from the master seed, one per pipeline stage.
enum class Stage : std::uint64_t { Atlas = 1, Cohort, Split, Search, Train, Pfi, EffectPairs, Anchors };
std::uint64_t stage_seed(const RunConfig& config, Stage stage);

struct GenerateOutcome {
    Atlas atlas;
    std::vector<PlantedEffect> effects;
    std::filesystem::path manifest;
};

struct FeaturesOutcome {
    Dataset dataset;
    SplitIndices split;
    ReferenceMean reference;
};

struct SearchOutcome {
    std::vector<TrialRecord> trials;
    KdeResult kde;
};

struct TrainOutcome {
    TrialRecord best_trial;
    TrainedModel model;
    double test_auroc = 0.0;
};

struct PfiOutcome {
    Eigen::VectorXd raw;
    Eigen::VectorXd z;
    std::vector<ImportanceRecord> records;
    std::vector<Edge> edges;
};

GenerateOutcome cmd_generate(const RunConfig& config);
FeaturesOutcome cmd_features(const RunConfig& config);
SearchOutcome cmd_search(const RunConfig& config);
TrainOutcome cmd_train(const RunConfig& config);
PfiOutcome cmd_pfi(const RunConfig& config);
OverlapReport cmd_compare(const RunConfig& config);

// Planted effects for `generate`: explicit effects if given, otherwise n_effects random
// region pairs over disjoint regions, each with effect_delta.
std::vector<PlantedEffect> planned_effects(const RunConfig& config);

// Train/test partition as recorded by `features` in split.csv.
SplitIndices read_split_csv(const std::filesystem::path& path, const Dataset& d);

}  // namespace fcprobe
