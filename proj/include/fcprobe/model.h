#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fcprobe/evaluation.h"
#include "fcprobe/rng.h"

namespace fcprobe {

struct ModelConfig {
    int n_hidden_layers = 2;
    int neurons_per_layer = 32;
    double dropout_rate = 0.0;
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 10;
    std::uint64_t seed = 0;

    // Throws InvalidInput naming the first violated bound.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Dense layer mapping fan_in -> fan_out: out = in * weights + bias.
struct DenseLayer {
    Eigen::MatrixXd weights;  // fan_in x fan_out
    Eigen::RowVectorXd bias;  // fan_out
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_auroc = 0.0;
};

// DenseFFwd classifier: ReLU hidden layers of uniform width and a sigmoid output unit.
// Inputs pass through a fixed per-feature standardization (input_shift, input_scale)
// that train() fits on its training rows; it is the identity until then.
struct TrainedModel {
    ModelConfig config;
    int input_dim = 0;
    Eigen::RowVectorXd input_shift;
    Eigen::RowVectorXd input_scale;
    std::vector<DenseLayer> layers;  // n_hidden_layers + 1
    std::vector<EpochRecord> history;
};

// Glorot-uniform weights and zero biases, deterministic under config.seed.
TrainedModel init_model(const ModelConfig& config, int input_dim);

// Output probabilities for each row of X. With train_mode, inverted dropout is applied
// to hidden activations using masks drawn from `rng`.
Eigen::VectorXd forward(const TrainedModel& model, const Eigen::MatrixXd& X, bool train_mode, Rng& rng);

Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& X);

// Inference split at the first layer: first_layer_preactivation(X) = standardize(X) * W0 + b0,
// and predict_from_first_layer() runs the remaining layers on it. Together they equal
// predict_proba(); permutation importance uses them for rank-one column updates.
Eigen::MatrixXd first_layer_preactivation(const TrainedModel& model, const Eigen::MatrixXd& X);
Eigen::VectorXd predict_from_first_layer(const TrainedModel& model, Eigen::MatrixXd z0);

struct LossAndGradients {
    double loss = 0.0;
    std::vector<DenseLayer> gradients;  // same shapes as model.layers
};

// Mean binary cross-entropy (probabilities clamped to [1e-12, 1 - 1e-12]) and its
// gradients by backpropagation, evaluated without dropout.
LossAndGradients loss_and_gradients(const TrainedModel& model, const Eigen::MatrixXd& X, std::span<const int> y);

// Adam on shuffled mini-batches with early stopping on validation AUROC. Training stops
// once more than `patience` epochs have passed without a strict improvement; the returned
// model carries the weights of the best epoch and the full history.
TrainedModel train(TrainedModel model, const Dataset& train_set, const Dataset& val_set);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace fcprobe
