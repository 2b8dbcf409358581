#include "fcprobe/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fcprobe/error.h"
#include "fcprobe/io.h"

namespace fcprobe {

void ModelConfig::validate() const {
    if (n_hidden_layers < 1) fail(ErrorKind::InvalidInput, "n_hidden_layers must be >= 1");
    if (neurons_per_layer < 1) fail(ErrorKind::InvalidInput, "neurons_per_layer must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorKind::InvalidInput, "dropout_rate must lie in [0, 1)");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        fail(ErrorKind::InvalidInput, "learning_rate must be > 0");
    if (batch_size < 1) fail(ErrorKind::InvalidInput, "batch_size must be >= 1");
    if (max_epochs < 1) fail(ErrorKind::InvalidInput, "max_epochs must be >= 1");
    if (patience < 1) fail(ErrorKind::InvalidInput, "patience must be >= 1");
}

TrainedModel init_model(const ModelConfig& config, int input_dim) {
    config.validate();
    if (input_dim < 1) fail(ErrorKind::InvalidInput, "input_dim must be >= 1");
    TrainedModel m;
    m.config = config;
    m.input_dim = input_dim;
    m.input_shift = Eigen::RowVectorXd::Zero(input_dim);
    m.input_scale = Eigen::RowVectorXd::Ones(input_dim);

    Rng rng(derive_seed(config.seed, {0}));
    int fan_in = input_dim;
    for (int l = 0; l <= config.n_hidden_layers; ++l) {
        const int fan_out = l == config.n_hidden_layers ? 1 : config.neurons_per_layer;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer;
        layer.weights.resize(fan_in, fan_out);
        // Filled row-major so the draw order matches the serialized layout.
        for (int r = 0; r < fan_in; ++r)
            for (int c = 0; c < fan_out; ++c) layer.weights(r, c) = rng.uniform(-bound, bound);
        layer.bias = Eigen::RowVectorXd::Zero(fan_out);
        m.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    return m;
}

namespace {

constexpr double kProbClamp = 1e-12;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_input(const TrainedModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.input_dim)
        fail(ErrorKind::InvalidInput, "feature dimension " + std::to_string(X.cols()) + " does not match model input " +
                                          std::to_string(model.input_dim));
}

// Activations of one pass. masks are empty when dropout is off.
struct Pass {
    std::vector<Eigen::MatrixXd> activations;  // [0] = standardized input, [l+1] = output of layer l
    std::vector<Eigen::MatrixXd> masks;        // per hidden layer, already scaled by 1/(1-p)
    Eigen::VectorXd probabilities;
};

Pass run_forward(const TrainedModel& model, const Eigen::MatrixXd& X, Rng* dropout_rng) {
    check_input(model, X);
    const auto& cfg = model.config;
    const bool dropout = dropout_rng != nullptr && cfg.dropout_rate > 0.0;
    const double keep_scale = 1.0 / (1.0 - cfg.dropout_rate);

    Pass pass;
    pass.activations.reserve(model.layers.size() + 1);
    pass.activations.push_back((X.rowwise() - model.input_shift).array().rowwise() / model.input_scale.array());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        Eigen::MatrixXd z = pass.activations.back() * layer.weights;
        z.rowwise() += layer.bias;
        if (l + 1 == model.layers.size()) {
            pass.probabilities = z.col(0).unaryExpr([](double v) { return sigmoid(v); });
            pass.activations.push_back(std::move(z));
            break;
        }
        z = z.cwiseMax(0.0);
        if (dropout) {
            Eigen::MatrixXd mask(z.rows(), z.cols());
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
                for (Eigen::Index r = 0; r < mask.rows(); ++r)
                    mask(r, c) = dropout_rng->uniform() < cfg.dropout_rate ? 0.0 : keep_scale;
            z.array() *= mask.array();
            pass.masks.push_back(std::move(mask));
        }
        pass.activations.push_back(std::move(z));
    }
    return pass;
}

double bce(const Eigen::VectorXd& p, std::span<const int> y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p(i), kProbClamp, 1.0 - kProbClamp);
        total -= y[static_cast<std::size_t>(i)] == 1 ? std::log(q) : std::log1p(-q);
    }
    return total / static_cast<double>(p.size());
}

LossAndGradients backprop(const TrainedModel& model, const Eigen::MatrixXd& X, std::span<const int> y,
                          Rng* dropout_rng) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) fail(ErrorKind::InvalidInput, "X and y differ in length");
    if (y.empty()) fail(ErrorKind::InvalidInput, "empty batch");
    const Pass pass = run_forward(model, X, dropout_rng);
    const bool dropout = !pass.masks.empty();

    LossAndGradients out;
    out.loss = bce(pass.probabilities, y);
    out.gradients.resize(model.layers.size());

    Eigen::MatrixXd delta(X.rows(), 1);
    const double inv_n = 1.0 / static_cast<double>(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        delta(i, 0) = (pass.probabilities(i) - static_cast<double>(y[static_cast<std::size_t>(i)])) * inv_n;

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const auto& input = pass.activations[l];
        out.gradients[l].weights = input.transpose() * delta;
        out.gradients[l].bias = delta.colwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd upstream = delta * model.layers[l].weights.transpose();
        // activations[l] is post-ReLU (and post-dropout); zero exactly where the unit was off or dropped.
        const auto& act = pass.activations[l];
        upstream.array() *= (act.array() > 0.0).cast<double>();
        if (dropout) upstream.array() *= pass.masks[l - 1].array();
        delta = std::move(upstream);
    }
    return out;
}

struct AdamState {
    std::vector<DenseLayer> m;
    std::vector<DenseLayer> v;
    long long step = 0;
};

AdamState make_adam(const TrainedModel& model) {
    AdamState s;
    for (const auto& layer : model.layers) {
        DenseLayer z{Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                     Eigen::RowVectorXd::Zero(layer.bias.size())};
        s.m.push_back(z);
        s.v.push_back(z);
    }
    return s;
}

void adam_update(TrainedModel& model, AdamState& s, const std::vector<DenseLayer>& grads) {
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    ++s.step;
    const double lr = model.config.learning_rate;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
    auto apply = [&](auto& param, auto& m, auto& v, const auto& g) {
        m.array() = beta1 * m.array() + (1.0 - beta1) * g.array();
        v.array() = beta2 * v.array() + (1.0 - beta2) * g.array().square();
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        apply(model.layers[l].weights, s.m[l].weights, s.v[l].weights, grads[l].weights);
        apply(model.layers[l].bias, s.m[l].bias, s.v[l].bias, grads[l].bias);
    }
}

void fit_standardization(TrainedModel& model, const Eigen::MatrixXd& X) {
    const double n = static_cast<double>(X.rows());
    model.input_shift = X.colwise().mean();
    Eigen::RowVectorXd var = (X.rowwise() - model.input_shift).array().square().colwise().sum() / n;
    model.input_scale = var.array().sqrt();
    for (Eigen::Index c = 0; c < model.input_scale.size(); ++c)
        if (!(model.input_scale(c) > 1e-12)) model.input_scale(c) = 1.0;
}

}  // namespace

Eigen::VectorXd forward(const TrainedModel& model, const Eigen::MatrixXd& X, bool train_mode, Rng& rng) {
    return run_forward(model, X, train_mode ? &rng : nullptr).probabilities;
}

Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& X) {
    return predict_from_first_layer(model, first_layer_preactivation(model, X));
}

Eigen::MatrixXd first_layer_preactivation(const TrainedModel& model, const Eigen::MatrixXd& X) {
    check_input(model, X);
    const Eigen::MatrixXd input = (X.rowwise() - model.input_shift).array().rowwise() / model.input_scale.array();
    Eigen::MatrixXd z = input * model.layers.front().weights;
    z.rowwise() += model.layers.front().bias;
    return z;
}

Eigen::VectorXd predict_from_first_layer(const TrainedModel& model, Eigen::MatrixXd z) {
    for (std::size_t l = 1; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        Eigen::MatrixXd next = z.cwiseMax(0.0) * layer.weights;
        next.rowwise() += layer.bias;
        z = std::move(next);
    }
    return z.col(0).unaryExpr([](double v) { return sigmoid(v); });
}

LossAndGradients loss_and_gradients(const TrainedModel& model, const Eigen::MatrixXd& X, std::span<const int> y) {
    for (int v : y)
        if (v != 0 && v != 1) fail(ErrorKind::InvalidInput, "labels must be 0 or 1");
    return backprop(model, X, y, nullptr);
}

TrainedModel train(TrainedModel model, const Dataset& train_set, const Dataset& val_set) {
    model.config.validate();
    train_set.validate();
    val_set.validate();
    if (train_set.n_features() != static_cast<std::size_t>(model.input_dim) ||
        val_set.n_features() != static_cast<std::size_t>(model.input_dim))
        fail(ErrorKind::InvalidInput, "feature dimension does not match model input");
    if (train_set.size() == 0) fail(ErrorKind::InvalidInput, "empty training set");

    fit_standardization(model, train_set.features);
    model.history.clear();

    const auto& cfg = model.config;
    Rng rng(derive_seed(cfg.seed, {1}));
    AdamState adam = make_adam(model);

    const std::size_t n = train_set.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    Eigen::MatrixXd xb;
    std::vector<int> yb;
    std::vector<DenseLayer> best_layers = model.layers;
    double best_auroc = -1.0;
    int best_epoch = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            xb.resize(static_cast<Eigen::Index>(end - start), train_set.features.cols());
            yb.resize(end - start);
            for (std::size_t r = start; r < end; ++r) {
                xb.row(static_cast<Eigen::Index>(r - start)) = train_set.features.row(static_cast<Eigen::Index>(order[r]));
                yb[r - start] = train_set.labels[order[r]];
            }
            auto lg = backprop(model, xb, yb, &rng);
            if (!std::isfinite(lg.loss))
                throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch), epoch);
            loss_sum += lg.loss * static_cast<double>(end - start);
            adam_update(model, adam, lg.gradients);
        }
        const Eigen::VectorXd val_scores = predict_proba(model, val_set.features);
        if (!val_scores.allFinite())
            throw TrainingDiverged("non-finite validation scores at epoch " + std::to_string(epoch), epoch);
        const double val = auroc(val_set.labels, val_scores);
        model.history.push_back({epoch, loss_sum / static_cast<double>(n), val});
        if (val > best_auroc) {
            best_auroc = val;
            best_epoch = epoch;
            best_layers = model.layers;
        } else if (epoch - best_epoch > cfg.patience) {
            break;
        }
    }
    model.layers = std::move(best_layers);
    return model;
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"n_hidden_layers", c.n_hidden_layers}, {"neurons_per_layer", c.neurons_per_layer},
            {"dropout_rate", c.dropout_rate},       {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},           {"max_epochs", c.max_epochs},
            {"patience", c.patience},               {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.n_hidden_layers = j.at("n_hidden_layers").get<int>();
    c.neurons_per_layer = j.at("neurons_per_layer").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

namespace {

nlohmann::json row_major(const Eigen::MatrixXd& m) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        arr.push_back(std::move(row));
    }
    return arr;
}

Eigen::RowVectorXd row_vector(const nlohmann::json& j) {
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

std::vector<double> to_vector(const Eigen::RowVectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json to_json(const TrainedModel& model) {
    nlohmann::json j;
    j["config"] = to_json(model.config);
    j["input_dim"] = model.input_dim;
    j["input_shift"] = to_vector(model.input_shift);
    j["input_scale"] = to_vector(model.input_scale);
    auto layers = nlohmann::json::array();
    for (const auto& layer : model.layers)
        layers.push_back({{"weights", row_major(layer.weights)}, {"bias", to_vector(layer.bias)}});
    j["layers"] = std::move(layers);
    auto history = nlohmann::json::array();
    for (const auto& h : model.history)
        history.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_auroc", h.val_auroc}});
    j["history"] = std::move(history);
    return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
    TrainedModel m;
    m.config = model_config_from_json(j.at("config"));
    m.input_dim = j.at("input_dim").get<int>();
    m.input_shift = row_vector(j.at("input_shift"));
    m.input_scale = row_vector(j.at("input_scale"));
    int fan_in = m.input_dim;
    for (const auto& jl : j.at("layers")) {
        const auto& w = jl.at("weights");
        DenseLayer layer;
        const auto rows = static_cast<Eigen::Index>(w.size());
        const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(w[0].size());
        if (rows != fan_in) fail(ErrorKind::InvalidInput, "model layer shapes do not chain");
        layer.weights.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (static_cast<Eigen::Index>(w[static_cast<std::size_t>(r)].size()) != cols)
                fail(ErrorKind::InvalidInput, "ragged weight matrix");
            for (Eigen::Index c = 0; c < cols; ++c)
                layer.weights(r, c) = w[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
        layer.bias = row_vector(jl.at("bias"));
        if (layer.bias.size() != cols) fail(ErrorKind::InvalidInput, "bias length does not match layer width");
        fan_in = static_cast<int>(cols);
        m.layers.push_back(std::move(layer));
    }
    if (m.layers.size() != static_cast<std::size_t>(m.config.n_hidden_layers + 1) || fan_in != 1)
        fail(ErrorKind::InvalidInput, "model layers do not match config");
    if (m.input_shift.size() != m.input_dim || m.input_scale.size() != m.input_dim)
        fail(ErrorKind::InvalidInput, "standardization vectors do not match input_dim");
    for (const auto& h : j.at("history"))
        m.history.push_back({h.at("epoch").get<int>(), h.at("train_loss").get<double>(), h.at("val_auroc").get<double>()});
    return m;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
    io::write_text(path, to_json(model).dump(1) + "\n");
}

TrainedModel load_model(const std::filesystem::path& path) {
    try {
        return model_from_json(nlohmann::json::parse(io::read_text(path)));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
    }
}

}  // namespace fcprobe
