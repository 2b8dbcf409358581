#include "fcprobe/search.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fcprobe/error.h"
#include "fcprobe/io.h"
#include "fcprobe/parallel.h"

namespace fcprobe {

namespace {

void require_increasing(const std::vector<int>& v, const char* name) {
    if (v.empty()) fail(ErrorKind::InvalidInput, std::string(name) + " must not be empty");
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k] < 1) fail(ErrorKind::InvalidInput, std::string(name) + " entries must be >= 1");
        if (k > 0 && v[k] <= v[k - 1]) fail(ErrorKind::InvalidInput, std::string(name) + " must be strictly increasing");
    }
}

template <typename T>
T pick(const std::vector<T>& choices, Rng& rng) {
    return choices[static_cast<std::size_t>(rng.below(choices.size()))];
}

}  // namespace

void SearchSpace::validate() const {
    require_increasing(layers_choices, "layers_choices");
    require_increasing(neurons_choices, "neurons_choices");
    if (!(dropout_range[0] >= 0.0 && dropout_range[0] <= dropout_range[1] && dropout_range[1] < 1.0))
        fail(ErrorKind::InvalidInput, "dropout_range must satisfy 0 <= lo <= hi < 1");
    if (!(lr_log10_range[0] <= lr_log10_range[1]) || !std::isfinite(lr_log10_range[0]) ||
        !std::isfinite(lr_log10_range[1]))
        fail(ErrorKind::InvalidInput, "lr_log10_range must be ordered");
}

ModelConfig sample_config(const SearchSpace& space, Rng& rng, const ModelConfig& base) {
    ModelConfig c = base;
    c.n_hidden_layers = pick(space.layers_choices, rng);
    c.neurons_per_layer = pick(space.neurons_choices, rng);
    c.dropout_rate = rng.uniform(space.dropout_range[0], space.dropout_range[1]);
    c.learning_rate = std::pow(10.0, rng.uniform(space.lr_log10_range[0], space.lr_log10_range[1]));
    return c;
}

TrainedModel train_with_holdout(const Dataset& fit_rows, const ModelConfig& config, double early_stop_fraction,
                                std::uint64_t split_seed) {
    const auto split = stratified_split(fit_rows.labels, early_stop_fraction, split_seed);
    const Dataset inner_train = fit_rows.subset(split.train);
    const Dataset early_stop = fit_rows.subset(split.test);
    return train(init_model(config, static_cast<int>(fit_rows.n_features())), inner_train, early_stop);
}

std::vector<TrialRecord> run_search(const Dataset& train_set, const SearchSpace& space, const SearchOptions& options) {
    space.validate();
    train_set.validate();
    if (options.n_trials < 1) fail(ErrorKind::InvalidInput, "n_trials must be >= 1");
    const auto folds = kfold(train_set, options.k, derive_seed(options.seed, {0xf01d}));

    std::vector<TrialRecord> trials(static_cast<std::size_t>(options.n_trials));
    for (int t = 0; t < options.n_trials; ++t) {
        auto& rec = trials[static_cast<std::size_t>(t)];
        rec.trial_id = t;
        Rng rng(derive_seed(options.seed, {0x5a3e, static_cast<std::uint64_t>(t)}));
        rec.config = sample_config(space, rng, options.base);
        rec.config.seed = derive_seed(options.seed, {0x7e1a1, static_cast<std::uint64_t>(t)});
        rec.fold_aurocs.assign(static_cast<std::size_t>(options.k), 0.5);
        rec.fold_epochs.assign(static_cast<std::size_t>(options.k), 0);
    }

    // One job per (trial, fold); each writes only its own slot.
    const auto k = static_cast<std::size_t>(options.k);
    std::vector<char> diverged(trials.size() * k, 0);
    parallel_for(trials.size() * k, options.workers, [&](std::size_t job) {
        const std::size_t t = job / k;
        const std::size_t f = job % k;
        auto& rec = trials[t];
        ModelConfig cfg = rec.config;
        cfg.seed = derive_seed(rec.config.seed, {f});
        const Dataset fit_rows = train_set.subset(folds[f].train);
        const Dataset val_rows = train_set.subset(folds[f].val);
        try {
            const auto model =
                train_with_holdout(fit_rows, cfg, options.early_stop_fraction, derive_seed(cfg.seed, {0xe5}));
            const Eigen::VectorXd scores = predict_proba(model, val_rows.features);
            rec.fold_aurocs[f] = auroc(val_rows.labels, scores);
            rec.fold_epochs[f] = static_cast<int>(model.history.size());
        } catch (const TrainingDiverged&) {
            rec.fold_aurocs[f] = 0.5;
            diverged[job] = 1;
        }
    });

    for (std::size_t t = 0; t < trials.size(); ++t) {
        auto& rec = trials[t];
        rec.mean_auroc = std::accumulate(rec.fold_aurocs.begin(), rec.fold_aurocs.end(), 0.0) /
                         static_cast<double>(rec.fold_aurocs.size());
        for (std::size_t f = 0; f < k; ++f) {
            if (!diverged[t * k + f]) continue;
            if (!rec.flags.empty()) rec.flags += ';';
            rec.flags += "diverged_fold" + std::to_string(f);
        }
    }
    return trials;
}

QuantileSets select_quantiles(std::span<const TrialRecord> trials, double q) {
    if (!(q > 0.0 && q <= 0.5)) fail(ErrorKind::InvalidInput, "q must lie in (0, 0.5]");
    const std::size_t n = trials.size();
    const auto need = static_cast<std::size_t>(std::ceil(1.0 / q - 1e-12));
    if (n < need) fail(ErrorKind::InvalidInput, "need at least " + std::to_string(need) + " trials for q = " + io::format_double(q) + ", got " + std::to_string(n));
    const auto m = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    if (2 * m > n)
        fail(ErrorKind::InvalidInput, "top and bottom sets of size " + std::to_string(m) + " cannot be disjoint among " +
                                          std::to_string(n) + " trials");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (trials[a].mean_auroc != trials[b].mean_auroc) return trials[a].mean_auroc > trials[b].mean_auroc;
        return trials[a].trial_id < trials[b].trial_id;
    });
    QuantileSets out;
    for (std::size_t r = 0; r < m; ++r) out.top.push_back(trials[order[r]]);
    for (std::size_t r = 0; r < m; ++r) out.bottom.push_back(trials[order[n - 1 - r]]);
    return out;
}

KdePoint to_kde_point(const ModelConfig& config) {
    return {static_cast<double>(config.n_hidden_layers), std::log2(static_cast<double>(config.neurons_per_layer))};
}

Bandwidth scott_bandwidth(std::span<const KdePoint> points, const KdeGrid& grid) {
    if (points.size() < 2) fail(ErrorKind::InvalidInput, "KDE needs at least 2 points");
    const double n = static_cast<double>(points.size());
    auto sd = [&](auto get) {
        double mean = 0.0;
        for (const auto& p : points) mean += get(p);
        mean /= n;
        double ss = 0.0;
        for (const auto& p : points) ss += (get(p) - mean) * (get(p) - mean);
        return std::sqrt(ss / (n - 1.0));
    };
    const double factor = std::pow(n, -1.0 / 6.0);
    Bandwidth h;
    h.layers = std::max(sd([](const KdePoint& p) { return p.layers; }) * factor, 0.25 * grid.layers.step);
    h.log2_neurons =
        std::max(sd([](const KdePoint& p) { return p.log2_neurons; }) * factor, 0.25 * grid.log2_neurons.step);
    return h;
}

namespace {

// counts x n matrix of normalized 1-D Gaussian kernel values.
Eigen::MatrixXd kernel_matrix(const GridAxis& axis, std::span<const KdePoint> points, double h,
                              double KdePoint::*coord) {
    Eigen::MatrixXd k(axis.count, static_cast<Eigen::Index>(points.size()));
    const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * h);
    for (int g = 0; g < axis.count; ++g) {
        const double x = axis.at(g);
        for (std::size_t p = 0; p < points.size(); ++p) {
            const double u = (x - points[p].*coord) / h;
            k(g, static_cast<Eigen::Index>(p)) = norm * std::exp(-0.5 * u * u);
        }
    }
    return k;
}

}  // namespace

Eigen::MatrixXd kde2d(std::span<const KdePoint> points, const KdeGrid& grid, std::optional<Bandwidth> bandwidth) {
    if (points.size() < 2) fail(ErrorKind::InvalidInput, "KDE needs at least 2 points");
    if (grid.layers.count < 1 || grid.log2_neurons.count < 1 || !(grid.layers.step > 0.0) ||
        !(grid.log2_neurons.step > 0.0))
        fail(ErrorKind::InvalidInput, "KDE grid must be non-empty with positive steps");
    const Bandwidth h = bandwidth ? *bandwidth : scott_bandwidth(points, grid);
    if (!(h.layers > 0.0 && h.log2_neurons > 0.0)) fail(ErrorKind::InvalidInput, "bandwidths must be positive");
    const Eigen::MatrixXd kx = kernel_matrix(grid.layers, points, h.layers, &KdePoint::layers);
    const Eigen::MatrixXd ky = kernel_matrix(grid.log2_neurons, points, h.log2_neurons, &KdePoint::log2_neurons);
    return (kx * ky.transpose()) / static_cast<double>(points.size());
}

double grid_integral(const Eigen::MatrixXd& density, const KdeGrid& grid) {
    auto weight = [](int k, int count) { return (k == 0 || k == count - 1) ? 0.5 : 1.0; };
    double total = 0.0;
    for (int i = 0; i < grid.layers.count; ++i)
        for (int j = 0; j < grid.log2_neurons.count; ++j)
            total += weight(i, grid.layers.count) * weight(j, grid.log2_neurons.count) * density(i, j);
    return total * grid.layers.step * grid.log2_neurons.step;
}

namespace {

int nearest_choice(const std::vector<int>& choices, double value) {
    int best = choices.front();
    double best_dist = std::abs(value - best);
    for (int c : choices) {
        const double d = std::abs(value - c);
        if (d < best_dist) {
            best = c;
            best_dist = d;
        }
    }
    return best;
}

int choice_index(const std::vector<int>& choices, int value) {
    const auto it = std::find(choices.begin(), choices.end(), value);
    if (it != choices.end()) return static_cast<int>(it - choices.begin());
    const int snapped = nearest_choice(choices, value);
    return static_cast<int>(std::find(choices.begin(), choices.end(), snapped) - choices.begin());
}

}  // namespace

Peak kde_peak(const Eigen::MatrixXd& density, const KdeGrid& grid, const SearchSpace& space) {
    if (density.size() == 0) fail(ErrorKind::InvalidInput, "empty density grid");
    space.validate();
    Eigen::Index bi = 0;
    Eigen::Index bj = 0;
    for (Eigen::Index i = 0; i < density.rows(); ++i)
        for (Eigen::Index j = 0; j < density.cols(); ++j)
            if (density(i, j) > density(bi, bj)) {
                bi = i;
                bj = j;
            }
    Peak p;
    p.grid_layers = grid.layers.at(static_cast<int>(bi));
    p.grid_log2_neurons = grid.log2_neurons.at(static_cast<int>(bj));
    p.layers = nearest_choice(space.layers_choices, p.grid_layers);
    p.neurons = nearest_choice(space.neurons_choices, std::exp2(p.grid_log2_neurons));
    return p;
}

Adequacy range_adequacy(const Peak& peak, const SearchSpace& space) {
    space.validate();
    auto margin = [](const std::vector<int>& choices, int value) {
        const int idx = choice_index(choices, value);
        return std::min(idx, static_cast<int>(choices.size()) - 1 - idx);
    };
    Adequacy a;
    a.margin_layers = margin(space.layers_choices, peak.layers);
    a.margin_neurons = margin(space.neurons_choices, peak.neurons);
    a.adequate = a.margin_layers > 0 && a.margin_neurons > 0;
    return a;
}

namespace {

GridAxis padded_axis(double lo, double hi, double pad, double step) {
    GridAxis axis;
    axis.step = step;
    const long long first = static_cast<long long>(std::floor((lo - pad) / step));
    const long long last = static_cast<long long>(std::ceil((hi + pad) / step));
    axis.start = static_cast<double>(first) * step;
    axis.count = static_cast<int>(last - first + 1);
    return axis;
}

std::vector<KdePoint> points_of(std::span<const TrialRecord> trials) {
    std::vector<KdePoint> pts;
    for (const auto& t : trials) pts.push_back(to_kde_point(t.config));
    return pts;
}

}  // namespace

KdeResult analyze_trials(std::span<const TrialRecord> trials, const SearchSpace& space, double q, double grid_step) {
    space.validate();
    if (!(grid_step > 0.0)) fail(ErrorKind::InvalidInput, "grid_step must be positive");
    const auto sets = select_quantiles(trials, q);
    const auto top = points_of(sets.top);
    const auto bottom = points_of(sets.bottom);

    KdeResult r;
    // Bandwidths depend on the grid only through the cell-size floor, which is fixed by grid_step.
    KdeGrid unit;
    unit.layers.step = grid_step;
    unit.log2_neurons.step = grid_step;
    r.bandwidth_top = scott_bandwidth(top, unit);
    r.bandwidth_bottom = scott_bandwidth(bottom, unit);

    double lo_l = space.layers_choices.front();
    double hi_l = space.layers_choices.back();
    double lo_n = std::log2(static_cast<double>(space.neurons_choices.front()));
    double hi_n = std::log2(static_cast<double>(space.neurons_choices.back()));
    for (const auto* set : {&top, &bottom}) {
        for (const auto& p : *set) {
            lo_l = std::min(lo_l, p.layers);
            hi_l = std::max(hi_l, p.layers);
            lo_n = std::min(lo_n, p.log2_neurons);
            hi_n = std::max(hi_n, p.log2_neurons);
        }
    }
    const double pad_l = 4.0 * std::max(r.bandwidth_top.layers, r.bandwidth_bottom.layers);
    const double pad_n = 4.0 * std::max(r.bandwidth_top.log2_neurons, r.bandwidth_bottom.log2_neurons);
    r.grid.layers = padded_axis(lo_l, hi_l, pad_l, grid_step);
    r.grid.log2_neurons = padded_axis(lo_n, hi_n, pad_n, grid_step);

    r.density_top = kde2d(top, r.grid, r.bandwidth_top);
    r.density_bottom = kde2d(bottom, r.grid, r.bandwidth_bottom);
    r.peak_top = kde_peak(r.density_top, r.grid, space);
    r.peak_bottom = kde_peak(r.density_bottom, r.grid, space);
    r.adequacy_top = range_adequacy(r.peak_top, space);
    r.adequacy_bottom = range_adequacy(r.peak_bottom, space);
    for (const auto& t : sets.top) r.top_trial_ids.push_back(t.trial_id);
    for (const auto& t : sets.bottom) r.bottom_trial_ids.push_back(t.trial_id);
    return r;
}

void write_trials_csv(const std::filesystem::path& path, std::span<const TrialRecord> trials, int k) {
    std::string out = "trial_id,n_hidden_layers,neurons_per_layer,dropout_rate,learning_rate";
    for (int f = 0; f < k; ++f) out += ",fold" + std::to_string(f) + "_auroc";
    out += ",mean_auroc,flags\n";
    for (const auto& t : trials) {
        if (t.fold_aurocs.size() != static_cast<std::size_t>(k))
            fail(ErrorKind::InvalidInput, "trial " + std::to_string(t.trial_id) + " has the wrong number of folds");
        out += std::to_string(t.trial_id) + "," + std::to_string(t.config.n_hidden_layers) + "," +
               std::to_string(t.config.neurons_per_layer) + "," + io::format_double(t.config.dropout_rate) + "," +
               io::format_double(t.config.learning_rate);
        for (double a : t.fold_aurocs) out += "," + io::format_double(a);
        out += "," + io::format_double(t.mean_auroc) + "," + t.flags + "\n";
    }
    io::write_text(path, out);
}

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path, const ModelConfig& base) {
    const auto table = io::read_csv(path);
    const auto c_id = table.column("trial_id");
    const auto c_layers = table.column("n_hidden_layers");
    const auto c_neurons = table.column("neurons_per_layer");
    const auto c_dropout = table.column("dropout_rate");
    const auto c_lr = table.column("learning_rate");
    const auto c_mean = table.column("mean_auroc");
    const auto c_flags = table.column("flags");
    std::vector<std::size_t> fold_cols;
    for (int f = 0;; ++f) {
        const auto name = "fold" + std::to_string(f) + "_auroc";
        const auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) break;
        fold_cols.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
    std::vector<TrialRecord> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        if (row.size() != table.header.size())
            fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line) + ": wrong field count");
        TrialRecord t;
        t.trial_id = static_cast<int>(io::parse_int(row[c_id], path, line));
        t.config = base;
        t.config.n_hidden_layers = static_cast<int>(io::parse_int(row[c_layers], path, line));
        t.config.neurons_per_layer = static_cast<int>(io::parse_int(row[c_neurons], path, line));
        t.config.dropout_rate = io::parse_double(row[c_dropout], path, line);
        t.config.learning_rate = io::parse_double(row[c_lr], path, line);
        for (auto c : fold_cols) t.fold_aurocs.push_back(io::parse_double(row[c], path, line));
        t.mean_auroc = io::parse_double(row[c_mean], path, line);
        t.flags = row[c_flags];
        t.config.validate();
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        arr.push_back(std::move(row));
    }
    return arr;
}

std::vector<double> axis_values(const GridAxis& a) {
    std::vector<double> v;
    for (int k = 0; k < a.count; ++k) v.push_back(a.at(k));
    return v;
}

nlohmann::json peak_json(const Peak& p) {
    return {{"layers", p.layers},
            {"neurons", p.neurons},
            {"grid_layers", p.grid_layers},
            {"grid_log2_neurons", p.grid_log2_neurons}};
}

nlohmann::json adequacy_json(const Adequacy& a) {
    return {{"adequate", a.adequate}, {"margin_layers", a.margin_layers}, {"margin_neurons", a.margin_neurons}};
}

}  // namespace

nlohmann::json to_json(const KdeResult& r) {
    nlohmann::json j;
    j["grid"] = {{"layers", axis_values(r.grid.layers)}, {"log2_neurons", axis_values(r.grid.log2_neurons)}};
    j["density_top"] = matrix_json(r.density_top);
    j["density_bottom"] = matrix_json(r.density_bottom);
    j["peaks"] = {{"top", peak_json(r.peak_top)}, {"bottom", peak_json(r.peak_bottom)}};
    j["bandwidths"] = {{"top", {r.bandwidth_top.layers, r.bandwidth_top.log2_neurons}},
                       {"bottom", {r.bandwidth_bottom.layers, r.bandwidth_bottom.log2_neurons}}};
    j["adequacy"] = {{"top", adequacy_json(r.adequacy_top)}, {"bottom", adequacy_json(r.adequacy_bottom)}};
    j["top_trial_ids"] = r.top_trial_ids;
    j["bottom_trial_ids"] = r.bottom_trial_ids;
    return j;
}

namespace {

// Heatmap panel: density resampled to at most `cells` x `cells` rectangles.
void svg_panel(std::ostringstream& s, const Eigen::MatrixXd& density, const KdeGrid& grid, const Peak& peak,
               double x0, const char* title, const char* rgb) {
    constexpr double size = 300.0;
    constexpr double y0 = 40.0;
    constexpr int cells = 60;
    const int nx = std::min(cells, grid.log2_neurons.count);
    const int ny = std::min(cells, grid.layers.count);
    const double maxd = density.maxCoeff() > 0.0 ? density.maxCoeff() : 1.0;
    s << "<g>\n<text x=\"" << x0 + size / 2 << "\" y=\"25\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
    for (int a = 0; a < ny; ++a) {
        const int i = static_cast<int>(std::lround(static_cast<double>(a) * (grid.layers.count - 1) / std::max(1, ny - 1)));
        for (int b = 0; b < nx; ++b) {
            const int jn = static_cast<int>(
                std::lround(static_cast<double>(b) * (grid.log2_neurons.count - 1) / std::max(1, nx - 1)));
            const double v = density(i, jn) / maxd;
            // layers increase upward
            s << "<rect x=\"" << io::format_double(x0 + b * size / nx, 6) << "\" y=\""
              << io::format_double(y0 + (ny - 1 - a) * size / ny, 6) << "\" width=\""
              << io::format_double(size / nx + 0.05, 6) << "\" height=\"" << io::format_double(size / ny + 0.05, 6)
              << "\" fill=\"rgb(" << rgb << ")\" fill-opacity=\"" << io::format_double(v, 3) << "\"/>\n";
        }
    }
    const double fx = (peak.grid_log2_neurons - grid.log2_neurons.start) /
                      (grid.log2_neurons.step * std::max(1, grid.log2_neurons.count - 1));
    const double fy = (peak.grid_layers - grid.layers.start) / (grid.layers.step * std::max(1, grid.layers.count - 1));
    s << "<circle class=\"peak\" cx=\"" << io::format_double(x0 + fx * size, 6) << "\" cy=\""
      << io::format_double(y0 + (1.0 - fy) * size, 6) << "\" r=\"5\" fill=\"black\"><title>peak: " << peak.layers
      << " layers, " << peak.neurons << " neurons</title></circle>\n";
    s << "<text x=\"" << x0 + size / 2 << "\" y=\"" << y0 + size + 20
      << "\" text-anchor=\"middle\" font-size=\"12\">log2(neurons per layer)</text>\n";
    s << "<text x=\"" << x0 - 10 << "\" y=\"" << y0 + size / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 " << x0 - 10 << " " << y0 + size / 2 << ")\">hidden layers</text>\n</g>\n";
}

}  // namespace

std::string kde_svg(const KdeResult& r) {
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"380\" viewBox=\"0 0 720 380\">\n"
      << "<rect width=\"720\" height=\"380\" fill=\"white\"/>\n";
    svg_panel(s, r.density_top, r.grid, r.peak_top, 40.0, "top quantile", "31,119,180");
    svg_panel(s, r.density_bottom, r.grid, r.peak_bottom, 400.0, "bottom quantile", "255,127,14");
    s << "</svg>\n";
    return s.str();
}

}  // namespace fcprobe
