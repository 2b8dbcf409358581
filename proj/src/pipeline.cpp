#include "fcprobe/pipeline.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "fcprobe/error.h"
#include "fcprobe/io.h"
#include "fcprobe/parallel.h"
#include "fcprobe/rng.h"

namespace fcprobe {

namespace {

void check(bool ok, const char* field, const std::string& msg) {
    if (!ok) fail(ErrorKind::InvalidInput, std::string("pipeline.") + field + ": " + msg);
}

template <typename T>
void read_field(const nlohmann::json& obj, const char* name, T& target, const std::string& source) {
    try {
        target = obj.at(name).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidInput, source + ": pipeline." + name + ": " + e.what());
    }
}

void require_file(const std::filesystem::path& p, const char* what) {
    if (!std::filesystem::is_regular_file(p))
        fail(ErrorKind::InvalidInput, std::string(what) + " not found: " + p.string());
}

// Run manifest next to a command's outputs: config hash, input and output checksums.
void write_run_manifest(const RunConfig& config, const std::string& command,
                        const std::vector<std::filesystem::path>& inputs,
                        const std::vector<std::filesystem::path>& outputs, nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json j;
    j["command"] = command;
    j["tool_version"] = FCPROBE_VERSION;
    j["config_hash"] = io::fnv1a_hex(to_json(config).dump());
    auto list = [](const std::vector<std::filesystem::path>& paths) {
        auto arr = nlohmann::json::array();
        for (const auto& p : paths) arr.push_back({{"path", p.generic_string()}, {"checksum", io::file_checksum(p)}});
        return arr;
    };
    j["inputs"] = list(inputs);
    j["outputs"] = list(outputs);
    if (!extra.empty()) j["details"] = std::move(extra);
    io::write_text(config.out(command + ".run.json"), j.dump(1) + "\n");
}

void ensure_out_dir(const RunConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec || !std::filesystem::is_directory(config.out_dir))
        fail(ErrorKind::IoError, "cannot create output directory " + config.out_dir.string());
}

}  // namespace

void RunConfig::validate() const {
    check(workers >= 0, "workers", "must be >= 0");
    check(regions >= 2, "regions", "must be >= 2");
    check(n_control >= 2 && n_case >= 2, "n_control", "each group needs at least 2 subjects");
    check(timepoints >= regions + 1, "timepoints", "must be at least regions + 1");
    check(noise_scale >= 0.0 && std::isfinite(noise_scale), "noise_scale", "must be >= 0");
    check(n_effects >= 0 && 2 * n_effects <= regions, "n_effects", "must lie in [0, regions / 2]");
    check(std::isfinite(effect_delta), "effect_delta", "must be finite");
    check(shrinkage >= 0.0 && shrinkage < 1.0, "shrinkage", "must lie in [0, 1)");
    check(mean_mode == "geometric" || mean_mode == "arithmetic", "mean_mode", "must be 'geometric' or 'arithmetic'");
    check(mean_tol > 0.0, "mean_tol", "must be > 0");
    check(mean_max_iter >= 1, "mean_max_iter", "must be >= 1");
    check(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction", "must lie in (0, 1)");
    check(n_trials >= 1, "n_trials", "must be >= 1");
    check(k >= 2, "k", "must be >= 2");
    check(q > 0.0 && q <= 0.5, "q", "must lie in (0, 0.5]");
    check(early_stop_fraction > 0.0 && early_stop_fraction < 1.0, "early_stop_fraction", "must lie in (0, 1)");
    check(kde_grid_step > 0.0, "kde_grid_step", "must be > 0");
    check(repeats >= 1, "repeats", "must be >= 1");
    check(top_k >= 1, "top_k", "must be >= 1");
    check(std::isfinite(tau), "tau", "must be finite");
    try {
        search_space().validate();
        base_model_config().validate();
    } catch (const Error& e) {
        fail(ErrorKind::InvalidInput, std::string("pipeline: ") + e.what());
    }
}

std::filesystem::path RunConfig::manifest_path() const {
    return manifest.empty() ? out_dir / "cohort" / "manifest.csv" : manifest;
}
std::filesystem::path RunConfig::atlas_path() const { return atlas.empty() ? out_dir / "atlas.csv" : atlas; }
std::filesystem::path RunConfig::brodmann_path() const { return brodmann.empty() ? out_dir / "brodmann.csv" : brodmann; }
std::filesystem::path RunConfig::features_path() const { return features.empty() ? out_dir / "features.csv" : features; }

SearchSpace RunConfig::search_space() const {
    SearchSpace s;
    s.layers_choices = layers_choices;
    s.neurons_choices = neurons_choices;
    s.dropout_range = dropout_range;
    s.lr_log10_range = lr_log10_range;
    return s;
}

ModelConfig RunConfig::base_model_config() const {
    ModelConfig c;
    c.batch_size = batch_size;
    c.max_epochs = max_epochs;
    c.patience = patience;
    return c;
}

int RunConfig::worker_count() const { return workers > 0 ? workers : default_workers(); }

nlohmann::json to_json(const RunConfig& c) {
    auto effects = nlohmann::json::array();
    for (const auto& e : c.effects) effects.push_back({{"i", e.i}, {"j", e.j}, {"delta", e.delta}});
    std::vector<std::string> inputs;
    for (const auto& p : c.compare_inputs) inputs.push_back(p.generic_string());
    // workers is left out: it never changes results.
    return {{"out_dir", c.out_dir.generic_string()},
            {"manifest", c.manifest.generic_string()},
            {"atlas", c.atlas.generic_string()},
            {"brodmann", c.brodmann.generic_string()},
            {"features", c.features.generic_string()},
            {"compare_inputs", inputs},
            {"seed", c.seed},
            {"regions", c.regions},
            {"n_control", c.n_control},
            {"n_case", c.n_case},
            {"timepoints", c.timepoints},
            {"noise_scale", c.noise_scale},
            {"n_effects", c.n_effects},
            {"effect_delta", c.effect_delta},
            {"effects", effects},
            {"anchor_effects", c.anchor_effects},
            {"shrinkage", c.shrinkage},
            {"mean_mode", c.mean_mode},
            {"mean_tol", c.mean_tol},
            {"mean_max_iter", c.mean_max_iter},
            {"test_fraction", c.test_fraction},
            {"n_trials", c.n_trials},
            {"k", c.k},
            {"q", c.q},
            {"layers_choices", c.layers_choices},
            {"neurons_choices", c.neurons_choices},
            {"dropout_range", c.dropout_range},
            {"lr_log10_range", c.lr_log10_range},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"early_stop_fraction", c.early_stop_fraction},
            {"kde_grid_step", c.kde_grid_step},
            {"repeats", c.repeats},
            {"tau", c.tau},
            {"top_k", c.top_k}};
}

void apply_json(RunConfig& c, const nlohmann::json& p, const std::string& source) {
    if (!p.is_object()) fail(ErrorKind::InvalidInput, source + ": `pipeline` must be an object");
    for (const auto& [key, value] : p.items()) {
        const char* k = key.c_str();
        std::string s;
        if (key == "out_dir") read_field(p, k, s, source), c.out_dir = s;
        else if (key == "manifest") read_field(p, k, s, source), c.manifest = s;
        else if (key == "atlas") read_field(p, k, s, source), c.atlas = s;
        else if (key == "brodmann") read_field(p, k, s, source), c.brodmann = s;
        else if (key == "features") read_field(p, k, s, source), c.features = s;
        else if (key == "compare_inputs") {
            std::vector<std::string> v;
            read_field(p, k, v, source);
            c.compare_inputs.assign(v.begin(), v.end());
        } else if (key == "seed") read_field(p, k, c.seed, source);
        else if (key == "workers") read_field(p, k, c.workers, source);
        else if (key == "regions") read_field(p, k, c.regions, source);
        else if (key == "n_control") read_field(p, k, c.n_control, source);
        else if (key == "n_case") read_field(p, k, c.n_case, source);
        else if (key == "timepoints") read_field(p, k, c.timepoints, source);
        else if (key == "noise_scale") read_field(p, k, c.noise_scale, source);
        else if (key == "n_effects") read_field(p, k, c.n_effects, source);
        else if (key == "effect_delta") read_field(p, k, c.effect_delta, source);
        else if (key == "effects") {
            c.effects.clear();
            if (!value.is_array()) fail(ErrorKind::InvalidInput, source + ": pipeline.effects must be a list");
            for (std::size_t n = 0; n < value.size(); ++n) {
                try {
                    c.effects.push_back({value[n].at("i").get<int>(), value[n].at("j").get<int>(),
                                         value[n].at("delta").get<double>()});
                } catch (const nlohmann::json::exception& e) {
                    fail(ErrorKind::InvalidInput,
                         source + ": pipeline.effects[" + std::to_string(n) + "]: " + e.what());
                }
            }
        } else if (key == "anchor_effects") read_field(p, k, c.anchor_effects, source);
        else if (key == "shrinkage") read_field(p, k, c.shrinkage, source);
        else if (key == "mean_mode") read_field(p, k, c.mean_mode, source);
        else if (key == "mean_tol") read_field(p, k, c.mean_tol, source);
        else if (key == "mean_max_iter") read_field(p, k, c.mean_max_iter, source);
        else if (key == "test_fraction") read_field(p, k, c.test_fraction, source);
        else if (key == "n_trials") read_field(p, k, c.n_trials, source);
        else if (key == "k") read_field(p, k, c.k, source);
        else if (key == "q") read_field(p, k, c.q, source);
        else if (key == "layers_choices") read_field(p, k, c.layers_choices, source);
        else if (key == "neurons_choices") read_field(p, k, c.neurons_choices, source);
        else if (key == "dropout_range") read_field(p, k, c.dropout_range, source);
        else if (key == "lr_log10_range") read_field(p, k, c.lr_log10_range, source);
        else if (key == "batch_size") read_field(p, k, c.batch_size, source);
        else if (key == "max_epochs") read_field(p, k, c.max_epochs, source);
        else if (key == "patience") read_field(p, k, c.patience, source);
        else if (key == "early_stop_fraction") read_field(p, k, c.early_stop_fraction, source);
        else if (key == "kde_grid_step") read_field(p, k, c.kde_grid_step, source);
        else if (key == "repeats") read_field(p, k, c.repeats, source);
        else if (key == "tau") read_field(p, k, c.tau, source);
        else if (key == "top_k") read_field(p, k, c.top_k, source);
        else fail(ErrorKind::InvalidInput, source + ": unknown field pipeline." + key);
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("pipeline"))
        fail(ErrorKind::InvalidInput, path.string() + ": expected an object with a `pipeline` field");
    for (const auto& [key, value] : j.items())
        if (key != "pipeline") fail(ErrorKind::InvalidInput, path.string() + ": unknown top-level field " + key);
    RunConfig c;
    apply_json(c, j["pipeline"], path.string());
    c.validate();
    return c;
}

std::uint64_t stage_seed(const RunConfig& config, Stage stage) {
    return derive_seed(config.seed, {static_cast<std::uint64_t>(stage)});
}

std::vector<PlantedEffect> planned_effects(const RunConfig& config) {
    if (!config.effects.empty()) return config.effects;
    Rng rng(stage_seed(config, Stage::EffectPairs));
    std::vector<int> regions(static_cast<std::size_t>(config.regions));
    for (int r = 0; r < config.regions; ++r) regions[static_cast<std::size_t>(r)] = r;
    rng.shuffle(std::span<int>(regions));
    std::vector<PlantedEffect> out;
    for (int e = 0; e < config.n_effects; ++e) {
        const auto [i, j] = std::minmax(regions[static_cast<std::size_t>(2 * e)], regions[static_cast<std::size_t>(2 * e + 1)]);
        out.push_back({i, j, config.effect_delta});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
    return out;
}

GenerateOutcome cmd_generate(const RunConfig& config) {
    config.validate();
    ensure_out_dir(config);
    GenerateOutcome out;
    out.atlas = make_atlas(config.regions, stage_seed(config, Stage::Atlas));
    out.effects = planned_effects(config);
    const BrodmannTable table = synthetic_brodmann_table();

    if (config.anchor_effects && !out.effects.empty()) {
        // Each planted region sits on a Brodmann centroid chosen independently of the atlas
        // size, so cohorts of different granularity share the planted BA pairs.
        std::set<int> planted;
        for (const auto& e : out.effects) planted.insert({e.i, e.j});
        std::vector<std::size_t> ba_order(table.entries.size());
        for (std::size_t b = 0; b < ba_order.size(); ++b) ba_order[b] = b;
        Rng rng(stage_seed(config, Stage::Anchors));
        rng.shuffle(std::span<std::size_t>(ba_order));
        if (planted.size() > ba_order.size())
            fail(ErrorKind::InvalidInput, "more planted regions than Brodmann areas to anchor them");
        std::size_t next = 0;
        for (const auto& e : out.effects) {
            for (int region : {e.i, e.j}) {
                auto& r = out.atlas.regions[static_cast<std::size_t>(region)];
                if (r.brodmann_hint) continue;
                const auto& ba = table.entries[ba_order[next++]];
                r.centroid = ba.centroid;
                r.brodmann_hint = ba.ba_id;
            }
        }
    }

    CohortSpec spec;
    spec.n_control = config.n_control;
    spec.n_case = config.n_case;
    spec.timepoints = config.timepoints;
    spec.noise_scale = config.noise_scale;
    spec.seed = stage_seed(config, Stage::Cohort);
    const Cohort cohort = generate_cohort(out.atlas, out.effects, spec);

    const auto cohort_dir = config.manifest_path().parent_path();
    out.manifest = write_cohort(cohort_dir, cohort);
    if (out.manifest != config.manifest_path()) {
        std::error_code ec;
        std::filesystem::rename(out.manifest, config.manifest_path(), ec);
        if (ec) fail(ErrorKind::IoError, "cannot write manifest " + config.manifest_path().string());
        out.manifest = config.manifest_path();
    }
    write_atlas_csv(config.atlas_path(), out.atlas);
    write_brodmann_csv(config.brodmann_path(), table);
    const auto effects_path = config.out("effects.json");
    write_effects_json(effects_path, out.effects);
    write_run_manifest(config, "generate", {},
                       {out.manifest, config.atlas_path(), config.brodmann_path(), effects_path});
    return out;
}

SplitIndices read_split_csv(const std::filesystem::path& path, const Dataset& d) {
    const auto table = io::read_csv(path);
    const auto c_id = table.column("subject_id");
    const auto c_part = table.column("partition");
    if (table.rows.size() != d.size())
        fail(ErrorKind::InvalidInput, path.string() + ": split lists " + std::to_string(table.rows.size()) +
                                          " subjects, features have " + std::to_string(d.size()));
    SplitIndices split;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size() || row[c_id] != d.subject_ids[r])
            fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(r + 2) + ": subject does not match features");
        if (row[c_part] == "train") split.train.push_back(r);
        else if (row[c_part] == "test") split.test.push_back(r);
        else fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(r + 2) + ": partition must be train or test");
    }
    return split;
}

FeaturesOutcome cmd_features(const RunConfig& config) {
    config.validate();
    ensure_out_dir(config);
    const auto manifest_path = config.manifest_path();
    require_file(manifest_path, "manifest");
    const auto entries = read_manifest(manifest_path);
    if (entries.empty()) fail(ErrorKind::InvalidInput, manifest_path.string() + ": no subjects");

    std::vector<TimeSeriesMatrix> cohort(entries.size());
    std::vector<int> labels;
    for (const auto& e : entries) labels.push_back(e.label);
    parallel_for(entries.size(), config.worker_count(),
                 [&](std::size_t s) { cohort[s] = read_time_series(entries[s].path, entries[s].subject_id); });

    FeaturesOutcome out;
    out.split = stratified_split(labels, config.test_fraction, stage_seed(config, Stage::Split));
    EmbeddingOptions opts;
    opts.shrinkage = config.shrinkage;
    opts.mean_mode = parse_mean_mode(config.mean_mode);
    opts.mean_tol = config.mean_tol;
    opts.mean_max_iter = config.mean_max_iter;
    opts.workers = config.worker_count();
    auto embedded = build_dataset(cohort, labels, opts, out.split.train);
    out.dataset = std::move(embedded.dataset);
    out.reference = std::move(embedded.reference);

    const auto features_path = config.features_path();
    write_features_csv(features_path, out.dataset);
    std::vector<std::string> partition(out.dataset.size(), "train");
    for (auto r : out.split.test) partition[r] = "test";
    std::string split_text = "subject_id,partition\n";
    for (std::size_t r = 0; r < out.dataset.size(); ++r) split_text += out.dataset.subject_ids[r] + "," + partition[r] + "\n";
    const auto split_path = config.out("split.csv");
    io::write_text(split_path, split_text);

    std::vector<std::filesystem::path> inputs{manifest_path};
    for (const auto& e : entries) inputs.push_back(e.path);
    write_run_manifest(config, "features", inputs, {features_path, split_path},
                       {{"split_checksum", io::file_checksum(split_path)},
                        {"reference_converged", out.reference.converged},
                        {"reference_iterations", out.reference.iterations},
                        {"n_features", out.dataset.n_features()}});
    return out;
}

namespace {

struct LoadedFeatures {
    Dataset dataset;
    SplitIndices split;
    std::filesystem::path split_path;
};

LoadedFeatures load_features(const RunConfig& config, bool verify_split) {
    LoadedFeatures f;
    const auto features_path = config.features_path();
    f.split_path = config.out("split.csv");
    require_file(features_path, "features cache");
    require_file(f.split_path, "split sidecar");
    f.dataset = read_features_csv(features_path);
    f.split = read_split_csv(f.split_path, f.dataset);
    if (verify_split) {
        const auto run_path = config.out("features.run.json");
        require_file(run_path, "features run manifest");
        const auto run = nlohmann::json::parse(io::read_text(run_path));
        const auto expected = run.at("details").at("split_checksum").get<std::string>();
        if (io::file_checksum(f.split_path) != expected)
            fail(ErrorKind::InvalidInput, f.split_path.string() + " changed since `features` wrote it");
    }
    return f;
}

}  // namespace

SearchOutcome cmd_search(const RunConfig& config) {
    config.validate();
    ensure_out_dir(config);
    const auto loaded = load_features(config, true);
    const Dataset train_set = loaded.dataset.subset(loaded.split.train);

    SearchOptions opts;
    opts.n_trials = config.n_trials;
    opts.k = config.k;
    opts.seed = stage_seed(config, Stage::Search);
    opts.base = config.base_model_config();
    opts.early_stop_fraction = config.early_stop_fraction;
    opts.workers = config.worker_count();

    SearchOutcome out;
    const auto space = config.search_space();
    out.trials = run_search(train_set, space, opts);
    out.kde = analyze_trials(out.trials, space, config.q, config.kde_grid_step);

    const auto trials_path = config.out("trials.csv");
    const auto kde_path = config.out("kde.json");
    const auto svg_path = config.out("kde.svg");
    write_trials_csv(trials_path, out.trials, config.k);
    io::write_text(kde_path, to_json(out.kde).dump() + "\n");
    io::write_text(svg_path, kde_svg(out.kde));
    write_run_manifest(config, "search", {config.features_path(), loaded.split_path}, {trials_path, kde_path, svg_path});
    return out;
}

TrainOutcome cmd_train(const RunConfig& config) {
    config.validate();
    ensure_out_dir(config);
    const auto loaded = load_features(config, true);
    const auto trials_path = config.out("trials.csv");
    require_file(trials_path, "trials table");
    const auto trials = read_trials_csv(trials_path, config.base_model_config());
    if (trials.empty()) fail(ErrorKind::InvalidInput, trials_path.string() + ": no trials");

    TrainOutcome out;
    out.best_trial = *std::min_element(trials.begin(), trials.end(), [](const auto& a, const auto& b) {
        if (a.mean_auroc != b.mean_auroc) return a.mean_auroc > b.mean_auroc;
        return a.trial_id < b.trial_id;
    });
    ModelConfig cfg = out.best_trial.config;
    cfg.seed = stage_seed(config, Stage::Train);

    const Dataset train_set = loaded.dataset.subset(loaded.split.train);
    const Dataset test_set = loaded.dataset.subset(loaded.split.test);
    out.model = train_with_holdout(train_set, cfg, config.early_stop_fraction, derive_seed(cfg.seed, {0xe5}));
    out.test_auroc = auroc(test_set.labels, predict_proba(out.model, test_set.features));

    const auto model_path = config.out("model.json");
    const auto summary_path = config.out("train_summary.json");
    save_model(model_path, out.model);
    nlohmann::json summary = {{"best_trial_id", out.best_trial.trial_id},
                              {"cv_mean_auroc", out.best_trial.mean_auroc},
                              {"config", to_json(cfg)},
                              {"epochs", out.model.history.size()},
                              {"test_auroc", out.test_auroc},
                              {"n_train", train_set.size()},
                              {"n_test", test_set.size()}};
    io::write_text(summary_path, summary.dump(1) + "\n");
    write_run_manifest(config, "train", {config.features_path(), loaded.split_path, trials_path},
                       {model_path, summary_path});
    return out;
}

PfiOutcome cmd_pfi(const RunConfig& config) {
    config.validate();
    ensure_out_dir(config);
    const auto loaded = load_features(config, true);
    const auto model_path = config.out("model.json");
    require_file(model_path, "model");
    require_file(config.atlas_path(), "atlas");
    require_file(config.brodmann_path(), "Brodmann table");
    const auto model = load_model(model_path);
    const auto atlas = read_atlas_csv(config.atlas_path());
    const auto table = read_brodmann_csv(config.brodmann_path());
    for (const auto& p : loaded.dataset.feature_pairs)
        if (p.j >= atlas.size())
            fail(ErrorKind::InvalidInput, "features reference region " + std::to_string(p.j) + " but the atlas has " +
                                              std::to_string(atlas.size()) + " regions");

    const Dataset test_set = loaded.dataset.subset(loaded.split.test);
    PfiOptions opts;
    opts.repeats = config.repeats;
    opts.seed = stage_seed(config, Stage::Pfi);
    opts.workers = config.worker_count();

    PfiOutcome out;
    out.raw = pfi(model, test_set, opts);
    out.z = zscores(out.raw);
    out.records = zscore_rank(out.raw, test_set.feature_pairs, config.top_k);
    label_records(out.records, atlas, map_to_brodmann(atlas, table));
    out.edges = threshold_edges(out.z, test_set.feature_pairs, atlas, config.tau);

    const auto csv_path = config.out("importance.csv");
    const auto edges_path = config.out("edges.json");
    const auto svg_path = config.out("importance.svg");
    write_importance_csv(csv_path, out.records);
    io::write_text(edges_path, edges_json(out.edges).dump(1) + "\n");
    io::write_text(svg_path, importance_svg(out.records));
    write_run_manifest(config, "pfi",
                       {config.features_path(), loaded.split_path, model_path, config.atlas_path(), config.brodmann_path()},
                       {csv_path, edges_path, svg_path});
    return out;
}

OverlapReport cmd_compare(const RunConfig& config) {
    config.validate();
    if (config.compare_inputs.size() < 2)
        fail(ErrorKind::InvalidInput, "compare needs at least 2 importance tables, got " +
                                          std::to_string(config.compare_inputs.size()));
    ensure_out_dir(config);
    std::vector<std::vector<BaPair>> rankings;
    for (const auto& path : config.compare_inputs) {
        require_file(path, "importance table");
        std::vector<BaPair> pairs;
        for (const auto& rec : read_importance_csv(path)) {
            if (!rec.ba_pair) fail(ErrorKind::InvalidInput, path.string() + ": record without a Brodmann pair");
            pairs.push_back(*rec.ba_pair);
        }
        rankings.push_back(std::move(pairs));
    }
    const auto report = cross_granularity_overlap(rankings);
    const auto overlap_path = config.out("overlap.json");
    io::write_text(overlap_path, to_json(report).dump(1) + "\n");
    write_run_manifest(config, "compare", config.compare_inputs, {overlap_path});
    return report;
}

}  // namespace fcprobe
