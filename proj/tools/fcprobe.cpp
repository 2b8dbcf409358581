// fcprobe command-line tool.
//
// Settings are layered: built-in defaults, then --config <file>, then each --set key=value
// in order, then the dedicated flags (--seed, --out, --regions, ...).

#include <functional>
#include <memory>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcprobe/error.h"
#include "fcprobe/pipeline.h"

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
};

// Flag values that override the loaded config, keyed by pipeline field name.
struct Overrides {
    std::vector<std::function<void(nlohmann::json&)>> appliers;

    template <typename T>
    void option(CLI::App* app, const std::string& flag, const std::string& field, const std::string& help) {
        auto holder = std::make_shared<T>();
        CLI::Option* opt = app->add_option(flag, *holder, help);
        appliers.push_back([opt, holder, field](nlohmann::json& fields) {
            if (opt->count() > 0) fields[field] = *holder;
        });
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "JSON config file with a `pipeline` object");
    app->add_option("--set", c.sets, "Override one config field, key=value (value parsed as JSON when possible)");
    app->add_option("--seed", c.seed, "Master seed");
    app->add_option("--out", c.out, "Output directory");
    app->add_option("--workers", c.workers, "Worker threads (0 = all cores)");
}

nlohmann::json parse_set(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        fcprobe::fail(fcprobe::ErrorKind::InvalidInput, "--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    return {{key, value}};
}

fcprobe::RunConfig resolve(const Common& c, const Overrides& o) {
    fcprobe::RunConfig config;
    if (!c.config_path.empty()) config = fcprobe::load_run_config(c.config_path);
    for (const auto& kv : c.sets) fcprobe::apply_json(config, parse_set(kv), "--set");
    nlohmann::json flags = nlohmann::json::object();
    for (const auto& apply : o.appliers) apply(flags);
    if (c.seed) flags["seed"] = *c.seed;
    if (c.out) flags["out_dir"] = *c.out;
    if (c.workers) flags["workers"] = *c.workers;
    fcprobe::apply_json(config, flags, "command line");
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Connectivity classifier pipeline: synthetic cohorts, tangent features, "
                 "architecture search, permutation importance"};
    app.set_version_flag("--version", FCPROBE_VERSION);
    app.require_subcommand(1);

    Common common;
    Overrides overrides;

    auto* gen = app.add_subcommand("generate", "Write a synthetic atlas, cohort and planted-effect sidecar");
    add_common(gen, common);
    overrides.option<int>(gen, "--regions", "regions", "Number of atlas regions");
    overrides.option<int>(gen, "--n-control", "n_control", "Control subjects");
    overrides.option<int>(gen, "--n-case", "n_case", "Case subjects");
    overrides.option<int>(gen, "--timepoints", "timepoints", "Samples per time series");
    overrides.option<double>(gen, "--noise-scale", "noise_scale", "Per-subject covariance jitter");
    overrides.option<int>(gen, "--n-effects", "n_effects", "Planted edges");
    overrides.option<double>(gen, "--effect-delta", "effect_delta", "Correlation shift per planted edge");

    auto* feat = app.add_subcommand("features", "Tangent-space features and the train/test split");
    add_common(feat, common);
    overrides.option<std::string>(feat, "--manifest", "manifest", "Cohort manifest CSV");
    overrides.option<double>(feat, "--shrinkage", "shrinkage", "Covariance shrinkage");
    overrides.option<std::string>(feat, "--mean-mode", "mean_mode", "geometric or arithmetic");
    overrides.option<double>(feat, "--test-fraction", "test_fraction", "Held-out test share");

    auto* search = app.add_subcommand("search", "Random architecture search with k-fold CV and KDE analysis");
    add_common(search, common);
    overrides.option<int>(search, "--n-trials", "n_trials", "Sampled configurations");
    overrides.option<int>(search, "--k", "k", "CV folds");
    overrides.option<double>(search, "--q", "q", "Quantile for top/bottom sets");

    auto* train = app.add_subcommand("train", "Retrain the best configuration and score the test set once");
    add_common(train, common);

    auto* pfi = app.add_subcommand("pfi", "Permutation importance with Brodmann labelling");
    add_common(pfi, common);
    overrides.option<std::string>(pfi, "--atlas", "atlas", "Atlas CSV");
    overrides.option<std::string>(pfi, "--brodmann", "brodmann", "Brodmann centroid CSV");
    overrides.option<int>(pfi, "--repeats", "repeats", "Permutations per feature");
    overrides.option<double>(pfi, "--tau", "tau", "Edge threshold on z");
    overrides.option<int>(pfi, "--top-k", "top_k", "Rows in the importance table");

    auto* cmp = app.add_subcommand("compare", "Brodmann-pair overlap across importance tables");
    add_common(cmp, common);
    overrides.option<std::vector<std::string>>(cmp, "--inputs", "compare_inputs", "importance.csv files (2 or more)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const auto config = resolve(common, overrides);
        const auto& out = config.out_dir;
        if (gen->parsed()) {
            const auto r = fcprobe::cmd_generate(config);
            std::cout << "generated " << config.n_control + config.n_case << " subjects, " << r.atlas.size()
                      << " regions, " << r.effects.size() << " planted effects -> " << r.manifest.string() << "\n";
        } else if (feat->parsed()) {
            const auto r = fcprobe::cmd_features(config);
            std::cout << "features: " << r.dataset.size() << " subjects x " << r.dataset.n_features() << " -> "
                      << config.features_path().string() << "\n";
        } else if (search->parsed()) {
            const auto r = fcprobe::cmd_search(config);
            std::cout << "search: " << r.trials.size() << " trials -> " << (out / "trials.csv").string()
                      << "; top peak (" << r.kde.peak_top.layers << " layers, " << r.kde.peak_top.neurons
                      << " neurons)\n";
        } else if (train->parsed()) {
            const auto r = fcprobe::cmd_train(config);
            std::cout << "train: trial " << r.best_trial.trial_id << ", test AUROC " << r.test_auroc << "\n";
        } else if (pfi->parsed()) {
            const auto r = fcprobe::cmd_pfi(config);
            std::cout << "pfi: " << r.records.size() << " ranked features, " << r.edges.size()
                      << " edges at z >= " << config.tau << "\n";
        } else if (cmp->parsed()) {
            const auto r = fcprobe::cmd_compare(config);
            std::cout << "compare: " << r.common_pairs.size() << " Brodmann pairs common to all "
                      << r.per_ranking.size() << " inputs\n";
        }
    } catch (const fcprobe::Error& e) {
        std::cerr << "fcprobe: error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "fcprobe: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
