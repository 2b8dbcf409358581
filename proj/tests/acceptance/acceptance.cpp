// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcprobe/connectivity.h"
#include "fcprobe/evaluation.h"
#include "fcprobe/importance.h"
#include "fcprobe/io.h"
#include "fcprobe/model.h"
#include "fcprobe/pipeline.h"
#include "fcprobe/search.h"

using namespace fcprobe;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void report(int id, const std::string& name, const Outcome& o, double secs) {
    std::printf("criterion %d (%s): %s [%.1f s]%s%s\n", id, name.c_str(), o.pass ? "PASS" : "FAIL", secs,
                o.detail.empty() ? "" : " ", o.detail.c_str());
    std::fflush(stdout);
}

// ---- oracles ----------------------------------------------------------------

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd a(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) a(i, j) = rng.normal();
    return a;
}

Eigen::MatrixXd random_spd(int n, Rng& rng) {
    const Eigen::MatrixXd a = random_matrix(n, n, rng);
    Eigen::MatrixXd m = a * a.transpose() / n + 0.5 * Eigen::MatrixXd::Identity(n, n);
    return (0.5 * (m + m.transpose())).eval();
}

Eigen::MatrixXd taylor_expm(const Eigen::MatrixXd& a) {
    int squarings = 0;
    double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    while (norm > 0.25) {
        norm /= 2.0;
        ++squarings;
    }
    const Eigen::MatrixXd s = a / std::ldexp(1.0, squarings);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = term * s / static_cast<double>(k);
        sum += term;
    }
    for (int k = 0; k < squarings; ++k) sum = sum * sum;
    return sum;
}

double pair_count_auroc(const std::vector<int>& y, const std::vector<double>& s) {
    long long twice = 0, pairs = 0;
    for (std::size_t a = 0; a < y.size(); ++a)
        for (std::size_t b = 0; b < y.size(); ++b) {
            if (y[a] != 1 || y[b] != 0) continue;
            ++pairs;
            twice += s[a] > s[b] ? 2 : (s[a] == s[b] ? 1 : 0);
        }
    return static_cast<double>(twice) / static_cast<double>(2 * pairs);
}

double max_gradient_error(TrainedModel model, const Eigen::MatrixXd& x, const std::vector<int>& y) {
    const auto analytic = loss_and_gradients(model, x, y);
    const double h = 1e-5;
    double worst = 0.0;
    auto probe = [&](double& param, double grad) {
        const double saved = param;
        param = saved + h;
        const double up = loss_and_gradients(model, x, y).loss;
        param = saved - h;
        const double down = loss_and_gradients(model, x, y).loss;
        param = saved;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(grad - numeric) / std::max({1e-7, std::abs(grad), std::abs(numeric)}));
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                probe(layer.weights(r, c), analytic.gradients[l].weights(r, c));
        for (Eigen::Index c = 0; c < layer.bias.size(); ++c) probe(layer.bias(c), analytic.gradients[l].bias(c));
    }
    return worst;
}

// Standardized L2 logistic regression (C = 1) fit by Newton's method; returns test AUROC.
double logistic_baseline_auroc(const Dataset& train_set, const Dataset& test_set) {
    const Eigen::RowVectorXd mu = train_set.features.colwise().mean();
    Eigen::RowVectorXd sd =
        ((train_set.features.rowwise() - mu).array().square().colwise().sum() / train_set.features.rows()).sqrt();
    for (Eigen::Index c = 0; c < sd.size(); ++c)
        if (sd(c) == 0.0) sd(c) = 1.0;
    auto scale = [&](const Eigen::MatrixXd& x) {
        const Eigen::Index n = x.rows(), f = x.cols();
        Eigen::MatrixXd out(n, f + 1);
        out.leftCols(f) = ((x.rowwise() - mu).array().rowwise() / sd.array()).matrix();
        out.col(f).setOnes();
        return out;
    };
    const Eigen::MatrixXd x = scale(train_set.features);
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) y(r) = train_set.labels[static_cast<std::size_t>(r)];
    const Eigen::Index f = x.cols() - 1;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd p = (1.0 + (-(x * w)).array().exp()).inverse().matrix();
        Eigen::VectorXd grad = x.transpose() * (p - y);
        grad.head(f) += w.head(f);
        Eigen::MatrixXd hess = x.transpose() * (p.array() * (1.0 - p.array())).matrix().asDiagonal() * x;
        hess.diagonal().head(f).array() += 1.0;
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        w -= step;
        if (step.norm() < 1e-10) break;
    }
    const Eigen::VectorXd s = scale(test_set.features) * w;
    return pair_count_auroc(test_set.labels, std::vector<double>(s.data(), s.data() + s.size()));
}

// ---- criteria ---------------------------------------------------------------

Outcome numerical_core() {
    Outcome o;
    Rng rng(101);
    const std::pair<int, int> shapes[] = {{1, 4}, {2, 5}, {3, 3}, {2, 8}};
    double worst_grad = 0.0;
    for (int k = 0; k < 4; ++k) {
        ModelConfig cfg;
        cfg.n_hidden_layers = shapes[k].first;
        cfg.neurons_per_layer = shapes[k].second;
        cfg.seed = 500 + static_cast<std::uint64_t>(k);
        auto model = init_model(cfg, 6);
        for (auto& layer : model.layers) layer.bias.setConstant(0.05);
        const Eigen::MatrixXd x = random_matrix(12, 6, rng);
        std::vector<int> y(12);
        for (int i = 0; i < 12; ++i) y[static_cast<std::size_t>(i)] = i % 2;
        worst_grad = std::max(worst_grad, max_gradient_error(model, x, y));
    }
    o.require(worst_grad < 1e-4, "gradient error " + num(worst_grad));

    double worst_roundtrip = 0.0, worst_self = 0.0;
    for (int k = 0; k < 25; ++k) {
        const Eigen::MatrixXd c = random_spd(2 + k % 12, rng);
        const Eigen::MatrixXd l = spd_logm(c);
        worst_roundtrip = std::max(worst_roundtrip, (taylor_expm(l) - c).norm() / c.norm());
        worst_roundtrip = std::max(worst_roundtrip, (sym_expm(l) - c).norm() / c.norm());
        worst_self = std::max(worst_self, tangent_embed(c, c).values.cwiseAbs().maxCoeff());
    }
    o.require(worst_roundtrip < 1e-8, "logm/expm roundtrip " + num(worst_roundtrip));
    o.require(worst_self < 1e-10, "tangent_embed(ref, ref) " + num(worst_self));

    int mismatches = 0;
    for (int instance = 0; instance < 100; ++instance) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<int> y(n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2));
            s[i] = instance % 2 ? rng.normal() : static_cast<double>(rng.below(6));
        }
        if (auroc(y, s) != pair_count_auroc(y, s)) ++mismatches;
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " AUROC mismatches");
    o.detail += std::string(o.detail.empty() ? "" : "; ") + "max gradient error " + num(worst_grad) + ", roundtrip " +
                num(worst_roundtrip);
    return o;
}

RunConfig recovery_config(const fs::path& out, std::uint64_t seed, bool planted, int workers) {
    RunConfig c;
    c.out_dir = out;
    c.seed = seed;
    c.workers = workers;
    c.regions = 16;
    c.n_control = 150;
    c.n_case = 150;
    c.timepoints = 300;
    c.n_effects = planted ? 3 : 0;
    return c;
}

struct PipelineRun {
    double cv_best = 0.0;
    double test_auroc = 0.0;
    double logistic_auroc = 0.0;
    int planted_in_top = 0;
    int planted_total = 0;
    int features_at_tau = 0;
    PfiOutcome pfi;
};

PipelineRun run_pipeline(const RunConfig& c) {
    PipelineRun r;
    const auto g = cmd_generate(c);
    const auto f = cmd_features(c);
    cmd_search(c);
    const auto t = cmd_train(c);
    r.pfi = cmd_pfi(c);
    r.cv_best = t.best_trial.mean_auroc;
    r.test_auroc = t.test_auroc;
    r.logistic_auroc =
        logistic_baseline_auroc(f.dataset.subset(f.split.train), f.dataset.subset(f.split.test));
    std::set<std::pair<int, int>> top;
    for (const auto& rec : read_importance_csv(c.out("importance.csv")))
        top.insert({rec.region_pair.i, rec.region_pair.j});
    for (const auto& e : g.effects) {
        ++r.planted_total;
        if (top.count(std::minmax(e.i, e.j))) ++r.planted_in_top;
    }
    for (Eigen::Index k = 0; k < r.pfi.z.size(); ++k)
        if (r.pfi.z(k) >= c.tau) ++r.features_at_tau;
    return r;
}

Outcome protocol_fidelity(const RunConfig& c, const PipelineRun& run) {
    Outcome o;
    const auto trials = read_trials_csv(c.out("trials.csv"));
    std::size_t trainings = 0;
    for (const auto& t : trials) trainings += t.fold_aurocs.size();
    o.require(trials.size() == 50, "trials.csv has " + std::to_string(trials.size()) + " rows");
    o.require(trainings == 150, std::to_string(trainings) + " trainings");
    const auto header = io::read_csv(c.out("trials.csv")).header;
    o.require(std::count_if(header.begin(), header.end(),
                            [](const std::string& h) { return h.rfind("fold", 0) == 0; }) == 3,
              "trials.csv does not hold 3 folds");

    const auto kde = nlohmann::json::parse(io::read_text(c.out("kde.json")));
    o.require(kde["top_trial_ids"].size() == 10 && kde["bottom_trial_ids"].size() == 10, "quantile sets are not 10/10");

    const auto records = read_importance_csv(c.out("importance.csv"));
    o.require(records.size() == 15, "importance.csv has " + std::to_string(records.size()) + " rows");
    const auto svg = io::read_text(c.out("importance.svg"));
    std::size_t bars = 0;
    for (auto p = svg.find("class=\"bar\""); p != std::string::npos; p = svg.find("class=\"bar\"", p + 1)) ++bars;
    o.require(bars == 15, std::to_string(bars) + " bars in importance.svg");

    const auto edges = nlohmann::json::parse(io::read_text(c.out("edges.json")));
    bool all_above = true;
    for (const auto& e : edges) all_above = all_above && e["z"].get<double>() >= 6.0;
    o.require(all_above, "edges.json holds an edge with z < 6");
    o.require(static_cast<int>(edges.size()) == run.features_at_tau, "edges.json count differs from |{z >= 6}|");

    // Inclusive threshold: a feature sitting exactly at 6 is exported.
    const auto pairs = upper_triangle_pairs(4);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pairs.size()));
    z(3) = 6.0;
    z(5) = 5.999999;
    const auto at_tau = threshold_edges(z, pairs, make_atlas(4, 0), 6.0);
    o.require(at_tau.size() == 1 && at_tau[0].z == 6.0, "z = 6 is not kept by the edge filter");
    return o;
}

Outcome kde_landscape() {
    Outcome o;
    SearchSpace space;
    std::vector<TrialRecord> trials;
    Rng rng(4);
    auto add = [&](int layers, int neurons, double score) {
        TrialRecord t;
        t.trial_id = static_cast<int>(trials.size());
        t.config.n_hidden_layers = layers;
        t.config.neurons_per_layer = neurons;
        t.fold_aurocs = {score, score, score};
        t.mean_auroc = score;
        trials.push_back(t);
    };
    const int good_layers[] = {3, 3, 3, 3, 4, 2, 3, 3, 4, 3};
    const int good_neurons[] = {16, 16, 16, 32, 16, 16, 8, 16, 16, 16};
    const int bad_layers[] = {2, 2, 2, 2, 1, 3, 2, 2, 1, 2};
    const int bad_neurons[] = {256, 256, 256, 128, 256, 256, 512, 256, 256, 256};
    for (int k = 0; k < 10; ++k) add(good_layers[k], good_neurons[k], 0.85 + 0.01 * rng.uniform());
    for (int k = 0; k < 10; ++k) add(bad_layers[k], bad_neurons[k], 0.55 + 0.01 * rng.uniform());
    for (int k = 0; k < 30; ++k)
        add(1 + static_cast<int>(rng.below(6)), 8 << rng.below(7), 0.65 + 0.1 * rng.uniform());

    const auto r = analyze_trials(trials, space, 0.2);
    o.require(r.peak_top.layers == 3 && r.peak_top.neurons == 16,
              "top peak (" + std::to_string(r.peak_top.layers) + ", " + std::to_string(r.peak_top.neurons) + ")");
    o.require(r.peak_bottom.layers == 2 && r.peak_bottom.neurons == 256,
              "bottom peak (" + std::to_string(r.peak_bottom.layers) + ", " + std::to_string(r.peak_bottom.neurons) +
                  ")");
    o.require(r.adequacy_top.adequate, "top peak reported at the edge of the range");
    o.require(r.adequacy_bottom.adequate, "bottom peak reported at the edge of the range");
    return o;
}

Outcome determinism(const RunConfig& first, const fs::path& out) {
    Outcome o;
    auto again = first;
    again.out_dir = out;
    run_pipeline(again);
    for (const char* name : {"trials.csv", "importance.csv", "model.json"})
        o.require(io::read_text(first.out(name)) == io::read_text(again.out(name)), std::string(name) + " differs");
    return o;
}

Outcome cross_granularity(const fs::path& root, int workers, int n_seeds) {
    Outcome o;
    int hits = 0;
    std::string per_seed;
    for (int s = 1; s <= n_seeds; ++s) {
        std::vector<fs::path> tables;
        std::set<BaPair> planted;
        for (int regions : {16, 32, 64}) {
            RunConfig c;
            c.out_dir = root / ("seed" + std::to_string(s)) / ("r" + std::to_string(regions));
            c.seed = static_cast<std::uint64_t>(s);
            c.workers = workers;
            c.regions = regions;
            c.n_control = 150;
            c.n_case = 150;
            c.timepoints = 300;
            c.n_effects = 3;
            // A narrow search keeps three granularities per seed affordable.
            c.n_trials = 10;
            c.k = 2;
            c.layers_choices = {2};
            c.neurons_choices = {32};
            c.dropout_range = {0.0, 0.2};
            c.lr_log10_range = {-3.0, -2.5};
            const auto g = cmd_generate(c);
            cmd_features(c);
            cmd_search(c);
            cmd_train(c);
            cmd_pfi(c);
            tables.push_back(c.out("importance.csv"));
            std::set<BaPair> here;
            for (const auto& e : g.effects)
                here.insert(std::minmax(*g.atlas.regions[static_cast<std::size_t>(e.i)].brodmann_hint,
                                        *g.atlas.regions[static_cast<std::size_t>(e.j)].brodmann_hint));
            if (planted.empty()) planted = here;
            o.require(planted == here, "planted BA pairs differ across granularities");
        }
        RunConfig cmp;
        cmp.out_dir = root / ("seed" + std::to_string(s)) / "compare";
        cmp.compare_inputs = tables;
        const auto report = cmd_compare(cmp);
        int found = 0;
        for (const auto& p : planted) found += static_cast<int>(report.common_pairs.count(p));
        per_seed += (per_seed.empty() ? "" : " ") + std::to_string(found) + "/" + std::to_string(planted.size());
        if (found == static_cast<int>(planted.size())) ++hits;
        fs::remove_all(root / ("seed" + std::to_string(s)));
    }
    o.require(hits >= 4, "planted BA pairs common in " + std::to_string(hits) + " of " + std::to_string(n_seeds) +
                             " seeds");
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("per seed ") + per_seed;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fcprobe acceptance run"};
    std::string workdir = (fs::temp_directory_path() / "fcprobe_acceptance").string();
    std::vector<int> only;
    int workers = 0;
    bool keep = false;
    app.add_option("--workdir", workdir, "scratch directory (wiped first)");
    app.add_option("--only", only, "run only these criteria");
    app.add_option("--workers", workers, "worker threads (0 = all cores)");
    app.add_flag("--keep", keep, "keep the scratch directory");
    CLI11_PARSE(app, argc, argv);

    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    const fs::path root(workdir);
    fs::remove_all(root);
    fs::create_directories(root);
    bool all_pass = true;

    try {
        if (wanted(1)) {
            const auto t0 = Clock::now();
            auto o = numerical_core();
            const double secs = seconds_since(t0);
            o.require(secs < 60.0, "runtime over 1 minute");
            report(1, "numerical core", o, secs);
            all_pass = all_pass && o.pass;
        }

        if (wanted(2) || wanted(3) || wanted(5)) {
            const auto t0 = Clock::now();
            std::vector<PipelineRun> planted, null;
            RunConfig first;
            for (std::uint64_t s = 1; s <= 5; ++s) {
                const auto cp = recovery_config(root / ("planted" + std::to_string(s)), s, true, workers);
                planted.push_back(run_pipeline(cp));
                if (s == 1) first = cp;
                if (!wanted(3)) break;
                const auto cn = recovery_config(root / ("null" + std::to_string(s)), s, false, workers);
                null.push_back(run_pipeline(cn));
                const auto& p = planted.back();
                const auto& n = null.back();
                std::printf("  seed %llu: logistic %.3f, cv %.3f, test %.3f, planted in top-15 %d/%d | null test %.3f, "
                            "z>=6 %d\n",
                            static_cast<unsigned long long>(s), p.logistic_auroc, p.cv_best, p.test_auroc,
                            p.planted_in_top, p.planted_total, n.test_auroc, n.features_at_tau);
                std::fflush(stdout);
            }
            const double secs = seconds_since(t0);

            if (wanted(2)) {
                const auto o = protocol_fidelity(first, planted.front());
                report(2, "protocol fidelity", o, secs);
                all_pass = all_pass && o.pass;
            }
            if (wanted(3)) {
                Outcome o;
                int cv_ok = 0, calibrated = 0, recovered = 0, null_ok = 0;
                for (std::size_t k = 0; k < planted.size(); ++k) {
                    calibrated += planted[k].logistic_auroc >= 0.90;
                    cv_ok += planted[k].cv_best >= 0.80;
                    recovered += planted[k].planted_in_top == planted[k].planted_total;
                    null_ok += null[k].test_auroc >= 0.35 && null[k].test_auroc <= 0.65 && null[k].features_at_tau == 0;
                }
                o.require(calibrated == 5, "logistic baseline >= 0.90 in " + std::to_string(calibrated) + "/5");
                o.require(cv_ok == 5, "best CV AUROC >= 0.80 in " + std::to_string(cv_ok) + "/5");
                o.require(recovered >= 4, "planted edges in top-15 in " + std::to_string(recovered) + "/5");
                o.require(null_ok >= 4, "null cohort clean in " + std::to_string(null_ok) + "/5");
                o.require(secs < 15 * 60.0, "runtime over 15 minutes");
                o.detail += (o.detail.empty() ? "" : "; ") + std::string("recovered ") + std::to_string(recovered) +
                            "/5, null clean " + std::to_string(null_ok) + "/5";
                report(3, "planted-edge recovery", o, secs);
                all_pass = all_pass && o.pass;
            }
            if (wanted(5)) {
                const auto t1 = Clock::now();
                const auto o = determinism(first, root / "rerun");
                report(5, "determinism", o, seconds_since(t1));
                all_pass = all_pass && o.pass;
            }
        }

        if (wanted(4)) {
            const auto t0 = Clock::now();
            auto o = kde_landscape();
            const double secs = seconds_since(t0);
            o.require(secs < 10.0, "runtime over 10 seconds");
            report(4, "KDE landscape recovery", o, secs);
            all_pass = all_pass && o.pass;
        }

        if (wanted(6)) {
            const auto t0 = Clock::now();
            const auto o = cross_granularity(root / "granularity", workers, 5);
            report(6, "cross-granularity overlap", o, seconds_since(t0));
            all_pass = all_pass && o.pass;
        }
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        all_pass = false;
    }

    if (!keep) fs::remove_all(root);
    std::printf("%s\n", all_pass ? "ALL PASS" : "SOME CRITERIA FAILED");
    return all_pass ? 0 : 1;
}
