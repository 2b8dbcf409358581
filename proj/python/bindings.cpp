#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "fcprobe/connectivity.h"
#include "fcprobe/error.h"
#include "fcprobe/evaluation.h"
#include "fcprobe/importance.h"
#include "fcprobe/model.h"
#include "fcprobe/pipeline.h"
#include "fcprobe/search.h"
#include "fcprobe/synthgen.h"

namespace py = pybind11;
using namespace fcprobe;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& x, const std::vector<int>& y) {
    Dataset d;
    d.features = x;
    d.labels = y;
    for (Eigen::Index r = 0; r < x.rows(); ++r) d.subject_ids.push_back("s" + std::to_string(r));
    // Pairs are only labels here; number features as the upper triangle when it fits.
    int regions = 0;
    while (regions * (regions + 1) / 2 < x.cols()) ++regions;
    if (regions * (regions + 1) / 2 == x.cols()) d.feature_pairs = upper_triangle_pairs(regions);
    else
        for (Eigen::Index c = 0; c < x.cols(); ++c) d.feature_pairs.push_back({0, static_cast<int>(c)});
    d.validate();
    return d;
}

// Python dicts cross the boundary as JSON text.
nlohmann::json to_json_value(const py::handle& obj) {
    const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return nlohmann::json::parse(text);
}

py::object from_json_value(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

RunConfig run_config(const py::dict& settings) {
    RunConfig c;
    apply_json(c, to_json_value(settings), "settings");
    c.validate();
    return c;
}

py::dict record_dict(const ImportanceRecord& r) {
    py::dict d;
    d["rank"] = r.rank;
    d["feature_index"] = r.feature_index;
    d["region_pair"] = py::make_tuple(r.region_pair.i, r.region_pair.j);
    d["raw_importance"] = r.raw_importance;
    d["z_score"] = r.z_score;
    d["ba_pair"] = r.ba_pair ? py::object(py::make_tuple(r.ba_pair->first, r.ba_pair->second)) : py::none();
    return d;
}

}  // namespace

PYBIND11_MODULE(_fcprobe, m) {
    m.doc() = "Functional-connectivity classification, architecture search and feature importance";
    m.attr("__version__") = FCPROBE_VERSION;

    static py::handle error_type = PyErr_NewException("fcprobe._fcprobe.FcprobeError", PyExc_ValueError, nullptr);
    m.attr("FcprobeError") = error_type;
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = error_type(e.what());
            exc.attr("kind") = to_string(e.kind());
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    // connectivity
    m.def(
        "estimate_covariance",
        [](const Eigen::MatrixXd& series, double shrinkage) {
            return estimate_covariance(TimeSeriesMatrix{"py", series}, shrinkage);
        },
        py::arg("series"), py::arg("shrinkage") = 0.05, "Shrunk covariance of a timepoints x regions array.");
    m.def("spd_logm", &spd_logm, py::arg("matrix"));
    m.def("sym_expm", &sym_expm, py::arg("matrix"));
    m.def(
        "reference_mean",
        [](const std::vector<Eigen::MatrixXd>& covs, const std::string& mode, double tol, int max_iter) {
            const auto r = reference_mean(covs, parse_mean_mode(mode), tol, max_iter);
            return py::make_tuple(r.matrix, r.converged, r.iterations);
        },
        py::arg("covs"), py::arg("mode") = "geometric", py::arg("tol") = 1e-6, py::arg("max_iter") = 50,
        "Returns (matrix, converged, iterations).");
    m.def(
        "tangent_embed", [](const Eigen::MatrixXd& cov, const Eigen::MatrixXd& ref) { return tangent_embed(cov, ref).values; },
        py::arg("cov"), py::arg("ref"));
    m.def(
        "upper_triangle_pairs",
        [](int regions) {
            std::vector<std::pair<int, int>> out;
            for (const auto& p : upper_triangle_pairs(regions)) out.emplace_back(p.i, p.j);
            return out;
        },
        py::arg("regions"));

    // evaluation
    m.def(
        "auroc", [](const std::vector<int>& y, const std::vector<double>& s) { return auroc(y, s); }, py::arg("labels"),
        py::arg("scores"));
    m.def(
        "stratified_split",
        [](const std::vector<int>& y, double test_fraction, std::uint64_t seed) {
            const auto s = stratified_split(y, test_fraction, seed);
            return py::make_tuple(s.train, s.test);
        },
        py::arg("labels"), py::arg("test_fraction") = 0.2, py::arg("seed") = 0, "Returns (train_rows, test_rows).");
    m.def(
        "kfold_indices",
        [](const std::vector<int>& y, int k, std::uint64_t seed) {
            py::list out;
            for (const auto& f : kfold_indices(y, k, seed)) out.append(py::make_tuple(f.train, f.val));
            return out;
        },
        py::arg("labels"), py::arg("k") = 3, py::arg("seed") = 0);

    // synthgen
    m.def(
        "make_cohort",
        [](int regions, int n_control, int n_case, int timepoints, const std::vector<std::tuple<int, int, double>>& effects,
           double noise_scale, std::uint64_t seed) {
            const auto atlas = make_atlas(regions, seed);
            std::vector<PlantedEffect> planted;
            for (const auto& [i, j, delta] : effects) planted.push_back({i, j, delta});
            const auto cohort = generate_cohort(atlas, planted, {n_control, n_case, timepoints, noise_scale, seed});
            std::vector<Eigen::MatrixXd> series;
            for (const auto& s : cohort.subjects) series.push_back(s.data);
            return py::make_tuple(series, cohort.labels);
        },
        py::arg("regions"), py::arg("n_control"), py::arg("n_case"), py::arg("timepoints"),
        py::arg("effects") = std::vector<std::tuple<int, int, double>>{}, py::arg("noise_scale") = 0.1,
        py::arg("seed") = 0, "Synthetic cohort: returns (list of timepoints x regions arrays, labels).");

    // model
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("n_hidden_layers", &ModelConfig::n_hidden_layers)
        .def_readwrite("neurons_per_layer", &ModelConfig::neurons_per_layer)
        .def_readwrite("dropout_rate", &ModelConfig::dropout_rate)
        .def_readwrite("learning_rate", &ModelConfig::learning_rate)
        .def_readwrite("batch_size", &ModelConfig::batch_size)
        .def_readwrite("max_epochs", &ModelConfig::max_epochs)
        .def_readwrite("patience", &ModelConfig::patience)
        .def_readwrite("seed", &ModelConfig::seed)
        .def("validate", &ModelConfig::validate)
        .def("__repr__", [](const ModelConfig& c) { return "ModelConfig(" + to_json(c).dump() + ")"; });

    py::class_<TrainedModel>(m, "Model")
        .def_readonly("config", &TrainedModel::config)
        .def_readonly("input_dim", &TrainedModel::input_dim)
        .def_property_readonly("history",
                               [](const TrainedModel& t) {
                                   py::list out;
                                   for (const auto& e : t.history)
                                       out.append(py::make_tuple(e.epoch, e.train_loss, e.val_auroc));
                                   return out;
                               })
        .def("predict_proba", [](const TrainedModel& t, const Eigen::MatrixXd& x) { return predict_proba(t, x); })
        .def("save", [](const TrainedModel& t, const std::filesystem::path& p) { save_model(p, t); })
        .def("to_json", [](const TrainedModel& t) { return from_json_value(to_json(t)); });

    m.def("init_model", &init_model, py::arg("config"), py::arg("input_dim"));
    m.def("load_model", &load_model, py::arg("path"));
    m.def(
        "train",
        [](const ModelConfig& config, const Eigen::MatrixXd& x_train, const std::vector<int>& y_train,
           const Eigen::MatrixXd& x_val, const std::vector<int>& y_val) {
            const auto tr = make_dataset(x_train, y_train);
            const auto va = make_dataset(x_val, y_val);
            py::gil_scoped_release release;
            return train(init_model(config, static_cast<int>(x_train.cols())), tr, va);
        },
        py::arg("config"), py::arg("x_train"), py::arg("y_train"), py::arg("x_val"), py::arg("y_val"),
        "Train from a fresh initialisation with early stopping on the validation rows.");

    // importance
    m.def(
        "pfi",
        [](const TrainedModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y, int repeats,
           std::uint64_t seed, int workers) {
            const auto d = make_dataset(x, y);
            py::gil_scoped_release release;
            return pfi(model, d, {repeats, seed, workers});
        },
        py::arg("model"), py::arg("x"), py::arg("y"), py::arg("repeats") = 5, py::arg("seed") = 0,
        py::arg("workers") = 1);
    m.def("zscores", &zscores, py::arg("raw"));
    m.def(
        "zscore_rank",
        [](const Eigen::VectorXd& raw, int top_k) {
            std::vector<RegionPair> pairs;
            for (Eigen::Index k = 0; k < raw.size(); ++k) pairs.push_back({0, static_cast<int>(k)});
            py::list out;
            for (const auto& r : zscore_rank(raw, pairs, top_k)) out.append(record_dict(r));
            return out;
        },
        py::arg("raw"), py::arg("top_k") = 15);

    // search
    m.def(
        "kde_peaks",
        [](const std::vector<std::tuple<int, int, double>>& trials, double q) {
            std::vector<TrialRecord> records;
            for (const auto& [layers, neurons, score] : trials) {
                TrialRecord t;
                t.trial_id = static_cast<int>(records.size());
                t.config.n_hidden_layers = layers;
                t.config.neurons_per_layer = neurons;
                t.fold_aurocs = {score};
                t.mean_auroc = score;
                records.push_back(t);
            }
            return from_json_value(to_json(analyze_trials(records, SearchSpace{}, q)));
        },
        py::arg("trials"), py::arg("q") = 0.2,
        "KDE analysis of (layers, neurons, score) trials over the default search space; returns the kde.json object.");

    // pipeline
    m.def(
        "default_settings", [] { return from_json_value(to_json(RunConfig{})); },
        "Every pipeline setting with its default value.");
    m.def(
        "run",
        [](const std::string& command, const py::dict& settings) -> py::object {
            const auto c = run_config(settings);
            py::gil_scoped_release release;
            if (command == "generate") {
                const auto g = cmd_generate(c);
                py::gil_scoped_acquire hold;
                return py::cast(g.manifest);
            }
            if (command == "features") {
                const auto f = cmd_features(c);
                py::gil_scoped_acquire hold;
                return py::cast(f.dataset.n_features());
            }
            if (command == "search") {
                const auto s = cmd_search(c);
                py::gil_scoped_acquire hold;
                return py::cast(s.trials.size());
            }
            if (command == "train") {
                const auto t = cmd_train(c);
                py::gil_scoped_acquire hold;
                return py::cast(t.test_auroc);
            }
            if (command == "pfi") {
                const auto p = cmd_pfi(c);
                py::gil_scoped_acquire hold;
                py::list out;
                for (const auto& r : p.records) out.append(record_dict(r));
                return out;
            }
            if (command == "compare") {
                const auto r = cmd_compare(c);
                py::gil_scoped_acquire hold;
                return from_json_value(to_json(r));
            }
            py::gil_scoped_acquire hold;
            throw py::value_error("unknown command " + command);
        },
        py::arg("command"), py::arg("settings"),
        "Run one pipeline command with settings keyed like the config file's `pipeline` object. Returns: generate -> "
        "manifest path, features -> feature count, search -> trial count, train -> test AUROC, pfi -> top records, "
        "compare -> overlap report.");
}
