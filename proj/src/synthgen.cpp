#include "fcprobe/synthgen.h"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "fcprobe/error.h"
#include "fcprobe/io.h"
#include "fcprobe/rng.h"

namespace fcprobe {

std::string to_string(FunctionalLabel label) {
    switch (label) {
        case FunctionalLabel::Motor: return "motor";
        case FunctionalLabel::Language: return "language";
        case FunctionalLabel::Other: return "other";
    }
    return "other";
}

FunctionalLabel parse_functional_label(const std::string& s) {
    if (s == "motor") return FunctionalLabel::Motor;
    if (s == "language") return FunctionalLabel::Language;
    if (s == "other") return FunctionalLabel::Other;
    fail(ErrorKind::InvalidInput, "unknown functional label '" + s + "'");
}

void Atlas::validate() const {
    for (std::size_t k = 0; k < regions.size(); ++k) {
        const auto& r = regions[k];
        if (r.id != static_cast<int>(k))
            fail(ErrorKind::InvalidInput, "atlas '" + name + "': region ids must be 0..R-1 without gaps");
        for (double c : r.centroid)
            if (!std::isfinite(c)) fail(ErrorKind::InvalidInput, "atlas '" + name + "': non-finite centroid");
    }
}

Atlas make_atlas(int regions, std::uint64_t seed) {
    if (regions < 2) fail(ErrorKind::InvalidInput, "an atlas needs at least 2 regions");
    Rng rng(derive_seed(seed, {0xa71a5}));
    Atlas atlas;
    atlas.name = "synthetic-" + std::to_string(regions);
    for (int id = 0; id < regions; ++id) {
        Region r;
        r.id = id;
        r.name = "roi_" + std::to_string(id);
        for (int a = 0; a < 3; ++a) r.centroid[static_cast<std::size_t>(a)] = rng.uniform(-1.0, 1.0) * kBrainHalfExtent[static_cast<std::size_t>(a)];
        r.functional_label = static_cast<FunctionalLabel>(id % 3);
        atlas.regions.push_back(std::move(r));
    }
    return atlas;
}

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
    return m;
}

Eigen::MatrixXd with_effects(const Eigen::MatrixXd& base, std::span<const PlantedEffect> effects) {
    Eigen::MatrixXd out = base;
    for (const auto& e : effects) {
        out(e.i, e.j) += e.delta;
        out(e.j, e.i) += e.delta;
    }
    return out;
}

std::string pair_text(const PlantedEffect& e) {
    return "(" + std::to_string(e.i) + ", " + std::to_string(e.j) + ")";
}

}  // namespace

Eigen::MatrixXd random_correlation(int regions, std::uint64_t seed) {
    Rng rng(seed);
    const Eigen::MatrixXd g = gaussian_matrix(regions, regions, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd rmat = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int c = 0; c < regions; ++c)
        if (rmat(c, c) < 0.0) q.col(c) = -q.col(c);

    Eigen::VectorXd eigenvalues(regions);
    for (int k = 0; k < regions; ++k) eigenvalues(k) = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    Eigen::MatrixXd sigma = q * eigenvalues.asDiagonal() * q.transpose();
    const Eigen::VectorXd inv_sd = sigma.diagonal().array().rsqrt();
    sigma = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
    sigma = (0.5 * (sigma + sigma.transpose())).eval();
    sigma.diagonal().setOnes();
    return sigma;
}

Cohort generate_cohort(const Atlas& atlas, std::span<const PlantedEffect> effects, const CohortSpec& spec) {
    atlas.validate();
    const int r = atlas.size();
    if (r < 2) fail(ErrorKind::InvalidInput, "atlas needs at least 2 regions");
    if (spec.n_control < 0 || spec.n_case < 0) fail(ErrorKind::InvalidInput, "group sizes must be non-negative");
    if (spec.timepoints < r + 1)
        fail(ErrorKind::InvalidInput, "timepoints (" + std::to_string(spec.timepoints) + ") must be at least R+1 = " +
                                          std::to_string(r + 1));
    if (!(spec.noise_scale >= 0.0) || !std::isfinite(spec.noise_scale))
        fail(ErrorKind::InvalidInput, "noise_scale must be >= 0");
    for (const auto& e : effects) {
        if (!(e.i >= 0 && e.i < e.j && e.j < r))
            fail(ErrorKind::InvalidEffect, "effect pair " + pair_text(e) + " must satisfy 0 <= i < j < R");
        if (!std::isfinite(e.delta)) fail(ErrorKind::InvalidEffect, "effect " + pair_text(e) + " has non-finite delta");
    }

    Cohort cohort;
    cohort.control_covariance = random_correlation(r, derive_seed(spec.seed, {1}));
    cohort.case_covariance = with_effects(cohort.control_covariance, effects);
    if (!is_spd(cohort.case_covariance)) {
        std::string offending;
        for (const auto& e : effects)
            if (!is_spd(with_effects(cohort.control_covariance, std::span(&e, 1))))
                offending += (offending.empty() ? "" : " ") + pair_text(e);
        if (offending.empty())
            for (const auto& e : effects) offending += (offending.empty() ? "" : " ") + pair_text(e);
        fail(ErrorKind::InvalidEffect, "case covariance is not SPD; offending pairs: " + offending);
    }

    const Eigen::LLT<Eigen::MatrixXd> control_llt(cohort.control_covariance);
    const Eigen::LLT<Eigen::MatrixXd> case_llt(cohort.case_covariance);
    const int n = spec.n_control + spec.n_case;
    cohort.subjects.resize(static_cast<std::size_t>(n));
    cohort.labels.resize(static_cast<std::size_t>(n));
    const double jitter_norm = 1.0 / (2.0 * std::sqrt(static_cast<double>(r)));

    for (int s = 0; s < n; ++s) {
        const int label = s < spec.n_control ? 0 : 1;
        Rng rng(derive_seed(spec.seed, {2, static_cast<std::uint64_t>(s)}));
        const Eigen::MatrixXd& group = label == 0 ? cohort.control_covariance : cohort.case_covariance;

        Eigen::MatrixXd subject_cov = group;
        if (spec.noise_scale > 0.0) {
            const Eigen::MatrixXd b = gaussian_matrix(r, r, rng);
            const Eigen::MatrixXd a = (b + b.transpose()) * jitter_norm;
            const Eigen::MatrixXd half_jitter = sym_expm(0.5 * spec.noise_scale * a);
            subject_cov = half_jitter * group * half_jitter;
            subject_cov = (0.5 * (subject_cov + subject_cov.transpose())).eval();
        }
        Eigen::LLT<Eigen::MatrixXd> llt(subject_cov);
        if (llt.info() != Eigen::Success)
            fail(ErrorKind::NumericalFailure, "subject covariance lost positive definiteness");
        const Eigen::MatrixXd z = gaussian_matrix(spec.timepoints, r, rng);

        char id[32];
        std::snprintf(id, sizeof id, "sub-%04d", s);
        auto& ts = cohort.subjects[static_cast<std::size_t>(s)];
        ts.subject_id = id;
        ts.data = z * llt.matrixL().transpose();
        cohort.labels[static_cast<std::size_t>(s)] = label;
    }
    return cohort;
}

void write_atlas_csv(const std::filesystem::path& path, const Atlas& atlas) {
    std::string out = "id,name,x,y,z,functional_label,brodmann_hint\n";
    for (const auto& r : atlas.regions) {
        out += std::to_string(r.id) + "," + r.name;
        for (double c : r.centroid) out += "," + io::format_double(c);
        out += "," + to_string(r.functional_label) + ",";
        if (r.brodmann_hint) out += std::to_string(*r.brodmann_hint);
        out += "\n";
    }
    io::write_text(path, out);
}

Atlas read_atlas_csv(const std::filesystem::path& path) {
    const auto table = io::read_csv(path);
    const auto c_id = table.column("id");
    const auto c_name = table.column("name");
    const auto c_x = table.column("x");
    const auto c_y = table.column("y");
    const auto c_z = table.column("z");
    const auto c_label = table.column("functional_label");
    const auto c_hint = table.column("brodmann_hint");
    Atlas atlas;
    atlas.name = path.stem().string();
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        const auto& row = table.rows[k];
        const std::size_t line = k + 2;
        if (row.size() != table.header.size())
            fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line) + ": wrong field count");
        Region r;
        r.id = static_cast<int>(io::parse_int(row[c_id], path, line));
        r.name = row[c_name];
        r.centroid = {io::parse_double(row[c_x], path, line), io::parse_double(row[c_y], path, line),
                      io::parse_double(row[c_z], path, line)};
        r.functional_label = parse_functional_label(row[c_label]);
        if (!row[c_hint].empty()) r.brodmann_hint = static_cast<int>(io::parse_int(row[c_hint], path, line));
        atlas.regions.push_back(std::move(r));
    }
    atlas.validate();
    return atlas;
}

void write_effects_json(const std::filesystem::path& path, std::span<const PlantedEffect> effects) {
    auto j = nlohmann::json::array();
    for (const auto& e : effects) j.push_back({{"i", e.i}, {"j", e.j}, {"delta", e.delta}});
    io::write_text(path, j.dump(1) + "\n");
}

std::vector<PlantedEffect> read_effects_json(const std::filesystem::path& path) {
    std::vector<PlantedEffect> out;
    try {
        for (const auto& e : nlohmann::json::parse(io::read_text(path)))
            out.push_back({e.at("i").get<int>(), e.at("j").get<int>(), e.at("delta").get<double>()});
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::InvalidInput, path.string() + ": " + ex.what());
    }
    return out;
}

std::filesystem::path write_cohort(const std::filesystem::path& dir, const Cohort& cohort) {
    std::vector<ManifestEntry> entries;
    for (std::size_t s = 0; s < cohort.subjects.size(); ++s) {
        const auto& ts = cohort.subjects[s];
        const std::filesystem::path rel = std::filesystem::path("subjects") / (ts.subject_id + ".csv");
        write_time_series(dir / rel, ts);
        entries.push_back({ts.subject_id, rel, cohort.labels[s]});
    }
    const auto manifest = dir / "manifest.csv";
    write_manifest(manifest, entries);
    return manifest;
}

}  // namespace fcprobe
