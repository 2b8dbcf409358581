#include "fcprobe/connectivity.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "fcprobe/error.h"
#include "fcprobe/io.h"
#include "fcprobe/parallel.h"

namespace fcprobe {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kSingularRatio = 1e-12;

void require_symmetric(const Eigen::MatrixXd& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) fail(ErrorKind::InvalidInput, std::string(what) + ": not a square matrix");
    if (!m.allFinite()) fail(ErrorKind::InvalidInput, std::string(what) + ": non-finite entries");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
        fail(ErrorKind::InvalidInput, std::string(what) + ": matrix is not symmetric");
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// V * diag(f(w)) * V^T for an SPD input; f is only applied after the singularity check.
template <typename Fn>
Eigen::MatrixXd spd_function(const Eigen::MatrixXd& m, Fn f, const char* what) {
    const auto eig = spd_eig(m);
    const double largest = eig.values(0);
    const double smallest = eig.values(eig.values.size() - 1);
    if (!(largest > 0.0) || smallest <= kSingularRatio * largest)
        fail(ErrorKind::SingularMatrix, std::string(what) + ": smallest eigenvalue " + io::format_double(smallest, 6) +
                                            " vs largest " + io::format_double(largest, 6));
    const Eigen::VectorXd fw = eig.values.unaryExpr(f);
    return symmetrized(eig.vectors * fw.asDiagonal() * eig.vectors.transpose());
}

}  // namespace

MeanMode parse_mean_mode(const std::string& s) {
    if (s == "geometric") return MeanMode::Geometric;
    if (s == "arithmetic") return MeanMode::Arithmetic;
    fail(ErrorKind::InvalidInput, "mean_mode must be 'geometric' or 'arithmetic', got '" + s + "'");
}

std::string to_string(MeanMode mode) { return mode == MeanMode::Geometric ? "geometric" : "arithmetic"; }

CovMatrix estimate_covariance(const TimeSeriesMatrix& ts, double shrinkage) {
    const auto t = ts.timepoints();
    const auto r = ts.regions();
    if (r == 0) fail(ErrorKind::InvalidInput, ts.subject_id + ": time series has no regions");
    if (t < 2) fail(ErrorKind::InvalidInput, ts.subject_id + ": need at least 2 timepoints");
    if (!ts.data.allFinite()) fail(ErrorKind::InvalidInput, ts.subject_id + ": non-finite time series entries");
    if (!(shrinkage >= 0.0 && shrinkage < 1.0)) fail(ErrorKind::InvalidInput, "shrinkage must lie in [0, 1)");

    const Eigen::MatrixXd centered = ts.data.rowwise() - ts.data.colwise().mean();
    Eigen::MatrixXd s = (centered.transpose() * centered) / static_cast<double>(t - 1);
    s = symmetrized(s);
    const double mu = s.trace() / static_cast<double>(r);
    Eigen::MatrixXd out = (1.0 - shrinkage) * s;
    out.diagonal().array() += shrinkage * mu;
    return out;
}

SpdEigen spd_eig(const Eigen::MatrixXd& m) {
    require_symmetric(m, "spd_eig");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) {
        // Eigen's tridiagonal QR gives up after 30 sweeps per eigenvalue.
        const int limit = 30 * static_cast<int>(m.rows());
        throw NumericalFailure("eigendecomposition did not converge within " + std::to_string(limit) + " iterations",
                               limit);
    }
    // Eigen returns ascending order; flip to descending.
    SpdEigen out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

Eigen::MatrixXd spd_logm(const CovMatrix& m) {
    return spd_function(m, [](double w) { return std::log(w); }, "spd_logm");
}

Eigen::MatrixXd sym_expm(const Eigen::MatrixXd& s) {
    const auto eig = spd_eig(s);
    const Eigen::VectorXd ew = eig.values.array().exp();
    return symmetrized(eig.vectors * ew.asDiagonal() * eig.vectors.transpose());
}

CovMatrix spd_sqrt(const CovMatrix& m) {
    return spd_function(m, [](double w) { return std::sqrt(w); }, "spd_sqrt");
}

CovMatrix spd_invsqrt(const CovMatrix& m) {
    return spd_function(m, [](double w) { return 1.0 / std::sqrt(w); }, "spd_invsqrt");
}

bool is_spd(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    return llt.info() == Eigen::Success;
}

ReferenceMean reference_mean(std::span<const CovMatrix> covs, MeanMode mode, double tol, int max_iter) {
    if (covs.empty()) fail(ErrorKind::InvalidInput, "reference_mean needs at least one matrix");
    const auto r = covs.front().rows();
    Eigen::MatrixXd arithmetic = Eigen::MatrixXd::Zero(r, r);
    for (const auto& c : covs) {
        if (c.rows() != r || c.cols() != r) fail(ErrorKind::InvalidInput, "reference_mean: matrices differ in size");
        arithmetic += c;
    }
    arithmetic /= static_cast<double>(covs.size());

    ReferenceMean out;
    out.matrix = symmetrized(arithmetic);
    if (mode == MeanMode::Arithmetic) return out;
    if (max_iter < 1) fail(ErrorKind::InvalidInput, "max_iter must be >= 1");

    // Fixed point G <- G^1/2 expm(mean_k logm(G^-1/2 C_k G^-1/2)) G^1/2.
    Eigen::MatrixXd g = out.matrix;
    Eigen::MatrixXd best = g;
    double best_norm = std::numeric_limits<double>::infinity();
    out.converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        out.iterations = it;
        const auto eig = spd_eig(g);
        const double smallest = eig.values(eig.values.size() - 1);
        if (!(smallest > kSingularRatio * eig.values(0)))
            fail(ErrorKind::SingularMatrix, "reference_mean: iterate lost positive definiteness");
        const Eigen::VectorXd sw = eig.values.array().sqrt();
        const Eigen::MatrixXd g_sqrt = symmetrized(eig.vectors * sw.asDiagonal() * eig.vectors.transpose());
        const Eigen::MatrixXd g_isqrt =
            symmetrized(eig.vectors * sw.cwiseInverse().asDiagonal() * eig.vectors.transpose());

        Eigen::MatrixXd tangent = Eigen::MatrixXd::Zero(r, r);
        for (const auto& c : covs) tangent += spd_logm(symmetrized(g_isqrt * c * g_isqrt));
        tangent /= static_cast<double>(covs.size());

        const double norm = tangent.norm();
        if (norm < best_norm) {
            best_norm = norm;
            best = g;
        }
        if (norm < tol) {
            out.converged = true;
            break;
        }
        g = symmetrized(g_sqrt * sym_expm(tangent) * g_sqrt);
    }
    out.matrix = best;
    return out;
}

std::vector<RegionPair> upper_triangle_pairs(int regions) {
    std::vector<RegionPair> pairs;
    pairs.reserve(static_cast<std::size_t>(regions) * static_cast<std::size_t>(regions + 1) / 2);
    for (int i = 0; i < regions; ++i)
        for (int j = i; j < regions; ++j) pairs.push_back({i, j});
    return pairs;
}

Eigen::VectorXd vectorize_upper(const Eigen::MatrixXd& sym) {
    const auto r = sym.rows();
    Eigen::VectorXd v(r * (r + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = i; j < r; ++j) v(k++) = i == j ? sym(i, j) : std::numbers::sqrt2 * sym(i, j);
    return v;
}

Eigen::MatrixXd unvectorize_upper(const Eigen::VectorXd& values, int regions) {
    const Eigen::Index r = regions;
    if (values.size() != r * (r + 1) / 2)
        fail(ErrorKind::InvalidInput, "vector length " + std::to_string(values.size()) + " is not R(R+1)/2 for R=" +
                                          std::to_string(regions));
    Eigen::MatrixXd m(r, r);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = i; j < r; ++j) {
            const double v = i == j ? values(k) : values(k) / std::numbers::sqrt2;
            m(i, j) = v;
            m(j, i) = v;
            ++k;
        }
    }
    return m;
}

FeatureVector tangent_embed_whitened(const CovMatrix& cov, const Eigen::MatrixXd& ref_invsqrt) {
    if (cov.rows() != ref_invsqrt.rows() || cov.cols() != ref_invsqrt.cols())
        fail(ErrorKind::InvalidInput, "tangent_embed: covariance and reference differ in size");
    const Eigen::MatrixXd whitened = symmetrized(ref_invsqrt * cov * ref_invsqrt);
    FeatureVector out;
    out.values = vectorize_upper(spd_logm(whitened));
    out.region_pairs = upper_triangle_pairs(static_cast<int>(cov.rows()));
    return out;
}

FeatureVector tangent_embed(const CovMatrix& cov, const CovMatrix& ref) {
    return tangent_embed_whitened(cov, spd_invsqrt(ref));
}

EmbeddedCohort build_dataset(std::span<const TimeSeriesMatrix> cohort, std::span<const int> labels,
                             const EmbeddingOptions& options, std::span<const std::size_t> reference_rows) {
    if (cohort.size() != labels.size())
        fail(ErrorKind::InvalidInput, "cohort has " + std::to_string(cohort.size()) + " subjects but " +
                                          std::to_string(labels.size()) + " labels");
    if (cohort.empty()) fail(ErrorKind::InvalidInput, "empty cohort");
    const auto r = cohort.front().regions();
    for (const auto& ts : cohort)
        if (ts.regions() != r)
            fail(ErrorKind::InvalidInput, "subject " + ts.subject_id + " has " + std::to_string(ts.regions()) +
                                              " regions, expected " + std::to_string(r));

    std::vector<CovMatrix> covs(cohort.size());
    parallel_for(cohort.size(), options.workers,
                 [&](std::size_t s) { covs[s] = estimate_covariance(cohort[s], options.shrinkage); });

    std::vector<CovMatrix> ref_inputs;
    if (reference_rows.empty()) {
        ref_inputs = covs;
    } else {
        for (auto row : reference_rows) {
            if (row >= covs.size()) fail(ErrorKind::InvalidInput, "reference row out of range");
            ref_inputs.push_back(covs[row]);
        }
    }

    EmbeddedCohort out;
    out.reference = reference_mean(ref_inputs, options.mean_mode, options.mean_tol, options.mean_max_iter);
    const Eigen::MatrixXd ref_invsqrt = spd_invsqrt(out.reference.matrix);

    auto& d = out.dataset;
    d.feature_pairs = upper_triangle_pairs(static_cast<int>(r));
    d.features.resize(static_cast<Eigen::Index>(cohort.size()), static_cast<Eigen::Index>(d.feature_pairs.size()));
    parallel_for(cohort.size(), options.workers, [&](std::size_t s) {
        d.features.row(static_cast<Eigen::Index>(s)) = tangent_embed_whitened(covs[s], ref_invsqrt).values.transpose();
    });
    d.labels.assign(labels.begin(), labels.end());
    for (const auto& ts : cohort) d.subject_ids.push_back(ts.subject_id);
    d.validate();
    return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
    const auto table = io::read_csv(manifest);
    const auto c_id = table.column("subject_id");
    const auto c_path = table.column("path");
    const auto c_label = table.column("label");
    const auto base = manifest.parent_path();
    std::vector<ManifestEntry> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        if (row.size() != table.header.size())
            fail(ErrorKind::InvalidInput, manifest.string() + ":" + std::to_string(line) + ": wrong field count");
        ManifestEntry e;
        e.subject_id = row[c_id];
        std::filesystem::path p = row[c_path];
        e.path = p.is_absolute() ? p : base / p;
        e.label = static_cast<int>(io::parse_int(row[c_label], manifest, line));
        if (e.label != 0 && e.label != 1)
            fail(ErrorKind::InvalidInput, manifest.string() + ":" + std::to_string(line) + ": label must be 0 or 1");
        out.push_back(std::move(e));
    }
    return out;
}

void write_manifest(const std::filesystem::path& manifest, std::span<const ManifestEntry> entries) {
    std::string out = "subject_id,path,label\n";
    for (const auto& e : entries)
        out += e.subject_id + "," + e.path.generic_string() + "," + std::to_string(e.label) + "\n";
    io::write_text(manifest, out);
}

TimeSeriesMatrix read_time_series(const std::filesystem::path& path, const std::string& subject_id) {
    if (!std::filesystem::exists(path))
        fail(ErrorKind::InvalidInput, "time series file for " + subject_id + " not found: " + path.string());
    const auto table = io::read_csv(path, false);
    TimeSeriesMatrix ts;
    ts.subject_id = subject_id;
    if (table.rows.empty()) fail(ErrorKind::InvalidInput, path.string() + ": empty time series");
    const auto r = table.rows.front().size();
    ts.data.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(r));
    for (std::size_t t = 0; t < table.rows.size(); ++t) {
        const auto& row = table.rows[t];
        if (row.size() != r)
            fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(t + 1) + ": expected " +
                                              std::to_string(r) + " columns, got " + std::to_string(row.size()));
        for (std::size_t c = 0; c < r; ++c)
            ts.data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = io::parse_double(row[c], path, t + 1);
    }
    if (!ts.data.allFinite()) fail(ErrorKind::InvalidInput, path.string() + ": non-finite entries");
    return ts;
}

void write_time_series(const std::filesystem::path& path, const TimeSeriesMatrix& ts) {
    std::string out;
    out.reserve(static_cast<std::size_t>(ts.data.size()) * 14);
    for (Eigen::Index t = 0; t < ts.data.rows(); ++t) {
        for (Eigen::Index c = 0; c < ts.data.cols(); ++c) {
            if (c) out += ',';
            out += io::format_double(ts.data(t, c), 10);
        }
        out += '\n';
    }
    io::write_text(path, out);
}

}  // namespace fcprobe
