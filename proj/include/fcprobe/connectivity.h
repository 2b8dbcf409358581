#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcprobe/evaluation.h"

namespace fcprobe {

// One subject's regional signals, T timepoints x R regions.
struct TimeSeriesMatrix {
    std::string subject_id;
    Eigen::MatrixXd data;

    Eigen::Index timepoints() const { return data.rows(); }
    Eigen::Index regions() const { return data.cols(); }
};

// Symmetric positive-definite R x R covariance.
using CovMatrix = Eigen::MatrixXd;

struct FeatureVector {
    Eigen::VectorXd values;
    std::vector<RegionPair> region_pairs;
};

struct SpdEigen {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // orthonormal columns
};

enum class MeanMode { Arithmetic, Geometric };

MeanMode parse_mean_mode(const std::string& s);
std::string to_string(MeanMode mode);

struct ReferenceMean {
    CovMatrix matrix;
    bool converged = true;
    int iterations = 0;
};

// Shrunk sample covariance (1 - lambda) * S + lambda * tr(S)/R * I, where S uses
// mean-centred columns and divisor T - 1.
CovMatrix estimate_covariance(const TimeSeriesMatrix& ts, double shrinkage);

// Eigendecomposition of a symmetric matrix, eigenvalues in descending order.
SpdEigen spd_eig(const Eigen::MatrixXd& m);

Eigen::MatrixXd spd_logm(const CovMatrix& m);
Eigen::MatrixXd sym_expm(const Eigen::MatrixXd& s);
CovMatrix spd_sqrt(const CovMatrix& m);
CovMatrix spd_invsqrt(const CovMatrix& m);

// Cholesky-based SPD check.
bool is_spd(const Eigen::MatrixXd& m);

ReferenceMean reference_mean(std::span<const CovMatrix> covs, MeanMode mode, double tol = 1e-6, int max_iter = 50);

// Upper triangle in row-major order: (0,0), (0,1), ..., (0,R-1), (1,1), ...
std::vector<RegionPair> upper_triangle_pairs(int regions);

// Off-diagonal entries are scaled by sqrt(2) so the Euclidean norm of the vector equals
// the Frobenius norm of the matrix.
Eigen::VectorXd vectorize_upper(const Eigen::MatrixXd& sym);
Eigen::MatrixXd unvectorize_upper(const Eigen::VectorXd& values, int regions);

// logm(ref^-1/2 * cov * ref^-1/2), vectorized.
FeatureVector tangent_embed(const CovMatrix& cov, const CovMatrix& ref);

// Same map with the whitening matrix ref^-1/2 precomputed.
FeatureVector tangent_embed_whitened(const CovMatrix& cov, const Eigen::MatrixXd& ref_invsqrt);

struct EmbeddingOptions {
    double shrinkage = 0.05;
    MeanMode mean_mode = MeanMode::Geometric;
    double mean_tol = 1e-6;
    int mean_max_iter = 50;
    int workers = 1;
};

struct EmbeddedCohort {
    Dataset dataset;
    ReferenceMean reference;
};

// Covariance per subject, reference mean over `reference_rows` only (all rows when empty),
// then tangent features for every subject in input order.
EmbeddedCohort build_dataset(std::span<const TimeSeriesMatrix> cohort, std::span<const int> labels,
                             const EmbeddingOptions& options, std::span<const std::size_t> reference_rows = {});

struct ManifestEntry {
    std::string subject_id;
    std::filesystem::path path;  // resolved against the manifest's directory
    int label = 0;
};

// Manifest CSV with header `subject_id,path,label`.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, std::span<const ManifestEntry> entries);

// Headerless CSV, rows = timepoints, columns = regions.
TimeSeriesMatrix read_time_series(const std::filesystem::path& path, const std::string& subject_id);
void write_time_series(const std::filesystem::path& path, const TimeSeriesMatrix& ts);

}  // namespace fcprobe
