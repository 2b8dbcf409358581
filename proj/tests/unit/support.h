#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include <Eigen/Dense>
#include <doctest.h>

#include "fcprobe/error.h"
#include "fcprobe/io.h"
#include "fcprobe/rng.h"

namespace testing {

// Random SPD matrix with eigenvalues in [lo, hi].
inline Eigen::MatrixXd random_spd(int n, std::uint64_t seed, double lo = 0.5, double hi = 3.0) {
    fcprobe::Rng rng(seed);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = rng.uniform(lo, hi);
    Eigen::MatrixXd m = q * w.asDiagonal() * q.transpose();
    return 0.5 * (m + m.transpose());
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    fcprobe::Rng rng(seed);
    Eigen::MatrixXd a(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) a(i, j) = rng.normal();
    return a;
}

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1e-300, b.norm());
}

// Matrix exponential by scaling and squaring of a Taylor series.
inline Eigen::MatrixXd taylor_expm(const Eigen::MatrixXd& a) {
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

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("fcprobe_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline bool files_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
    return fcprobe::io::read_text(a) == fcprobe::io::read_text(b);
}

}  // namespace testing

#define CHECK_ERROR_KIND(expr, expected_kind)                                    \
    do {                                                                         \
        bool thrown_ = false;                                                    \
        try {                                                                    \
            (void)(expr);                                                        \
        } catch (const fcprobe::Error& e_) {                                     \
            thrown_ = true;                                                      \
            CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());              \
        }                                                                        \
        CHECK_MESSAGE(thrown_, "expected fcprobe::Error from " #expr);           \
    } while (0)
