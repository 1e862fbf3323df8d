#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fform {

struct RbfKernelParams {
    double gamma = 1.0;
    /// Throws InputError unless gamma is finite and positive.
    void validate() const;
};

/// exp(-gamma * ||x - z||^2). Throws InputError on dimension mismatch.
double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma);

double squared_distance(std::span<const double> x, std::span<const double> z);

/// Dense row-major sample matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    void append_row(std::span<const double> values);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Soft-margin binary SVM with RBF kernel. Only support vectors
/// (alpha > 0) are stored; dual_coefs[i] = alpha_i * y_i.
struct BinarySvm {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> dual_coefs;
    double bias = 0.0;
    double C = 10.0;
    RbfKernelParams kernel;

    double decision(std::span<const double> x) const;
};

struct SmoOptions {
    double C = 10.0;
    double tol = 1e-3;
    std::int64_t max_iterations = 10'000'000;
    /// Record the dual objective after every pair update (tests only; O(n) each).
    bool record_objective = false;
};

struct SmoDiagnostics {
    std::int64_t iterations = 0;
    std::vector<double> alpha;            ///< one per training sample
    std::vector<double> dual_objective;   ///< maximization form, if recorded
    double final_gap = 0.0;               ///< max violating-pair gap at exit
};

struct BinaryTrainResult {
    BinarySvm svm;
    SmoDiagnostics diagnostics;
};

/// Labels must be +1/-1 with both present (InputError otherwise). Working
/// pairs are chosen by maximal KKT violation; stops when the violating-pair
/// gap is <= tol. Throws ConvergenceError after max_iterations.
BinaryTrainResult train_binary(const Matrix& x, std::span<const int> y, double gamma, const SmoOptions& options);

/// Per-sample KKT violation of y_i f(x_i) against alpha_i in [0, C].
std::vector<double> kkt_violations(const BinarySvm& svm, const Matrix& x, std::span<const int> y,
                                   std::span<const double> alpha);

/// One-vs-rest ensemble; classes are kept in caller-supplied canonical order.
struct SvmModel {
    std::vector<std::string> classes;
    std::vector<BinarySvm> binaries;
    std::string feature_catalog_version;
    std::size_t feature_dim = 0;
};

struct SvmPrediction {
    std::size_t class_index = 0;
    std::vector<double> scores;
};

/// `labels[i]` indexes into `classes`. Every class must be present.
SvmModel train_one_vs_rest(const Matrix& x, std::span<const std::size_t> labels, std::vector<std::string> classes,
                           double gamma, const SmoOptions& options, std::string catalog_version);

/// Argmax of one-vs-rest decision values, ties to the earlier class.
/// Throws VersionMismatch if `catalog_version` differs from the model's.
SvmPrediction predict(const SvmModel& model, std::span<const double> x, std::string_view catalog_version);

inline constexpr int kGammaGridMinExp = -6;
inline constexpr int kGammaGridMaxExp = 2;
inline constexpr double kVarianceFloor = 1e-8;

struct GammaSelection {
    double gamma = 1.0;
    bool used_fallback = false;
    std::vector<double> grid;
    std::vector<double> cv_accuracy; ///< aligned with grid; empty on fallback
};

/// Deterministic stratified fold assignment (fold index per sample).
std::vector<std::size_t> stratified_folds(std::span<const std::size_t> labels, std::size_t num_classes,
                                          std::size_t folds, std::uint64_t seed);

/// Mean k-fold accuracy of a one-vs-rest model at one gamma.
double cross_validate(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes, double gamma,
                      const SmoOptions& options, std::size_t folds, std::uint64_t seed);

/// 5-fold CV over gamma in {2^-6, ..., 2^2}; the first grid value with the
/// best mean accuracy wins. Falls back to 1/(d * mean feature variance) when
/// some class has fewer than two samples or the features carry no variance.
/// Throws InputError for fewer than two classes or fewer than 10 samples.
GammaSelection select_gamma(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes,
                            const SmoOptions& options, std::uint64_t seed, std::size_t folds = 5);

double fallback_gamma(const Matrix& x);

} // namespace fform
