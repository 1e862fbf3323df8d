#include "fform/svm.hpp"

#include "fform/errors.hpp"
#include "fform/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fform {

namespace {

constexpr double kTau = 1e-12;

// Symmetric n x n matrix of squared distances.
std::vector<double> pairwise_sq_dist(const Matrix& x) {
    const std::size_t n = x.rows();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = squared_distance(x.row(i), x.row(j));
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    return d;
}

std::vector<double> gram_from_dist(std::span<const double> dist, std::span<const std::size_t> idx, std::size_t stride,
                                   double gamma) {
    const std::size_t n = idx.size();
    std::vector<double> k(n * n);
    for (std::size_t a = 0; a < n; ++a) {
        k[a * n + a] = 1.0;
        for (std::size_t b = a + 1; b < n; ++b) {
            const double v = std::exp(-gamma * dist[idx[a] * stride + idx[b]]);
            k[a * n + b] = v;
            k[b * n + a] = v;
        }
    }
    return k;
}

struct SmoOutput {
    SmoDiagnostics diag;
    double rho = 0.0;
};

// Dual: min 0.5 a'Qa - e'a s.t. y'a = 0, 0 <= a <= C, with Q_ij = y_i y_j K_ij.
SmoOutput solve_smo(std::span<const double> K, std::size_t n, std::span<const int> y, const SmoOptions& o) {
    const double C = o.C;
    std::vector<double> alpha(n, 0.0);
    std::vector<double> G(n, -1.0);
    SmoOutput out;
    auto objective = [&] {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) s += alpha[t] * (G[t] - 1.0);
        return -0.5 * s; // maximization form
    };
    if (o.record_objective) out.diag.dual_objective.push_back(objective());

    std::int64_t iter = 0;
    double gap = 0.0;
    for (;;) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const bool below_upper = alpha[t] < C;
            const bool above_lower = alpha[t] > 0.0;
            if (y[t] == 1) {
                if (below_upper && -G[t] > gmax) { gmax = -G[t]; i = t; }
                if (above_lower && G[t] > gmax2) { gmax2 = G[t]; j = t; }
            } else {
                if (above_lower && G[t] > gmax) { gmax = G[t]; i = t; }
                if (below_upper && -G[t] > gmax2) { gmax2 = -G[t]; j = t; }
            }
        }
        gap = gmax + gmax2;
        if (i == n || j == n || gap <= o.tol) break;
        if (iter >= o.max_iterations) {
            throw ConvergenceError("SMO did not converge in " + std::to_string(o.max_iterations) +
                                   " iterations; max violating-pair gap " + std::to_string(gap) + " > tol " +
                                   std::to_string(o.tol));
        }
        ++iter;

        const double* Ki = K.data() + i * n;
        const double* Kj = K.data() + j * n;
        const double Qij = y[i] * y[j] * Ki[j];
        const double old_i = alpha[i];
        const double old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = Ki[i] + Kj[j] + 2.0 * Qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
            } else {
                if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
            }
            if (diff > 0.0) {
                if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
            } else {
                if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
            }
        } else {
            double quad = Ki[i] + Kj[j] - 2.0 * Qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
                if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
            } else {
                if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
                if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
            }
        }
        const double di = (alpha[i] - old_i) * y[i];
        const double dj = (alpha[j] - old_j) * y[j];
        for (std::size_t t = 0; t < n; ++t) G[t] += y[t] * (Ki[t] * di + Kj[t] * dj);
        if (o.record_objective) out.diag.dual_objective.push_back(objective());
    }

    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t nr_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yG = y[t] * G[t];
        if (alpha[t] >= C) {
            if (y[t] == -1) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else if (alpha[t] <= 0.0) {
            if (y[t] == 1) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else {
            ++nr_free;
            sum_free += yG;
        }
    }
    if (nr_free > 0) out.rho = sum_free / static_cast<double>(nr_free);
    else if (std::isfinite(ub) && std::isfinite(lb)) out.rho = 0.5 * (ub + lb);
    else out.rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);

    out.diag.iterations = iter;
    out.diag.alpha = std::move(alpha);
    out.diag.final_gap = gap;
    return out;
}

void check_labels(std::span<const int> y) {
    bool pos = false, neg = false;
    for (int v : y) {
        if (v == 1) pos = true;
        else if (v == -1) neg = true;
        else throw InputError("binary SVM labels must be +1 or -1");
    }
    if (!pos || !neg) throw InputError("binary SVM training needs both classes");
}

BinarySvm extract(const Matrix& x, std::span<const std::size_t> idx, std::span<const int> y, const SmoOutput& s,
                  double gamma, double C) {
    BinarySvm svm;
    svm.bias = -s.rho;
    svm.C = C;
    svm.kernel.gamma = gamma;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        if (s.diag.alpha[a] > 0.0) {
            const auto r = x.row(idx[a]);
            svm.support_vectors.emplace_back(r.begin(), r.end());
            svm.dual_coefs.push_back(s.diag.alpha[a] * y[a]);
        }
    }
    return svm;
}

void check_options(const SmoOptions& o) {
    if (!(o.C > 0.0) || !std::isfinite(o.C)) throw InputError("C must be positive");
    if (!(o.tol > 0.0)) throw InputError("tol must be positive");
}

// Dense dual solution of one binary over the rows it was trained on.
struct DenseBinary {
    std::vector<double> coef; ///< alpha_a * y_a per training row
    double bias = 0.0;
};

// Trains one binary per class on the rows `idx`, sharing a single Gram matrix.
std::vector<DenseBinary> train_ovr_dense(std::span<const std::size_t> idx, std::span<const std::size_t> labels,
                                         std::size_t num_classes, std::span<const double> gram,
                                         const SmoOptions& o) {
    std::vector<DenseBinary> out;
    out.reserve(num_classes);
    std::vector<int> y(idx.size());
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t a = 0; a < idx.size(); ++a) y[a] = labels[idx[a]] == c ? 1 : -1;
        check_labels(y);
        const SmoOutput s = solve_smo(gram, idx.size(), y, o);
        DenseBinary d;
        d.bias = -s.rho;
        d.coef.resize(idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a) d.coef[a] = s.diag.alpha[a] * y[a];
        out.push_back(std::move(d));
    }
    return out;
}

BinarySvm to_sparse(const Matrix& x, std::span<const std::size_t> idx, const DenseBinary& d, double gamma, double C) {
    BinarySvm svm;
    svm.bias = d.bias;
    svm.C = C;
    svm.kernel.gamma = gamma;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        if (d.coef[a] != 0.0) {
            const auto r = x.row(idx[a]);
            svm.support_vectors.emplace_back(r.begin(), r.end());
            svm.dual_coefs.push_back(d.coef[a]);
        }
    }
    return svm;
}

std::size_t argmax_scores(std::span<const double> scores) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c) {
        if (scores[c] > scores[best]) best = c;
    }
    return best;
}

} // namespace

void RbfKernelParams::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be finite and positive");
}

double squared_distance(std::span<const double> x, std::span<const double> z) {
    if (x.size() != z.size()) {
        throw InputError("dimension mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(z.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - z[i];
        s += d * d;
    }
    return s;
}

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
    return std::exp(-gamma * squared_distance(x, z));
}

void Matrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw InputError("row has wrong dimension");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

double BinarySvm::decision(std::span<const double> x) const {
    double f = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i) {
        f += dual_coefs[i] * rbf_kernel(support_vectors[i], x, kernel.gamma);
    }
    return f;
}

BinaryTrainResult train_binary(const Matrix& x, std::span<const int> y, double gamma, const SmoOptions& options) {
    RbfKernelParams{gamma}.validate();
    check_options(options);
    if (x.rows() != y.size()) throw InputError("sample and label counts differ");
    check_labels(y);
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::vector<double> dist = pairwise_sq_dist(x);
    const std::vector<double> gram = gram_from_dist(dist, idx, x.rows(), gamma);
    SmoOutput s = solve_smo(gram, x.rows(), y, options);
    BinaryTrainResult r;
    r.svm = extract(x, idx, y, s, gamma, options.C);
    r.diagnostics = std::move(s.diag);
    return r;
}

std::vector<double> kkt_violations(const BinarySvm& svm, const Matrix& x, std::span<const int> y,
                                   std::span<const double> alpha) {
    std::vector<double> v(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double margin = y[i] * svm.decision(x.row(i));
        if (alpha[i] <= 0.0) v[i] = std::max(0.0, 1.0 - margin);
        else if (alpha[i] >= svm.C) v[i] = std::max(0.0, margin - 1.0);
        else v[i] = std::abs(margin - 1.0);
    }
    return v;
}

SvmModel train_one_vs_rest(const Matrix& x, std::span<const std::size_t> labels, std::vector<std::string> classes,
                           double gamma, const SmoOptions& options, std::string catalog_version) {
    RbfKernelParams{gamma}.validate();
    check_options(options);
    if (classes.size() < 2) throw InputError("one-vs-rest needs at least two classes");
    if (x.rows() != labels.size()) throw InputError("sample and label counts differ");
    for (std::size_t l : labels) {
        if (l >= classes.size()) throw InputError("label index out of range");
    }
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::vector<double> dist = pairwise_sq_dist(x);
    const std::vector<double> gram = gram_from_dist(dist, idx, x.rows(), gamma);

    SvmModel m;
    for (const DenseBinary& d : train_ovr_dense(idx, labels, classes.size(), gram, options)) {
        m.binaries.push_back(to_sparse(x, idx, d, gamma, options.C));
    }
    m.classes = std::move(classes);
    m.feature_catalog_version = std::move(catalog_version);
    m.feature_dim = x.cols();
    return m;
}

SvmPrediction predict(const SvmModel& model, std::span<const double> x, std::string_view catalog_version) {
    if (model.feature_catalog_version != catalog_version) {
        throw VersionMismatch("SVM model catalog '" + model.feature_catalog_version + "' does not match '" +
                              std::string(catalog_version) + "'");
    }
    if (x.size() != model.feature_dim) throw InputError("feature vector has wrong dimension");
    SvmPrediction p;
    p.scores.reserve(model.binaries.size());
    for (const BinarySvm& b : model.binaries) p.scores.push_back(b.decision(x));
    p.class_index = argmax_scores(p.scores);
    return p;
}

std::vector<std::size_t> stratified_folds(std::span<const std::size_t> labels, std::size_t num_classes,
                                          std::size_t folds, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> fold(labels.size(), 0);
    std::size_t next = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) members.push_back(i);
        }
        rng.shuffle(members);
        // Continue the round-robin across classes so fold sizes stay balanced.
        for (std::size_t i : members) fold[i] = next++ % folds;
    }
    return fold;
}

namespace {

double cv_accuracy_from_dist(const Matrix& x, std::span<const double> dist, std::span<const std::size_t> labels,
                             std::size_t num_classes, double gamma, const SmoOptions& o,
                             std::span<const std::size_t> fold, std::size_t folds) {
    const std::size_t n = x.rows();
    double acc_sum = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test : train).push_back(i);
        if (test.empty()) continue;
        const std::vector<double> gram = gram_from_dist(dist, train, n, gamma);
        const std::vector<DenseBinary> bins = train_ovr_dense(train, labels, num_classes, gram, o);
        std::size_t correct = 0;
        std::vector<double> scores(num_classes);
        std::vector<double> krow(train.size());
        for (std::size_t t : test) {
            for (std::size_t a = 0; a < train.size(); ++a) krow[a] = std::exp(-gamma * dist[t * n + train[a]]);
            for (std::size_t c = 0; c < num_classes; ++c) {
                double f = bins[c].bias;
                for (std::size_t a = 0; a < train.size(); ++a) f += bins[c].coef[a] * krow[a];
                scores[c] = f;
            }
            if (argmax_scores(scores) == labels[t]) ++correct;
        }
        acc_sum += static_cast<double>(correct) / static_cast<double>(test.size());
    }
    return acc_sum / static_cast<double>(folds);
}

void check_cv_inputs(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes) {
    if (x.rows() != labels.size()) throw InputError("sample and label counts differ");
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t l : labels) {
        if (l >= num_classes) throw InputError("label index out of range");
        ++counts[l];
    }
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    if (present < 2) throw InputError("gamma selection needs at least two classes");
}

} // namespace

double cross_validate(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes, double gamma,
                      const SmoOptions& options, std::size_t folds, std::uint64_t seed) {
    RbfKernelParams{gamma}.validate();
    check_options(options);
    check_cv_inputs(x, labels, num_classes);
    const std::vector<std::size_t> fold = stratified_folds(labels, num_classes, folds, seed);
    const std::vector<double> dist = pairwise_sq_dist(x);
    return cv_accuracy_from_dist(x, dist, labels, num_classes, gamma, options, fold, folds);
}

double fallback_gamma(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (n == 0 || d == 0) throw InputError("empty data");
    double var_sum = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
        mean /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t r = 0; r < n; ++r) v += (x(r, c) - mean) * (x(r, c) - mean);
        var_sum += v / static_cast<double>(n);
    }
    const double mean_var = std::max(var_sum / static_cast<double>(d), kVarianceFloor);
    return 1.0 / (static_cast<double>(d) * mean_var);
}

GammaSelection select_gamma(const Matrix& x, std::span<const std::size_t> labels, std::size_t num_classes,
                            const SmoOptions& options, std::uint64_t seed, std::size_t folds) {
    check_options(options);
    check_cv_inputs(x, labels, num_classes);
    if (x.rows() < 10) throw InputError("gamma selection needs at least 10 samples");

    GammaSelection sel;
    for (int e = kGammaGridMinExp; e <= kGammaGridMaxExp; ++e) sel.grid.push_back(std::ldexp(1.0, e));

    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t l : labels) ++counts[l];
    const bool class_too_small =
        std::any_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 1; });
    const std::vector<double> dist = pairwise_sq_dist(x);
    const bool no_variance = std::all_of(dist.begin(), dist.end(), [](double v) { return v == 0.0; });
    const bool missing_class = std::any_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; });
    if (class_too_small || no_variance || missing_class || x.rows() < folds) {
        sel.used_fallback = true;
        sel.gamma = fallback_gamma(x);
        return sel;
    }

    const std::vector<std::size_t> fold = stratified_folds(labels, num_classes, folds, seed);
    double best = -1.0;
    for (double g : sel.grid) {
        const double acc = cv_accuracy_from_dist(x, dist, labels, num_classes, g, options, fold, folds);
        sel.cv_accuracy.push_back(acc);
        if (acc > best) {
            best = acc;
            sel.gamma = g;
        }
    }
    return sel;
}

} // namespace fform
