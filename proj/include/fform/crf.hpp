#pragma once

#include "fform/pose.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fform {

inline constexpr std::size_t kNumLabels = 2; // index 0 = G, 1 = O

inline std::size_t label_index(GroupLabel g) { return g == GroupLabel::G ? 0 : 1; }
inline GroupLabel label_at(std::size_t i) { return i == 0 ? GroupLabel::G : GroupLabel::O; }

/// Linear-chain CRF over group-membership labels. Weight layout:
/// observation weights for G (F entries), for O (F entries), then the 2x2
/// transition table row-major as [previous][current].
struct CrfModel {
    std::size_t feature_dim = 0;
    std::vector<double> weights;
    std::string feature_catalog_version;
    double l2 = 1.0;

    static CrfModel zeros(std::size_t feature_dim, std::string catalog_version);

    std::size_t observation_offset(std::size_t label) const { return label * feature_dim; }
    std::size_t transition_index(std::size_t prev, std::size_t cur) const {
        return kNumLabels * feature_dim + prev * kNumLabels + cur;
    }
    static std::size_t weight_count(std::size_t feature_dim) {
        return kNumLabels * feature_dim + kNumLabels * kNumLabels;
    }
};

/// n x feature_dim observation matrix (row-major) plus optional gold labels.
struct ChainInstance {
    std::size_t length = 0;
    std::size_t feature_dim = 0;
    std::vector<double> features;
    std::optional<std::vector<GroupLabel>> gold;
    std::string feature_catalog_version;

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features).subspan(i * feature_dim, feature_dim);
    }
};

/// Builds the chain for an already-ordered scene; gold labels are copied from
/// the scene truth when present.
ChainInstance make_chain(const Scene& ordered_scene);

struct ChainPotentials {
    std::vector<std::array<double, kNumLabels>> node;
    std::array<std::array<double, kNumLabels>, kNumLabels> transition{};
};

/// Throws VersionMismatch if the chain was built against another catalog.
ChainPotentials log_potentials(const CrfModel& model, const ChainInstance& chain);

double sequence_score(const ChainPotentials& pot, std::span<const GroupLabel> labels);

double log_partition(const ChainPotentials& pot);
double forward(const CrfModel& model, const ChainInstance& chain);

struct ChainMarginals {
    std::vector<std::array<double, kNumLabels>> node;
    /// edge[i][a][b] = P(label_i = a, label_{i+1} = b)
    std::vector<std::array<std::array<double, kNumLabels>, kNumLabels>> edge;
    double log_z = 0.0;
};

ChainMarginals marginals(const ChainPotentials& pot);
ChainMarginals marginals(const CrfModel& model, const ChainInstance& chain);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Regularized negative conditional log-likelihood over the batch. Chain
/// contributions are reduced by pairwise summation so the result does not
/// depend on how the batch is partitioned.
LossAndGradient nll_and_gradient(const CrfModel& model, std::span<const ChainInstance> batch, double l2);

struct CrfTrainConfig {
    double l2 = 1.0;
    int max_iters = 500;
    double tol = 1e-4;
    int lbfgs_memory = 10;
};

struct CrfTrainResult {
    CrfModel model;
    int iterations = 0;
    double final_loss = 0.0;
    double final_grad_inf = 0.0;
    bool converged = false;
    /// Objective after each accepted step, starting from the initial point.
    std::vector<double> loss_trace;
};

/// L-BFGS with backtracking (Armijo) line search from the zero vector.
/// Throws DivergenceError on a non-finite objective.
CrfTrainResult train_crf(std::span<const ChainInstance> batch, const CrfTrainConfig& config);

/// Highest-scoring labeling; among equal scores the sequence that prefers G
/// at the first differing position wins.
std::vector<GroupLabel> viterbi(const ChainPotentials& pot);
std::vector<GroupLabel> viterbi(const CrfModel& model, const ChainInstance& chain);

} // namespace fform
