// Independent reference computations shared by the unit and acceptance tests.
#pragma once

#include "fform/crf.hpp"
#include "fform/features.hpp"
#include "fform/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

using namespace fform;

inline std::vector<GroupLabel> labels_from_mask(std::size_t mask, std::size_t n) {
    // Position 0 is the most significant bit, so ascending masks are
    // lexicographic with G (bit 0) first.
    std::vector<GroupLabel> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = ((mask >> (n - 1 - i)) & 1u) ? GroupLabel::O : GroupLabel::G;
    return y;
}

inline double brute_score(const ChainPotentials& pot, const std::vector<GroupLabel>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += pot.node[i][label_index(y[i])];
        if (i > 0) s += pot.transition[label_index(y[i - 1])][label_index(y[i])];
    }
    return s;
}

struct Enumeration {
    double log_z = 0.0;
    std::vector<std::array<double, 2>> node;
    std::vector<std::array<std::array<double, 2>, 2>> edge;
    std::vector<GroupLabel> best;
};

inline Enumeration enumerate(const ChainPotentials& pot) {
    const std::size_t n = pot.node.size();
    const std::size_t count = std::size_t{1} << n;
    std::vector<double> scores(count);
    double best = -std::numeric_limits<double>::infinity();
    Enumeration e;
    for (std::size_t m = 0; m < count; ++m) {
        const auto y = labels_from_mask(m, n);
        scores[m] = brute_score(pot, y);
        if (scores[m] > best) {
            best = scores[m];
            e.best = y;
        }
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - mx);
    e.log_z = mx + std::log(sum);
    e.node.assign(n, {0.0, 0.0});
    e.edge.assign(n > 0 ? n - 1 : 0, {});
    for (std::size_t m = 0; m < count; ++m) {
        const auto y = labels_from_mask(m, n);
        const double p = std::exp(scores[m] - e.log_z);
        for (std::size_t i = 0; i < n; ++i) {
            e.node[i][label_index(y[i])] += p;
            if (i + 1 < n) e.edge[i][label_index(y[i])][label_index(y[i + 1])] += p;
        }
    }
    return e;
}

inline double rel_err(double a, double b) {
    const double d = std::abs(a - b);
    const double s = std::max(std::abs(a), std::abs(b));
    return s > 0.0 ? d / s : d;
}

inline CrfModel random_model(Rng& rng, std::size_t dim, double sigma = 1.0) {
    CrfModel m = CrfModel::zeros(dim, std::string(kFeatureCatalogVersion));
    for (double& w : m.weights) w = rng.normal(0.0, sigma);
    return m;
}

inline ChainInstance random_chain(Rng& rng, std::size_t n, std::size_t dim, bool with_gold) {
    ChainInstance c;
    c.length = n;
    c.feature_dim = dim;
    c.feature_catalog_version = std::string(kFeatureCatalogVersion);
    for (std::size_t i = 0; i < n * dim; ++i) c.features.push_back(rng.normal(0.0, 1.0));
    if (with_gold) {
        std::vector<GroupLabel> g;
        for (std::size_t i = 0; i < n; ++i) g.push_back(rng.uniform() < 0.5 ? GroupLabel::G : GroupLabel::O);
        c.gold = g;
    }
    return c;
}

/// Central differences of the batch objective, one coordinate at a time.
inline std::vector<double> finite_difference_gradient(const CrfModel& model, std::span<const ChainInstance> batch,
                                                      double l2, double h) {
    std::vector<double> g(model.weights.size());
    CrfModel m = model;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double w = m.weights[k];
        m.weights[k] = w + h;
        const double up = nll_and_gradient(m, batch, l2).loss;
        m.weights[k] = w - h;
        const double down = nll_and_gradient(m, batch, l2).loss;
        m.weights[k] = w;
        g[k] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Upright pose with every keypoint at a fixed offset from (cx, top),
/// confidence `conf`. Good enough for feature and rule arithmetic.
inline PersonPose upright_pose(const std::string& id, double cx, double top, double height, double conf = 0.9) {
    static constexpr std::array<std::array<double, 2>, kNumKeypoints> layout = {{
        {0.0, 0.06}, {-0.03, 0.04}, {0.03, 0.04}, {-0.06, 0.05}, {0.06, 0.05},
        {-0.12, 0.18}, {0.12, 0.18}, {-0.14, 0.36}, {0.14, 0.36}, {-0.15, 0.52},
        {0.15, 0.52}, {-0.08, 0.53}, {0.08, 0.53}, {-0.07, 0.75}, {0.07, 0.75},
        {-0.07, 1.0}, {0.07, 1.0},
    }};
    std::array<Keypoint, kNumKeypoints> k{};
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        k[i] = {static_cast<KeypointName>(i), cx + layout[i][0] * height, top + layout[i][1] * height, conf};
    }
    return PersonPose(id, k);
}

/// Same pose with selected keypoints moved / re-scored.
inline PersonPose with_keypoint(const PersonPose& p, KeypointName n, double x, double y, double conf) {
    auto k = p.keypoints();
    k[index_of(n)] = {n, x, y, conf};
    return PersonPose(p.person_id(), k);
}

} // namespace oracle
