#include "fform/crf.hpp"

#include "fform/errors.hpp"
#include "fform/features.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace fform {

namespace {

double logsumexp2(double a, double b) {
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Forward and backward tables in log space.
struct Lattice {
    std::vector<std::array<double, kNumLabels>> alpha;
    std::vector<std::array<double, kNumLabels>> beta;
    double log_z = 0.0;
};

Lattice run_lattice(const ChainPotentials& pot) {
    const std::size_t n = pot.node.size();
    if (n == 0) throw InputError("chain must have at least one node");
    Lattice L;
    L.alpha.resize(n);
    L.beta.resize(n);
    L.alpha[0] = pot.node[0];
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t y = 0; y < kNumLabels; ++y) {
            L.alpha[i][y] = logsumexp2(L.alpha[i - 1][0] + pot.transition[0][y],
                                       L.alpha[i - 1][1] + pot.transition[1][y]) +
                            pot.node[i][y];
        }
    }
    L.beta[n - 1] = {0.0, 0.0};
    for (std::size_t i = n - 1; i-- > 0;) {
        for (std::size_t y = 0; y < kNumLabels; ++y) {
            L.beta[i][y] = logsumexp2(pot.transition[y][0] + pot.node[i + 1][0] + L.beta[i + 1][0],
                                      pot.transition[y][1] + pot.node[i + 1][1] + L.beta[i + 1][1]);
        }
    }
    L.log_z = logsumexp2(L.alpha[n - 1][0], L.alpha[n - 1][1]);
    return L;
}

struct ChainTerm {
    double loss = 0.0;
    std::vector<double> grad;
};

ChainTerm chain_term(const CrfModel& model, const ChainInstance& chain) {
    if (!chain.gold) throw InputError("training chain has no gold labels");
    const auto& gold = *chain.gold;
    if (gold.size() != chain.length) throw InputError("gold label count differs from chain length");

    const ChainPotentials pot = log_potentials(model, chain);
    const ChainMarginals m = marginals(pot);
    ChainTerm t;
    t.loss = m.log_z - sequence_score(pot, gold);
    t.grad.assign(model.weights.size(), 0.0);
    const std::size_t F = model.feature_dim;
    for (std::size_t i = 0; i < chain.length; ++i) {
        const auto x = chain.row(i);
        const std::size_t g = label_index(gold[i]);
        for (std::size_t y = 0; y < kNumLabels; ++y) {
            const double coef = m.node[i][y] - (y == g ? 1.0 : 0.0);
            if (coef == 0.0) continue;
            double* w = t.grad.data() + model.observation_offset(y);
            for (std::size_t f = 0; f < F; ++f) w[f] += coef * x[f];
        }
    }
    for (std::size_t i = 0; i + 1 < chain.length; ++i) {
        for (std::size_t a = 0; a < kNumLabels; ++a) {
            for (std::size_t b = 0; b < kNumLabels; ++b) {
                t.grad[model.transition_index(a, b)] += m.edge[i][a][b];
            }
        }
        t.grad[model.transition_index(label_index(gold[i]), label_index(gold[i + 1]))] -= 1.0;
    }
    return t;
}

// Sums terms [lo, hi) as a balanced binary tree.
ChainTerm reduce_pairwise(const CrfModel& model, std::span<const ChainInstance> batch) {
    if (batch.size() == 1) return chain_term(model, batch[0]);
    const std::size_t mid = batch.size() / 2;
    ChainTerm a = reduce_pairwise(model, batch.first(mid));
    const ChainTerm b = reduce_pairwise(model, batch.subspan(mid));
    a.loss += b.loss;
    for (std::size_t k = 0; k < a.grad.size(); ++k) a.grad[k] += b.grad[k];
    return a;
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace

CrfModel CrfModel::zeros(std::size_t feature_dim, std::string catalog_version) {
    CrfModel m;
    m.feature_dim = feature_dim;
    m.weights.assign(weight_count(feature_dim), 0.0);
    m.feature_catalog_version = std::move(catalog_version);
    return m;
}

ChainInstance make_chain(const Scene& ordered_scene) {
    ChainInstance c;
    c.length = ordered_scene.poses.size();
    c.feature_dim = node_feature_dim();
    c.feature_catalog_version = std::string(kFeatureCatalogVersion);
    c.features.reserve(c.length * c.feature_dim);
    for (const NodeFeatures& f : chain_features(ordered_scene)) {
        c.features.insert(c.features.end(), f.values.begin(), f.values.end());
    }
    if (ordered_scene.truth && ordered_scene.truth->membership.size() == c.length && c.length > 0) {
        c.gold = ordered_scene.truth->membership;
    }
    return c;
}

ChainPotentials log_potentials(const CrfModel& model, const ChainInstance& chain) {
    if (model.feature_catalog_version != chain.feature_catalog_version) {
        throw VersionMismatch("CRF model catalog '" + model.feature_catalog_version + "' does not match chain catalog '" +
                              chain.feature_catalog_version + "'");
    }
    if (model.feature_dim != chain.feature_dim ||
        model.weights.size() != CrfModel::weight_count(model.feature_dim)) {
        throw VersionMismatch("CRF weight layout does not match feature dimension");
    }
    ChainPotentials pot;
    pot.node.resize(chain.length);
    const std::span<const double> w(model.weights);
    for (std::size_t i = 0; i < chain.length; ++i) {
        for (std::size_t y = 0; y < kNumLabels; ++y) {
            pot.node[i][y] = dot(w.subspan(model.observation_offset(y), model.feature_dim), chain.row(i));
        }
    }
    for (std::size_t a = 0; a < kNumLabels; ++a) {
        for (std::size_t b = 0; b < kNumLabels; ++b) pot.transition[a][b] = model.weights[model.transition_index(a, b)];
    }
    return pot;
}

double sequence_score(const ChainPotentials& pot, std::span<const GroupLabel> labels) {
    if (labels.size() != pot.node.size()) throw InputError("label count differs from chain length");
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        s += pot.node[i][label_index(labels[i])];
        if (i > 0) s += pot.transition[label_index(labels[i - 1])][label_index(labels[i])];
    }
    return s;
}

double log_partition(const ChainPotentials& pot) { return run_lattice(pot).log_z; }

double forward(const CrfModel& model, const ChainInstance& chain) {
    return log_partition(log_potentials(model, chain));
}

ChainMarginals marginals(const ChainPotentials& pot) {
    const Lattice L = run_lattice(pot);
    const std::size_t n = pot.node.size();
    ChainMarginals m;
    m.log_z = L.log_z;
    m.node.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t y = 0; y < kNumLabels; ++y) m.node[i][y] = std::exp(L.alpha[i][y] + L.beta[i][y] - L.log_z);
    }
    m.edge.resize(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t a = 0; a < kNumLabels; ++a) {
            for (std::size_t b = 0; b < kNumLabels; ++b) {
                m.edge[i][a][b] = std::exp(L.alpha[i][a] + pot.transition[a][b] + pot.node[i + 1][b] +
                                           L.beta[i + 1][b] - L.log_z);
            }
        }
    }
    return m;
}

ChainMarginals marginals(const CrfModel& model, const ChainInstance& chain) {
    return marginals(log_potentials(model, chain));
}

LossAndGradient nll_and_gradient(const CrfModel& model, std::span<const ChainInstance> batch, double l2) {
    if (l2 < 0.0) throw InputError("l2 must be non-negative");
    LossAndGradient out;
    out.grad.assign(model.weights.size(), 0.0);
    if (!batch.empty()) {
        ChainTerm t = reduce_pairwise(model, batch);
        out.loss = t.loss;
        out.grad = std::move(t.grad);
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        sq += model.weights[k] * model.weights[k];
        out.grad[k] += l2 * model.weights[k];
    }
    out.loss += 0.5 * l2 * sq;
    return out;
}

CrfTrainResult train_crf(std::span<const ChainInstance> batch, const CrfTrainConfig& config) {
    if (batch.empty()) throw InputError("CRF training batch is empty");
    if (config.l2 < 0.0 || config.max_iters < 0 || config.tol <= 0.0) throw InputError("invalid CRF training config");

    CrfTrainResult r;
    r.model = CrfModel::zeros(batch.front().feature_dim, batch.front().feature_catalog_version);
    r.model.l2 = config.l2;
    CrfModel& model = r.model;
    const std::size_t k = model.weights.size();

    LossAndGradient cur = nll_and_gradient(model, batch, config.l2);
    if (!std::isfinite(cur.loss)) throw DivergenceError("initial CRF objective is not finite");
    r.loss_trace.push_back(cur.loss);

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> history;
    std::vector<double> dir(k), alpha_hist;

    int it = 0;
    for (; it < config.max_iters; ++it) {
        if (inf_norm(cur.grad) <= config.tol) break;

        // Two-loop recursion for the quasi-Newton direction.
        std::vector<double> q = cur.grad;
        alpha_hist.assign(history.size(), 0.0);
        for (std::size_t h = history.size(); h-- > 0;) {
            alpha_hist[h] = history[h].rho * dot(history[h].s, q);
            for (std::size_t j = 0; j < k; ++j) q[j] -= alpha_hist[h] * history[h].y[j];
        }
        double scale = 1.0;
        if (!history.empty()) {
            const Pair& last = history.back();
            scale = dot(last.s, last.y) / dot(last.y, last.y);
        }
        for (double& v : q) v *= scale;
        for (std::size_t h = 0; h < history.size(); ++h) {
            const double b = history[h].rho * dot(history[h].y, q);
            for (std::size_t j = 0; j < k; ++j) q[j] += history[h].s[j] * (alpha_hist[h] - b);
        }
        for (std::size_t j = 0; j < k; ++j) dir[j] = -q[j];
        double slope = dot(dir, cur.grad);
        if (!(slope < 0.0)) {
            history.clear();
            for (std::size_t j = 0; j < k; ++j) dir[j] = -cur.grad[j];
            slope = dot(dir, cur.grad);
        }

        double step = history.empty() ? 1.0 / std::max(1.0, inf_norm(cur.grad)) : 1.0;
        CrfModel trial = model;
        LossAndGradient next;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t j = 0; j < k; ++j) trial.weights[j] = model.weights[j] + step * dir[j];
            next = nll_and_gradient(trial, batch, config.l2);
            if (std::isfinite(next.loss) && next.loss <= cur.loss + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!std::isfinite(next.loss)) throw DivergenceError("CRF objective became non-finite");
            break; // no further decrease possible at machine precision
        }

        Pair p{std::vector<double>(k), std::vector<double>(k), 0.0};
        for (std::size_t j = 0; j < k; ++j) {
            p.s[j] = trial.weights[j] - model.weights[j];
            p.y[j] = next.grad[j] - cur.grad[j];
        }
        const double sy = dot(p.s, p.y);
        if (sy > 1e-12) {
            p.rho = 1.0 / sy;
            history.push_back(std::move(p));
            if (history.size() > static_cast<std::size_t>(config.lbfgs_memory)) history.pop_front();
        }
        model.weights = std::move(trial.weights);
        cur = std::move(next);
        r.loss_trace.push_back(cur.loss);
    }
    r.iterations = it;
    r.final_loss = cur.loss;
    r.final_grad_inf = inf_norm(cur.grad);
    r.converged = r.final_grad_inf <= config.tol;
    return r;
}

std::vector<GroupLabel> viterbi(const ChainPotentials& pot) {
    const std::size_t n = pot.node.size();
    if (n == 0) throw InputError("chain must have at least one node");
    // best[i][y]: best score of positions i+1..n-1 given label y at i.
    std::vector<std::array<double, kNumLabels>> best(n);
    best[n - 1] = {0.0, 0.0};
    for (std::size_t i = n - 1; i-- > 0;) {
        for (std::size_t y = 0; y < kNumLabels; ++y) {
            best[i][y] = std::max(pot.transition[y][0] + pot.node[i + 1][0] + best[i + 1][0],
                                  pot.transition[y][1] + pot.node[i + 1][1] + best[i + 1][1]);
        }
    }
    // Greedy forward pass; strict comparison keeps G on ties.
    std::vector<GroupLabel> out(n);
    std::size_t prev = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pick = 0;
        double pick_val = -std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < kNumLabels; ++y) {
            const double v = (i > 0 ? pot.transition[prev][y] : 0.0) + pot.node[i][y] + best[i][y];
            if (v > pick_val) {
                pick_val = v;
                pick = y;
            }
        }
        out[i] = label_at(pick);
        prev = pick;
    }
    return out;
}

std::vector<GroupLabel> viterbi(const CrfModel& model, const ChainInstance& chain) {
    return viterbi(log_potentials(model, chain));
}

} // namespace fform
