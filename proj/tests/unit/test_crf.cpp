#include "fform/crf.hpp"
#include "fform/errors.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace fform;

TEST_CASE("log partition and marginals match enumeration") {
    Rng rng(11);
    for (int t = 0; t < 40; ++t) {
        const std::size_t n = 1 + rng.index(8);
        const CrfModel m = oracle::random_model(rng, 4);
        const ChainInstance c = oracle::random_chain(rng, n, 4, false);
        const ChainPotentials pot = log_potentials(m, c);
        const oracle::Enumeration e = oracle::enumerate(pot);
        const ChainMarginals mg = marginals(pot);
        CHECK(oracle::rel_err(log_partition(pot), e.log_z) < 1e-9);
        CHECK(oracle::rel_err(mg.log_z, e.log_z) < 1e-9);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < 2; ++a) CHECK(oracle::rel_err(mg.node[i][a], e.node[i][a]) < 1e-9);
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t a = 0; a < 2; ++a) {
                for (std::size_t b = 0; b < 2; ++b) CHECK(oracle::rel_err(mg.edge[i][a][b], e.edge[i][a][b]) < 1e-9);
            }
        }
    }
}

TEST_CASE("viterbi matches enumeration including ties") {
    Rng rng(12);
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 1 + rng.index(8);
        ChainPotentials pot;
        pot.node.resize(n);
        // Small integers make exact ties common.
        for (auto& row : pot.node) row = {double(rng.index(3)), double(rng.index(3))};
        for (auto& row : pot.transition) row = {double(rng.index(3)), double(rng.index(3))};
        CHECK(viterbi(pot) == oracle::enumerate(pot).best);
    }
}

TEST_CASE("all-zero potentials decode to all G") {
    ChainPotentials pot;
    pot.node.assign(5, {0.0, 0.0});
    CHECK(viterbi(pot) == std::vector<GroupLabel>(5, GroupLabel::G));
}

TEST_CASE("large potentials stay finite") {
    ChainPotentials pot;
    pot.node.assign(6, {800.0, -800.0});
    pot.transition = {{{900.0, 0.0}, {0.0, 900.0}}};
    const double z = log_partition(pot);
    CHECK(std::isfinite(z));
    CHECK(z == doctest::Approx(6 * 800.0 + 5 * 900.0));
}

TEST_CASE("sequence score agrees with the brute-force sum") {
    Rng rng(13);
    const CrfModel m = oracle::random_model(rng, 3);
    const ChainInstance c = oracle::random_chain(rng, 5, 3, false);
    const ChainPotentials pot = log_potentials(m, c);
    for (std::size_t mask = 0; mask < 32; ++mask) {
        const auto y = oracle::labels_from_mask(mask, 5);
        CHECK(sequence_score(pot, y) == doctest::Approx(oracle::brute_score(pot, y)).epsilon(1e-12));
    }
}

TEST_CASE("gradient matches central differences") {
    Rng rng(14);
    for (int t = 0; t < 5; ++t) {
        const CrfModel m = oracle::random_model(rng, 3, 0.5);
        std::vector<ChainInstance> batch;
        for (int b = 0; b < 3; ++b) batch.push_back(oracle::random_chain(rng, 1 + rng.index(6), 3, true));
        const LossAndGradient lg = nll_and_gradient(m, batch, 0.7);
        const std::vector<double> fd = oracle::finite_difference_gradient(m, batch, 0.7, 1e-5);
        for (std::size_t k = 0; k < fd.size(); ++k) CHECK(std::abs(lg.grad[k] - fd[k]) < 1e-6 * std::max(1.0, std::abs(fd[k])));
    }
}

TEST_CASE("batch objective does not depend on chain order") {
    Rng rng(15);
    const CrfModel m = oracle::random_model(rng, 3);
    std::vector<ChainInstance> batch;
    for (int b = 0; b < 9; ++b) batch.push_back(oracle::random_chain(rng, 2 + rng.index(5), 3, true));
    const LossAndGradient a = nll_and_gradient(m, batch, 1.0);
    std::reverse(batch.begin(), batch.end());
    const LossAndGradient b = nll_and_gradient(m, batch, 1.0);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
}

TEST_CASE("training decreases the objective monotonically") {
    Rng rng(16);
    const CrfModel truth = oracle::random_model(rng, 4, 1.5);
    std::vector<ChainInstance> batch;
    for (int b = 0; b < 40; ++b) {
        ChainInstance c = oracle::random_chain(rng, 2 + rng.index(5), 4, false);
        c.gold = viterbi(truth, c);
        batch.push_back(std::move(c));
    }
    const CrfTrainResult r = train_crf(batch, {});
    REQUIRE(r.loss_trace.size() >= 2);
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i) CHECK(r.loss_trace[i] <= r.loss_trace[i - 1] + 1e-12);
    CHECK(r.converged);
    std::size_t agree = 0, total = 0;
    for (const ChainInstance& c : batch) {
        const auto y = viterbi(r.model, c);
        for (std::size_t i = 0; i < y.size(); ++i) agree += y[i] == (*c.gold)[i], ++total;
    }
    CHECK(double(agree) / total > 0.9);
}

TEST_CASE("catalog mismatch is a hard error") {
    Rng rng(17);
    CrfModel m = oracle::random_model(rng, 3);
    m.feature_catalog_version = "other-catalog";
    const ChainInstance c = oracle::random_chain(rng, 3, 3, false);
    CHECK_THROWS_AS(log_potentials(m, c), VersionMismatch);
}
