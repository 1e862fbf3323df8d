#include "fform/errors.hpp"
#include "fform/eval.hpp"
#include "fform/rng.hpp"

#include "../support/small_bundle.hpp"

#include <doctest.h>

using namespace fform;

TEST_CASE("all-correct predictions score 1") {
    const std::vector<std::size_t> y{0, 1, 2, 1, 0};
    const ClassificationReport r = report(y, y, {"a", "b", "c"});
    CHECK(r.accuracy == 1.0);
    CHECK(r.weighted_f1 == 1.0);
    for (double f : r.f1) CHECK(f == 1.0);
    CHECK_FALSE(r.zero_division);
}

TEST_CASE("binary counts 46/4/4 give 0.92 everywhere") {
    // Class 0 is the positive class: TP 46, FN 4, FP 4, TN 46.
    std::vector<std::size_t> gold, pred;
    auto add = [&](std::size_t g, std::size_t p, int n) {
        for (int i = 0; i < n; ++i) gold.push_back(g), pred.push_back(p);
    };
    add(0, 0, 46);
    add(0, 1, 4);
    add(1, 0, 4);
    add(1, 1, 46);
    const ClassificationReport r = report(gold, pred, {"G", "O"});
    CHECK(r.precision[0] == doctest::Approx(0.92));
    CHECK(r.recall[0] == doctest::Approx(0.92));
    CHECK(r.f1[0] == doctest::Approx(0.92));
}

TEST_CASE("report is order invariant and consistent") {
    Rng rng(41);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::size_t> gold, pred;
        for (int i = 0; i < 60; ++i) {
            gold.push_back(rng.index(4));
            pred.push_back(rng.uniform() < 0.6 ? gold.back() : rng.index(4));
        }
        const ClassificationReport r = report(gold, pred, {"a", "b", "c", "d"});
        std::vector<std::size_t> idx(gold.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        rng.shuffle(idx);
        std::vector<std::size_t> g2, p2;
        for (std::size_t i : idx) g2.push_back(gold[i]), p2.push_back(pred[i]);
        const ClassificationReport s = report(g2, p2, {"a", "b", "c", "d"});
        CHECK(report_to_json(r) == report_to_json(s));

        std::size_t trace = 0;
        for (std::size_t c = 0; c < 4; ++c) {
            trace += r.confusion[c][c];
            std::size_t row = 0;
            for (std::size_t v : r.confusion[c]) row += v;
            CHECK(row == r.support[c]);
        }
        CHECK(double(trace) / gold.size() == doctest::Approx(r.accuracy));
        CHECK(r.weighted_recall == doctest::Approx(r.accuracy));
        double wf = 0.0;
        for (std::size_t c = 0; c < 4; ++c) wf += double(r.support[c]) / gold.size() * r.f1[c];
        CHECK(r.weighted_f1 == doctest::Approx(wf));
    }
}

TEST_CASE("absent predicted class sets the zero-division flag") {
    const std::vector<std::size_t> gold{0, 1}, pred{0, 0};
    const ClassificationReport r = report(gold, pred, {"a", "b"});
    CHECK(r.precision[1] == 0.0);
    CHECK(r.zero_division);
    const std::vector<std::size_t> shorter{0};
    CHECK_THROWS_AS(report(gold, shorter, {"a", "b"}), InputError);
    const std::vector<std::size_t> outside{0, 5};
    CHECK_THROWS_AS(report(gold, outside, {"a", "b"}), InputError);
}

TEST_CASE("csv has a fixed header and weighted row") {
    const std::vector<std::size_t> y{0, 1};
    const std::string csv = report_to_csv(report(y, y, {"G", "O"}));
    CHECK(csv.rfind("class,precision,recall,f1,support\n", 0) == 0);
    CHECK(csv.find("weighted_avg,1.000000,1.000000,1.000000,2") != std::string::npos);
}

TEST_CASE("latency statistics are ordered and stage times fit the total") {
    const ModelBundle& b = oracle::small_bundle();
    const std::vector<Scene> scenes = generate_dataset(standard_dataset_spec(4, 55), 56);
    const LatencyStats st = bench_latency(b, scenes, 1);
    CHECK(st.scenes == scenes.size());
    CHECK(st.p50_ms <= st.p95_ms);
    CHECK(st.p95_ms <= st.max_ms);
    CHECK(st.features_ms + st.crf_ms + st.svm_ms <= st.mean_ms + 1e-3);
    const std::vector<Scene> few(scenes.begin(), scenes.begin() + 50);
    CHECK_THROWS_AS(bench_latency(b, few, 1), InputError);
}

TEST_CASE("experiment on a small corpus emits 28 joint rows") {
    ExperimentConfig cfg;
    cfg.per_cell = 10;
    cfg.seed = 3;
    cfg.outlier_pairs = 10;
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.joint_rows.size() == 28);
    CHECK(r.train_scenes + r.test_scenes == 280);
    REQUIRE(r.membership.has_value());
    CHECK(r.membership->classes.size() == 2);
    REQUIRE(r.outliers.has_value());
    CHECK(r.outliers->pairs == 10);

    const auto dir = std::filesystem::temp_directory_path() / "fform_test_experiment";
    std::filesystem::remove_all(dir);
    write_experiment(r, dir);
    const std::string csv = read_text_file(dir / "table4_joint.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 28 + 1);
    CHECK(read_text_file(dir / "summary.json").find("\"seed\": 3") != std::string::npos);
    std::filesystem::remove_all(dir);

    ExperimentConfig missing;
    missing.dataset = "/nonexistent/scenes.jsonl";
    CHECK_THROWS_AS(run_experiment(missing), ConfigError);
}
