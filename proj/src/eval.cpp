#include "fform/eval.hpp"

#include "fform/errors.hpp"
#include "fform/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fform {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double safe_div(double num, double den, bool& flag) {
    if (den == 0.0) {
        flag = true;
        return 0.0;
    }
    return num / den;
}

ordered_json report_json(const ClassificationReport& r) {
    ordered_json per_class = ordered_json::array();
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        per_class.push_back({{"class", r.classes[c]},
                             {"precision", r.precision[c]},
                             {"recall", r.recall[c]},
                             {"f1", r.f1[c]},
                             {"support", r.support[c]}});
    }
    return {{"classes", r.classes},
            {"per_class", per_class},
            {"weighted_avg", {{"precision", r.weighted_precision}, {"recall", r.weighted_recall}, {"f1", r.weighted_f1}}},
            {"accuracy", r.accuracy},
            {"confusion", r.confusion},
            {"zero_division", r.zero_division}};
}

std::size_t formation_label(const std::optional<Formation>& f) {
    return f ? static_cast<std::size_t>(*f) : kNumFormations;
}

/// Appends a "none" class only when some prediction needs it.
std::vector<std::string> with_none(std::vector<std::string> classes, std::span<const std::size_t> pred) {
    const std::size_t n = classes.size();
    if (std::any_of(pred.begin(), pred.end(), [n](std::size_t p) { return p >= n; })) classes.emplace_back("none");
    return classes;
}

ModelBundle train_bundle(const std::vector<Scene>& train, const ExperimentConfig& cfg) {
    ModelBundle b;
    b.crf = train_crf_from_scenes(train, cfg.crf).model;
    b.formation_svm = train_svm_task(train, SvmTask::Formation, cfg.svm).model;
    b.angle_svm = train_svm_task(train, SvmTask::Angle, cfg.svm).model;
    b.joint_svm = train_svm_task(train, SvmTask::Joint, cfg.svm).model;
    return b;
}

void write_both(const std::filesystem::path& dir, const std::string& stem, const std::string& csv,
                const std::string& json_text) {
    write_text_file(dir / (stem + ".csv"), csv);
    write_text_file(dir / (stem + ".json"), json_text + "\n");
}

} // namespace

ClassificationReport report(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                            std::vector<std::string> classes) {
    if (gold.size() != pred.size()) throw InputError("gold and predicted label counts differ");
    const std::size_t k = classes.size();
    ClassificationReport r;
    r.classes = std::move(classes);
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] >= k || pred[i] >= k) throw InputError("label outside the class list");
        ++r.confusion[gold[i]][pred[i]];
    }
    const double n = static_cast<double>(gold.size());
    std::size_t correct = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = r.confusion[c][c], support = 0, predicted = 0;
        for (std::size_t j = 0; j < k; ++j) {
            support += r.confusion[c][j];
            predicted += r.confusion[j][c];
        }
        correct += tp;
        const double p = safe_div(tp, predicted, r.zero_division);
        const double rc = safe_div(tp, support, r.zero_division);
        const double f = p + rc > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
        r.precision.push_back(p);
        r.recall.push_back(rc);
        r.f1.push_back(f);
        r.support.push_back(support);
        if (n > 0) {
            const double w = support / n;
            r.weighted_precision += w * p;
            r.weighted_recall += w * rc;
            r.weighted_f1 += w * f;
        }
    }
    r.accuracy = n > 0 ? correct / n : 0.0;
    return r;
}

std::string report_to_csv(const ClassificationReport& r) {
    std::ostringstream out;
    out << "class,precision,recall,f1,support\n";
    std::size_t total = 0;
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        out << r.classes[c] << ',' << fmt(r.precision[c]) << ',' << fmt(r.recall[c]) << ',' << fmt(r.f1[c]) << ','
            << r.support[c] << '\n';
        total += r.support[c];
    }
    out << "weighted_avg," << fmt(r.weighted_precision) << ',' << fmt(r.weighted_recall) << ','
        << fmt(r.weighted_f1) << ',' << total << '\n';
    out << "accuracy,,," << fmt(r.accuracy) << ',' << total << '\n';
    return out.str();
}

std::string report_to_json(const ClassificationReport& r) { return report_json(r).dump(2); }

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult res;
    res.seed = cfg.seed;
    res.split_seed = derive_seed(cfg.seed, 11);
    res.svm_seed = cfg.svm.seed;

    std::vector<Scene> scenes;
    if (cfg.dataset) {
        std::ifstream in(*cfg.dataset);
        if (!in) throw ConfigError("cannot open dataset " + cfg.dataset->string());
        scenes = parse_scenes(in);
    } else {
        if (cfg.per_cell == 0) throw ConfigError("per_cell must be positive");
        scenes = generate_dataset(standard_dataset_spec(cfg.per_cell, cfg.seed), derive_seed(cfg.seed, 10));
    }
    if (scenes.empty()) throw ConfigError("dataset is empty");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0,1)");

    // Pre-trained models are scored on the whole dataset.
    std::vector<Scene> train, test;
    if (cfg.models_dir) {
        test = std::move(scenes);
    } else {
        const std::vector<bool> is_train = split_train_test(scenes, cfg.train_fraction, res.split_seed);
        for (std::size_t i = 0; i < scenes.size(); ++i) (is_train[i] ? train : test).push_back(std::move(scenes[i]));
    }
    res.train_scenes = train.size();
    res.test_scenes = test.size();
    if (test.empty()) throw ConfigError("test split is empty");

    if (cfg.models_dir) {
        if (!std::filesystem::is_directory(*cfg.models_dir)) {
            throw ConfigError("models directory " + cfg.models_dir->string() + " does not exist");
        }
        res.models = load_models(*cfg.models_dir);
    } else {
        res.models = train_bundle(train, cfg);
    }
    const ModelBundle& m = res.models;
    const bool cascade = m.formation_svm && m.angle_svm;

    std::vector<std::size_t> mem_gold, mem_pred;
    std::vector<std::size_t> f_gold, f_pred, f_rule, a_gold, a_pred, j_gold, j_pred;
    std::vector<std::size_t> cell_n(kNumJointClasses, 0), cell_learned(kNumJointClasses, 0),
        cell_rule(kNumJointClasses, 0);

    for (const Scene& s : test) {
        if (!s.truth) continue;
        const SceneTruth& t = *s.truth;
        std::optional<Detection> d;
        if (cascade) d = detect(s, m.crf, *m.formation_svm, *m.angle_svm);
        else d = detect_all(s, m);
        for (std::size_t i = 0; i < s.poses.size(); ++i) {
            mem_gold.push_back(t.membership[i] == GroupLabel::G ? 0 : 1);
            mem_pred.push_back(d->membership[i] == GroupLabel::G ? 0 : 1);
        }
        if (!t.formation) continue;
        f_gold.push_back(static_cast<std::size_t>(*t.formation));
        f_pred.push_back(formation_label(d->formation));

        const Scene members = truth_member_scene(s);
        std::optional<Formation> rule;
        if (members.poses.size() >= 2) rule = rule_classify(members).formation;
        f_rule.push_back(formation_label(rule));

        if (!t.angle_deg) continue;
        a_gold.push_back(angle_index(*t.angle_deg));
        a_pred.push_back(d->angle_deg ? angle_index(*d->angle_deg) : kApproachAngles.size());

        const std::size_t cell = encode_joint(*t.formation, *t.angle_deg);
        std::size_t jp = kNumJointClasses;
        if (m.joint_svm) {
            const Detection dj = detect_joint(s, m.crf, *m.joint_svm);
            if (dj.joint) jp = encode_joint(dj.joint->formation, dj.joint->angle_deg);
        }
        j_gold.push_back(cell);
        j_pred.push_back(jp);
        ++cell_n[cell];
        if (jp == cell) ++cell_learned[cell];
        if (rule && *rule == *t.formation) ++cell_rule[cell];
    }

    if (cfg.tables.count(1)) res.membership = report(mem_gold, mem_pred, {"G", "O"});
    if (cfg.tables.count(2) && !f_gold.empty()) {
        res.formation = report(f_gold, f_pred, with_none(formation_class_names(), f_pred));
        res.formation_rule = report(f_gold, f_rule, with_none(formation_class_names(), f_rule));
    }
    if (cfg.tables.count(3) && !a_gold.empty()) res.angle = report(a_gold, a_pred, with_none(angle_class_names(), a_pred));
    if (cfg.tables.count(4) && !j_gold.empty()) {
        res.joint = report(j_gold, j_pred, with_none(joint_class_names(), j_pred));
        std::size_t filled = 0;
        for (std::size_t c = 0; c < kNumJointClasses; ++c) {
            const JointLabel jl = decode_joint(c);
            JointRow row{jl.formation, jl.angle_deg, cell_n[c], 0.0, 0.0};
            if (cell_n[c] > 0) {
                row.learned_accuracy = static_cast<double>(cell_learned[c]) / cell_n[c];
                row.rule_accuracy = static_cast<double>(cell_rule[c]) / cell_n[c];
                res.joint_learned_average += row.learned_accuracy;
                res.joint_rule_average += row.rule_accuracy;
                ++filled;
            }
            res.joint_rows.push_back(row);
        }
        if (filled > 0) {
            res.joint_learned_average /= filled;
            res.joint_rule_average /= filled;
        }
    }
    if (cfg.outlier_pairs > 0 && cascade) {
        res.outliers = outlier_pair_agreement(m, cfg.outlier_pairs, derive_seed(cfg.seed, 12));
    }
    return res;
}

void write_experiment(const ExperimentResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ordered_json summary = {{"seed", r.seed},
                            {"split_seed", r.split_seed},
                            {"svm_seed", r.svm_seed},
                            {"train_scenes", r.train_scenes},
                            {"test_scenes", r.test_scenes}};
    if (r.membership) {
        write_both(dir, "table1_membership", report_to_csv(*r.membership), report_to_json(*r.membership));
        summary["membership_weighted_f1"] = r.membership->weighted_f1;
    }
    if (r.formation && r.formation_rule) {
        std::ostringstream csv;
        csv << "class,learned_precision,learned_recall,learned_f1,rule_precision,rule_recall,rule_f1,support\n";
        const auto& a = *r.formation;
        const auto& b = *r.formation_rule;
        for (std::size_t c = 0; c < kNumFormations; ++c) {
            csv << a.classes[c] << ',' << fmt(a.precision[c]) << ',' << fmt(a.recall[c]) << ',' << fmt(a.f1[c]) << ','
                << fmt(b.precision[c]) << ',' << fmt(b.recall[c]) << ',' << fmt(b.f1[c]) << ',' << a.support[c]
                << '\n';
        }
        csv << "weighted_avg," << fmt(a.weighted_precision) << ',' << fmt(a.weighted_recall) << ','
            << fmt(a.weighted_f1) << ',' << fmt(b.weighted_precision) << ',' << fmt(b.weighted_recall) << ','
            << fmt(b.weighted_f1) << ',' << r.test_scenes << '\n';
        ordered_json j = {{"seed", r.seed}, {"learned", report_json(a)}, {"rule", report_json(b)}};
        write_both(dir, "table2_formation", csv.str(), j.dump(2));
        summary["formation_weighted_f1"] = a.weighted_f1;
        summary["formation_rule_weighted_f1"] = b.weighted_f1;
    }
    if (r.angle) {
        write_both(dir, "table3_angle", report_to_csv(*r.angle), report_to_json(*r.angle));
        summary["angle_weighted_f1"] = r.angle->weighted_f1;
    }
    if (r.joint) {
        std::ostringstream csv;
        csv << "formation,angle_deg,samples,learned_accuracy,rule_accuracy\n";
        ordered_json rows = ordered_json::array();
        for (const JointRow& row : r.joint_rows) {
            csv << to_string(row.formation) << ',' << row.angle_deg << ',' << row.samples << ','
                << fmt(row.learned_accuracy) << ',' << fmt(row.rule_accuracy) << '\n';
            rows.push_back({{"formation", to_string(row.formation)},
                            {"angle_deg", row.angle_deg},
                            {"samples", row.samples},
                            {"learned_accuracy", row.learned_accuracy},
                            {"rule_accuracy", row.rule_accuracy}});
        }
        csv << "average,," << r.test_scenes << ',' << fmt(r.joint_learned_average) << ','
            << fmt(r.joint_rule_average) << '\n';
        ordered_json j = {{"seed", r.seed},
                          {"rows", rows},
                          {"average", {{"learned_accuracy", r.joint_learned_average},
                                       {"rule_accuracy", r.joint_rule_average}}},
                          {"report", report_json(*r.joint)}};
        write_both(dir, "table4_joint", csv.str(), j.dump(2));
        summary["joint_accuracy"] = r.joint->accuracy;
    }
    if (r.outliers) {
        summary["outlier_pairs"] = {{"pairs", r.outliers->pairs},
                                    {"skipped", r.outliers->skipped},
                                    {"agreeing", r.outliers->agreeing},
                                    {"agreement", r.outliers->agreement}};
    }
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

PairAgreement outlier_pair_agreement(const ModelBundle& models, std::size_t pairs, std::uint64_t seed) {
    if (!models.formation_svm || !models.angle_svm) throw InputError("bundle lacks the cascade classifiers");
    PairAgreement out;
    const std::size_t max_attempts = 4 * pairs + 100;
    for (std::size_t k = 0; out.pairs < pairs && k < max_attempts; ++k) {
        SynthConfig c;
        c.formation = kAllFormations[k % kNumFormations];
        c.angle_deg = kApproachAngles[(k / kNumFormations) % kApproachAngles.size()];
        c.distance_m = 2.0;
        c.distance_max_m = 5.0;
        c.seed = derive_seed(seed, k) >> 16;
        c.outliers = 1;
        Scene with;
        Scene without;
        try {
            with = render_scene(c);
            c.outliers = 0;
            without = render_scene(c);
        } catch (const PlacementError&) {
            continue;
        }
        const Detection dw = detect(with, models.crf, *models.formation_svm, *models.angle_svm);
        bool outlier_ok = true;
        for (std::size_t i = 0; i < with.poses.size(); ++i) {
            if (with.truth->membership[i] == GroupLabel::O && dw.membership[i] != GroupLabel::O) outlier_ok = false;
        }
        if (!outlier_ok) {
            ++out.skipped;
            continue;
        }
        const Detection dn = detect(without, models.crf, *models.formation_svm, *models.angle_svm);
        ++out.pairs;
        if (dw.formation == dn.formation) ++out.agreeing;
    }
    out.agreement = out.pairs > 0 ? static_cast<double>(out.agreeing) / out.pairs : 0.0;
    return out;
}

LatencyStats bench_latency(const ModelBundle& models, std::span<const Scene> scenes, std::size_t repetitions) {
    if (scenes.size() < 100) throw InputError("latency benchmark needs at least 100 scenes");
    if (!models.formation_svm || !models.angle_svm) throw InputError("bundle lacks the cascade classifiers");
    if (repetitions == 0) throw InputError("repetitions must be positive");
    using Clock = std::chrono::steady_clock;

    for (const Scene& s : scenes) (void)detect(s, models.crf, *models.formation_svm, *models.angle_svm);

    std::vector<double> ms;
    ms.reserve(scenes.size() * repetitions);
    LatencyStats st;
    st.scenes = scenes.size();
    st.repetitions = repetitions;
    for (std::size_t r = 0; r < repetitions; ++r) {
        for (const Scene& s : scenes) {
            StageTimes t;
            const auto t0 = Clock::now();
            (void)detect(s, models.crf, *models.formation_svm, *models.angle_svm, &t);
            ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
            st.features_ms += 1e3 * t.features;
            st.crf_ms += 1e3 * t.crf;
            st.svm_ms += 1e3 * t.svm;
        }
    }
    const double n = static_cast<double>(ms.size());
    st.features_ms /= n;
    st.crf_ms /= n;
    st.svm_ms /= n;
    for (double v : ms) st.mean_ms += v / n;
    std::sort(ms.begin(), ms.end());
    auto rank = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::ceil(q * n));
        return ms[std::clamp<std::size_t>(idx, 1, ms.size()) - 1];
    };
    st.p50_ms = rank(0.50);
    st.p95_ms = rank(0.95);
    st.max_ms = ms.back();
    return st;
}

std::string latency_to_json(const LatencyStats& s) {
    ordered_json j = {{"scenes", s.scenes},
                      {"repetitions", s.repetitions},
                      {"p50_ms", s.p50_ms},
                      {"p95_ms", s.p95_ms},
                      {"max_ms", s.max_ms},
                      {"mean_ms", s.mean_ms},
                      {"stages_ms", {{"features", s.features_ms}, {"crf", s.crf_ms}, {"svm", s.svm_ms}}}};
    return j.dump(2);
}

} // namespace fform
