#include "fform/egogroup.hpp"
#include "fform/errors.hpp"
#include "fform/eval.hpp"
#include "fform/model_io.hpp"
#include "fform/pipeline.hpp"
#include "fform/rng.hpp"
#include "fform/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fform;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::vector<Scene> read_scenes(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    return parse_scenes(in);
}

std::string scenes_text(std::span<const Scene> scenes) {
    std::ostringstream out;
    write_scenes(out, scenes);
    return out.str();
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        write_text_file(out_path, text);
    }
}

ModelBundle load_or_empty(const fs::path& dir) {
    if (fs::exists(dir / "manifest.json")) return load_models(dir);
    return {};
}

struct GenerateArgs {
    std::string formation = "face-to-face";
    int angle = -90;
    std::size_t count = 1;
    double distance = 3.5;
    double distance_max = 0.0;
    int outliers = 0;
    double noise = 2.0;
    int width = 1280;
    int height = 720;
    std::uint64_t seed = 0;
    std::size_t per_cell = 0;
    double train_fraction = 0.8;
    std::string config;
    std::string out;
    std::string test_out;
};

int run_generate(const GenerateArgs& a) {
    std::vector<Scene> scenes;
    if (a.per_cell > 0) {
        scenes = generate_dataset(standard_dataset_spec(a.per_cell, a.seed), derive_seed(a.seed, 10));
    } else {
        SynthConfig c;
        std::size_t count = a.count;
        try {
            if (!a.config.empty()) {
                const std::string text = read_text_file(a.config);
                c = synth_config_from_json(text);
                const auto j = nlohmann::json::parse(text);
                if (j.contains("count")) count = j["count"].get<std::size_t>();
            } else {
                c.formation = formation_from_string(a.formation);
                c.angle_deg = a.angle;
                c.distance_m = a.distance;
                c.distance_max_m = a.distance_max;
                c.outliers = a.outliers;
                c.noise_px = a.noise;
                c.image_width = a.width;
                c.image_height = a.height;
                c.seed = a.seed;
                c.validate();
            }
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(e.what());
        }
        scenes = generate_dataset({{c, count}}, derive_seed(c.seed, 10));
    }
    if (a.test_out.empty()) {
        emit(a.out, scenes_text(scenes));
        return 0;
    }
    const std::vector<bool> is_train = split_train_test(scenes, a.train_fraction, derive_seed(a.seed, 11));
    std::vector<Scene> train, test;
    for (std::size_t i = 0; i < scenes.size(); ++i) (is_train[i] ? train : test).push_back(scenes[i]);
    emit(a.out, scenes_text(train));
    write_text_file(a.test_out, scenes_text(test));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"F-formation and approach-angle detection from 2D poses"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Render synthetic scenes as JSONL");
    generate->add_option("--formation", gen.formation, "face-to-face | side-by-side | L-shaped | triangle");
    generate->add_option("--angle", gen.angle, "Approach angle in degrees (-90..90 step 30)");
    generate->add_option("--count", gen.count, "Scenes to render");
    generate->add_option("--distance", gen.distance, "Camera distance in meters");
    generate->add_option("--distance-max", gen.distance_max, "Upper bound for a uniform distance range");
    generate->add_option("--outliers", gen.outliers, "Outliers per scene");
    generate->add_option("--noise", gen.noise, "Keypoint noise sigma in pixels");
    generate->add_option("--width", gen.width);
    generate->add_option("--height", gen.height);
    generate->add_option("--per-cell", gen.per_cell, "Render the full formation x angle corpus instead");
    generate->add_option("--train-fraction", gen.train_fraction, "Used with --test-out");
    generate->add_option("--test-out", gen.test_out, "Split per formation; train goes to --out");
    generate->add_option("--config", gen.config, "JSON file with synthesis fields (overrides the flags)");
    generate->add_option("--seed", gen.seed);
    generate->add_option("--out", gen.out, "Output JSONL (default stdout)");

    std::string data, models_dir, in_path, out_path, task = "formation", mode = "all";
    std::uint64_t seed = 7;
    CrfTrainConfig crf_cfg;
    SvmTrainConfig svm_cfg;
    std::optional<double> gamma;

    auto* train_crf_cmd = app.add_subcommand("train-crf", "Train the membership CRF");
    train_crf_cmd->add_option("--data", data, "Training scenes (JSONL with truth)")->required();
    train_crf_cmd->add_option("--models", models_dir, "Model bundle directory")->required();
    train_crf_cmd->add_option("--l2", crf_cfg.l2);
    train_crf_cmd->add_option("--max-iters", crf_cfg.max_iters);
    train_crf_cmd->add_option("--tol", crf_cfg.tol);
    train_crf_cmd->add_option("--seed", seed, "Accepted for uniformity; training is deterministic");

    auto* train_svm_cmd = app.add_subcommand("train-svm", "Train a formation, angle or joint classifier");
    train_svm_cmd->add_option("--task", task)->check(CLI::IsMember({"formation", "angle", "joint"}));
    train_svm_cmd->add_option("--data", data)->required();
    train_svm_cmd->add_option("--models", models_dir)->required();
    train_svm_cmd->add_option("--C", svm_cfg.C);
    train_svm_cmd->add_option("--tol", svm_cfg.tol);
    train_svm_cmd->add_option("--gamma", gamma, "Skip cross-validation");
    train_svm_cmd->add_option("--seed", svm_cfg.seed, "Fold assignment seed");

    auto* predict_cmd = app.add_subcommand("predict", "Scenes JSONL in, detections JSONL out");
    predict_cmd->add_option("--models", models_dir)->required();
    predict_cmd->add_option("--in", in_path)->required();
    predict_cmd->add_option("--out", out_path);
    predict_cmd->add_option("--mode", mode)->check(CLI::IsMember({"all", "cascade", "joint"}));
    predict_cmd->add_option("--seed", seed, "Accepted for uniformity; prediction is deterministic");

    ExperimentConfig exp;
    std::string exp_data, exp_models, exp_out = "report";
    std::vector<int> tables;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Train (unless --models) and write report tables");
    evaluate_cmd->add_option("--data", exp_data, "JSONL dataset (default: synthetic corpus)");
    evaluate_cmd->add_option("--per-cell", exp.per_cell, "Synthetic scenes per formation x angle cell");
    evaluate_cmd->add_option("--models", exp_models, "Evaluate this bundle on every scene");
    evaluate_cmd->add_option("--train-fraction", exp.train_fraction);
    evaluate_cmd->add_option("--tables", tables, "Subset of 1 2 3 4")->check(CLI::Range(1, 4));
    evaluate_cmd->add_option("--outlier-pairs", exp.outlier_pairs, "With/without-outlier pairs to compare");
    evaluate_cmd->add_option("--save-models", models_dir, "Also save the trained bundle here");
    evaluate_cmd->add_option("--out", exp_out, "Report directory");
    evaluate_cmd->add_option("--seed", exp.seed);

    bool truth_members = false;
    auto* baseline_cmd = app.add_subcommand("baseline", "Head-orientation rule classifier");
    baseline_cmd->add_option("--in", in_path)->required();
    baseline_cmd->add_option("--out", out_path);
    baseline_cmd->add_flag("--truth-members", truth_members, "Classify only the annotated group members");
    baseline_cmd->add_option("--seed", seed, "Accepted for uniformity");

    std::size_t reps = 5, bench_scenes = 200;
    auto* bench_cmd = app.add_subcommand("bench", "Single-threaded detect() latency");
    bench_cmd->add_option("--models", models_dir)->required();
    bench_cmd->add_option("--in", in_path, "Scenes JSONL (default: synthetic)");
    bench_cmd->add_option("--scenes", bench_scenes, "Synthetic scenes when --in is absent");
    bench_cmd->add_option("--repetitions", reps);
    bench_cmd->add_option("--out", out_path);
    bench_cmd->add_option("--seed", seed);

    auto* convert_cmd = app.add_subcommand("convert-egogroup", "Group annotation records to scene JSONL");
    convert_cmd->add_option("--in", in_path)->required();
    convert_cmd->add_option("--out", out_path);
    convert_cmd->add_option("--seed", seed, "Accepted for uniformity");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*generate) return run_generate(gen);

        if (*train_crf_cmd) {
            const auto scenes = read_scenes(data);
            ModelBundle bundle = load_or_empty(models_dir);
            const CrfTrainResult r = train_crf_from_scenes(scenes, crf_cfg);
            bundle.crf = r.model;
            save_models(bundle, models_dir);
            std::cerr << "crf: " << r.iterations << " iterations, loss " << r.final_loss
                      << (r.converged ? "" : " (not converged)") << "\n";
            return 0;
        }

        if (*train_svm_cmd) {
            const auto scenes = read_scenes(data);
            if (!fs::exists(fs::path(models_dir) / "manifest.json")) {
                throw ConfigError("train the CRF into " + models_dir + " first");
            }
            ModelBundle bundle = load_models(models_dir);
            svm_cfg.gamma = gamma;
            const SvmTask t = svm_task_from_string(task);
            SvmTrainReport r = train_svm_task(scenes, t, svm_cfg);
            std::cerr << task << ": " << r.samples << " samples, gamma " << r.gamma_selection.gamma
                      << (r.gamma_selection.used_fallback ? " (fallback)" : "") << "\n";
            if (t == SvmTask::Formation) bundle.formation_svm = std::move(r.model);
            else if (t == SvmTask::Angle) bundle.angle_svm = std::move(r.model);
            else bundle.joint_svm = std::move(r.model);
            save_models(bundle, models_dir);
            return 0;
        }

        if (*predict_cmd) {
            const ModelBundle bundle = load_models(models_dir);
            const auto scenes = read_scenes(in_path);
            std::ostringstream out;
            for (const Scene& s : scenes) {
                Detection d;
                if (mode == "cascade") {
                    if (!bundle.formation_svm || !bundle.angle_svm) throw ConfigError("bundle lacks cascade models");
                    d = detect(s, bundle.crf, *bundle.formation_svm, *bundle.angle_svm);
                } else if (mode == "joint") {
                    if (!bundle.joint_svm) throw ConfigError("bundle lacks the joint model");
                    d = detect_joint(s, bundle.crf, *bundle.joint_svm);
                } else {
                    d = detect_all(s, bundle);
                }
                out << detection_to_line(d) << "\n";
            }
            emit(out_path, out.str());
            return 0;
        }

        if (*evaluate_cmd) {
            if (!exp_data.empty()) exp.dataset = exp_data;
            if (!exp_models.empty()) exp.models_dir = exp_models;
            if (!tables.empty()) exp.tables = {tables.begin(), tables.end()};
            exp.svm.seed = exp.seed;
            const ExperimentResult r = run_experiment(exp);
            write_experiment(r, exp_out);
            if (!models_dir.empty() && exp_models.empty()) save_models(r.models, models_dir);
            std::ifstream summary(fs::path(exp_out) / "summary.json");
            std::cout << summary.rdbuf();
            return 0;
        }

        if (*baseline_cmd) {
            const auto scenes = read_scenes(in_path);
            std::ostringstream out;
            for (const Scene& s : scenes) {
                const Scene input = truth_members ? truth_member_scene(s) : s;
                Detection d;
                if (input.poses.size() < 2) {
                    d.frame_id = s.frame_id;
                    d.membership.assign(input.poses.size(), GroupLabel::O);
                    d.reason = "group too small";
                } else {
                    d = rule_classify(input);
                }
                out << detection_to_line(d) << "\n";
            }
            emit(out_path, out.str());
            return 0;
        }

        if (*bench_cmd) {
            const ModelBundle bundle = load_models(models_dir);
            std::vector<Scene> scenes;
            if (!in_path.empty()) {
                scenes = read_scenes(in_path);
            } else {
                const std::size_t per_cell = (bench_scenes + kNumJointClasses - 1) / kNumJointClasses;
                scenes = generate_dataset(standard_dataset_spec(per_cell, seed), derive_seed(seed, 10));
                scenes.resize(std::min(scenes.size(), bench_scenes));
            }
            const LatencyStats st = bench_latency(bundle, scenes, reps);
            emit(out_path, latency_to_json(st) + "\n");
            return 0;
        }

        if (*convert_cmd) {
            std::ifstream in(in_path);
            if (!in) throw ConfigError("cannot open " + in_path);
            emit(out_path, scenes_text(convert_egogroup(in)));
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PlacementError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InputError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const VersionMismatch& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const CorruptFile& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
