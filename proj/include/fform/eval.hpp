#pragma once

#include "fform/model_io.hpp"
#include "fform/pipeline.hpp"
#include "fform/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fform {

struct ClassificationReport {
    std::vector<std::string> classes;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<std::size_t> support;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    double accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion; ///< [gold][pred]
    /// Some precision or recall had an empty denominator and was reported as 0.
    bool zero_division = false;
};

/// Labels index into `classes`. Throws InputError on a length mismatch or an
/// out-of-range label.
ClassificationReport report(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                            std::vector<std::string> classes);

std::string report_to_csv(const ClassificationReport& r);
std::string report_to_json(const ClassificationReport& r);

struct ExperimentConfig {
    /// JSONL scenes with truth; when absent a synthetic corpus is generated.
    std::optional<std::filesystem::path> dataset;
    std::size_t per_cell = 100;
    std::uint64_t seed = 7;
    double train_fraction = 0.8;
    /// Pre-trained bundle, scored on every scene; when absent each model is
    /// trained on the train split and scored on the test split.
    std::optional<std::filesystem::path> models_dir;
    CrfTrainConfig crf;
    SvmTrainConfig svm;
    std::set<int> tables = {1, 2, 3, 4};
    /// Number of with/without-outlier scene pairs for the robustness table (0 = skip).
    std::size_t outlier_pairs = 0;
};

struct JointRow {
    Formation formation = Formation::FaceToFace;
    int angle_deg = 0;
    std::size_t samples = 0;
    double learned_accuracy = 0.0;
    /// Formation-only accuracy of the rule baseline (it predicts no angle).
    double rule_accuracy = 0.0;
};

struct PairAgreement {
    std::size_t pairs = 0;     ///< pairs whose outlier the CRF labeled O
    std::size_t skipped = 0;   ///< pairs dropped because the outlier was labeled G
    std::size_t agreeing = 0;
    double agreement = 0.0;
};

struct ExperimentResult {
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    std::uint64_t svm_seed = 0;
    std::size_t train_scenes = 0;
    std::size_t test_scenes = 0;
    ModelBundle models;
    std::optional<ClassificationReport> membership;
    std::optional<ClassificationReport> formation;
    std::optional<ClassificationReport> formation_rule;
    std::optional<ClassificationReport> angle;
    std::optional<ClassificationReport> joint;
    std::vector<JointRow> joint_rows; ///< all 28 cells in canonical order
    double joint_learned_average = 0.0;
    double joint_rule_average = 0.0;
    std::optional<PairAgreement> outliers;
};

/// Throws ConfigError for missing inputs.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// table1_membership, table2_formation, table3_angle, table4_joint (CSV +
/// JSON each, as requested) and summary.json.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

/// Renders each pair from one seed with and without a single outlier and
/// compares cascade formation predictions. Pairs are spread round-robin over
/// all formation x angle cells.
PairAgreement outlier_pair_agreement(const ModelBundle& models, std::size_t pairs, std::uint64_t seed);

struct LatencyStats {
    std::size_t scenes = 0;
    std::size_t repetitions = 0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double max_ms = 0.0;
    double mean_ms = 0.0;
    double features_ms = 0.0; ///< per-call means
    double crf_ms = 0.0;
    double svm_ms = 0.0;
};

/// Single-threaded timing of detect() after one untimed warmup pass.
/// Throws InputError for fewer than 100 scenes or a bundle without the
/// cascade classifiers.
LatencyStats bench_latency(const ModelBundle& models, std::span<const Scene> scenes, std::size_t repetitions);

std::string latency_to_json(const LatencyStats& s);

} // namespace fform
