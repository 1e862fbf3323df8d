#pragma once

#include "fform/crf.hpp"
#include "fform/features.hpp"
#include "fform/model_io.hpp"
#include "fform/svm.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fform {

struct JointLabel {
    Formation formation = Formation::FaceToFace;
    int angle_deg = 0;
    friend bool operator==(const JointLabel&, const JointLabel&) = default;
};

inline constexpr std::size_t kNumJointClasses = kNumFormations * kApproachAngles.size(); // 28

std::size_t encode_joint(Formation f, int angle_deg);
JointLabel decode_joint(std::size_t index);

std::vector<std::string> formation_class_names();
std::vector<std::string> angle_class_names();
std::vector<std::string> joint_class_names();

/// Output of one pass over a scene. Indices refer to the input pose order.
struct Detection {
    std::string frame_id;
    std::vector<GroupLabel> membership;
    std::vector<std::size_t> members;            ///< all G-labeled poses
    std::vector<std::size_t> classified_members; ///< the (at most 3, left-most) poses fed to the SVMs
    bool overflow = false;
    std::optional<Formation> formation;
    std::optional<int> angle_deg;
    std::optional<JointLabel> joint;
    std::map<std::string, std::vector<double>> scores;
    std::optional<std::string> reason;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Wall-clock seconds spent per stage in the last detect call.
struct StageTimes {
    double features = 0.0;
    double crf = 0.0;
    double svm = 0.0;
};

/// Cascade: order, CRF membership, formation SVM, then angle SVM on the
/// group vector plus the predicted formation.
Detection detect(const Scene& scene, const CrfModel& crf, const SvmModel& formation_svm, const SvmModel& angle_svm,
                 StageTimes* times = nullptr);

/// Single 28-class classifier over the group vector.
Detection detect_joint(const Scene& scene, const CrfModel& crf, const SvmModel& joint_svm, StageTimes* times = nullptr);

/// Runs whichever stages the bundle holds and merges them into one record.
Detection detect_all(const Scene& scene, const ModelBundle& models);

enum class HeadOrientation { Left, Right, Front };
std::string_view to_string(HeadOrientation h);

inline constexpr double kFrontBandFraction = 0.15;
inline constexpr double kRuleGapFactor = 1.5;

/// Eye placement within the face box (nose, eyes, ears with confidence >=
/// 0.25). Falls back to Front with fewer than two confident face keypoints
/// or no confident eye.
HeadOrientation head_orientation(const PersonPose& pose);

/// Head-orientation rule baseline. Formation only; never predicts an angle.
/// Throws InputError for fewer than two poses.
Detection rule_classify(const Scene& scene);

enum class SvmTask { Formation, Angle, Joint };
std::string_view to_string(SvmTask t);
SvmTask svm_task_from_string(std::string_view s);

struct SvmTrainConfig {
    double C = 10.0;
    double tol = 1e-3;
    std::uint64_t seed = 7;
    /// If set, skips cross-validation.
    std::optional<double> gamma;
};

struct SvmTrainReport {
    SvmModel model;
    GammaSelection gamma_selection;
    std::size_t samples = 0;
};

/// Feature rows and class labels for one task, built from the scene truth
/// (ground-truth members, true formation for the angle features).
struct TaskData {
    Matrix x;
    std::vector<std::size_t> labels;
};
TaskData build_task_data(const std::vector<Scene>& scenes, SvmTask task);

SvmTrainReport train_svm_task(const std::vector<Scene>& scenes, SvmTask task, const SvmTrainConfig& config);

CrfTrainResult train_crf_from_scenes(const std::vector<Scene>& scenes, const CrfTrainConfig& config);

/// Poses of the ground-truth group (left to right, at most 3), or empty.
std::vector<PersonPose> truth_group(const Scene& scene);

/// Scene reduced to its ground-truth members.
Scene truth_member_scene(const Scene& scene);

std::string detection_to_line(const Detection& d);

} // namespace fform
