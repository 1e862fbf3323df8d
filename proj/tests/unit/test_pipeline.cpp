#include "fform/errors.hpp"
#include "fform/pipeline.hpp"
#include "fform/synth.hpp"

#include "../support/oracles.hpp"
#include "../support/small_bundle.hpp"

#include <doctest.h>
#include <json.hpp>

using namespace fform;

namespace {

Scene scene_of(std::vector<PersonPose> poses) {
    Scene s;
    s.frame_id = "t";
    s.image_width = 1280;
    s.image_height = 720;
    s.poses = std::move(poses);
    return s;
}

/// Face keypoints placed so the eye midpoint sits at `eye_shift` (fraction
/// of the face box width) from the box midline.
PersonPose looking(const std::string& id, double cx, double eye_shift) {
    PersonPose p = oracle::upright_pose(id, cx, 100, 400);
    p = oracle::with_keypoint(p, KeypointName::LeftEar, cx - 30, 120, 0.9);
    p = oracle::with_keypoint(p, KeypointName::RightEar, cx + 30, 120, 0.9);
    p = oracle::with_keypoint(p, KeypointName::Nose, cx + eye_shift * 60, 125, 0.9);
    p = oracle::with_keypoint(p, KeypointName::LeftEye, cx + eye_shift * 60 - 8, 115, 0.9);
    p = oracle::with_keypoint(p, KeypointName::RightEye, cx + eye_shift * 60 + 8, 115, 0.9);
    return p;
}

} // namespace

TEST_CASE("joint classes round-trip") {
    CHECK(kNumJointClasses == 28);
    CHECK(joint_class_names().size() == 28);
    for (std::size_t i = 0; i < 28; ++i) {
        const JointLabel j = decode_joint(i);
        CHECK(encode_joint(j.formation, j.angle_deg) == i);
    }
    CHECK_THROWS_AS(decode_joint(28), InputError);
}

TEST_CASE("head orientation rules") {
    CHECK(head_orientation(looking("a", 500, 0.0)) == HeadOrientation::Front);
    CHECK(head_orientation(looking("a", 500, -0.4)) == HeadOrientation::Left);
    CHECK(head_orientation(looking("a", 500, 0.4)) == HeadOrientation::Right);
    PersonPose blind = looking("a", 500, 0.4);
    blind = oracle::with_keypoint(blind, KeypointName::LeftEye, 0, 0, 0.1);
    blind = oracle::with_keypoint(blind, KeypointName::RightEye, 0, 0, 0.1);
    CHECK(head_orientation(blind) == HeadOrientation::Front);
    PersonPose sparse = oracle::upright_pose("a", 500, 100, 400, 0.1);
    sparse = oracle::with_keypoint(sparse, KeypointName::LeftEye, 480, 110, 0.9);
    CHECK(head_orientation(sparse) == HeadOrientation::Front);
}

TEST_CASE("rule baseline priorities") {
    CHECK(rule_classify(scene_of({looking("a", 400, 0.4), looking("b", 800, -0.4)})).formation == Formation::FaceToFace);
    CHECK(rule_classify(scene_of({looking("a", 400, 0.0), looking("b", 560, 0.0)})).formation == Formation::SideBySide);
    CHECK(rule_classify(scene_of({looking("a", 400, 0.0), looking("b", 560, 0.4)})).formation == Formation::LShaped);
    CHECK(rule_classify(scene_of({looking("a", 300, 0.0), looking("b", 500, 0.4), looking("c", 700, 0.0)}))
              .formation == Formation::Triangle);
    const Detection far = rule_classify(scene_of({looking("a", 100, 0.0), looking("b", 1100, 0.0)}));
    CHECK_FALSE(far.formation.has_value());
    CHECK(far.reason == "no rule matched");
    CHECK_THROWS_AS(rule_classify(scene_of({looking("a", 100, 0.0)})), InputError);
}

TEST_CASE("back-facing side-by-side pair falls back to Front and matches") {
    SynthConfig c;
    c.formation = Formation::SideBySide;
    c.angle_deg = -90;
    c.seed = 3;
    const Scene s = render_scene(c);
    for (const PersonPose& p : s.poses) CHECK(head_orientation(p) == HeadOrientation::Front);
    CHECK(rule_classify(s).formation == Formation::SideBySide);
}

TEST_CASE("single person yields no formation") {
    const ModelBundle& b = oracle::small_bundle();
    const Detection d = detect(scene_of({oracle::upright_pose("a", 500, 100, 400)}), b.crf, *b.formation_svm, *b.angle_svm);
    CHECK(d.membership.size() == 1);
    CHECK_FALSE(d.formation.has_value());
    CHECK_FALSE(d.angle_deg.has_value());
    CHECK(d.reason == "group too small");
}

TEST_CASE("detect is deterministic and members match the G labels") {
    const ModelBundle& b = oracle::small_bundle();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SynthConfig c;
        c.formation = kAllFormations[seed % 4];
        c.angle_deg = kApproachAngles[seed % 7];
        c.outliers = static_cast<int>(seed % 2);
        c.seed = 900 + seed;
        const Scene s = render_scene(c);
        const Detection d1 = detect(s, b.crf, *b.formation_svm, *b.angle_svm);
        const Detection d2 = detect(s, b.crf, *b.formation_svm, *b.angle_svm);
        CHECK(d1 == d2);
        std::vector<std::size_t> g;
        for (std::size_t i = 0; i < d1.membership.size(); ++i) {
            if (d1.membership[i] == GroupLabel::G) g.push_back(i);
        }
        CHECK(d1.members == g);
        CHECK(d1.formation.has_value() == (g.size() >= 2));
        CHECK(d1.classified_members.size() == std::min<std::size_t>(g.size() >= 2 ? g.size() : 0, 3));
    }
}

TEST_CASE("input order does not change the detection") {
    const ModelBundle& b = oracle::small_bundle();
    SynthConfig c;
    c.formation = Formation::Triangle;
    c.angle_deg = 60;
    c.outliers = 1;
    c.seed = 31;
    const Scene s = render_scene(c);
    Scene r = s;
    std::reverse(r.poses.begin(), r.poses.end());
    std::reverse(r.truth->membership.begin(), r.truth->membership.end());
    const Detection a = detect(s, b.crf, *b.formation_svm, *b.angle_svm);
    const Detection z = detect(r, b.crf, *b.formation_svm, *b.angle_svm);
    CHECK(a.formation == z.formation);
    CHECK(a.angle_deg == z.angle_deg);
    std::vector<GroupLabel> back = z.membership;
    std::reverse(back.begin(), back.end());
    CHECK(back == a.membership);
}

TEST_CASE("more than three members are truncated with a flag") {
    const ModelBundle& b = oracle::small_bundle();
    // A CRF that labels everything G.
    CrfModel all_g = CrfModel::zeros(b.crf.feature_dim, b.crf.feature_catalog_version);
    all_g.weights[all_g.observation_offset(1)] = -5.0;
    std::vector<PersonPose> poses;
    for (int i = 0; i < 5; ++i) poses.push_back(oracle::upright_pose("p" + std::to_string(i), 900 - 150.0 * i, 100, 300));
    const Detection d = detect(scene_of(poses), all_g, *b.formation_svm, *b.angle_svm);
    CHECK(d.overflow);
    CHECK(d.members.size() == 5);
    CHECK(d.classified_members == std::vector<std::size_t>{4, 3, 2});
    CHECK(d.formation.has_value());
}

TEST_CASE("catalog mismatch between models is fatal") {
    const ModelBundle& b = oracle::small_bundle();
    SvmModel other = *b.formation_svm;
    other.feature_catalog_version = "elsewhere";
    CHECK_THROWS_AS(detect(scene_of({oracle::upright_pose("a", 500, 100, 400)}), b.crf, other, *b.angle_svm),
                    VersionMismatch);
}

TEST_CASE("detection line carries the documented keys") {
    const ModelBundle& b = oracle::small_bundle();
    SynthConfig c;
    c.formation = Formation::LShaped;
    c.angle_deg = 0;
    c.seed = 8;
    const Detection d = detect_all(render_scene(c), b);
    const auto j = nlohmann::json::parse(detection_to_line(d));
    for (const char* key : {"frame_id", "membership", "formation", "angle_deg", "joint", "scores", "reason"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["membership"].size() == d.membership.size());
    CHECK(j["joint"].is_object());
    CHECK(j["scores"]["joint"].size() == 28);
}

TEST_CASE("task data uses truth members") {
    SynthConfig c;
    c.formation = Formation::Triangle;
    c.angle_deg = 30;
    c.outliers = 1;
    c.seed = 4;
    const std::vector<Scene> scenes{render_scene(c)};
    const TaskData f = build_task_data(scenes, SvmTask::Formation);
    REQUIRE(f.x.rows() == 1);
    CHECK(f.labels[0] == static_cast<std::size_t>(Formation::Triangle));
    CHECK(f.x(0, 309 - 1) == 1.0);
    const TaskData a = build_task_data(scenes, SvmTask::Angle);
    CHECK(a.x.cols() == 313);
    CHECK(a.labels[0] == angle_index(30));
    CHECK(build_task_data(scenes, SvmTask::Joint).labels[0] == encode_joint(Formation::Triangle, 30));
}
