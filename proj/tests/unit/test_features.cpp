#include "fform/errors.hpp"
#include "fform/features.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace fform;

namespace {

Scene three_people() {
    Scene s;
    s.frame_id = "f";
    s.image_width = 1280;
    s.image_height = 720;
    s.poses = {oracle::upright_pose("a", 300, 100, 400), oracle::upright_pose("b", 500, 110, 380),
               oracle::upright_pose("c", 1000, 200, 250)};
    return s;
}

} // namespace

TEST_CASE("node feature names match the dimension and are unique") {
    const auto names = node_feature_names();
    CHECK(names.size() == node_feature_dim());
    std::set<std::string_view> unique(names.begin(), names.end());
    CHECK(unique.size() == names.size());
    const Scene s = three_people();
    for (std::size_t i = 0; i < s.poses.size(); ++i) CHECK(node_features(s, i).values.size() == node_feature_dim());
    CHECK_THROWS_AS(node_features(s, 3), InputError);
}

TEST_CASE("edge nodes see the no-neighbor sentinel") {
    const Scene s = three_people();
    const auto names = node_feature_names();
    auto at = [&](const NodeFeatures& f, std::string_view name) {
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (names[k] == name) return f.values[k];
        }
        FAIL("missing feature");
        return 0.0;
    };
    const NodeFeatures first = node_features(s, 0);
    CHECK(at(first, "gap_left") == kNoNeighborGap);
    CHECK(at(first, "has_left") == 0.0);
    CHECK(at(first, "has_right") == 1.0);
    CHECK(at(first, "gap_right") == doctest::Approx((anchor_x(s.poses[1]) - anchor_x(s.poses[0])) / 1280.0));
    const NodeFeatures last = node_features(s, 2);
    CHECK(at(last, "gap_right") == kNoNeighborGap);
    CHECK(at(last, "left.shoulder_width") == doctest::Approx(shoulder_width_px(s.poses[1]) / 1280.0));
}

TEST_CASE("facing score is clamped for profile poses") {
    PersonPose p = oracle::upright_pose("a", 300, 100, 400);
    const double sy = p[KeypointName::LeftShoulder].y;
    p = oracle::with_keypoint(p, KeypointName::LeftShoulder, 300, sy, 0.9);
    p = oracle::with_keypoint(p, KeypointName::RightShoulder, 300, sy, 0.9);
    p = oracle::with_keypoint(p, KeypointName::Nose, 340, 120, 0.9);
    CHECK(facing_score(p) == kFacingClamp);
    CHECK(std::isfinite(facing_score(p)));
}

TEST_CASE("group vector layout") {
    const Scene s = three_people();
    const std::vector<PersonPose> two{s.poses[0], s.poses[1]};
    const GroupFeatureVector g = group_features(two, 1280, 720);
    CHECK(g.values.size() == 309);
    CHECK(g.values[3 * kSlotDim + 0] == 1.0);
    CHECK(g.values[3 * kSlotDim + 1] == 1.0);
    CHECK(g.values[3 * kSlotDim + 2] == 0.0);
    for (std::size_t k = 2 * kSlotDim; k < 3 * kSlotDim; ++k) CHECK(g.values[k] == 0.0);
    // nose of slot 0: x 300 -> (300-640)/640, confidence 0.9 -> VeryHigh
    CHECK(g.values[0] == doctest::Approx((300.0 - 640.0) / 640.0));
    CHECK(g.values[2 + 3] == 1.0);
    for (double v : g.values) CHECK(std::abs(v) <= 1.0);
    std::vector<PersonPose> four(4, s.poses[0]);
    CHECK_THROWS_AS(group_features(four, 1280, 720), InputError);
    CHECK_THROWS_AS(group_features(std::span<const PersonPose>{}, 1280, 720), InputError);
}

TEST_CASE("out-of-frame coordinates clamp to the unit box") {
    PersonPose p = oracle::upright_pose("a", 300, 100, 400);
    p = oracle::with_keypoint(p, KeypointName::Nose, -5000, 9000, 0.1);
    const std::vector<PersonPose> one{p};
    const GroupFeatureVector g = group_features(one, 1280, 720);
    CHECK(g.values[0] == -1.0);
    CHECK(g.values[1] == 1.0);
}

TEST_CASE("angle vector appends a formation one-hot") {
    const Scene s = three_people();
    const std::vector<PersonPose> two{s.poses[0], s.poses[1]};
    const GroupFeatureVector g = group_features(two, 1280, 720);
    const AngleFeatureVector a = angle_features(g, Formation::LShaped);
    CHECK(a.values.size() == 313);
    CHECK(std::equal(g.values.begin(), g.values.end(), a.values.begin()));
    CHECK(a.values[309] == 0.0);
    CHECK(a.values[310] == 0.0);
    CHECK(a.values[311] == 1.0);
    CHECK(a.values[312] == 0.0);
}
