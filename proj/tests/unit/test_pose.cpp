#include "fform/errors.hpp"
#include "fform/pose.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace fform;

TEST_CASE("confidence bins are lower-inclusive") {
    CHECK(bin_confidence(0.0) == ConfidenceBin::Low);
    CHECK(bin_confidence(0.2499) == ConfidenceBin::Low);
    CHECK(bin_confidence(0.25) == ConfidenceBin::Medium);
    CHECK(bin_confidence(0.5) == ConfidenceBin::High);
    CHECK(bin_confidence(0.75) == ConfidenceBin::VeryHigh);
    CHECK(bin_confidence(1.0) == ConfidenceBin::VeryHigh);
    CHECK_THROWS_AS(bin_confidence(1.01), InputError);
    CHECK_THROWS_AS(bin_confidence(-0.1), InputError);
}

TEST_CASE("keypoint names round-trip in canonical order") {
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const auto n = static_cast<KeypointName>(i);
        CHECK(keypoint_from_string(to_string(n)) == n);
    }
    CHECK(to_string(KeypointName::LeftEye) == "leftEye");
    CHECK_THROWS_AS(keypoint_from_string("tail"), InputError);
}

TEST_CASE("pose rejects out-of-range confidence and misplaced names") {
    auto k = oracle::upright_pose("a", 100, 100, 200).keypoints();
    k[3].confidence = 1.5;
    CHECK_THROWS_AS(PersonPose("a", k), ValidationError);
    k = oracle::upright_pose("a", 100, 100, 200).keypoints();
    std::swap(k[0], k[1]);
    CHECK_THROWS_AS(PersonPose("a", k), ValidationError);
}

TEST_CASE("anchor_x falls back to all keypoints when none are confident") {
    const PersonPose p = oracle::upright_pose("a", 300, 50, 200, 0.1);
    double sum = 0.0;
    for (const Keypoint& k : p.keypoints()) sum += k.x;
    CHECK(anchor_x(p) == doctest::Approx(sum / kNumKeypoints));
}

TEST_CASE("ordering is stable and carries truth labels") {
    Scene s;
    s.frame_id = "f";
    s.image_width = 640;
    s.image_height = 480;
    s.poses = {oracle::upright_pose("c", 500, 10, 200), oracle::upright_pose("a", 100, 10, 200),
               oracle::upright_pose("b", 100, 10, 200)};
    s.truth = SceneTruth{{GroupLabel::O, GroupLabel::G, GroupLabel::G}, Formation::SideBySide, 0};
    const Scene o = order_left_to_right(s);
    REQUIRE(o.poses.size() == 3);
    CHECK(o.poses[0].person_id() == "a");
    CHECK(o.poses[1].person_id() == "b");
    CHECK(o.poses[2].person_id() == "c");
    CHECK(o.truth->membership == std::vector<GroupLabel>{GroupLabel::G, GroupLabel::G, GroupLabel::O});
    Scene empty = s;
    empty.poses.clear();
    empty.truth.reset();
    CHECK_THROWS_AS(order_left_to_right(empty), InputError);
}

TEST_CASE("scene JSONL round-trips") {
    Scene s;
    s.frame_id = "frame-1";
    s.image_width = 1280;
    s.image_height = 720;
    s.poses = {oracle::upright_pose("p0", 200, 100, 300), oracle::upright_pose("p1", 600, 120, 280)};
    s.truth = SceneTruth{{GroupLabel::G, GroupLabel::O}, Formation::LShaped, -30};
    Scene t = s;
    t.frame_id = "frame-2";
    t.truth.reset();
    std::stringstream io;
    const std::vector<Scene> in{s, t};
    write_scenes(io, in);
    const std::vector<Scene> back = parse_scenes(io);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == s);
    CHECK(back[1] == t);
    CHECK(scene_to_line(back[0]) == scene_to_line(s));
}

TEST_CASE("parser reports the failing line and missing keypoints") {
    Scene s;
    s.frame_id = "x";
    s.image_width = 100;
    s.image_height = 100;
    s.poses = {oracle::upright_pose("p0", 50, 10, 60)};
    const std::string good = scene_to_line(s);
    std::stringstream bad(good + "\n\n{not json\n");
    try {
        parse_scenes(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::string missing = good;
    const auto pos = missing.find("\"name\":\"nose\"");
    REQUIRE(pos != std::string::npos);
    missing.replace(pos, 13, "\"name\":\"leftEye\"");
    CHECK_THROWS_AS(parse_scene_line(missing), ValidationError);
}

TEST_CASE("truth membership length must match the pose count") {
    Scene s;
    s.frame_id = "x";
    s.image_width = 100;
    s.image_height = 100;
    s.poses = {oracle::upright_pose("p0", 50, 10, 60)};
    s.truth = SceneTruth{{GroupLabel::G, GroupLabel::G}, std::nullopt, std::nullopt};
    CHECK_THROWS_AS(validate(s), ValidationError);
}
