#include "fform/egogroup.hpp"
#include "fform/errors.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sstream>

using namespace fform;

namespace {

nlohmann::json person(double cx, std::optional<int> group) {
    nlohmann::json kp = nlohmann::json::array();
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        kp.push_back(cx + static_cast<double>(k));
        kp.push_back(100.0 + 10.0 * k);
        kp.push_back(0.8);
    }
    nlohmann::json p = {{"keypoints", kp}};
    if (group) p["group"] = *group;
    else p["group"] = nullptr;
    return p;
}

} // namespace

TEST_CASE("largest group becomes the members") {
    nlohmann::json rec = {{"frame", "000123"},
                          {"width", 1920},
                          {"height", 1080},
                          {"formation", "vis-a-vis"},
                          {"approach_angle", -30},
                          {"people", {person(100, 1), person(400, 2), person(700, 2), person(1000, std::nullopt)}}};
    const Scene s = convert_egogroup_record(rec.dump());
    CHECK(s.frame_id == "000123");
    CHECK(s.poses.size() == 4);
    CHECK(s.truth->membership ==
          std::vector<GroupLabel>{GroupLabel::O, GroupLabel::G, GroupLabel::G, GroupLabel::O});
    CHECK(s.truth->formation == Formation::FaceToFace);
    CHECK(s.truth->angle_deg == -30);
    CHECK(s.poses[0][KeypointName::RightEye].x == 102.0);
}

TEST_CASE("explicit target group wins") {
    nlohmann::json rec = {{"frame", 7},
                          {"width", 640},
                          {"height", 480},
                          {"target_group", 1},
                          {"people", {person(10, 1), person(200, 2), person(300, 2)}}};
    const Scene s = convert_egogroup_record(rec.dump());
    CHECK(s.frame_id == "7");
    CHECK(s.truth->membership == std::vector<GroupLabel>{GroupLabel::G, GroupLabel::O, GroupLabel::O});
    CHECK_FALSE(s.truth->formation.has_value());
}

TEST_CASE("malformed records report their line") {
    std::stringstream in("\n{\"frame\": 1}\n");
    try {
        convert_egogroup(in);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    nlohmann::json rec = {{"frame", "a"}, {"width", 10}, {"height", 10}, {"people", {{{"keypoints", {1, 2, 3}}}}}};
    CHECK_THROWS_AS(convert_egogroup_record(rec.dump()), ValidationError);
}
