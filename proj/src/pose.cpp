#include "fform/pose.hpp"

#include "fform/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace fform {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumKeypoints> kKeypointNames = {
    "nose",         "leftEye",       "rightEye",   "leftEar",    "rightEar",  "leftShoulder",
    "rightShoulder", "leftElbow",    "rightElbow", "leftWrist",  "rightWrist", "leftHip",
    "rightHip",     "leftKnee",      "rightKnee",  "leftAnkle",  "rightAnkle"};

constexpr std::array<std::string_view, kNumFormations> kFormationNames = {
    "face-to-face", "side-by-side", "L-shaped", "triangle"};

std::string_view label_name(GroupLabel g) { return g == GroupLabel::G ? "G" : "O"; }

} // namespace

std::string_view to_string(KeypointName name) { return kKeypointNames.at(index_of(name)); }

KeypointName keypoint_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        if (kKeypointNames[i] == s) return static_cast<KeypointName>(i);
    }
    throw ValidationError("unknown keypoint name '" + std::string(s) + "'");
}

ConfidenceBin bin_confidence(double c) {
    if (!(c >= 0.0 && c <= 1.0)) {
        throw InputError("confidence " + std::to_string(c) + " outside [0,1]");
    }
    if (c < 0.25) return ConfidenceBin::Low;
    if (c < 0.5) return ConfidenceBin::Medium;
    if (c < 0.75) return ConfidenceBin::High;
    return ConfidenceBin::VeryHigh;
}

PersonPose::PersonPose(std::string person_id, const std::array<Keypoint, kNumKeypoints>& keypoints)
    : person_id_(std::move(person_id)), keypoints_(keypoints) {
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const Keypoint& k = keypoints_[i];
        if (index_of(k.name) != i) {
            throw ValidationError("keypoint slot " + std::to_string(i) + " holds '" +
                                  std::string(to_string(k.name)) + "'");
        }
        if (!std::isfinite(k.x) || !std::isfinite(k.y)) {
            throw ValidationError("non-finite coordinate for " + std::string(to_string(k.name)));
        }
        if (!(k.confidence >= 0.0 && k.confidence <= 1.0)) {
            throw ValidationError("confidence outside [0,1] for " + std::string(to_string(k.name)));
        }
    }
}

std::string_view to_string(Formation f) { return kFormationNames.at(static_cast<std::size_t>(f)); }

Formation formation_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kNumFormations; ++i) {
        if (kFormationNames[i] == s) return static_cast<Formation>(i);
    }
    throw ValidationError("unknown formation '" + std::string(s) + "'");
}

std::size_t member_count(Formation f) { return f == Formation::Triangle ? 3 : 2; }

bool is_approach_angle(int degrees) {
    return std::find(kApproachAngles.begin(), kApproachAngles.end(), degrees) != kApproachAngles.end();
}

std::size_t angle_index(int degrees) {
    const auto it = std::find(kApproachAngles.begin(), kApproachAngles.end(), degrees);
    if (it == kApproachAngles.end()) {
        throw InputError("approach angle " + std::to_string(degrees) + " not in {-90,...,90}");
    }
    return static_cast<std::size_t>(it - kApproachAngles.begin());
}

void validate(const Scene& scene) {
    if (scene.image_width <= 0 || scene.image_height <= 0) {
        throw ValidationError("image dimensions must be positive");
    }
    if (scene.truth && !scene.truth->membership.empty() &&
        scene.truth->membership.size() != scene.poses.size()) {
        throw ValidationError("truth membership has " + std::to_string(scene.truth->membership.size()) +
                              " labels for " + std::to_string(scene.poses.size()) + " poses");
    }
    if (scene.truth && scene.truth->angle_deg && !is_approach_angle(*scene.truth->angle_deg)) {
        throw ValidationError("truth angle " + std::to_string(*scene.truth->angle_deg) + " is not an approach angle");
    }
}

double anchor_x(const PersonPose& pose) {
    double sum = 0.0;
    int n = 0;
    for (const Keypoint& k : pose.keypoints()) {
        if (k.confidence >= 0.5) {
            sum += k.x;
            ++n;
        }
    }
    if (n > 0) return sum / n;
    for (const Keypoint& k : pose.keypoints()) sum += k.x;
    return sum / static_cast<double>(kNumKeypoints);
}

Scene order_left_to_right(const Scene& scene) {
    if (scene.poses.empty()) throw InputError("cannot order an empty scene");
    std::vector<double> anchors;
    anchors.reserve(scene.poses.size());
    for (const PersonPose& p : scene.poses) anchors.push_back(anchor_x(p));

    std::vector<std::size_t> order(scene.poses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return anchors[a] < anchors[b]; });

    Scene out = scene;
    const bool permute_truth = scene.truth && scene.truth->membership.size() == scene.poses.size();
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.poses[i] = scene.poses[order[i]];
        if (permute_truth) out.truth->membership[i] = scene.truth->membership[order[i]];
    }
    return out;
}

namespace {

double number_field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) {
        throw ValidationError(std::string("missing numeric field '") + key + "'");
    }
    return it->get<double>();
}

PersonPose pose_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("pose must be an object");
    std::string id;
    if (const auto it = j.find("person_id"); it != j.end()) {
        id = it->is_string() ? it->get<std::string>() : it->dump();
    }
    const auto kps = j.find("keypoints");
    if (kps == j.end() || !kps->is_array()) throw ValidationError("pose missing 'keypoints' array");

    std::array<Keypoint, kNumKeypoints> slots{};
    std::array<bool, kNumKeypoints> seen{};
    for (const json& kj : *kps) {
        const auto name_it = kj.find("name");
        if (name_it == kj.end() || !name_it->is_string()) throw ValidationError("keypoint missing 'name'");
        const KeypointName name = keypoint_from_string(name_it->get<std::string>());
        const std::size_t i = index_of(name);
        if (seen[i]) throw ValidationError("duplicate keypoint '" + std::string(to_string(name)) + "'");
        seen[i] = true;
        slots[i] = Keypoint{name, number_field(kj, "x"), number_field(kj, "y"), number_field(kj, "confidence")};
    }
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        if (!seen[i]) {
            throw ValidationError("missing keypoint '" + std::string(kKeypointNames[i]) + "'");
        }
    }
    return PersonPose(std::move(id), slots);
}

json pose_to_json(const PersonPose& p) {
    json kps = json::array();
    for (const Keypoint& k : p.keypoints()) {
        kps.push_back({{"name", to_string(k.name)}, {"x", k.x}, {"y", k.y}, {"confidence", k.confidence}});
    }
    return {{"person_id", p.person_id()}, {"keypoints", std::move(kps)}};
}

Scene scene_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("scene must be a JSON object");
    Scene s;
    if (const auto it = j.find("frame_id"); it != j.end() && it->is_string()) {
        s.frame_id = it->get<std::string>();
    }
    const auto w = j.find("image_width");
    const auto h = j.find("image_height");
    if (w == j.end() || h == j.end() || !w->is_number_integer() || !h->is_number_integer()) {
        throw ValidationError("scene needs integer image_width and image_height");
    }
    s.image_width = w->get<int>();
    s.image_height = h->get<int>();
    const auto poses = j.find("poses");
    if (poses == j.end() || !poses->is_array()) throw ValidationError("scene missing 'poses' array");
    for (const json& pj : *poses) s.poses.push_back(pose_from_json(pj));

    if (const auto t = j.find("truth"); t != j.end() && !t->is_null()) {
        SceneTruth truth;
        if (const auto m = t->find("membership"); m != t->end() && m->is_array()) {
            for (const json& g : *m) {
                const std::string v = g.is_string() ? g.get<std::string>() : "";
                if (v == "G") truth.membership.push_back(GroupLabel::G);
                else if (v == "O") truth.membership.push_back(GroupLabel::O);
                else throw ValidationError("membership labels must be \"G\" or \"O\"");
            }
        }
        if (const auto f = t->find("formation"); f != t->end() && !f->is_null()) {
            if (!f->is_string()) throw ValidationError("truth.formation must be a string");
            truth.formation = formation_from_string(f->get<std::string>());
        }
        if (const auto a = t->find("angle_deg"); a != t->end() && !a->is_null()) {
            if (!a->is_number_integer()) throw ValidationError("truth.angle_deg must be an integer");
            truth.angle_deg = a->get<int>();
        }
        s.truth = std::move(truth);
    }
    validate(s);
    return s;
}

json scene_to_json(const Scene& s) {
    json poses = json::array();
    for (const PersonPose& p : s.poses) poses.push_back(pose_to_json(p));
    json j = {{"frame_id", s.frame_id},
              {"image_width", s.image_width},
              {"image_height", s.image_height},
              {"poses", std::move(poses)}};
    if (s.truth) {
        json m = json::array();
        for (GroupLabel g : s.truth->membership) m.push_back(label_name(g));
        j["truth"] = {{"membership", std::move(m)},
                      {"formation", s.truth->formation ? json(to_string(*s.truth->formation)) : json(nullptr)},
                      {"angle_deg", s.truth->angle_deg ? json(*s.truth->angle_deg) : json(nullptr)}};
    } else {
        j["truth"] = nullptr;
    }
    return j;
}

} // namespace

Scene parse_scene_line(std::string_view line, std::size_t line_number) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_number, e.what());
    }
    try {
        return scene_from_json(j);
    } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line_number) + ": " + e.what());
    } catch (const json::exception& e) {
        throw ParseError(line_number, e.what());
    }
}

std::string scene_to_line(const Scene& scene) { return scene_to_json(scene).dump(); }

std::vector<Scene> parse_scenes(std::istream& in) {
    std::vector<Scene> scenes;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        scenes.push_back(parse_scene_line(line, n));
    }
    return scenes;
}

void write_scenes(std::ostream& out, std::span<const Scene> scenes) {
    for (const Scene& s : scenes) out << scene_to_line(s) << '\n';
}

} // namespace fform
