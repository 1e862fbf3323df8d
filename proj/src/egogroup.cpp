#include "fform/egogroup.hpp"

#include "fform/errors.hpp"

#include <json.hpp>

#include <map>
#include <string>

namespace fform {

using nlohmann::json;

namespace {

std::optional<Formation> formation_alias(const std::string& s) {
    static const std::map<std::string, Formation> aliases = {
        {"face-to-face", Formation::FaceToFace}, {"vis-a-vis", Formation::FaceToFace},
        {"side-by-side", Formation::SideBySide}, {"L-shaped", Formation::LShaped},
        {"l-shaped", Formation::LShaped},        {"L", Formation::LShaped},
        {"triangle", Formation::Triangle},       {"triangular", Formation::Triangle}};
    const auto it = aliases.find(s);
    if (it == aliases.end()) return std::nullopt;
    return it->second;
}

PersonPose person_from_json(const json& p, std::size_t index) {
    const json& flat = p.at("keypoints");
    if (!flat.is_array() || flat.size() != 3 * kNumKeypoints) {
        throw ValidationError("person " + std::to_string(index) + ": keypoints must hold 51 numbers");
    }
    std::array<Keypoint, kNumKeypoints> kps{};
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        kps[k].name = static_cast<KeypointName>(k);
        kps[k].x = flat[3 * k].get<double>();
        kps[k].y = flat[3 * k + 1].get<double>();
        kps[k].confidence = flat[3 * k + 2].get<double>();
    }
    std::string id = p.contains("id") ? (p["id"].is_string() ? p["id"].get<std::string>() : p["id"].dump())
                                      : "p" + std::to_string(index);
    return PersonPose(std::move(id), kps);
}

} // namespace

Scene convert_egogroup_record(std::string_view line, std::size_t line_number) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_number, e.what());
    }
    try {
        Scene s;
        s.frame_id = j.at("frame").is_string() ? j.at("frame").get<std::string>() : j.at("frame").dump();
        s.image_width = j.at("width").get<int>();
        s.image_height = j.at("height").get<int>();

        std::map<long long, std::size_t> group_sizes;
        std::vector<std::optional<long long>> groups;
        const json& people = j.at("people");
        for (std::size_t i = 0; i < people.size(); ++i) {
            s.poses.push_back(person_from_json(people[i], i));
            std::optional<long long> g;
            if (people[i].contains("group") && !people[i]["group"].is_null()) g = people[i]["group"].get<long long>();
            if (g) ++group_sizes[*g];
            groups.push_back(g);
        }

        // Members are the annotated target group, or else the largest one
        // (lowest id on ties).
        std::optional<long long> target;
        if (j.contains("target_group") && !j["target_group"].is_null()) {
            target = j["target_group"].get<long long>();
        } else {
            std::size_t best = 0;
            for (const auto& [g, n] : group_sizes) {
                if (n > best) {
                    best = n;
                    target = g;
                }
            }
        }
        SceneTruth t;
        for (const auto& g : groups) t.membership.push_back(target && g == target ? GroupLabel::G : GroupLabel::O);
        if (j.contains("formation") && !j["formation"].is_null()) t.formation = formation_alias(j["formation"]);
        if (j.contains("approach_angle") && !j["approach_angle"].is_null()) {
            const int a = j["approach_angle"].get<int>();
            if (!is_approach_angle(a)) throw ValidationError("approach_angle " + std::to_string(a) + " not supported");
            t.angle_deg = a;
        }
        s.truth = std::move(t);
        validate(s);
        return s;
    } catch (const json::exception& e) {
        throw ParseError(line_number, e.what());
    }
}

std::vector<Scene> convert_egogroup(std::istream& in) {
    std::vector<Scene> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(convert_egogroup_record(line, n));
    }
    return out;
}

} // namespace fform
