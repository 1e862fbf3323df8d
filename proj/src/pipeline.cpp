#include "fform/pipeline.hpp"

#include "fform/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fform {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::size_t> left_to_right_order(const Scene& scene) {
    std::vector<double> anchors;
    for (const PersonPose& p : scene.poses) anchors.push_back(anchor_x(p));
    std::vector<std::size_t> order(scene.poses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return anchors[a] < anchors[b]; });
    return order;
}

Scene permuted(const Scene& scene, const std::vector<std::size_t>& order) {
    Scene s = scene;
    s.truth.reset();
    for (std::size_t i = 0; i < order.size(); ++i) s.poses[i] = scene.poses[order[i]];
    return s;
}

void check_catalog(const CrfModel& crf, const SvmModel& svm) {
    if (crf.feature_catalog_version != svm.feature_catalog_version) {
        throw VersionMismatch("CRF catalog '" + crf.feature_catalog_version + "' differs from SVM catalog '" +
                              svm.feature_catalog_version + "'");
    }
}

// Shared front half of detect / detect_joint: ordering, CRF membership and
// the group feature vector.
struct GroupStage {
    Detection det;
    std::optional<GroupFeatureVector> gfv;
};

GroupStage membership_stage(const Scene& scene, const CrfModel& crf, StageTimes* times) {
    validate(scene);
    if (scene.poses.empty()) throw InputError("scene has no poses");
    GroupStage g;
    g.det.frame_id = scene.frame_id;

    auto t0 = Clock::now();
    const std::vector<std::size_t> order = left_to_right_order(scene);
    const Scene ordered = permuted(scene, order);
    const ChainInstance chain = make_chain(ordered);
    double feat = seconds_since(t0);

    t0 = Clock::now();
    const std::vector<GroupLabel> labels = viterbi(crf, chain);
    const double crf_time = seconds_since(t0);

    g.det.membership.assign(scene.poses.size(), GroupLabel::O);
    std::vector<std::size_t> ordered_members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        g.det.membership[order[i]] = labels[i];
        if (labels[i] == GroupLabel::G) ordered_members.push_back(i);
    }
    for (std::size_t i : ordered_members) g.det.members.push_back(order[i]);
    std::sort(g.det.members.begin(), g.det.members.end());

    if (ordered_members.size() < 2) {
        g.det.reason = "group too small";
    } else {
        t0 = Clock::now();
        if (ordered_members.size() > kGroupSlots) {
            g.det.overflow = true;
            ordered_members.resize(kGroupSlots);
        }
        std::vector<PersonPose> poses;
        for (std::size_t i : ordered_members) {
            poses.push_back(ordered.poses[i]);
            g.det.classified_members.push_back(order[i]);
        }
        g.gfv = group_features(poses, scene.image_width, scene.image_height);
        feat += seconds_since(t0);
    }
    if (times) {
        times->features = feat;
        times->crf = crf_time;
        times->svm = 0.0;
    }
    return g;
}

int angle_from_class(std::size_t idx) { return kApproachAngles.at(idx); }

} // namespace

std::size_t encode_joint(Formation f, int angle_deg) {
    return static_cast<std::size_t>(f) * kApproachAngles.size() + angle_index(angle_deg);
}

JointLabel decode_joint(std::size_t index) {
    if (index >= kNumJointClasses) throw InputError("joint class index out of range");
    return {kAllFormations[index / kApproachAngles.size()], kApproachAngles[index % kApproachAngles.size()]};
}

std::vector<std::string> formation_class_names() {
    std::vector<std::string> v;
    for (Formation f : kAllFormations) v.emplace_back(to_string(f));
    return v;
}

std::vector<std::string> angle_class_names() {
    std::vector<std::string> v;
    for (int a : kApproachAngles) v.push_back(std::to_string(a));
    return v;
}

std::vector<std::string> joint_class_names() {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < kNumJointClasses; ++i) {
        const JointLabel j = decode_joint(i);
        v.push_back(std::string(to_string(j.formation)) + "|" + std::to_string(j.angle_deg));
    }
    return v;
}

Detection detect(const Scene& scene, const CrfModel& crf, const SvmModel& formation_svm, const SvmModel& angle_svm,
                 StageTimes* times) {
    check_catalog(crf, formation_svm);
    check_catalog(crf, angle_svm);
    GroupStage g = membership_stage(scene, crf, times);
    if (!g.gfv) return std::move(g.det);

    const auto t0 = Clock::now();
    const SvmPrediction fp = predict(formation_svm, g.gfv->values, kFeatureCatalogVersion);
    const Formation f = kAllFormations.at(fp.class_index);
    const AngleFeatureVector afv = angle_features(*g.gfv, f);
    const SvmPrediction ap = predict(angle_svm, afv.values, kFeatureCatalogVersion);
    if (times) times->svm = seconds_since(t0);

    g.det.formation = f;
    g.det.angle_deg = angle_from_class(ap.class_index);
    g.det.scores["formation"] = fp.scores;
    g.det.scores["angle"] = ap.scores;
    return std::move(g.det);
}

Detection detect_joint(const Scene& scene, const CrfModel& crf, const SvmModel& joint_svm, StageTimes* times) {
    check_catalog(crf, joint_svm);
    if (joint_svm.classes.size() != kNumJointClasses) throw InputError("joint model must have 28 classes");
    GroupStage g = membership_stage(scene, crf, times);
    if (!g.gfv) return std::move(g.det);

    const auto t0 = Clock::now();
    const SvmPrediction jp = predict(joint_svm, g.gfv->values, kFeatureCatalogVersion);
    if (times) times->svm = seconds_since(t0);
    g.det.joint = decode_joint(jp.class_index);
    g.det.scores["joint"] = jp.scores;
    return std::move(g.det);
}

Detection detect_all(const Scene& scene, const ModelBundle& models) {
    Detection d;
    if (models.formation_svm && models.angle_svm) {
        d = detect(scene, models.crf, *models.formation_svm, *models.angle_svm);
    }
    if (models.joint_svm) {
        Detection j = detect_joint(scene, models.crf, *models.joint_svm);
        if (!(models.formation_svm && models.angle_svm)) {
            d = std::move(j);
        } else {
            d.joint = j.joint;
            if (j.scores.count("joint")) d.scores["joint"] = j.scores["joint"];
        }
    }
    if (!models.joint_svm && !(models.formation_svm && models.angle_svm)) {
        d = membership_stage(scene, models.crf, nullptr).det;
        if (!d.reason) d.reason = "no classifier in bundle";
    }
    return d;
}

std::string_view to_string(HeadOrientation h) {
    switch (h) {
    case HeadOrientation::Left: return "left";
    case HeadOrientation::Right: return "right";
    case HeadOrientation::Front: return "front";
    }
    return "front";
}

HeadOrientation head_orientation(const PersonPose& pose) {
    constexpr double kConfident = 0.25;
    double lo = 1e300, hi = -1e300;
    int count = 0;
    for (KeypointName n : {KeypointName::Nose, KeypointName::LeftEye, KeypointName::RightEye, KeypointName::LeftEar,
                           KeypointName::RightEar}) {
        const Keypoint& k = pose[n];
        if (k.confidence >= kConfident) {
            lo = std::min(lo, k.x);
            hi = std::max(hi, k.x);
            ++count;
        }
    }
    if (count < 2) return HeadOrientation::Front;

    double eye_sum = 0.0;
    int eyes = 0;
    for (KeypointName n : {KeypointName::LeftEye, KeypointName::RightEye}) {
        if (pose[n].confidence >= kConfident) {
            eye_sum += pose[n].x;
            ++eyes;
        }
    }
    if (eyes == 0) return HeadOrientation::Front;
    const double eye_mid = eye_sum / eyes;
    const double midline = 0.5 * (lo + hi);
    const double band = kFrontBandFraction * (hi - lo);
    if (eye_mid < midline - band) return HeadOrientation::Left;
    if (eye_mid > midline + band) return HeadOrientation::Right;
    return HeadOrientation::Front;
}

Detection rule_classify(const Scene& scene) {
    if (scene.poses.size() < 2) throw InputError("rule baseline needs at least two poses");
    Detection d;
    d.frame_id = scene.frame_id;

    std::vector<std::size_t> by_size(scene.poses.size());
    std::iota(by_size.begin(), by_size.end(), std::size_t{0});
    std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) {
        return shoulder_width_px(scene.poses[a]) > shoulder_width_px(scene.poses[b]);
    });
    by_size.resize(std::min<std::size_t>(scene.poses.size(), 3));
    std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) {
        return anchor_x(scene.poses[a]) < anchor_x(scene.poses[b]);
    });

    d.membership.assign(scene.poses.size(), GroupLabel::O);
    std::vector<HeadOrientation> orient;
    for (std::size_t i : by_size) {
        d.membership[i] = GroupLabel::G;
        orient.push_back(head_orientation(scene.poses[i]));
    }
    d.members = by_size;
    std::sort(d.members.begin(), d.members.end());
    d.classified_members = by_size;

    auto extent = [&](std::size_t i) {
        const PersonPose& p = scene.poses[i];
        const double a = p[KeypointName::LeftShoulder].x;
        const double b = p[KeypointName::RightShoulder].x;
        return std::pair{std::min(a, b), std::max(a, b)};
    };

    bool face_to_face = false, l_shaped = false, side_by_side = false;
    for (std::size_t k = 0; k + 1 < by_size.size(); ++k) {
        const HeadOrientation a = orient[k];
        const HeadOrientation b = orient[k + 1];
        const auto [l_lo, l_hi] = extent(by_size[k]);
        const auto [r_lo, r_hi] = extent(by_size[k + 1]);
        const double gap = std::max(0.0, r_lo - l_hi);
        const double mean_width = 0.5 * ((l_hi - l_lo) + (r_hi - r_lo));
        const bool close = gap < kRuleGapFactor * mean_width;
        if (a == HeadOrientation::Right && b == HeadOrientation::Left) face_to_face = true;
        if (close && ((a == HeadOrientation::Front) != (b == HeadOrientation::Front))) l_shaped = true;
        if (close && a == b) side_by_side = true;
    }
    bool triangle = false;
    if (by_size.size() == 3) {
        triangle = !(orient[0] == orient[1] && orient[1] == orient[2]);
    }

    if (face_to_face) d.formation = Formation::FaceToFace;
    else if (triangle) d.formation = Formation::Triangle;
    else if (l_shaped) d.formation = Formation::LShaped;
    else if (side_by_side) d.formation = Formation::SideBySide;
    else d.reason = "no rule matched";

    std::vector<double> o;
    for (HeadOrientation h : orient) o.push_back(static_cast<double>(h));
    d.scores["head_orientation"] = o;
    return d;
}

std::string_view to_string(SvmTask t) {
    switch (t) {
    case SvmTask::Formation: return "formation";
    case SvmTask::Angle: return "angle";
    case SvmTask::Joint: return "joint";
    }
    return "formation";
}

SvmTask svm_task_from_string(std::string_view s) {
    if (s == "formation") return SvmTask::Formation;
    if (s == "angle") return SvmTask::Angle;
    if (s == "joint") return SvmTask::Joint;
    throw InputError("unknown SVM task '" + std::string(s) + "'");
}

std::vector<PersonPose> truth_group(const Scene& scene) {
    std::vector<PersonPose> out;
    if (!scene.truth || scene.truth->membership.size() != scene.poses.size() || scene.poses.empty()) return out;
    const Scene ordered = order_left_to_right(scene);
    for (std::size_t i = 0; i < ordered.poses.size() && out.size() < kGroupSlots; ++i) {
        if (ordered.truth->membership[i] == GroupLabel::G) out.push_back(ordered.poses[i]);
    }
    return out;
}

Scene truth_member_scene(const Scene& scene) {
    Scene s = scene;
    s.poses.clear();
    if (scene.truth && scene.truth->membership.size() == scene.poses.size()) {
        for (std::size_t i = 0; i < scene.poses.size(); ++i) {
            if (scene.truth->membership[i] == GroupLabel::G) s.poses.push_back(scene.poses[i]);
        }
        s.truth->membership.assign(s.poses.size(), GroupLabel::G);
    }
    return s;
}

TaskData build_task_data(const std::vector<Scene>& scenes, SvmTask task) {
    TaskData d;
    for (const Scene& s : scenes) {
        if (!s.truth || !s.truth->formation) continue;
        if (task != SvmTask::Formation && !s.truth->angle_deg) continue;
        const std::vector<PersonPose> group = truth_group(s);
        if (group.size() < 2) continue;
        const GroupFeatureVector gfv = group_features(group, s.image_width, s.image_height);
        const Formation f = *s.truth->formation;
        switch (task) {
        case SvmTask::Formation:
            d.x.append_row(gfv.values);
            d.labels.push_back(static_cast<std::size_t>(f));
            break;
        case SvmTask::Angle:
            d.x.append_row(angle_features(gfv, f).values);
            d.labels.push_back(angle_index(*s.truth->angle_deg));
            break;
        case SvmTask::Joint:
            d.x.append_row(gfv.values);
            d.labels.push_back(encode_joint(f, *s.truth->angle_deg));
            break;
        }
    }
    return d;
}

SvmTrainReport train_svm_task(const std::vector<Scene>& scenes, SvmTask task, const SvmTrainConfig& config) {
    TaskData data = build_task_data(scenes, task);
    if (data.x.rows() == 0) throw InputError("no labeled groups for task " + std::string(to_string(task)));
    std::vector<std::string> classes = task == SvmTask::Formation ? formation_class_names()
                                       : task == SvmTask::Angle   ? angle_class_names()
                                                                  : joint_class_names();
    std::vector<std::size_t> counts(classes.size(), 0);
    for (std::size_t l : data.labels) ++counts[l];
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (counts[c] == 0) throw InputError("no training samples for class '" + classes[c] + "'");
    }
    SmoOptions opt;
    opt.C = config.C;
    opt.tol = config.tol;

    SvmTrainReport r;
    r.samples = data.x.rows();
    if (config.gamma) {
        r.gamma_selection.gamma = *config.gamma;
    } else {
        r.gamma_selection = select_gamma(data.x, data.labels, classes.size(), opt, config.seed);
    }
    r.model = train_one_vs_rest(data.x, data.labels, std::move(classes), r.gamma_selection.gamma, opt,
                                std::string(kFeatureCatalogVersion));
    return r;
}

CrfTrainResult train_crf_from_scenes(const std::vector<Scene>& scenes, const CrfTrainConfig& config) {
    std::vector<ChainInstance> batch;
    for (const Scene& s : scenes) {
        if (s.poses.empty() || !s.truth || s.truth->membership.size() != s.poses.size()) continue;
        batch.push_back(make_chain(order_left_to_right(s)));
    }
    if (batch.empty()) throw InputError("no scenes with membership labels");
    return train_crf(batch, config);
}

std::string detection_to_line(const Detection& d) {
    json m = json::array();
    for (GroupLabel g : d.membership) m.push_back(g == GroupLabel::G ? "G" : "O");
    json scores = json::object();
    for (const auto& [k, v] : d.scores) scores[k] = v;
    json j = {{"frame_id", d.frame_id},
              {"membership", std::move(m)},
              {"formation", d.formation ? json(to_string(*d.formation)) : json(nullptr)},
              {"angle_deg", d.angle_deg ? json(*d.angle_deg) : json(nullptr)},
              {"joint", d.joint ? json{{"formation", to_string(d.joint->formation)}, {"angle_deg", d.joint->angle_deg}}
                                : json(nullptr)},
              {"overflow", d.overflow},
              {"scores", std::move(scores)},
              {"reason", d.reason ? json(*d.reason) : json(nullptr)}};
    return j.dump();
}

} // namespace fform
