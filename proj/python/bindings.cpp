#include "fform/eval.hpp"
#include "fform/features.hpp"
#include "fform/model_io.hpp"
#include "fform/pipeline.hpp"
#include "fform/rng.hpp"
#include "fform/synth.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace fform;

namespace {

std::vector<Scene> scenes_from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_scenes(in);
}

std::string scenes_to_text(const std::vector<Scene>& scenes) {
    std::ostringstream out;
    write_scenes(out, scenes);
    return out.str();
}

ModelBundle train_bundle(const std::string& jsonl, double l2, double c, std::uint64_t seed) {
    const auto scenes = scenes_from_text(jsonl);
    CrfTrainConfig crf;
    crf.l2 = l2;
    SvmTrainConfig svm;
    svm.C = c;
    svm.seed = seed;
    ModelBundle b;
    b.crf = train_crf_from_scenes(scenes, crf).model;
    b.formation_svm = train_svm_task(scenes, SvmTask::Formation, svm).model;
    b.angle_svm = train_svm_task(scenes, SvmTask::Angle, svm).model;
    b.joint_svm = train_svm_task(scenes, SvmTask::Joint, svm).model;
    return b;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "F-formation detection core";
    m.attr("FEATURE_CATALOG_VERSION") = std::string(kFeatureCatalogVersion);
    m.attr("MODEL_FORMAT_VERSION") = kModelFormatVersion;
    m.attr("NODE_FEATURE_NAMES") = [] {
        std::vector<std::string> v;
        for (auto n : node_feature_names()) v.emplace_back(n);
        return v;
    }();

    m.def("render_scene", [](const std::string& config_json) { return scene_to_line(render_scene(synth_config_from_json(config_json))); },
          py::arg("config_json"), "Scene JSON line for a SynthConfig JSON object.");
    m.def(
        "generate_standard",
        [](std::size_t per_cell, std::uint64_t seed) {
            return scenes_to_text(generate_dataset(standard_dataset_spec(per_cell, seed), derive_seed(seed, 10)));
        },
        py::arg("per_cell"), py::arg("seed"));
    m.def(
        "node_features",
        [](const std::string& line) {
            std::vector<std::vector<double>> out;
            for (const auto& f : chain_features(order_left_to_right(parse_scene_line(line)))) out.push_back(f.values);
            return out;
        },
        py::arg("scene_line"), "Per-pose CRF features in left-to-right order.");
    m.def(
        "group_features",
        [](const std::string& line, const std::vector<std::size_t>& indices) {
            const Scene s = parse_scene_line(line);
            std::vector<PersonPose> poses;
            for (std::size_t i : indices) poses.push_back(s.poses.at(i));
            const auto g = group_features(poses, s.image_width, s.image_height);
            return std::vector<double>(g.values.begin(), g.values.end());
        },
        py::arg("scene_line"), py::arg("indices"));
    m.def(
        "head_orientation",
        [](const std::string& line, std::size_t i) {
            return std::string(to_string(head_orientation(parse_scene_line(line).poses.at(i))));
        },
        py::arg("scene_line"), py::arg("pose_index"));
    m.def("rule_classify", [](const std::string& line) { return detection_to_line(rule_classify(parse_scene_line(line))); },
          py::arg("scene_line"));
    m.def(
        "report",
        [](const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred, std::vector<std::string> classes) {
            return report_to_json(report(gold, pred, std::move(classes)));
        },
        py::arg("gold"), py::arg("pred"), py::arg("classes"));

    py::class_<ModelBundle>(m, "Models")
        .def_static("load", [](const std::string& dir) { return load_models(dir); }, py::arg("path"))
        .def_static("train", &train_bundle, py::arg("scenes_jsonl"), py::arg("l2") = 1.0, py::arg("C") = 10.0,
                    py::arg("seed") = 7)
        .def("save", [](const ModelBundle& b, const std::string& dir) { save_models(b, dir); }, py::arg("path"))
        .def("detect",
             [](const ModelBundle& b, const std::string& line) {
                 py::gil_scoped_release release;
                 return detection_to_line(detect_all(parse_scene_line(line), b));
             },
             py::arg("scene_line"))
        .def_property_readonly("has_joint", [](const ModelBundle& b) { return b.joint_svm.has_value(); });
}
