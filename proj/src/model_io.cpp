#include "fform/model_io.hpp"

#include "fform/errors.hpp"
#include "fform/features.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace fform {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json parse_or_corrupt(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw CorruptFile(what + ": " + e.what());
    }
}

void check_header(const json& j, const char* kind) {
    if (!j.is_object()) throw CorruptFile(std::string(kind) + " model is not a JSON object");
    const auto fv = j.find("format_version");
    if (fv == j.end() || !fv->is_number_integer()) throw CorruptFile(std::string(kind) + " model lacks format_version");
    if (fv->get<int>() != kModelFormatVersion) {
        throw VersionMismatch(std::string(kind) + " model format_version " + std::to_string(fv->get<int>()) +
                              " but this build reads " + std::to_string(kModelFormatVersion));
    }
    const auto cv = j.find("feature_catalog_version");
    if (cv == j.end() || !cv->is_string()) throw CorruptFile(std::string(kind) + " model lacks feature_catalog_version");
    if (cv->get<std::string>() != kFeatureCatalogVersion) {
        throw VersionMismatch(std::string(kind) + " model feature catalog '" + cv->get<std::string>() +
                              "' but this build uses '" + std::string(kFeatureCatalogVersion) + "'");
    }
}

} // namespace

std::string serialize_crf(const CrfModel& m) {
    json j = {{"format_version", kModelFormatVersion},
              {"kind", "crf"},
              {"feature_catalog_version", m.feature_catalog_version},
              {"l2", m.l2},
              {"feature_dim", m.feature_dim},
              {"feature_names", json::array()},
              {"weights", m.weights}};
    for (std::string_view n : node_feature_names()) j["feature_names"].push_back(n);
    return j.dump(1);
}

CrfModel deserialize_crf(const std::string& text) {
    const json j = parse_or_corrupt(text, "CRF model");
    check_header(j, "CRF");
    try {
        CrfModel m;
        m.feature_catalog_version = j.at("feature_catalog_version").get<std::string>();
        m.l2 = j.at("l2").get<double>();
        m.feature_dim = j.at("feature_dim").get<std::size_t>();
        m.weights = j.at("weights").get<std::vector<double>>();
        if (m.weights.size() != CrfModel::weight_count(m.feature_dim)) {
            throw CorruptFile("CRF weight count does not match feature_dim");
        }
        return m;
    } catch (const json::exception& e) {
        throw CorruptFile(std::string("CRF model: ") + e.what());
    }
}

std::string serialize_svm(const SvmModel& m) {
    json bins = json::array();
    for (std::size_t c = 0; c < m.binaries.size(); ++c) {
        const BinarySvm& b = m.binaries[c];
        bins.push_back({{"class", m.classes.at(c)},
                        {"gamma", b.kernel.gamma},
                        {"C", b.C},
                        {"bias", b.bias},
                        {"support_vectors", b.support_vectors},
                        {"dual_coefs", b.dual_coefs}});
    }
    json j = {{"format_version", kModelFormatVersion},
              {"kind", "svm"},
              {"feature_catalog_version", m.feature_catalog_version},
              {"feature_dim", m.feature_dim},
              {"classes", m.classes},
              {"per_class", std::move(bins)}};
    return j.dump();
}

SvmModel deserialize_svm(const std::string& text) {
    const json j = parse_or_corrupt(text, "SVM model");
    check_header(j, "SVM");
    try {
        SvmModel m;
        m.feature_catalog_version = j.at("feature_catalog_version").get<std::string>();
        m.feature_dim = j.at("feature_dim").get<std::size_t>();
        m.classes = j.at("classes").get<std::vector<std::string>>();
        for (const json& b : j.at("per_class")) {
            BinarySvm svm;
            svm.kernel.gamma = b.at("gamma").get<double>();
            svm.C = b.at("C").get<double>();
            svm.bias = b.at("bias").get<double>();
            svm.support_vectors = b.at("support_vectors").get<std::vector<std::vector<double>>>();
            svm.dual_coefs = b.at("dual_coefs").get<std::vector<double>>();
            if (svm.support_vectors.size() != svm.dual_coefs.size()) {
                throw CorruptFile("SVM support vector and coefficient counts differ");
            }
            for (const auto& sv : svm.support_vectors) {
                if (sv.size() != m.feature_dim) throw CorruptFile("SVM support vector has wrong dimension");
            }
            m.binaries.push_back(std::move(svm));
        }
        if (m.binaries.size() != m.classes.size() || m.classes.size() < 2) {
            throw CorruptFile("SVM model needs one binary per class and at least two classes");
        }
        return m;
    } catch (const json::exception& e) {
        throw CorruptFile(std::string("SVM model: ") + e.what());
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptFile("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

constexpr const char* kManifest = "manifest.json";

const std::array<std::pair<const char*, const char*>, 3> kSvmFiles = {{
    {"formation_svm", "formation_svm.json"},
    {"angle_svm", "angle_svm.json"},
    {"joint_svm", "joint_svm.json"},
}};

template <typename Bundle>
auto& slot(Bundle& b, std::size_t i) {
    return i == 0 ? b.formation_svm : (i == 1 ? b.angle_svm : b.joint_svm);
}

} // namespace

void save_models(const ModelBundle& bundle, const fs::path& dir) {
    fs::create_directories(dir);
    json files = {{"crf", "crf.json"}};
    write_text_file(dir / "crf.json", serialize_crf(bundle.crf));
    for (std::size_t i = 0; i < kSvmFiles.size(); ++i) {
        const auto& m = slot(bundle, i);
        if (!m) continue;
        write_text_file(dir / kSvmFiles[i].second, serialize_svm(*m));
        files[kSvmFiles[i].first] = kSvmFiles[i].second;
    }
    const json manifest = {{"format_version", kModelFormatVersion},
                           {"feature_catalog_version", std::string(kFeatureCatalogVersion)},
                           {"files", files}};
    write_text_file(dir / kManifest, manifest.dump(1) + "\n");
}

ModelBundle load_models(const fs::path& dir) {
    const json manifest = parse_or_corrupt(read_text_file(dir / kManifest), "model manifest");
    check_header(manifest, "bundle");
    ModelBundle b;
    try {
        const json& files = manifest.at("files");
        b.crf = deserialize_crf(read_text_file(dir / files.at("crf").get<std::string>()));
        for (std::size_t i = 0; i < kSvmFiles.size(); ++i) {
            if (const auto it = files.find(kSvmFiles[i].first); it != files.end()) {
                slot(b, i) = deserialize_svm(read_text_file(dir / it->get<std::string>()));
            }
        }
    } catch (const json::exception& e) {
        throw CorruptFile(std::string("model manifest: ") + e.what());
    }
    return b;
}

} // namespace fform
