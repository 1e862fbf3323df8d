#include "fform/errors.hpp"
#include "fform/model_io.hpp"
#include "fform/pipeline.hpp"
#include "fform/synth.hpp"

#include "../support/small_bundle.hpp"

#include <doctest.h>

#include <filesystem>

using namespace fform;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fform_test_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("bundle round-trip preserves detections exactly") {
    const ModelBundle& b = oracle::small_bundle();
    const fs::path dir = scratch("roundtrip");
    save_models(b, dir);
    const ModelBundle back = load_models(dir);
    CHECK(back.crf.weights == b.crf.weights);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthConfig c;
        c.formation = kAllFormations[seed % 4];
        c.angle_deg = kApproachAngles[(seed / 4) % 7];
        c.outliers = static_cast<int>(seed % 2);
        c.seed = 5000 + seed;
        const Scene s = render_scene(c);
        CHECK(detect_all(s, back) == detect_all(s, b));
    }
    CHECK(serialize_svm(*back.joint_svm) == serialize_svm(*b.joint_svm));
    fs::remove_all(dir);
}

TEST_CASE("truncated model file is reported as corrupt") {
    const ModelBundle& b = oracle::small_bundle();
    const fs::path dir = scratch("truncated");
    save_models(b, dir);
    const std::string text = read_text_file(dir / "angle_svm.json");
    write_text_file(dir / "angle_svm.json", text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_models(dir), CorruptFile);
    fs::remove_all(dir);
}

TEST_CASE("catalog mismatch names both versions") {
    CrfModel m = oracle::small_bundle().crf;
    m.feature_catalog_version = "catalog-from-elsewhere";
    const std::string text = serialize_crf(m);
    try {
        deserialize_crf(text);
        FAIL("expected VersionMismatch");
    } catch (const VersionMismatch& e) {
        const std::string what = e.what();
        CHECK(what.find("catalog-from-elsewhere") != std::string::npos);
        CHECK(what.find(std::string(kFeatureCatalogVersion)) != std::string::npos);
    }
}

TEST_CASE("missing directory is reported") {
    CHECK_THROWS(load_models(scratch("absent")));
}
