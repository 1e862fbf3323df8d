#pragma once

#include "fform/crf.hpp"
#include "fform/svm.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace fform {

inline constexpr int kModelFormatVersion = 1;

std::string serialize_crf(const CrfModel& model);
/// Throws CorruptFile on unreadable content, VersionMismatch on a format or
/// catalog version other than the running one.
CrfModel deserialize_crf(const std::string& text);

std::string serialize_svm(const SvmModel& model);
SvmModel deserialize_svm(const std::string& text);

/// Writes atomically (temp file + rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// CRF plus the three classifiers. The SVMs are optional so that a bundle
/// can be assembled stage by stage from the CLI.
struct ModelBundle {
    CrfModel crf;
    std::optional<SvmModel> formation_svm;
    std::optional<SvmModel> angle_svm;
    std::optional<SvmModel> joint_svm;
};

/// Directory with manifest.json and one JSON file per model.
void save_models(const ModelBundle& bundle, const std::filesystem::path& dir);
/// Validates every file against the manifest before returning anything.
ModelBundle load_models(const std::filesystem::path& dir);

} // namespace fform
