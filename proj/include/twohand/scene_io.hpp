#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "twohand/harness.hpp"

namespace twohand {

using Json = nlohmann::ordered_json;

/// Base of all scene/config document errors.
struct DocumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
/// Unparseable text, a missing field or a value of the wrong type.
struct MalformedDocument : DocumentError {
    using DocumentError::DocumentError;
};
/// The version field names a format this build does not read.
struct VersionMismatch : DocumentError {
    using DocumentError::DocumentError;
};
/// An array with the wrong number of entries.
struct LengthMismatch : DocumentError {
    using DocumentError::DocumentError;
};

inline constexpr int kSceneFormatVersion = 1;
inline constexpr int kConfigFormatVersion = 1;

/// Where a scene came from. All fields are informational.
struct Provenance {
    std::string generator;  ///< e.g. "synth" or "refine"
    std::optional<std::uint64_t> seed;
    std::optional<std::string> preset;
    std::optional<double> noise_std_mm;
    std::string note;
};

/// On-disk scene: the template it was made with, an optional ground truth,
/// the current estimate and the targets.
struct SceneFile {
    TemplateConfig template_config;
    std::uint64_t template_hash = 0;
    std::optional<TwoHandParams> gt;
    TwoHandParams initial;
    JointTargets targets;
    Provenance provenance;
};

SceneFile scene_file_from(const Scene& scene, const HandTemplate& tmpl);

Json to_json(const TwoHandParams& p);
TwoHandParams params_from_json(const Json& j, const std::string& where);

Json scene_to_json(const SceneFile& scene);
/// Validates version, field presence and every array length.
SceneFile scene_from_json(const Json& j);

std::string dump_scene(const SceneFile& scene);
SceneFile parse_scene(const std::string& text);

void save_scene(const SceneFile& scene, const std::string& path);
SceneFile load_scene(const std::string& path);

/// Builds the scene's template and checks it against the stored hash.
/// Throws DocumentError on a mismatch.
HandTemplate template_for(const SceneFile& scene);

/// Everything a CLI run can be configured with. Files override the defaults
/// key by key; stage weights are keyed by stage name.
struct RunConfig {
    RefineConfig refine = default_refine_config();
    TemplateConfig template_config;
    PerturbationScales perturbation;
    std::vector<Preset> presets = {Preset::Clasp, Preset::Interlace};
    int scene_count = 4;
    std::uint64_t seed = 1;
    double noise_std_mm = 10.0;
    int workers = 0;  ///< 0 picks the OpenMP default
};

Json to_json(const RunConfig& c);
/// Applies the keys of `j` on top of `base`. Unknown keys are rejected so
/// typos do not silently fall back to defaults.
RunConfig config_from_json(const Json& j, const RunConfig& base = {});
RunConfig load_config(const std::string& path, const RunConfig& base = {});

Json to_json(const RefineReport& r);
Json to_json(const PoseMetrics& m);

struct ObjOptions {
    int precision = 17;  ///< significant digits per coordinate
};

/// Wavefront OBJ with groups "left" and "right", left vertices first.
/// Throws InvalidArgument if any vertex is non-finite.
std::string mesh_to_obj(const TwoHandMesh& mesh, const ObjOptions& options = {});
void export_obj(const TwoHandMesh& mesh, const std::string& path, const ObjOptions& options = {});

}  // namespace twohand
