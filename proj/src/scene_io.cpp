#include "twohand/scene_io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "twohand/io_util.hpp"

namespace twohand {
namespace {

std::string join(const std::string& where, const std::string& key)
{
    return where.empty() ? key : where + "." + key;
}

const Json& field(const Json& j, const std::string& key, const std::string& where)
{
    if (!j.is_object())
        throw MalformedDocument("field '" + where + "' must be an object");
    const auto it = j.find(key);
    if (it == j.end())
        throw MalformedDocument("missing field '" + join(where, key) + "'");
    return *it;
}

double number(const Json& j, const std::string& where)
{
    if (!j.is_number())
        throw MalformedDocument("field '" + where + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v))
        throw MalformedDocument("field '" + where + "' is not finite");
    return v;
}

const Json& array_of(const Json& j, std::size_t n, const std::string& where)
{
    if (!j.is_array())
        throw MalformedDocument("field '" + where + "' must be an array");
    if (j.size() != n)
        throw LengthMismatch("field '" + where + "' has " + std::to_string(j.size()) + " entries, expected " +
                             std::to_string(n));
    return j;
}

template <class Derived>
Json matrix_rows(const Eigen::MatrixBase<Derived>& m)
{
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            if (!std::isfinite(v))
                throw InvalidArgument("cannot serialize a non-finite value");
            row.push_back(v);
        }
        out.push_back(std::move(row));
    }
    return out;
}

template <class Derived>
Json flat(const Eigen::MatrixBase<Derived>& m)
{
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double v = m.derived()(i);
        if (!std::isfinite(v))
            throw InvalidArgument("cannot serialize a non-finite value");
        out.push_back(v);
    }
    return out;
}

template <class M>
void read_rows(const Json& j, M& m, const std::string& where)
{
    array_of(j, static_cast<std::size_t>(m.rows()), where);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const std::string w = where + "[" + std::to_string(r) + "]";
        const Json& row = array_of(j[r], static_cast<std::size_t>(m.cols()), w);
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = number(row[c], w);
    }
}

template <class V>
void read_flat(const Json& j, V& v, const std::string& where)
{
    array_of(j, static_cast<std::size_t>(v.size()), where);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = number(j[i], where + "[" + std::to_string(i) + "]");
}

Json hand_to_json(const HandParams& h)
{
    Json j;
    j["shape"] = flat(h.shape.coefficients);
    j["orientation"] = flat(h.orientation.axis_angle);
    j["fingers"] = matrix_rows(h.fingers.joint_rotations);
    return j;
}

HandParams hand_from_json(const Json& j, const std::string& where)
{
    HandParams h;
    read_flat(field(j, "shape", where), h.shape.coefficients, join(where, "shape"));
    read_flat(field(j, "orientation", where), h.orientation.axis_angle, join(where, "orientation"));
    read_rows(field(j, "fingers", where), h.fingers.joint_rotations, join(where, "fingers"));
    return h;
}

std::string hex64(std::uint64_t v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%016" PRIx64, v);
    return buf;
}

std::uint64_t parse_hex64(const Json& j, const std::string& where)
{
    if (!j.is_string())
        throw MalformedDocument("field '" + where + "' must be a hex string");
    const std::string s = j.get<std::string>();
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &used, 16);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty())
        throw MalformedDocument("field '" + where + "' is not a hex number: " + s);
    return v;
}

Json template_config_to_json(const TemplateConfig& c)
{
    Json j;
    j["vertex_budget"] = c.vertex_budget;
    j["palm_length"] = c.palm_length;
    j["palm_half_width"] = c.palm_half_width;
    j["palm_half_thickness"] = c.palm_half_thickness;
    j["finger_width_scale"] = c.finger_width_scale;
    j["finger_length_scale"] = c.finger_length_scale;
    j["blend_fraction"] = c.blend_fraction;
    return j;
}

// Overwrites only the keys that are present; rejects unknown ones.
class Reader {
public:
    Reader(const Json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            throw MalformedDocument("field '" + where_ + "' must be an object");
    }
    const Json* get(const std::string& key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    void num(const std::string& key, double& out)
    {
        if (const Json* v = get(key))
            out = number(*v, path(key));
    }
    void integer(const std::string& key, int& out)
    {
        if (const Json* v = get(key)) {
            if (!v->is_number_integer())
                throw MalformedDocument("field '" + path(key) + "' must be an integer");
            out = v->get<int>();
        }
    }
    void u64(const std::string& key, std::uint64_t& out)
    {
        if (const Json* v = get(key)) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
                throw MalformedDocument("field '" + path(key) + "' must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void boolean(const std::string& key, bool& out)
    {
        if (const Json* v = get(key)) {
            if (!v->is_boolean())
                throw MalformedDocument("field '" + path(key) + "' must be true or false");
            out = v->get<bool>();
        }
    }
    std::string path(const std::string& key) const { return join(where_, key); }
    void finish() const
    {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key))
                throw MalformedDocument("unknown field '" + path(key) + "'");
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void template_config_from_json(const Json& j, TemplateConfig& c, const std::string& where)
{
    Reader r(j, where);
    r.integer("vertex_budget", c.vertex_budget);
    r.num("palm_length", c.palm_length);
    r.num("palm_half_width", c.palm_half_width);
    r.num("palm_half_thickness", c.palm_half_thickness);
    r.num("finger_width_scale", c.finger_width_scale);
    r.num("finger_length_scale", c.finger_length_scale);
    r.num("blend_fraction", c.blend_fraction);
    r.finish();
}

Json grid_to_json(const GridConfig& g)
{
    Json j;
    j["resolution"] = g.resolution;
    j["margin"] = g.margin;
    return j;
}

Json weights_to_json(const ObjectiveWeights& w)
{
    Json j;
    j["collision"] = w.collision;
    j["joints_2d"] = w.joints_2d;
    j["joints_3d"] = w.joints_3d;
    j["translation"] = w.translation;
    j["shape_reg"] = w.shape_reg;
    j["finger"] = w.finger;
    j["step_size"] = w.step_size;
    j["max_iterations"] = w.max_iterations;
    return j;
}

Json errors_to_json(const ErrorPair& e)
{
    Json j;
    j["e_col"] = e.e_col;
    j["e_3d"] = e.e_3d;
    return j;
}

void check_version(const Json& j, int expected, const char* what)
{
    const Json& v = field(j, "version", "");
    if (!v.is_number_integer())
        throw MalformedDocument("field 'version' must be an integer");
    if (v.get<std::int64_t>() != expected)
        throw VersionMismatch(std::string("unsupported ") + what + " version " + std::to_string(v.get<std::int64_t>()) +
                              " (this build reads version " + std::to_string(expected) + ")");
}

Json parse_json(const std::string& text)
{
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw MalformedDocument(std::string("not valid JSON: ") + e.what());
    }
}

}  // namespace

SceneFile scene_file_from(const Scene& scene, const HandTemplate& tmpl)
{
    SceneFile f;
    f.template_config = tmpl.config;
    f.template_hash = tmpl.content_hash();
    f.gt = scene.gt;
    f.initial = scene.initial;
    f.targets = scene.targets;
    f.provenance.generator = "synth";
    f.provenance.seed = scene.spec.seed;
    f.provenance.preset = preset_name(scene.spec.preset);
    f.provenance.noise_std_mm = scene.spec.noise_std_mm;
    return f;
}

Json to_json(const TwoHandParams& p)
{
    Json j;
    j["translation"] = flat(p.translation);
    j["left"] = hand_to_json(p.left);
    j["right"] = hand_to_json(p.right);
    return j;
}

TwoHandParams params_from_json(const Json& j, const std::string& where)
{
    TwoHandParams p;
    read_flat(field(j, "translation", where), p.translation, join(where, "translation"));
    p.left = hand_from_json(field(j, "left", where), join(where, "left"));
    p.right = hand_from_json(field(j, "right", where), join(where, "right"));
    return p;
}

Json scene_to_json(const SceneFile& s)
{
    Json j;
    j["format"] = "twohand-scene";
    j["version"] = kSceneFormatVersion;
    j["template"] = {{"hash", hex64(s.template_hash)}, {"config", template_config_to_json(s.template_config)}};
    if (s.gt)
        j["gt"] = to_json(*s.gt);
    j["initial"] = to_json(s.initial);

    Json t;
    t["joints_3d"] = matrix_rows(s.targets.joints_3d);
    t["joints_2d"] = matrix_rows(s.targets.joints_2d);
    t["visibility"] = Json(std::vector<bool>(s.targets.visibility.begin(), s.targets.visibility.end()));
    t["translation_target"] = flat(s.targets.translation_target);
    t["camera"] = {{"scale", s.targets.camera.scale}, {"translation", flat(s.targets.camera.translation)}};
    j["targets"] = std::move(t);

    Json p;
    p["generator"] = s.provenance.generator;
    if (s.provenance.seed)
        p["seed"] = *s.provenance.seed;
    if (s.provenance.preset)
        p["preset"] = *s.provenance.preset;
    if (s.provenance.noise_std_mm)
        p["noise_std_mm"] = *s.provenance.noise_std_mm;
    if (!s.provenance.note.empty())
        p["note"] = s.provenance.note;
    j["provenance"] = std::move(p);
    return j;
}

SceneFile scene_from_json(const Json& j)
{
    if (!j.is_object())
        throw MalformedDocument("scene document must be a JSON object");
    check_version(j, kSceneFormatVersion, "scene format");
    SceneFile s;

    const Json& tj = field(j, "template", "");
    s.template_hash = parse_hex64(field(tj, "hash", "template"), "template.hash");
    template_config_from_json(field(tj, "config", "template"), s.template_config, "template.config");

    if (const auto it = j.find("gt"); it != j.end() && !it->is_null())
        s.gt = params_from_json(*it, "gt");
    s.initial = params_from_json(field(j, "initial", ""), "initial");

    const Json& t = field(j, "targets", "");
    read_rows(field(t, "joints_3d", "targets"), s.targets.joints_3d, "targets.joints_3d");
    read_rows(field(t, "joints_2d", "targets"), s.targets.joints_2d, "targets.joints_2d");
    const Json& vis = array_of(field(t, "visibility", "targets"), kTwoHandKeypoints, "targets.visibility");
    for (int k = 0; k < kTwoHandKeypoints; ++k) {
        if (!vis[k].is_boolean())
            throw MalformedDocument("field 'targets.visibility[" + std::to_string(k) + "]' must be true or false");
        s.targets.visibility[k] = vis[k].get<bool>();
    }
    read_flat(field(t, "translation_target", "targets"), s.targets.translation_target, "targets.translation_target");
    const Json& cam = field(t, "camera", "targets");
    s.targets.camera.scale = number(field(cam, "scale", "targets.camera"), "targets.camera.scale");
    read_flat(field(cam, "translation", "targets.camera"), s.targets.camera.translation,
              "targets.camera.translation");

    if (const auto it = j.find("provenance"); it != j.end()) {
        const Json& p = *it;
        if (!p.is_object())
            throw MalformedDocument("field 'provenance' must be an object");
        if (auto g = p.find("generator"); g != p.end() && g->is_string())
            s.provenance.generator = g->get<std::string>();
        if (auto g = p.find("seed"); g != p.end() && g->is_number_unsigned())
            s.provenance.seed = g->get<std::uint64_t>();
        if (auto g = p.find("preset"); g != p.end() && g->is_string())
            s.provenance.preset = g->get<std::string>();
        if (auto g = p.find("noise_std_mm"); g != p.end() && g->is_number())
            s.provenance.noise_std_mm = g->get<double>();
        if (auto g = p.find("note"); g != p.end() && g->is_string())
            s.provenance.note = g->get<std::string>();
    }
    return s;
}

std::string dump_scene(const SceneFile& scene)
{
    return scene_to_json(scene).dump(2) + "\n";
}

SceneFile parse_scene(const std::string& text)
{
    return scene_from_json(parse_json(text));
}

void save_scene(const SceneFile& scene, const std::string& path)
{
    write_file_atomic(path, dump_scene(scene));
}

SceneFile load_scene(const std::string& path)
{
    return parse_scene(read_file(path));
}

HandTemplate template_for(const SceneFile& scene)
{
    HandTemplate t = build_template(scene.template_config);
    if (t.content_hash() != scene.template_hash)
        throw DocumentError("template hash mismatch: scene records " + hex64(scene.template_hash) +
                            ", its template config builds " + hex64(t.content_hash()));
    return t;
}

Json to_json(const RunConfig& c)
{
    Json j;
    j["version"] = kConfigFormatVersion;
    j["seed"] = c.seed;
    j["scene_count"] = c.scene_count;
    Json presets = Json::array();
    for (Preset p : c.presets)
        presets.push_back(preset_name(p));
    j["presets"] = std::move(presets);
    j["noise_std_mm"] = c.noise_std_mm;
    j["perturbation"] = {{"translation", c.perturbation.translation},
                         {"orientation", c.perturbation.orientation},
                         {"fingers", c.perturbation.fingers},
                         {"shape", c.perturbation.shape}};
    j["grid"] = grid_to_json(c.refine.grid);
    Json order = Json::array();
    Json stages;
    for (const auto& s : c.refine.stages) {
        order.push_back(factor_name(s.factor));
        Json w = weights_to_json(s.weights);
        w["enabled"] = s.enabled;
        stages[factor_name(s.factor)] = std::move(w);
    }
    j["stage_order"] = std::move(order);
    j["stages"] = std::move(stages);
    j["skip_when_unimprovable"] = c.refine.skip_when_unimprovable;
    j["template"] = template_config_to_json(c.template_config);
    j["workers"] = c.workers;
    return j;
}

RunConfig config_from_json(const Json& j, const RunConfig& base)
{
    RunConfig c = base;
    Reader r(j, "");
    if (r.get("version"))
        check_version(j, kConfigFormatVersion, "config");
    r.u64("seed", c.seed);
    r.integer("scene_count", c.scene_count);
    r.num("noise_std_mm", c.noise_std_mm);
    r.integer("workers", c.workers);
    r.boolean("skip_when_unimprovable", c.refine.skip_when_unimprovable);
    if (const Json* p = r.get("presets")) {
        if (!p->is_array() || p->empty())
            throw MalformedDocument("field 'presets' must be a non-empty array");
        c.presets.clear();
        for (const auto& name : *p) {
            const auto preset = name.is_string() ? parse_preset(name.get<std::string>()) : std::nullopt;
            if (!preset)
                throw MalformedDocument("field 'presets' holds an unknown preset: " + name.dump());
            c.presets.push_back(*preset);
        }
    }
    if (const Json* p = r.get("perturbation")) {
        Reader pr(*p, "perturbation");
        pr.num("translation", c.perturbation.translation);
        pr.num("orientation", c.perturbation.orientation);
        pr.num("fingers", c.perturbation.fingers);
        pr.num("shape", c.perturbation.shape);
        pr.finish();
    }
    if (const Json* g = r.get("grid")) {
        Reader gr(*g, "grid");
        gr.integer("resolution", c.refine.grid.resolution);
        gr.integer("margin", c.refine.grid.margin);
        gr.finish();
    }
    if (const Json* t = r.get("template"))
        template_config_from_json(*t, c.template_config, "template");

    std::map<Factor, StageConfig> by_factor;
    std::vector<Factor> order;
    for (const auto& s : c.refine.stages) {
        by_factor[s.factor] = s;
        order.push_back(s.factor);
    }
    if (const Json* st = r.get("stages")) {
        Reader sr(*st, "stages");
        for (Factor f : kAllFactors) {
            const Json* w = sr.get(factor_name(f));
            if (!w)
                continue;
            StageConfig& sc = by_factor[f];
            sc.factor = f;
            Reader wr(*w, sr.path(factor_name(f)));
            wr.num("collision", sc.weights.collision);
            wr.num("joints_2d", sc.weights.joints_2d);
            wr.num("joints_3d", sc.weights.joints_3d);
            wr.num("translation", sc.weights.translation);
            wr.num("shape_reg", sc.weights.shape_reg);
            wr.num("finger", sc.weights.finger);
            wr.num("step_size", sc.weights.step_size);
            wr.integer("max_iterations", sc.weights.max_iterations);
            wr.boolean("enabled", sc.enabled);
            wr.finish();
        }
        sr.finish();
    }
    if (const Json* o = r.get("stage_order")) {
        order.clear();
        if (o->is_string()) {
            try {
                order = parse_stage_order(o->get<std::string>());
            } catch (const InvalidArgument& e) {
                throw MalformedDocument(std::string("field 'stage_order': ") + e.what());
            }
        } else if (o->is_array()) {
            for (const auto& name : *o) {
                const auto f = name.is_string() ? parse_factor(name.get<std::string>()) : std::nullopt;
                if (!f)
                    throw MalformedDocument("field 'stage_order' holds an unknown stage: " + name.dump());
                order.push_back(*f);
            }
        } else {
            throw MalformedDocument("field 'stage_order' must be an array or a comma-separated string");
        }
    }
    r.finish();

    c.refine.stages.clear();
    for (Factor f : order) {
        auto it = by_factor.find(f);
        c.refine.stages.push_back(it != by_factor.end() ? it->second : StageConfig{f, default_stage_weights(f), true});
    }
    try {
        validate(c.refine);
    } catch (const InvalidArgument& e) {
        throw MalformedDocument(std::string("invalid config: ") + e.what());
    }
    if (c.scene_count < 1)
        throw MalformedDocument("field 'scene_count' must be at least 1");
    if (!(c.noise_std_mm >= 0.0))
        throw MalformedDocument("field 'noise_std_mm' must be non-negative");
    if (c.workers < 0)
        throw MalformedDocument("field 'workers' must be non-negative");
    return c;
}

RunConfig load_config(const std::string& path, const RunConfig& base)
{
    return config_from_json(parse_json(read_file(path)), base);
}

Json to_json(const RefineReport& r)
{
    Json j;
    j["initial"] = errors_to_json(r.initial);
    j["final"] = errors_to_json(r.final_errors);
    j["accepted_stages"] = r.accepted_count();
    Json stages = Json::array();
    for (const auto& s : r.stages) {
        Json sj;
        sj["stage"] = factor_name(s.factor);
        sj["ran"] = s.ran;
        sj["accepted"] = s.accepted;
        sj["aborted"] = s.aborted;
        sj["iterations"] = s.iterations;
        sj["before"] = errors_to_json(s.before);
        if (s.ran)
            sj["candidate"] = errors_to_json(s.candidate);
        sj["wall_seconds"] = s.wall_seconds;
        stages.push_back(std::move(sj));
    }
    j["stages"] = std::move(stages);
    return j;
}

Json to_json(const PoseMetrics& m)
{
    Json j;
    j["mpjpe_mm"] = m.mpjpe;
    j["i_mpjpe_mm"] = m.i_mpjpe;
    j["ave_p_mm"] = m.ave_p;
    j["max_p_mm"] = m.max_p;
    return j;
}

std::string mesh_to_obj(const TwoHandMesh& mesh, const ObjOptions& options)
{
    if (options.precision < 1 || options.precision > 17)
        throw InvalidArgument("OBJ precision must be in [1, 17]");
    for (Side s : {Side::Left, Side::Right})
        if (!mesh.vertices(s).allFinite())
            throw InvalidArgument(std::string("refusing to export a mesh with non-finite vertices (") +
                                  (s == Side::Left ? "left" : "right") + " hand)");
    std::string out = "# two-hand mesh, meters\n";
    char buf[128];
    int offset = 1;
    for (Side s : {Side::Left, Side::Right}) {
        out += s == Side::Left ? "g left\n" : "g right\n";
        const Points& v = mesh.vertices(s);
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "v %.*g %.*g %.*g\n", options.precision, v(i, 0), options.precision,
                          v(i, 1), options.precision, v(i, 2));
            out += buf;
        }
        for (const Face& f : mesh.faces(s)) {
            std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + offset, f[1] + offset, f[2] + offset);
            out += buf;
        }
        offset += static_cast<int>(v.rows());
    }
    return out;
}

void export_obj(const TwoHandMesh& mesh, const std::string& path, const ObjOptions& options)
{
    write_file_atomic(path, mesh_to_obj(mesh, options));
}

}  // namespace twohand
