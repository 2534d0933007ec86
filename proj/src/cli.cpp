#include "twohand/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>

#include <CLI11.hpp>

#include "twohand/io_util.hpp"
#include "twohand/scene_io.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace twohand {
namespace {

namespace fs = std::filesystem;

struct CommonOptions {
    std::string config;
    std::uint64_t seed = 1;
    int grid_res = 32;
    std::string stage_order = "tau,phi,theta,beta";
    std::string out = "out";
    double noise_std_mm = 10.0;
    int count = 4;
    std::vector<std::string> presets;
    std::string which = "initial";
    std::vector<std::string> inputs;
};

struct Flags {
    CLI::Option* config = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* grid_res = nullptr;
    CLI::Option* stage_order = nullptr;
    CLI::Option* noise = nullptr;
    CLI::Option* count = nullptr;
    CLI::Option* presets = nullptr;
};

// A failure that should be reported with exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Flags add_common(CLI::App* sub, CommonOptions& o)
{
    Flags f;
    f.config = sub->add_option("--config", o.config,
                               "JSON config file; relative paths are also looked up in $TWOHAND_CONFIG_DIR. "
                               "Without it, $TWOHAND_CONFIG_DIR/default.json is used when present");
    f.seed = sub->add_option("--seed", o.seed, "base seed of the synthetic corpus")->capture_default_str();
    f.grid_res = sub->add_option("--grid-res", o.grid_res, "voxels per axis of the collision grids (N_p)")
                     ->capture_default_str();
    f.stage_order = sub->add_option("--stage-order", o.stage_order, "comma-separated permutation of the stages")
                        ->capture_default_str();
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    f.noise = sub->add_option("--noise-std-mm", o.noise_std_mm, "joint noise of the synthetic targets, mm")
                  ->capture_default_str();
    return f;
}

std::optional<std::string> resolve_config_path(const std::string& given)
{
    const char* dir = std::getenv("TWOHAND_CONFIG_DIR");
    if (!given.empty()) {
        if (fs::exists(given) || fs::path(given).is_absolute() || !dir)
            return given;
        const fs::path alt = fs::path(dir) / given;
        return fs::exists(alt) ? alt.string() : given;
    }
    if (dir) {
        const fs::path def = fs::path(dir) / "default.json";
        if (fs::exists(def))
            return def.string();
    }
    return std::nullopt;
}

RunConfig resolve(const CommonOptions& o, const Flags& f, std::string* config_source)
{
    RunConfig c;
    if (const auto path = resolve_config_path(o.config)) {
        c = load_config(*path);
        *config_source = *path;
    }
    if (f.seed->count())
        c.seed = o.seed;
    if (f.grid_res->count()) {
        c.refine.grid.resolution = o.grid_res;
        try {
            validate(c.refine.grid);
        } catch (const InvalidArgument& e) {
            throw UsageError(std::string("--grid-res: ") + e.what());
        }
    }
    if (f.noise->count()) {
        if (!(o.noise_std_mm >= 0.0))
            throw UsageError("--noise-std-mm must be non-negative");
        c.noise_std_mm = o.noise_std_mm;
    }
    if (f.stage_order->count()) {
        std::vector<Factor> order;
        try {
            order = parse_stage_order(o.stage_order);
            std::map<Factor, StageConfig> by_factor;
            for (const auto& s : c.refine.stages)
                by_factor[s.factor] = s;
            RefineConfig r = c.refine;
            r.stages.clear();
            for (Factor fac : order)
                r.stages.push_back(by_factor.count(fac) ? by_factor[fac] : StageConfig{fac, default_stage_weights(fac)});
            validate(r);
            c.refine = r;
        } catch (const InvalidArgument& e) {
            throw UsageError(std::string("--stage-order: ") + e.what());
        }
    }
    if (f.count && f.count->count()) {
        if (o.count < 1)
            throw UsageError("--count must be at least 1");
        c.scene_count = o.count;
    }
    if (f.presets && f.presets->count()) {
        c.presets.clear();
        for (const auto& name : o.presets) {
            const auto p = parse_preset(name);
            if (!p)
                throw UsageError("--preset: unknown preset '" + name + "'");
            c.presets.push_back(*p);
        }
    }
    return c;
}

Json report_header(const std::string& command, const RunConfig& c, const std::string& config_source)
{
    Json j;
    j["command"] = command;
    j["config_source"] = config_source.empty() ? "defaults" : config_source;
    j["config"] = to_json(c);
    return j;
}

std::string stem_of(const std::string& path)
{
    return fs::path(path).stem().string();
}

void set_workers(const RunConfig& c)
{
#ifdef _OPENMP
    if (c.workers > 0)
        omp_set_num_threads(c.workers);
#else
    (void)c;
#endif
}

// Runs `body` for every index; errors are collected per item.
template <class Body>
std::vector<std::string> for_each_item(int n, Body body)
{
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    return errors;
}

int synth(const CommonOptions& o, const Flags& f, std::ostream& out, std::ostream& err)
{
    std::string source;
    const RunConfig c = resolve(o, f, &source);
    set_workers(c);
    const HandTemplate tmpl = build_template(c.template_config);
    const fs::path dir(o.out);
    std::vector<Json> rows(c.scene_count);
    const auto errors = for_each_item(c.scene_count, [&](int i) {
        SceneSpec spec;
        spec.seed = scene_seed(c.seed, static_cast<std::uint64_t>(i));
        spec.preset = c.presets[static_cast<std::size_t>(i) % c.presets.size()];
        spec.perturbation = c.perturbation;
        spec.noise_std_mm = c.noise_std_mm;
        spec.grid = c.refine.grid;
        const Scene scene = generate_scene(spec, tmpl);
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04d.json", i);
        save_scene(scene_file_from(scene, tmpl), (dir / name).string());
        rows[i] = {{"file", name},
                   {"seed", spec.seed},
                   {"preset", preset_name(spec.preset)},
                   {"attempts", scene.attempts},
                   {"initial_metrics", to_json(evaluate_pose(tmpl, scene.initial, scene.gt, spec.grid))}};
    });
    Json report = report_header("synth", c, source);
    Json scenes = Json::array();
    int failed = 0;
    for (int i = 0; i < c.scene_count; ++i) {
        if (!errors[i].empty()) {
            ++failed;
            err << "scene " << i << ": " << errors[i] << '\n';
            scenes.push_back({{"index", i}, {"error", errors[i]}});
        } else {
            scenes.push_back(rows[i]);
        }
    }
    report["scenes"] = std::move(scenes);
    write_file_atomic((dir / "synth_report.json").string(), report.dump(2) + "\n");
    out << "wrote " << (c.scene_count - failed) << " scene(s) to " << dir.string() << '\n';
    return failed == c.scene_count ? 1 : 0;
}

int refine(const CommonOptions& o, const Flags& f, std::ostream& out, std::ostream& err)
{
    std::string source;
    const RunConfig c = resolve(o, f, &source);
    set_workers(c);
    const fs::path dir(o.out);
    const int n = static_cast<int>(o.inputs.size());
    std::vector<std::string> lines(n);
    const auto errors = for_each_item(n, [&](int i) {
        const std::string& input = o.inputs[i];
        SceneFile scene = load_scene(input);
        const HandTemplate tmpl = template_for(scene);
        const auto [refined, rep] = factorized_refine(tmpl, scene.initial, scene.targets, c.refine);

        Json report = report_header("refine", c, source);
        report["input"] = input;
        report["refine"] = to_json(rep);
        if (scene.gt) {
            report["metrics"] = {{"initial", to_json(evaluate_pose(tmpl, scene.initial, *scene.gt, c.refine.grid))},
                                 {"refined", to_json(evaluate_pose(tmpl, refined, *scene.gt, c.refine.grid))}};
        }
        SceneFile result = scene;
        result.initial = refined;
        result.provenance.generator = "refine";
        result.provenance.note = "refined from " + fs::path(input).filename().string();
        const std::string stem = stem_of(input);
        save_scene(result, (dir / (stem + ".refined.json")).string());
        write_file_atomic((dir / (stem + ".report.json")).string(), report.dump(2) + "\n");

        char buf[256];
        std::snprintf(buf, sizeof buf, "%s: e_col %.6g -> %.6g, e_3d %.6g -> %.6g, %d stage(s) accepted",
                      input.c_str(), rep.initial.e_col, rep.final_errors.e_col, rep.initial.e_3d, rep.final_errors.e_3d,
                      rep.accepted_count());
        lines[i] = buf;
    });
    int failed = 0;
    for (int i = 0; i < n; ++i) {
        if (errors[i].empty()) {
            out << lines[i] << '\n';
        } else {
            ++failed;
            err << o.inputs[i] << ": " << errors[i] << '\n';
        }
    }
    return failed ? 1 : 0;
}

int eval(const CommonOptions& o, const Flags& f, std::ostream& out, std::ostream& err)
{
    std::string source;
    const RunConfig c = resolve(o, f, &source);
    Json report = report_header("eval", c, source);
    Json scenes = Json::array();
    PoseMetrics mean;
    int failed = 0, counted = 0;
    std::map<std::uint64_t, HandTemplate> templates;
    for (const auto& input : o.inputs) {
        try {
            const SceneFile scene = load_scene(input);
            if (!scene.gt)
                throw MalformedDocument("missing field 'gt' (eval needs the ground truth)");
            auto it = templates.find(scene.template_hash);
            if (it == templates.end())
                it = templates.emplace(scene.template_hash, template_for(scene)).first;
            const PoseMetrics m = evaluate_pose(it->second, scene.initial, *scene.gt, c.refine.grid);
            mean.mpjpe += m.mpjpe;
            mean.i_mpjpe += m.i_mpjpe;
            mean.ave_p += m.ave_p;
            mean.max_p += m.max_p;
            ++counted;
            scenes.push_back({{"input", input}, {"metrics", to_json(m)}});
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s: MPJPE %.3f mm, I-MPJPE %.3f mm, AVE-P %.3f mm, MAX-P %.3f mm",
                          input.c_str(), m.mpjpe, m.i_mpjpe, m.ave_p, m.max_p);
            out << buf << '\n';
        } catch (const std::exception& e) {
            ++failed;
            err << input << ": " << e.what() << '\n';
            scenes.push_back({{"input", input}, {"error", e.what()}});
        }
    }
    report["scenes"] = std::move(scenes);
    if (counted > 0) {
        const double k = 1.0 / counted;
        report["mean"] = to_json(PoseMetrics{mean.mpjpe * k, mean.i_mpjpe * k, mean.ave_p * k, mean.max_p * k});
    }
    write_file_atomic((fs::path(o.out) / "eval_report.json").string(), report.dump(2) + "\n");
    return failed ? 1 : 0;
}

const TwoHandParams& pick(const SceneFile& scene, const std::string& which)
{
    if (which == "gt") {
        if (!scene.gt)
            throw MalformedDocument("missing field 'gt'");
        return *scene.gt;
    }
    return scene.initial;
}

int voxelize(const CommonOptions& o, const Flags& f, std::ostream& out, std::ostream& err)
{
    std::string source;
    const RunConfig c = resolve(o, f, &source);
    const fs::path dir(o.out);
    Json report = report_header("voxelize", c, source);
    Json files = Json::array();
    int failed = 0;
    for (const auto& input : o.inputs) {
        try {
            const SceneFile scene = load_scene(input);
            const HandTemplate tmpl = template_for(scene);
            const TwoHandMesh mesh = forward(tmpl, pick(scene, o.which));
            for (Side s : {Side::Left, Side::Right}) {
                const VoxelSdf grid = voxelize_sdf(mesh.vertices(s), tmpl.topology[static_cast<int>(s)], c.refine.grid);
                const std::string name =
                    stem_of(input) + "." + o.which + (s == Side::Left ? ".left.sdf" : ".right.sdf");
                write_sdf_binary(grid, (dir / name).string());
                files.push_back(name);
                out << "wrote " << (dir / name).string() << '\n';
            }
        } catch (const std::exception& e) {
            ++failed;
            err << input << ": " << e.what() << '\n';
        }
    }
    report["which"] = o.which;
    report["files"] = std::move(files);
    write_file_atomic((dir / "voxelize_report.json").string(), report.dump(2) + "\n");
    return failed ? 1 : 0;
}

int export_objs(const CommonOptions& o, const Flags& f, std::ostream& out, std::ostream& err)
{
    std::string source;
    const RunConfig c = resolve(o, f, &source);
    const fs::path dir(o.out);
    Json report = report_header("export-obj", c, source);
    Json files = Json::array();
    int failed = 0;
    for (const auto& input : o.inputs) {
        try {
            const SceneFile scene = load_scene(input);
            const HandTemplate tmpl = template_for(scene);
            const std::string name = stem_of(input) + "." + o.which + ".obj";
            export_obj(forward(tmpl, pick(scene, o.which)), (dir / name).string());
            files.push_back(name);
            out << "wrote " << (dir / name).string() << '\n';
        } catch (const std::exception& e) {
            ++failed;
            err << input << ": " << e.what() << '\n';
        }
    }
    report["which"] = o.which;
    report["files"] = std::move(files);
    write_file_atomic((dir / "export-obj_report.json").string(), report.dump(2) + "\n");
    return failed ? 1 : 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Collision-aware two-hand pose refinement on synthetic scenes", "twohand"};
    app.require_subcommand(1, 1);
    app.footer("Configuration: defaults, then the --config JSON file (or $TWOHAND_CONFIG_DIR/default.json),\n"
               "then command-line flags. Every report records the resolved config.\n"
               "Exit codes: 0 success, 1 runtime or document error, 2 usage error.");
    CommonOptions o;

    CLI::App* synth_cmd = app.add_subcommand("synth", "generate synthetic scenes");
    Flags synth_flags = add_common(synth_cmd, o);
    synth_flags.count = synth_cmd->add_option("--count", o.count, "number of scenes")->capture_default_str();
    synth_flags.presets =
        synth_cmd->add_option("--preset", o.presets, "contact preset: clasp, interlace, point-touch or near-miss "
                                                     "(repeatable, cycled over the scenes; default clasp,interlace)");

    CLI::App* refine_cmd = app.add_subcommand("refine", "refine scene files and write refined scenes plus reports");
    const Flags refine_flags = add_common(refine_cmd, o);
    refine_cmd->add_option("scenes", o.inputs, "scene files")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "metrics of each scene's estimate against its ground truth");
    const Flags eval_flags = add_common(eval_cmd, o);
    eval_cmd->add_option("scenes", o.inputs, "scene files")->required();

    CLI::App* vox_cmd = app.add_subcommand("voxelize", "dump both hands' penetration-depth grids (binary)");
    const Flags vox_flags = add_common(vox_cmd, o);
    vox_cmd->add_option("--which", o.which, "parameters to pose")->check(CLI::IsMember({"initial", "gt"}))
        ->capture_default_str();
    vox_cmd->add_option("scenes", o.inputs, "scene files")->required();

    CLI::App* obj_cmd = app.add_subcommand("export-obj", "write the posed two-hand mesh as OBJ");
    const Flags obj_flags = add_common(obj_cmd, o);
    obj_cmd->add_option("--which", o.which, "parameters to pose")->check(CLI::IsMember({"initial", "gt"}))
        ->capture_default_str();
    obj_cmd->add_option("scenes", o.inputs, "scene files")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nRun with --help for usage.\n";
        return 2;
    }

    try {
        if (*synth_cmd)
            return synth(o, synth_flags, out, err);
        if (*refine_cmd)
            return refine(o, refine_flags, out, err);
        if (*eval_cmd)
            return eval(o, eval_flags, out, err);
        if (*vox_cmd)
            return voxelize(o, vox_flags, out, err);
        if (*obj_cmd)
            return export_objs(o, obj_flags, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

int cli(int argc, char** argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace twohand
