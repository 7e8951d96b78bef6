// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// uvsplat command-line tool: fit, render, orbit, epi, bench, export-ply.
//
// Exit codes: 0 success, 2 configuration / input error, 3 numerical failure.

#include "uvsplat/camera.hpp"
#include "uvsplat/error.hpp"
#include "uvsplat/fit.hpp"
#include "uvsplat/image.hpp"
#include "uvsplat/metrics.hpp"
#include "uvsplat/parallel.hpp"
#include "uvsplat/ply.hpp"
#include "uvsplat/render.hpp"
#include "uvsplat/scene.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace uvsplat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct SceneArgs {
    std::string templatePath;
    std::string mapsPath;
    int uvRes = 64;
    std::string background = "1,1,1";
    double gammaPos = 0.25, sMax = 3.0, sInit = 5.0;
};

void
addSceneOptions(CLI::App *cmd, SceneArgs &a) {
    cmd->add_option("--template", a.templatePath, "Template mesh (OBJ with vt)")->required();
    cmd->add_option("--maps", a.mapsPath, "Attribute maps (GGUV)")->required();
    cmd->add_option("--uv-res", a.uvRes, "UV sampling resolution")->capture_default_str();
    cmd->add_option("--background", a.background, "Background colour R,G,B in [0,1]")
        ->capture_default_str();
    cmd->add_option("--gamma-pos", a.gammaPos, "Maximum position offset (m)")->capture_default_str();
    cmd->add_option("--s-max", a.sMax, "Scale activation cap exponent")->capture_default_str();
    cmd->add_option("--s-init", a.sInit, "Scale activation offset")->capture_default_str();
}

Vec3
parseVec3(const std::string &text, const char *what) {
    std::stringstream ss(text);
    std::string tok;
    std::vector<double> v;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument(tok);
        } catch (const std::exception &) {
            throw Error(ErrorKind::InvalidConfig, std::string(what) + ": cannot parse '" + text + "'");
        }
    }
    if (v.size() != 3)
        throw Error(ErrorKind::InvalidConfig, std::string(what) + " needs three comma-separated values");
    return {v[0], v[1], v[2]};
}

Vec3
jsonVec3(const nlohmann::json &j, const char *what) {
    if (!j.is_array() || j.size() != 3)
        throw Error(ErrorKind::InvalidConfig, std::string(what) + " must be an array of three numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

SceneBundle
bundleFrom(const SceneArgs &a) {
    SceneBundle b;
    b.templatePath = a.templatePath;
    b.mapsPath = a.mapsPath;
    b.uvResolution = a.uvRes;
    b.background = parseVec3(a.background, "--background");
    b.activation = {a.gammaPos, a.sMax, a.sInit};
    return b;
}

/// Orbit that frames the template's bounding sphere.
OrbitSpec
framingOrbit(const TemplateMesh &mesh, int size, int frames) {
    Vec3 lo = mesh.vertices.front(), hi = lo;
    for (const Vec3 &v : mesh.vertices)
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], v[k]);
            hi[k] = std::max(hi[k], v[k]);
        }
    OrbitSpec o;
    o.center = 0.5 * (lo + hi);
    const double halfDiag = 0.5 * norm(hi - lo);
    o.radius = std::max(3.0 * halfDiag, 1e-3);
    o.focal = size * 1.2;
    o.width = o.height = size;
    o.frames = frames;
    o.elevation = 0.2;
    return o;
}

std::string
resolveRelative(const fs::path &base, const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() ? p : (base / path).string();
}

void
writeText(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
}

Image
normalizedDepth(const Image &depth, const Image &alpha) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (size_t i = 0; i < depth.data.size(); ++i)
        if (alpha.data[i] > 0.0) {
            lo = std::min(lo, depth.data[i]);
            hi = std::max(hi, depth.data[i]);
        }
    Image out(depth.width, depth.height, 1);
    if (!(hi > lo))
        return out;
    for (size_t i = 0; i < depth.data.size(); ++i)
        out.data[i] = alpha.data[i] > 0.0 ? 1.0 - (depth.data[i] - lo) / (hi - lo) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string config;
    std::string out;
    std::optional<uint64_t> seed;
};

int
runFit(const FitArgs &args) {
    std::ifstream in(args.config);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open config '" + args.config + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    FitConfig cfg = fitConfigFromJson(text);
    if (args.seed)
        cfg.seed = *args.seed;

    const nlohmann::json j = nlohmann::json::parse(text);
    const fs::path base = fs::path(args.config).parent_path();
    std::string field;
    auto str = [&](const char *key) {
        field = key;
        return resolveRelative(base, j.at(key).get<std::string>());
    };
    ActivationConfig act;
    TargetSet targets;
    std::string mapsOut, historyOut, stateOut;
    std::optional<AttributeMaps> init;
    std::shared_ptr<const TemplateMesh> mesh;
    try {
        mesh = std::make_shared<const TemplateMesh>(loadObj(str("template")));
        field = "background";
        if (j.contains("background"))
            targets.background = jsonVec3(j.at("background"), "background");
        field = "activation";
        if (j.contains("activation")) {
            const auto &a = j.at("activation");
            act.gammaPos = a.value("gamma_pos", act.gammaPos);
            act.sMax = a.value("s_max", act.sMax);
            act.sInit = a.value("s_init", act.sInit);
        }
        field = "targets";
        for (const auto &t : j.at("targets")) {
            TargetView view;
            field = "targets.camera";
            if (t.at("camera").is_string())
                view.camera = loadCamera(resolveRelative(base, t.at("camera").get<std::string>()));
            else
                view.camera = cameraFromJson(t.at("camera").dump());
            field = "targets.image";
            view.image = readImage(resolveRelative(base, t.at("image").get<std::string>()));
            targets.views.push_back(std::move(view));
        }
        field = "init_maps";
        if (j.contains("init_maps"))
            init = loadGguv(str("init_maps"));
        field = "output";
        const auto &o = j.at("output");
        mapsOut = args.out.empty() ? resolveRelative(base, o.at("maps").get<std::string>()) : args.out;
        historyOut = o.contains("history") ? resolveRelative(base, o.at("history").get<std::string>())
                                           : mapsOut + ".history.json";
        stateOut = o.contains("optimizer")
                       ? resolveRelative(base, o.at("optimizer").get<std::string>())
                       : mapsOut + ".ggos";
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::InvalidConfig, "field '" + field + "': " + e.what());
    }

    const UvChartIndex index(mesh);
    const auto t0 = std::chrono::steady_clock::now();
    const FitResult r = fitMaps(targets, index, act, cfg, std::move(init), [&](const FitRecord &rec) {
        if (rec.step % 100 == 0)
            std::cerr << "step " << rec.step << " loss " << rec.loss.total << " psnr " << rec.psnr
                      << " gaussians " << rec.gaussianCount << '\n';
    });
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    saveGguv(mapsOut, r.maps);
    saveOptimizerState(stateOut, r.optimizer, r.maps.height(), r.maps.width());
    writeText(historyOut, fitHistoryJson(r.history));
    if (!r.history.empty())
        std::cerr << "final psnr " << r.history.back().psnr << " after " << r.history.size()
                  << " iterations (" << secs << " s)\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
    SceneArgs scene;
    std::string camera;
    std::string mode = "color";
    std::string out;
    std::string alphaOut;
    std::string normalsOut;
};

int
runRender(const RenderArgs &args) {
    const SceneBundle bundle = bundleFrom(args.scene);
    const LoadedScene scene = loadScene(bundle);
    const Camera cam = loadCamera(args.camera);
    const bool pfm = fs::path(args.out).extension() == ".pfm";
    auto save = [&](const std::string &path, const Image &img) {
        if (fs::path(path).extension() == ".pfm")
            writePfm(path, img);
        else
            writePng(path, img);
    };
    RenderOutput out;
    if (args.mode == "color" || args.mode == "uv") {
        out = render(scene.gaussians, cam, args.mode == "uv" ? RenderMode::UvCoords : RenderMode::Color,
                     bundle.background);
        save(args.out, out.color);
    } else if (args.mode == "depth") {
        const DepthNormals dn = renderDepthNormals(scene.gaussians, cam);
        out = render(scene.gaussians, cam, RenderMode::Color, bundle.background);
        save(args.out, pfm ? dn.depth : normalizedDepth(dn.depth, out.alpha));
        if (!args.normalsOut.empty()) {
            Image vis = dn.normals;
            if (fs::path(args.normalsOut).extension() != ".pfm")
                for (double &v : vis.data)
                    v = 0.5 * (v + 1.0);
            save(args.normalsOut, vis);
        }
    } else {
        throw Error(ErrorKind::InvalidConfig, "--mode must be color, uv or depth");
    }
    if (!args.alphaOut.empty())
        writePfm(args.alphaOut, out.alpha);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// orbit / epi

struct OrbitArgs {
    SceneArgs scene;
    std::string center = "0,0,0";
    double radius = 1.0;
    double elevation = 0.0;
    int frames = 8;
    double focal = 0.0;
    int size = 256;
    std::string outDir;
};

void
addOrbitOptions(CLI::App *cmd, OrbitArgs &a) {
    cmd->add_option("--center", a.center, "Orbit centre x,y,z")->capture_default_str();
    cmd->add_option("--radius", a.radius, "Orbit radius (m)")->capture_default_str();
    cmd->add_option("--elevation", a.elevation, "Elevation above the horizon (rad)")
        ->capture_default_str();
    cmd->add_option("--frames", a.frames, "Number of cameras")->capture_default_str();
    cmd->add_option("--focal", a.focal, "Focal length in pixels (default 1.2 * size)");
    cmd->add_option("--size", a.size, "Image side length")->capture_default_str();
}

OrbitSpec
orbitFrom(const OrbitArgs &a) {
    OrbitSpec o;
    o.center = parseVec3(a.center, "--center");
    o.radius = a.radius;
    o.elevation = a.elevation;
    o.frames = a.frames;
    o.focal = a.focal > 0.0 ? a.focal : 1.2 * a.size;
    o.width = o.height = a.size;
    if (a.size < 1)
        throw Error(ErrorKind::InvalidConfig, "--size must be positive");
    return o;
}

int
runOrbit(const OrbitArgs &args) {
    const OrbitSpec spec = orbitFrom(args);
    const std::vector<Camera> cams = orbitCameras(spec);
    const SceneBundle bundle = bundleFrom(args.scene);
    const LoadedScene scene = loadScene(bundle);
    fs::create_directories(args.outDir);
    for (size_t i = 0; i < cams.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%04zu", i);
        const RenderOutput out = render(scene.gaussians, cams[i], RenderMode::Color, bundle.background);
        writePng((fs::path(args.outDir) / ("frame_" + std::string(stem) + ".png")).string(), out.color);
        saveCamera((fs::path(args.outDir) / ("camera_" + std::string(stem) + ".json")).string(), cams[i]);
    }
    return kExitOk;
}

struct EpiArgs {
    OrbitArgs orbit;
    int row = -1, colStart = 0, colEnd = -1;
    std::string out;
};

int
runEpi(const EpiArgs &args) {
    const OrbitSpec spec = orbitFrom(args.orbit);
    const std::vector<Camera> cams = orbitCameras(spec);
    const SceneBundle bundle = bundleFrom(args.orbit.scene);
    const LoadedScene scene = loadScene(bundle);
    EpiLine line{args.row < 0 ? spec.height / 2 : args.row, args.colStart,
                 args.colEnd < 0 ? spec.width : args.colEnd};
    const Image strip = epiStrip(
        [&](const Camera &c) {
            return render(scene.gaussians, c, RenderMode::Color, bundle.background).color;
        },
        cams, line);
    writePng(args.out, strip);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    SceneArgs scene;
    std::vector<int> resolutions{256, 512};
    std::vector<int> uvResolutions;
    int repetitions = 10;
    int warmup = 2;
    std::string rasterizer = "tiled";
    std::string out;
};

double
medianMs(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Fn>
std::vector<double>
timeRuns(int warmup, int reps, Fn &&fn) {
    for (int i = 0; i < warmup; ++i)
        fn();
    std::vector<double> ms;
    ms.reserve(size_t(reps));
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        ms.push_back(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return ms;
}

std::string
cpuModel() {
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos)
                return line.substr(std::min(colon + 2, line.size()));
        }
    return "unknown";
}

int
runBench(const BenchArgs &args) {
    if (args.repetitions < 10)
        throw Error(ErrorKind::InvalidConfig, "--repetitions must be at least 10");
    if (args.resolutions.empty())
        throw Error(ErrorKind::InvalidConfig, "--resolutions must not be empty");
    for (int r : args.resolutions)
        if (r < 1)
            throw Error(ErrorKind::InvalidConfig, "--resolutions entries must be positive");
    if (args.rasterizer != "tiled" && args.rasterizer != "reference")
        throw Error(ErrorKind::InvalidConfig, "--rasterizer must be tiled or reference");
    const bool reference = args.rasterizer == "reference";

    SceneBundle bundle = bundleFrom(args.scene);
    std::vector<int> uvRes = args.uvResolutions;
    if (uvRes.empty())
        uvRes.push_back(bundle.uvResolution);
    LoadedScene scene = loadScene(bundle);

    nlohmann::json entries = nlohmann::json::array();
    for (int uv : uvRes) {
        if (uv < 1)
            throw Error(ErrorKind::InvalidConfig, "--uv-resolutions entries must be positive");
        const UvGrid grid = sampleUvGrid(*scene.index, uv);
        GaussianSet gs;
        const double genMs = medianMs(timeRuns(args.warmup, args.repetitions, [&] {
            gs = assembleGaussians(scene.maps, grid, bundle.activation);
        }));
        for (int res : args.resolutions) {
            const OrbitSpec o = framingOrbit(*scene.mesh, res, 1);
            const Camera cam = orbitCameras(o).front();
            Image gradColor(res, res, 3, 1.0 / (3.0 * res * res)), gradAlpha(res, res, 1);
            FrameState state;
            const double renderMs = medianMs(timeRuns(args.warmup, args.repetitions, [&] {
                if (reference)
                    reference::render(gs, cam, RenderMode::Color, bundle.background, &state);
                else
                    render(gs, cam, RenderMode::Color, bundle.background, {}, &state);
            }));
            const double backwardMs = medianMs(timeRuns(args.warmup, args.repetitions, [&] {
                if (reference)
                    reference::renderBackward(gs, cam, RenderMode::Color, bundle.background,
                                              gradColor, gradAlpha, &state);
                else
                    renderBackward(gs, cam, RenderMode::Color, bundle.background, gradColor,
                                   gradAlpha, {}, &state);
            }));
            nlohmann::json e;
            e["resolution"] = res;
            e["uv_resolution"] = uv;
            e["gaussian_count"] = gs.size();
            e["gen_ms"] = genMs;
            e["render_ms"] = renderMs;
            e["backward_ms"] = backwardMs;
            entries.push_back(e);
            std::cerr << "res " << res << " uv " << uv << " gaussians " << gs.size() << " gen "
                      << genMs << " ms render " << renderMs << " ms backward " << backwardMs
                      << " ms\n";
        }
    }
    nlohmann::json report;
    report["machine"] = {{"cpu", cpuModel()},
                         {"hardware_threads", std::thread::hardware_concurrency()},
                         {"worker_threads", threadCount()},
                         {"compiler", __VERSION__}};
    report["rasterizer"] = args.rasterizer;
    report["repetitions"] = args.repetitions;
    report["warmup"] = args.warmup;
    report["statistic"] = "median";
    report["entries"] = entries;
    if (args.out.empty())
        std::cout << report.dump(2) << '\n';
    else
        writeText(args.out, report.dump(2) + "\n");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// export-ply

struct ExportArgs {
    SceneArgs scene;
    std::string out;
};

int
runExport(const ExportArgs &args) {
    const LoadedScene scene = loadScene(bundleFrom(args.scene));
    exportPly(args.out, scene.gaussians);
    return kExitOk;
}

int
exitCodeFor(const Error &e) {
    return e.kind() == ErrorKind::NonFiniteLoss ? kExitNumeric : kExitConfig;
}

} // namespace

int
main(int argc, char **argv) {
    applyThreadEnv();

    CLI::App app{"Gaussian splatting on UV-parameterized templates"};
    app.require_subcommand(1);
    std::optional<uint64_t> seed;
    app.add_option("--seed", seed, "Random seed (overrides the fit config)");

    FitArgs fitArgs;
    CLI::App *fit = app.add_subcommand("fit", "Fit attribute maps to posed target images");
    fit->add_option("config", fitArgs.config, "Fit configuration (JSON)")->required();
    fit->add_option("--out", fitArgs.out, "Override the output maps path");
    fit->add_option("--seed", fitArgs.seed, "Random seed (overrides the fit config)");

    RenderArgs renderArgs;
    CLI::App *rend = app.add_subcommand("render", "Render a scene from one camera");
    addSceneOptions(rend, renderArgs.scene);
    rend->add_option("--camera", renderArgs.camera, "Camera JSON")->required();
    rend->add_option("--mode", renderArgs.mode, "color, uv or depth")->capture_default_str();
    rend->add_option("--out", renderArgs.out, "Output image (.png or .pfm)")->required();
    rend->add_option("--alpha", renderArgs.alphaOut, "Optional alpha PFM sidecar");
    rend->add_option("--normals", renderArgs.normalsOut, "Normals image (depth mode)");

    OrbitArgs orbitArgs;
    CLI::App *orbit = app.add_subcommand("orbit", "Render frames on a circular camera path");
    addSceneOptions(orbit, orbitArgs.scene);
    addOrbitOptions(orbit, orbitArgs);
    orbit->add_option("--out", orbitArgs.outDir, "Output directory")->required();

    EpiArgs epiArgs;
    CLI::App *epi = app.add_subcommand("epi", "Stack one image row along an orbit");
    addSceneOptions(epi, epiArgs.orbit.scene);
    addOrbitOptions(epi, epiArgs.orbit);
    epi->add_option("--row", epiArgs.row, "Image row (default: middle)");
    epi->add_option("--col-start", epiArgs.colStart, "First column")->capture_default_str();
    epi->add_option("--col-end", epiArgs.colEnd, "One past the last column (default: width)");
    epi->add_option("--out", epiArgs.out, "Output PNG")->required();

    BenchArgs benchArgs;
    CLI::App *bench = app.add_subcommand("bench", "Time generation, rendering and backward");
    addSceneOptions(bench, benchArgs.scene);
    bench->add_option("--resolutions", benchArgs.resolutions, "Image side lengths")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--uv-resolutions", benchArgs.uvResolutions,
                      "UV sampling resolutions (default: --uv-res)")
        ->delimiter(',');
    bench->add_option("--repetitions", benchArgs.repetitions, "Timed runs per measurement (>= 10)")
        ->capture_default_str();
    bench->add_option("--warmup", benchArgs.warmup, "Untimed runs before timing")
        ->capture_default_str();
    bench->add_option("--rasterizer", benchArgs.rasterizer, "tiled or reference")
        ->capture_default_str();
    bench->add_option("--out", benchArgs.out, "Report path (default: stdout)");

    ExportArgs exportArgs;
    CLI::App *exp = app.add_subcommand("export-ply", "Write the Gaussians as a 3DGS PLY");
    addSceneOptions(exp, exportArgs.scene);
    exp->add_option("--out", exportArgs.out, "Output PLY")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    if (!fitArgs.seed)
        fitArgs.seed = seed;

    try {
        if (fit->parsed())
            return runFit(fitArgs);
        if (rend->parsed())
            return runRender(renderArgs);
        if (orbit->parsed())
            return runOrbit(orbitArgs);
        if (epi->parsed())
            return runEpi(epiArgs);
        if (bench->parsed())
            return runBench(benchArgs);
        if (exp->parsed())
            return runExport(exportArgs);
    } catch (const Error &e) {
        std::cerr << "uvsplat: " << e.what() << '\n';
        return exitCodeFor(e);
    } catch (const nlohmann::json::exception &e) {
        std::cerr << "uvsplat: InvalidConfig: " << e.what() << '\n';
        return kExitConfig;
    } catch (const fs::filesystem_error &e) {
        std::cerr << "uvsplat: IoError: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
