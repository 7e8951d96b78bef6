// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/fit.hpp"

#include "uvsplat/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace uvsplat {

void
TargetSet::validate() const {
    if (views.empty())
        throw Error(ErrorKind::EmptyTargets, "need at least one target view");
    for (int c = 0; c < 3; ++c)
        if (!(background[c] >= 0.0 && background[c] <= 1.0))
            throw Error(ErrorKind::InvalidBackground, "background channels must lie in [0,1]");
    for (size_t v = 0; v < views.size(); ++v) {
        const TargetView &view = views[v];
        view.camera.validate();
        if (view.image.width != view.camera.width || view.image.height != view.camera.height ||
            view.image.channels != 3)
            throw Error(ErrorKind::ShapeMismatch,
                        "target " + std::to_string(v) + " does not match its camera size");
    }
}

void
FitConfig::validate() const {
    adam.validate();
    weights.validate();
    if (iterations < 0)
        throw Error(ErrorKind::InvalidConfig, "iterations must be non-negative");
    if (!(photometricWeight >= 0.0))
        throw Error(ErrorKind::InvalidConfig, "photometric_weight must be non-negative");
    if (mapResolution < 1)
        throw Error(ErrorKind::InvalidConfig, "map_resolution must be >= 1");
    if (uvResolution < 1)
        throw Error(ErrorKind::InvalidConfig, "uv_resolution must be >= 1");
    if (!(initNoise >= 0.0))
        throw Error(ErrorKind::InvalidConfig, "init_noise must be non-negative");
    if (!(unblendMinAlpha > 0.0 && unblendMinAlpha <= 1.0))
        throw Error(ErrorKind::InvalidConfig, "unblend_min_alpha must lie in (0, 1]");
    if (render.tileSize < 1)
        throw Error(ErrorKind::InvalidConfig, "tile_size must be positive");
    int lastIter = -1, lastRes = uvResolution;
    for (const auto &[iter, res] : growSchedule) {
        if (iter <= lastIter)
            throw Error(ErrorKind::InvalidConfig, "grow_schedule iterations must be increasing");
        if (res <= lastRes)
            throw Error(ErrorKind::InvalidConfig,
                        "grow_schedule resolutions must be strictly increasing");
        lastIter = iter;
        lastRes = res;
    }
}

int
FitConfig::stagedStart() const {
    if (uvTvEnabledFrom)
        return *uvTvEnabledFrom;
    if (!growSchedule.empty())
        return growSchedule.front().first;
    return -1;
}

namespace {

void
accumulate(SplatGradients &dst, const SplatGradients &src) {
    for (size_t i = 0; i < dst.size(); ++i) {
        GaussianGrad &d = dst[i];
        const GaussianGrad &s = src[i];
        d.position += s.position;
        d.scale += s.scale;
        d.color += s.color;
        for (int k = 0; k < 4; ++k)
            d.rotation[k] += s.rotation[k];
        d.opacity += s.opacity;
    }
}

double
psnrFromMse(double mse) {
    return mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : std::numeric_limits<double>::infinity();
}

} // namespace

ObjectiveResult
evaluateObjective(const AttributeMaps &maps, const UvGrid &grid, const TargetSet &targets,
                  const ActivationConfig &act, const ObjectiveSettings &settings,
                  bool withGradient) {
    const GaussianSet gaussians = assembleGaussians(maps, grid, act);
    const double views = double(targets.views.size());
    SplatGradients splatGrad(withGradient ? gaussians.size() : 0);

    double mseSum = 0.0;
    for (const TargetView &view : targets.views) {
        FrameState state;
        const RenderOutput out = render(gaussians, view.camera, RenderMode::Color,
                                        targets.background, settings.render, &state);
        const double n = double(out.color.data.size());
        double se = 0.0;
        for (size_t i = 0; i < out.color.data.size(); ++i) {
            const double d = out.color.data[i] - view.image.data[i];
            se += d * d;
        }
        mseSum += se / n;
        if (withGradient && settings.photometricWeight > 0.0) {
            Image gradColor(out.color.width, out.color.height, 3);
            const double k = 2.0 * settings.photometricWeight / (n * views);
            for (size_t i = 0; i < gradColor.data.size(); ++i)
                gradColor.data[i] = k * (out.color.data[i] - view.image.data[i]);
            const Image gradAlpha(out.alpha.width, out.alpha.height, 1);
            accumulate(splatGrad, renderBackward(gaussians, view.camera, RenderMode::Color,
                                                 targets.background, gradColor, gradAlpha,
                                                 settings.render, &state));
        }
    }
    ObjectiveResult result;
    result.photometricMse = mseSum / views;
    result.psnr = psnrFromMse(result.photometricMse);

    double uvTv = 0.0;
    if (settings.uvTvEnabled) {
        const Vec3 white{1.0, 1.0, 1.0};
        for (const TargetView &view : targets.views) {
            FrameState state;
            const RenderOutput out = render(gaussians, view.camera, RenderMode::UvCoords, white,
                                            settings.render, &state);
            const UnblendedUv un = unblendUv(out.color, out.alpha, settings.unblendMinAlpha);
            uvTv += tvUv(un.uv, un.valid) / views;
            if (withGradient && settings.weights.lambdaUv > 0.0) {
                Image gradPrime(out.color.width, out.color.height, 3);
                tvUvGrad(un.uv, un.valid, gradPrime, settings.weights.lambdaUv / views);
                Image gradUv(out.color.width, out.color.height, 3);
                Image gradAlpha(out.alpha.width, out.alpha.height, 1);
                unblendUvBackward(out.color, out.alpha, un, gradPrime, gradUv, gradAlpha);
                accumulate(splatGrad, renderBackward(gaussians, view.camera, RenderMode::UvCoords,
                                                     white, gradUv, gradAlpha, settings.render,
                                                     &state));
            }
        }
    }

    const std::vector<double> rawPos = maps.gatherChannels(channel::kPosition, 3);
    const std::vector<double> rawScale = maps.gatherChannels(channel::kScale, 3);
    std::vector<double> opacities = maps.gatherChannels(channel::kOpacity, 1);
    for (double &o : opacities)
        o = activateOpacity(o);
    const double regPos = regPosition(rawPos);
    const double regScl = regScale(rawScale);
    const double regOpac = settings.opacityRegEnabled ? regOpacity(opacities) : 0.0;

    LossWeights effective = settings.weights;
    if (!settings.opacityRegEnabled)
        effective.lambdaO = 0.0;
    if (!settings.uvTvEnabled)
        effective.lambdaUv = 0.0;
    result.loss = totalGeneratorLoss(settings.photometricWeight * result.photometricMse, regPos,
                                     regScl, regOpac, uvTv, effective);

    if (withGradient) {
        result.gradient = assembleGaussiansBackward(maps, grid, act, splatGrad);
        std::vector<double> gPos(rawPos.size(), 0.0), gScale(rawScale.size(), 0.0),
            gOpac(opacities.size(), 0.0);
        meanSquareGrad(rawPos, gPos, effective.lambdaP);
        meanSquareGrad(rawScale, gScale, effective.lambdaS);
        if (effective.lambdaO > 0.0)
            regOpacityGrad(opacities, gOpac, effective.lambdaO);
        auto data = result.gradient.data();
        const auto raw = maps.data();
        for (size_t t = 0; t < maps.texelCount(); ++t) {
            double *g = &data[t * channel::kCount];
            for (int c = 0; c < 3; ++c) {
                g[channel::kPosition + c] += gPos[t * 3 + c];
                g[channel::kScale + c] += gScale[t * 3 + c];
            }
            g[channel::kOpacity] +=
                gOpac[t] * activateOpacityDerivative(raw[t * channel::kCount + channel::kOpacity]);
        }
    }
    return result;
}

UvGrid
growDensity(const UvChartIndex &index, const UvGrid &grid, int newResolution) {
    if (newResolution <= grid.resolution)
        throw Error(ErrorKind::InvalidConfig, "grown UV resolution must exceed the current one");
    return sampleUvGrid(index, newResolution);
}

namespace {

[[noreturn]] void
nonFinite(const std::string &what, int64_t step) {
    throw Error(ErrorKind::NonFiniteLoss,
                "step " + std::to_string(step) + ": first non-finite quantity is " + what);
}

void
checkFinite(const ObjectiveResult &r, int64_t step) {
    const LossBreakdown &l = r.loss;
    if (!std::isfinite(r.photometricMse))
        nonFinite("photometric loss", step);
    if (!std::isfinite(l.regPos))
        nonFinite("reg_pos", step);
    if (!std::isfinite(l.regScale))
        nonFinite("reg_scale", step);
    if (!std::isfinite(l.regOpac))
        nonFinite("reg_opac", step);
    if (!std::isfinite(l.uvTv))
        nonFinite("uv_tv", step);
    if (!std::isfinite(l.total))
        nonFinite("total loss", step);
    if (!r.gradient.allFinite())
        nonFinite("gradient of the raw maps", step);
}

} // namespace

FitResult
fitMaps(const TargetSet &targets, const UvChartIndex &index, const ActivationConfig &act,
        const FitConfig &cfg, std::optional<AttributeMaps> init, const FitObserver &observer) {
    targets.validate();
    act.validate();
    cfg.validate();

    FitResult out;
    if (init) {
        if (!init->allFinite())
            throw Error(ErrorKind::NonFiniteLoss, "initial maps contain non-finite values");
        out.maps = std::move(*init);
    } else {
        out.maps = AttributeMaps(cfg.mapResolution, cfg.mapResolution, 0.0);
        if (cfg.initNoise > 0.0) {
            std::mt19937_64 rng(cfg.seed);
            std::normal_distribution<double> noise(0.0, cfg.initNoise);
            for (double &v : out.maps.data())
                v = noise(rng);
        }
    }
    out.grid = sampleUvGrid(index, cfg.uvResolution);
    out.optimizer.reset(out.maps.size());
    out.history.reserve(size_t(cfg.iterations));

    const int stagedFrom = cfg.stagedStart();
    size_t nextGrow = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        while (nextGrow < cfg.growSchedule.size() && cfg.growSchedule[nextGrow].first == it) {
            out.grid = growDensity(index, out.grid, cfg.growSchedule[nextGrow].second);
            out.optimizer.reset(out.maps.size());
            ++nextGrow;
        }
        ObjectiveSettings settings;
        settings.weights = cfg.weights;
        settings.photometricWeight = cfg.photometricWeight;
        settings.opacityRegEnabled = settings.uvTvEnabled = stagedFrom >= 0 && it >= stagedFrom;
        settings.unblendMinAlpha = cfg.unblendMinAlpha;
        settings.render = cfg.render;

        ObjectiveResult r = evaluateObjective(out.maps, out.grid, targets, act, settings, true);
        checkFinite(r, it);
        FitRecord rec{it, r.loss, r.psnr, out.grid.validCount()};
        out.history.push_back(rec);
        if (observer)
            observer(rec);
        adamStep(out.maps.data(), r.gradient.data(), out.optimizer, cfg.adam);
        if (!out.maps.allFinite())
            nonFinite("raw maps after the Adam update", it);
    }
    return out;
}

FitConfig
fitConfigFromJson(const std::string &text) {
    FitConfig cfg;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    std::string field;
    auto get = [&](const nlohmann::json &obj, const char *key, auto &dst) {
        field = key;
        if (obj.contains(key))
            dst = obj.at(key).get<std::decay_t<decltype(dst)>>();
    };
    try {
        get(j, "learning_rate", cfg.adam.learningRate);
        get(j, "adam_beta1", cfg.adam.beta1);
        get(j, "adam_beta2", cfg.adam.beta2);
        get(j, "adam_eps", cfg.adam.eps);
        get(j, "iterations", cfg.iterations);
        get(j, "photometric_weight", cfg.photometricWeight);
        get(j, "seed", cfg.seed);
        get(j, "init_noise", cfg.initNoise);
        get(j, "map_resolution", cfg.mapResolution);
        get(j, "uv_resolution", cfg.uvResolution);
        get(j, "unblend_min_alpha", cfg.unblendMinAlpha);
        get(j, "tile_size", cfg.render.tileSize);
        if (j.contains("loss_weights")) {
            const auto &w = j.at("loss_weights");
            get(w, "lambda_p", cfg.weights.lambdaP);
            get(w, "lambda_s", cfg.weights.lambdaS);
            get(w, "lambda_o", cfg.weights.lambdaO);
            get(w, "lambda_uv", cfg.weights.lambdaUv);
        }
        field = "uv_tv_enabled_from";
        if (j.contains(field) && !j.at(field).is_null())
            cfg.uvTvEnabledFrom = j.at(field).get<int>();
        field = "grow_schedule";
        if (j.contains(field))
            for (const auto &e : j.at(field))
                cfg.growSchedule.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::InvalidConfig, "field '" + field + "': " + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string
fitHistoryJson(const std::vector<FitRecord> &history) {
    nlohmann::json arr = nlohmann::json::array();
    for (const FitRecord &r : history) {
        nlohmann::json rec = nlohmann::json::parse(lossRecordJson(r.step, r.loss));
        rec["psnr"] = std::isfinite(r.psnr) ? nlohmann::json(r.psnr) : nlohmann::json("inf");
        rec["gaussian_count"] = r.gaussianCount;
        arr.push_back(rec);
    }
    return arr.dump(1);
}

} // namespace uvsplat
