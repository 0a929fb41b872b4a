#include "sarlv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "sarlv/classes.hpp"
#include "sarlv/rng.hpp"

namespace sarlv {

namespace {

std::vector<Primitive> rect(double cx, double cy, double w, double h, double intensity) {
    return {{PrimitiveKind::rectangle, cx, cy, w, h, 0.0, intensity}};
}

void add(std::vector<Primitive>& v, const std::vector<Primitive>& more) {
    v.insert(v.end(), more.begin(), more.end());
}

Primitive ellipse(double cx, double cy, double rx, double ry, double intensity) {
    return {PrimitiveKind::ellipse, cx, cy, rx, ry, 0.0, intensity};
}

Primitive segment(double x0, double y0, double x1, double y1, double thickness,
                  double intensity) {
    return {PrimitiveKind::segment, x0, y0, x1, y1, thickness, intensity};
}

std::map<std::string, std::vector<Primitive>> build_silhouettes() {
    std::map<std::string, std::vector<Primitive>> s;

    {  // long hull, rear turret, forward gun
        auto v = rect(0, 2, 16, 34, 0.55);
        v.push_back(ellipse(0, 4, 7, 9, 0.85));
        v.push_back(segment(0, -4, 0, -30, 3.0, 0.95));
        s["2S1"] = v;
    }
    {  // compact hull, small turret, thin gun
        auto v = rect(0, 1, 13, 26, 0.50);
        v.push_back(ellipse(0, -10, 6.5, 5, 0.62));
        v.push_back(ellipse(0, -1, 4.5, 4.5, 0.9));
        v.push_back(segment(0, -5, 0, -20, 1.8, 0.9));
        s["BMP-2"] = v;
    }
    {  // rounded boat hull on four wheels
        auto v = std::vector<Primitive>{ellipse(0, 0, 9, 17, 0.55)};
        for (double wy : {-9.0, 9.0}) {
            v.push_back(ellipse(-7, wy, 3, 4, 0.9));
            v.push_back(ellipse(7, wy, 3, 4, 0.9));
        }
        v.push_back(ellipse(0, -2, 4, 4, 0.95));
        s["BRDM-2"] = v;
    }
    {  // long hull, eight wheels, forward turret
        auto v = rect(0, 0, 12, 32, 0.50);
        for (double wy : {-12.0, -4.0, 4.0, 12.0}) {
            v.push_back(ellipse(-7, wy, 2.8, 3.2, 0.9));
            v.push_back(ellipse(7, wy, 2.8, 3.2, 0.9));
        }
        v.push_back(ellipse(0, -6, 3.5, 3.5, 0.95));
        s["BTR-60"] = v;
    }
    {  // similar hull, wider wheel spacing, rear engine block
        auto v = rect(0, 0, 13, 30, 0.45);
        for (double wy : {-11.0, -5.0, 5.0, 11.0}) {
            v.push_back(ellipse(-7.5, wy, 3.1, 3.3, 0.82));
            v.push_back(ellipse(7.5, wy, 3.1, 3.3, 0.82));
        }
        v.push_back(ellipse(0, -7, 4, 4, 0.9));
        add(v, rect(0, 12, 10, 5, 0.72));
        s["BTR-70"] = v;
    }
    {  // bulldozer: wide blade up front, exposed tracks
        auto v = rect(0, 3, 11, 18, 0.6);
        add(v, rect(0, -12, 24, 4, 0.95));
        add(v, rect(-8, 3, 4, 20, 0.8));
        add(v, rect(8, 3, 4, 20, 0.8));
        add(v, rect(0, 14, 8, 3, 0.7));
        s["D7"] = v;
    }
    {  // calibration target: cylinder plus corner reflector
        auto v = std::vector<Primitive>{ellipse(-7, -7, 7, 7, 0.95)};
        add(v, rect(6, 5, 12, 12, 0.7));
        v.push_back(segment(-3, 11, 11, 11, 2.0, 1.0));
        v.push_back(segment(11, 11, 11, -3, 2.0, 1.0));
        s["SLICY"] = v;
    }
    {  // tank, round turret, long gun
        auto v = rect(0, 3, 15, 30, 0.5);
        v.push_back(ellipse(0, -1, 8, 8, 0.8));
        v.push_back(segment(0, -7, 0, -33, 2.5, 0.95));
        s["T-62"] = v;
    }
    {  // tank with side skirts and a heavier gun
        auto v = rect(0, 3, 16, 32, 0.55);
        add(v, rect(-9, 3, 2.5, 30, 0.78));
        add(v, rect(9, 3, 2.5, 30, 0.78));
        v.push_back(ellipse(0, -1, 7, 7, 0.85));
        v.push_back(segment(0, -7, 0, -36, 3.0, 1.0));
        s["T-72"] = v;
    }
    {  // truck: bright cab, long bed, six wheels
        auto v = rect(0, -10, 12, 10, 0.85);
        add(v, rect(0, 7, 13, 24, 0.5));
        for (double wy : {-12.0, 4.0, 12.0}) {
            v.push_back(ellipse(-7, wy, 2.6, 3.0, 0.9));
            v.push_back(ellipse(7, wy, 2.6, 3.0, 0.9));
        }
        s["ZIL-131"] = v;
    }
    {  // boxy turret, radar dish, four parallel barrels
        auto v = rect(0, 3, 15, 26, 0.5);
        add(v, rect(0, -3, 12, 12, 0.8));
        v.push_back(ellipse(0, 13, 5, 4, 0.95));
        for (double bx : {-4.5, -1.5, 1.5, 4.5}) {
            v.push_back(segment(bx, -9, bx, -24, 1.5, 1.0));
        }
        s["ZSU-23-4"] = v;
    }
    return s;
}

bool hit(const Primitive& p, double u, double v) {
    switch (p.kind) {
        case PrimitiveKind::rectangle:
            return std::fabs(u - p.a) <= p.c / 2.0 && std::fabs(v - p.b) <= p.d / 2.0;
        case PrimitiveKind::ellipse: {
            double du = (u - p.a) / p.c;
            double dv = (v - p.b) / p.d;
            return du * du + dv * dv <= 1.0;
        }
        case PrimitiveKind::segment: {
            double vx = p.c - p.a, vy = p.d - p.b;
            double wx = u - p.a, wy = v - p.b;
            double len2 = vx * vx + vy * vy;
            double t = len2 == 0.0 ? 0.0 : std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0);
            double dx = wx - t * vx, dy = wy - t * vy;
            return dx * dx + dy * dy <= (p.thickness / 2.0) * (p.thickness / 2.0);
        }
    }
    return false;
}

/// Max intensity over the class silhouette at object point (u, v); 0 if none.
double silhouette_intensity(const std::vector<Primitive>& prims, double u, double v) {
    double best = 0.0;
    for (const auto& p : prims) {
        if (p.intensity > best && hit(p, u, v)) best = p.intensity;
    }
    return best;
}

}  // namespace

const std::vector<Primitive>& silhouette_for(const std::string& class_name) {
    static const std::map<std::string, std::vector<Primitive>> table = build_silhouettes();
    auto it = table.find(class_name);
    if (it == table.end()) {
        throw std::invalid_argument("silhouette_for: unknown class \"" + class_name + "\"");
    }
    return it->second;
}

std::int64_t shadow_offset_px(int depression_deg) {
    // proxy target height of 8 px over the ground-range stretch
    double rad = static_cast<double>(depression_deg) * 3.14159265358979323846 / 180.0;
    return std::llround(8.0 / std::tan(rad));
}

GrayImage synth_generate(const std::string& class_name, const SceneParams& scene,
                         const SynthOptions& options) {
    if (!is_known_class(class_name)) {
        throw std::invalid_argument("synth_generate: unknown class \"" + class_name + "\"");
    }
    if (scene.depression_deg != 17 && scene.depression_deg != 15) {
        throw std::invalid_argument("synth_generate: depression angle must be 17 or 15, got " +
                                    std::to_string(scene.depression_deg));
    }
    const auto& prims = silhouette_for(class_name);
    double theta = scene.aspect_deg * 3.14159265358979323846 / 180.0;
    double ct = std::cos(theta), st = std::sin(theta);
    double gain = scene.depression_deg == 15 ? options.gain_15 : options.gain_17;
    std::int64_t shadow_dy = shadow_offset_px(scene.depression_deg);

    GrayImage img = make_image(kCanvasSize, kCanvasSize);
    RngState rng(scene.seed);
    double half = static_cast<double>(kCanvasSize) / 2.0;
    for (std::int64_t y = 0; y < kCanvasSize; ++y) {
        for (std::int64_t x = 0; x < kCanvasSize; ++x) {
            double dx = static_cast<double>(x) + 0.5 - half;
            double dy = static_cast<double>(y) + 0.5 - half;
            // canvas -> object coordinates
            double u = ct * dx + st * dy;
            double v = -st * dx + ct * dy;
            double value = silhouette_intensity(prims, u, v);
            if (value == 0.0) {
                // shadow falls down-range (canvas-down), regardless of aspect
                double sdx = dx;
                double sdy = dy - static_cast<double>(shadow_dy);
                double su = ct * sdx + st * sdy;
                double sv = -st * sdx + ct * sdy;
                value = silhouette_intensity(prims, su, sv) > 0.0 ? kShadowLevel
                                                                  : kBackgroundLevel;
            }
            value *= gain;
            if (options.speckle) value *= rng.exponential(1.0);
            img.at(y, x) = std::clamp(value, 0.0, 1.0);
        }
    }
    return img;
}

}  // namespace sarlv
