#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sarlv/image.hpp"

namespace sarlv {

struct SceneParams {
    int depression_deg = 17;  // 17 = train collection geometry, 15 = test
    double aspect_deg = 0.0;  // [0, 360)
    std::string collection_tag;
    std::uint64_t seed = 0;
};

struct SynthOptions {
    bool speckle = true;
    double gain_17 = 1.0;
    /// Test-side global gain: the stand-in for the cross-collection domain
    /// gap (the two depression sets were gathered separately).
    double gain_15 = 1.10;
};

enum class PrimitiveKind { rectangle, ellipse, segment };

/// Object-space silhouette element. rectangle: center (a,b), width c,
/// height d. ellipse: center (a,b), radii (c,d). segment: endpoints
/// (a,b)-(c,d) with the given thickness. Overlaps resolve by max intensity.
struct Primitive {
    PrimitiveKind kind;
    double a, b, c, d;
    double thickness;
    double intensity;
};

/// Per-class parametric silhouettes (fixture geometry; unique per class).
const std::vector<Primitive>& silhouette_for(const std::string& class_name);

/// Deterministic rendering pipeline on a 128x128 canvas: rasterize the class
/// silhouette rotated by the aspect angle, offset a radar shadow by the
/// depression-dependent amount, apply the depression's global gain, multiply
/// by unit-mean exponential speckle seeded from the scene, clip to [0, 1].
GrayImage synth_generate(const std::string& class_name, const SceneParams& scene,
                         const SynthOptions& options = {});

/// Shadow offset in pixels for a depression angle (proxy height over tan).
std::int64_t shadow_offset_px(int depression_deg);

inline constexpr std::int64_t kCanvasSize = 128;
inline constexpr double kBackgroundLevel = 0.08;
inline constexpr double kShadowLevel = 0.02;

}  // namespace sarlv
