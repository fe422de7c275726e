// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "ccnn/box.hpp"
#include "ccnn/config.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

enum class ShapeKind { Circle, Square, Triangle, Cross, Bar, Ring };

inline constexpr int kNumShapeKinds = 6;

inline const char* shape_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::Circle: return "circle";
        case ShapeKind::Square: return "square";
        case ShapeKind::Triangle: return "triangle";
        case ShapeKind::Cross: return "cross";
        case ShapeKind::Bar: return "bar";
        case ShapeKind::Ring: return "ring";
    }
    return "circle";
}

inline ShapeKind shape_from_name(const std::string& s) {
    for (int i = 0; i < kNumShapeKinds; ++i)
        if (s == shape_name(static_cast<ShapeKind>(i))) return static_cast<ShapeKind>(i);
    throw ContractError("unknown shape kind '" + s + "'");
}

/// Class design for the synthetic co-occurrence benchmark. Classes are
/// defined by which shapes must jointly appear; any shape that appears in
/// some class's required set must appear in at least two, so no single
/// object identifies a class. Shapes outside every required set act as
/// pure distractors.
struct SceneSpec {
    int image_size = 64;
    int num_classes = 4;
    std::vector<std::vector<ShapeKind>> required = {
        {ShapeKind::Circle, ShapeKind::Square},
        {ShapeKind::Circle, ShapeKind::Triangle},
        {ShapeKind::Square, ShapeKind::Cross},
        {ShapeKind::Triangle, ShapeKind::Cross}};
    int distractor_min = 3;
    int distractor_max = 5;
    double noise = 0.03;
    // Scale ranges overlap on purpose: box area must not reveal which
    // shapes are class-defining, so their rank among size-ordered proposals
    // varies from scene to scene.
    double required_scale_min = 0.22;   // fraction of image side
    double required_scale_max = 0.38;
    double distractor_scale_min = 0.10;
    double distractor_scale_max = 0.30;
    // Intensity separates the class pair from clutter, but only relative to
    // the scene: a per-scene lift drawn from [0, brightness_jitter] shifts
    // every object, so absolute brightness bands overlap across scenes while
    // the pair stays brightest within its own scene. Telling clutter from
    // class evidence therefore takes comparing boxes, not reading one.
    double required_intensity_min = 0.62;
    double required_intensity_max = 0.70;
    double distractor_intensity_min = 0.35;
    double distractor_intensity_max = 0.55;
    double brightness_jitter = 0.25;
    uint64_t seed = 0;

    void validate() const {
        if (image_size < 16) throw ContractError("scene spec: image_size must be >= 16");
        if (num_classes < 2) throw ContractError("scene spec: need >= 2 classes");
        if (static_cast<int>(required.size()) != num_classes)
            throw ContractError("scene spec: " + std::to_string(required.size()) +
                                " required sets for " + std::to_string(num_classes) + " classes");
        std::set<std::vector<ShapeKind>> distinct;
        int appearances[kNumShapeKinds] = {};
        for (const auto& set : required) {
            if (set.empty()) throw ContractError("scene spec: empty required set");
            std::vector<ShapeKind> sorted = set;
            std::sort(sorted.begin(), sorted.end());
            if (!distinct.insert(sorted).second)
                throw ContractError("scene spec: duplicate required sets");
            for (ShapeKind k : set) ++appearances[static_cast<int>(k)];
        }
        for (int k = 0; k < kNumShapeKinds; ++k)
            if (appearances[k] == 1)
                throw ContractError(std::string("scene spec: shape '") +
                                    shape_name(static_cast<ShapeKind>(k)) +
                                    "' appears in only one class's required set, so its presence "
                                    "alone would identify the class");
        if (distractor_min < 0 || distractor_max < distractor_min)
            throw ContractError("scene spec: bad distractor count range");
        if (noise < 0 || noise >= 1) throw ContractError("scene spec: noise must be in [0,1)");
        auto check_scale = [](double lo, double hi, const char* what) {
            if (!(lo > 0 && lo <= hi && hi < 1))
                throw ContractError(std::string("scene spec: bad ") + what + " scale range");
        };
        check_scale(required_scale_min, required_scale_max, "required");
        check_scale(distractor_scale_min, distractor_scale_max, "distractor");
        auto check_intensity = [](double lo, double hi, const char* what) {
            if (!(lo > 0 && lo <= hi && hi <= 1))
                throw ContractError(std::string("scene spec: bad ") + what + " intensity range");
        };
        check_intensity(required_intensity_min, required_intensity_max, "required");
        check_intensity(distractor_intensity_min, distractor_intensity_max, "distractor");
        if (brightness_jitter < 0)
            throw ContractError("scene spec: brightness_jitter must be >= 0");
        const double peak = std::max(required_intensity_max, distractor_intensity_max);
        if (peak + brightness_jitter > 1.0)
            throw ContractError("scene spec: intensity max + brightness_jitter exceeds 1");
    }

    KvConfig to_config() const {
        KvConfig c;
        c.set_long("image_size", image_size);
        c.set_long("num_classes", num_classes);
        for (int i = 0; i < num_classes; ++i) {
            std::string names;
            for (ShapeKind k : required[static_cast<std::size_t>(i)]) {
                if (!names.empty()) names += ",";
                names += shape_name(k);
            }
            c.set("class" + std::to_string(i), names);
        }
        c.set_long("distractor_min", distractor_min);
        c.set_long("distractor_max", distractor_max);
        c.set_double("noise", noise);
        c.set_double("required_scale_min", required_scale_min);
        c.set_double("required_scale_max", required_scale_max);
        c.set_double("distractor_scale_min", distractor_scale_min);
        c.set_double("distractor_scale_max", distractor_scale_max);
        c.set_double("required_intensity_min", required_intensity_min);
        c.set_double("required_intensity_max", required_intensity_max);
        c.set_double("distractor_intensity_min", distractor_intensity_min);
        c.set_double("distractor_intensity_max", distractor_intensity_max);
        c.set_double("brightness_jitter", brightness_jitter);
        c.set_long("seed", static_cast<long>(seed));
        return c;
    }

    static SceneSpec from_config(const KvConfig& c) {
        SceneSpec s;
        s.image_size = static_cast<int>(c.get_long("image_size", s.image_size));
        s.num_classes = static_cast<int>(c.get_long("num_classes", s.num_classes));
        s.required.clear();
        for (int i = 0; i < s.num_classes; ++i) {
            const std::string names = c.get_string("class" + std::to_string(i), "");
            if (names.empty())
                throw ContractError("scene spec: missing class" + std::to_string(i) +
                                    " required set");
            std::vector<ShapeKind> set;
            std::size_t start = 0;
            while (start <= names.size()) {
                std::size_t comma = names.find(',', start);
                if (comma == std::string::npos) comma = names.size();
                set.push_back(shape_from_name(names.substr(start, comma - start)));
                start = comma + 1;
            }
            s.required.push_back(std::move(set));
        }
        s.distractor_min = static_cast<int>(c.get_long("distractor_min", s.distractor_min));
        s.distractor_max = static_cast<int>(c.get_long("distractor_max", s.distractor_max));
        s.noise = c.get_double("noise", s.noise);
        s.required_scale_min = c.get_double("required_scale_min", s.required_scale_min);
        s.required_scale_max = c.get_double("required_scale_max", s.required_scale_max);
        s.distractor_scale_min = c.get_double("distractor_scale_min", s.distractor_scale_min);
        s.distractor_scale_max = c.get_double("distractor_scale_max", s.distractor_scale_max);
        s.required_intensity_min =
            c.get_double("required_intensity_min", s.required_intensity_min);
        s.required_intensity_max =
            c.get_double("required_intensity_max", s.required_intensity_max);
        s.distractor_intensity_min =
            c.get_double("distractor_intensity_min", s.distractor_intensity_min);
        s.distractor_intensity_max =
            c.get_double("distractor_intensity_max", s.distractor_intensity_max);
        s.brightness_jitter = c.get_double("brightness_jitter", s.brightness_jitter);
        s.seed = static_cast<uint64_t>(c.get_long("seed", static_cast<long>(s.seed)));
        s.validate();
        return s;
    }
};

struct SceneSample {
    Tensor<float> image;  // [1 x S x S], values in [0,1]
    int class_id = 0;
    std::vector<Box> gt_boxes;          // tight boxes of all rendered shapes
    std::vector<ShapeKind> gt_kinds;    // in-memory only; never shown to the model
};

namespace detail {

inline bool inside_shape(ShapeKind kind, double dx, double dy, double r) {
    switch (kind) {
        case ShapeKind::Circle:
            return dx * dx + dy * dy <= r * r;
        case ShapeKind::Square:
            return std::abs(dx) <= r && std::abs(dy) <= r;
        case ShapeKind::Triangle:
            // Upward isoceles triangle: apex (0,-r), base y = +r.
            return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) * 0.5;
        case ShapeKind::Cross:
            return (std::abs(dx) <= r / 3 && std::abs(dy) <= r) ||
                   (std::abs(dy) <= r / 3 && std::abs(dx) <= r);
        case ShapeKind::Bar:
            return std::abs(dx) <= r && std::abs(dy) <= r / 3;
        case ShapeKind::Ring: {
            const double d2 = dx * dx + dy * dy;
            const double ri = 0.55 * r;
            return d2 <= r * r && d2 >= ri * ri;
        }
    }
    return false;
}

/// Max-blends the shape into the image and returns its tight pixel box
/// (half-open). Pixel centers at (x+0.5, y+0.5).
inline Box draw_shape(Tensor<float>& image, ShapeKind kind, double cx, double cy, double size,
                      float intensity) {
    const int s = image.dim(1);
    const double r = size / 2;
    const int x_lo = std::max(0, static_cast<int>(std::floor(cx - r - 1)));
    const int x_hi = std::min(s - 1, static_cast<int>(std::ceil(cx + r + 1)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(cy - r - 1)));
    const int y_hi = std::min(s - 1, static_cast<int>(std::ceil(cy + r + 1)));
    int min_x = s, max_x = -1, min_y = s, max_y = -1;
    float* v = image.data();
    for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x)
            if (inside_shape(kind, x + 0.5 - cx, y + 0.5 - cy, r)) {
                float& px = v[static_cast<std::size_t>(y) * s + x];
                px = std::max(px, intensity);
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
    if (max_x < 0) {
        // Shape too small to cover any pixel center; force one pixel so the
        // ground-truth box stays non-degenerate.
        const int x = std::clamp(static_cast<int>(cx), 0, s - 1);
        const int y = std::clamp(static_cast<int>(cy), 0, s - 1);
        float& px = v[static_cast<std::size_t>(y) * s + x];
        px = std::max(px, intensity);
        min_x = max_x = x;
        min_y = max_y = y;
    }
    Box b;
    b.x0 = min_x;
    b.y0 = min_y;
    b.x1 = max_x + 1;
    b.y1 = max_y + 1;
    return b;
}

}  // namespace detail

/// Renders one scene: the class's required shapes (brightest in scene,
/// drawn on top), a per-sample random count of dimmer distractors from the
/// full vocabulary, a scene-wide brightness lift, and additive background
/// noise. Deterministic in (spec, class_id, seed).
inline SceneSample generate_scene(const SceneSpec& spec, int class_id, uint64_t rng_seed) {
    spec.validate();
    if (class_id < 0 || class_id >= spec.num_classes)
        throw ContractError("generate_scene: class_id " + std::to_string(class_id) +
                            " outside [0, " + std::to_string(spec.num_classes) + ")");
    Rng rng = Rng::child_of(rng_seed, "scene");
    const int s = spec.image_size;

    SceneSample out;
    out.image = Tensor<float>::zeros({1, s, s});
    out.class_id = class_id;

    auto place = [&](double scale_min, double scale_max) {
        const double size = rng.uniform(scale_min, scale_max) * s;
        const double r = size / 2;
        const double cx = rng.uniform(r, s - r);
        const double cy = rng.uniform(r, s - r);
        return std::tuple<double, double, double>(cx, cy, size);
    };

    struct Placed {
        ShapeKind kind;
        double cx, cy, size;
        float intensity;
    };
    std::vector<Placed> order;

    // One lift per scene; every object's intensity rides on it.
    const double lift = rng.uniform(0.0, spec.brightness_jitter);

    // Distractors first so required shapes stay visible on top.
    const int n_distract =
        static_cast<int>(rng.uniform_int(static_cast<long>(spec.distractor_min),
                                         static_cast<long>(spec.distractor_max)));
    for (int i = 0; i < n_distract; ++i) {
        const auto kind = static_cast<ShapeKind>(
            rng.uniform_int(static_cast<uint64_t>(kNumShapeKinds)));
        auto [cx, cy, size] = place(spec.distractor_scale_min, spec.distractor_scale_max);
        order.push_back({kind, cx, cy, size,
                         static_cast<float>(lift + rng.uniform(spec.distractor_intensity_min,
                                                               spec.distractor_intensity_max))});
    }

    // Required shapes, rejecting placements that bury one under another.
    std::vector<Box> placed_req;
    for (ShapeKind kind : spec.required[static_cast<std::size_t>(class_id)]) {
        double cx = 0, cy = 0, size = 0;
        for (int attempt = 0; attempt < 50; ++attempt) {
            std::tie(cx, cy, size) = place(spec.required_scale_min, spec.required_scale_max);
            Box candidate{cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2, 0};
            bool clear = true;
            for (const Box& prev : placed_req)
                if (iou(candidate, prev) > 0.25) clear = false;
            if (clear) break;
        }
        placed_req.push_back({cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2, 0});
        order.push_back({kind, cx, cy, size,
                         static_cast<float>(lift + rng.uniform(spec.required_intensity_min,
                                                               spec.required_intensity_max))});
    }

    for (const Placed& p : order) {
        out.gt_boxes.push_back(detail::draw_shape(out.image, p.kind, p.cx, p.cy, p.size,
                                                  p.intensity));
        out.gt_kinds.push_back(p.kind);
    }

    if (spec.noise > 0) {
        float* v = out.image.data();
        for (long i = 0; i < out.image.size(); ++i)
            v[i] = std::min(1.0f, v[i] + static_cast<float>(rng.uniform(0.0, spec.noise)));
    }
    return out;
}

/// Best accuracy of any classifier that sees only whether a single shape
/// kind is present, brute-forced over the class/shape requirement table
/// (balanced classes assumed). The default pair design yields exactly 0.5.
inline double single_object_ceiling(const SceneSpec& spec) {
    spec.validate();
    const int k_classes = spec.num_classes;
    auto required_in = [&](int c, ShapeKind k) {
        const auto& set = spec.required[static_cast<std::size_t>(c)];
        return std::find(set.begin(), set.end(), k) != set.end();
    };
    double best = 0;
    for (int k = 0; k < kNumShapeKinds; ++k)
        for (int c1 = 0; c1 < k_classes; ++c1)
            for (int c0 = 0; c0 < k_classes; ++c0) {
                int correct = 0;
                for (int c = 0; c < k_classes; ++c) {
                    const int predicted =
                        required_in(c, static_cast<ShapeKind>(k)) ? c1 : c0;
                    if (predicted == c) ++correct;
                }
                best = std::max(best, static_cast<double>(correct) / k_classes);
            }
    return best;
}

}  // namespace ccnn
