#include "sml/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sml/errors.hpp"
#include "sml/rng.hpp"

namespace fs = std::filesystem;

namespace sml {

ShapeKind shape_from_string(const std::string& s) {
    if (s == "square") return ShapeKind::Square;
    if (s == "circle") return ShapeKind::Circle;
    if (s == "triangle") return ShapeKind::Triangle;
    if (s == "cross") return ShapeKind::Cross;
    if (s == "bar") return ShapeKind::Bar;
    throw ConfigError("unknown shape: " + s);
}

HueKind hue_from_string(const std::string& s) {
    if (s == "red") return HueKind::Red;
    if (s == "green") return HueKind::Green;
    if (s == "blue") return HueKind::Blue;
    if (s == "yellow") return HueKind::Yellow;
    throw ConfigError("unknown hue: " + s);
}

std::string shape_to_string(ShapeKind s) {
    switch (s) {
        case ShapeKind::Square: return "square";
        case ShapeKind::Circle: return "circle";
        case ShapeKind::Triangle: return "triangle";
        case ShapeKind::Cross: return "cross";
        case ShapeKind::Bar: return "bar";
    }
    return "square";
}

std::string hue_to_string(HueKind h) {
    switch (h) {
        case HueKind::Red: return "red";
        case HueKind::Green: return "green";
        case HueKind::Blue: return "blue";
        case HueKind::Yellow: return "yellow";
    }
    return "red";
}

std::vector<SynthClass> SynthConfig::default_classes() {
    std::vector<SynthClass> out;
    for (ShapeKind s : {ShapeKind::Square, ShapeKind::Circle, ShapeKind::Triangle,
                        ShapeKind::Cross, ShapeKind::Bar})
        for (HueKind h : {HueKind::Red, HueKind::Green, HueKind::Blue, HueKind::Yellow})
            out.push_back({s, h});
    return out;
}

void SynthConfig::validate() const {
    if (image_size < 16) throw ConfigError("image_size must be >= 16");
    if (images_per_class < 1) throw ConfigError("images_per_class must be >= 1");
    if (folds < 1) throw ConfigError("folds must be >= 1");
    if (classes.size() < static_cast<std::size_t>(2 * folds))
        throw ConfigError("need at least 2 classes per fold");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
}

namespace {

std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

bool hue_channel(HueKind h, int c) {
    switch (h) {
        case HueKind::Red: return c == 0;
        case HueKind::Green: return c == 1;
        case HueKind::Blue: return c == 2;
        case HueKind::Yellow: return c == 0 || c == 1;
    }
    return false;
}

// Rasterizes one shape into `mask` with value class_id. The caller guarantees
// the shape fits: i0/j0 are top-left, s the scale.
void rasterize(SegmentationMask& mask, ShapeKind kind, int class_id, int i0, int j0, int s,
               bool flip) {
    auto put = [&](int i, int j) { mask.at(i, j) = static_cast<std::uint8_t>(class_id); };
    const int t = std::max(2, s / 3);
    switch (kind) {
        case ShapeKind::Square:
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j) put(i0 + i, j0 + j);
            break;
        case ShapeKind::Circle: {
            const double r = s / 2.0;
            const double ci = i0 + r - 0.5, cj = j0 + r - 0.5;
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j) {
                    double di = i0 + i - ci, dj = j0 + j - cj;
                    if (di * di + dj * dj <= r * r) put(i0 + i, j0 + j);
                }
            break;
        }
        case ShapeKind::Triangle:
            for (int i = 0; i < s; ++i) {
                const double hw = (s - 1) > 0 ? 0.5 * s * i / (s - 1) : 0.5;
                const int cj = j0 + s / 2;
                for (int j = 0; j < s; ++j)
                    if (std::abs(j0 + j - cj) <= hw) put(i0 + i, j0 + j);
            }
            break;
        case ShapeKind::Cross: {
            const int ci = i0 + s / 2, cj = j0 + s / 2;
            for (int i = 0; i < s; ++i)
                for (int j = 0; j < s; ++j) {
                    bool in_v = std::abs(j0 + j - cj) <= t / 2;
                    bool in_h = std::abs(i0 + i - ci) <= t / 2;
                    if (in_v || in_h) put(i0 + i, j0 + j);
                }
            break;
        }
        case ShapeKind::Bar:
            for (int i = 0; i < (flip ? t : s); ++i)
                for (int j = 0; j < (flip ? s : t); ++j) put(i0 + i, j0 + j);
            break;
    }
}

} // namespace

SynthSample render_sample(const SynthConfig& cfg, int class_index, int img_index,
                          bool with_object) {
    cfg.validate();
    if (class_index < 0 || class_index >= static_cast<int>(cfg.classes.size()))
        throw ContractError("class index out of range");
    const SynthClass& cls = cfg.classes[class_index];
    const int n = cfg.image_size;
    const int class_id = class_index + 1;

    Rng rng(substream_seed(cfg.seed, "image",
                           static_cast<std::uint64_t>(class_index) * 1000003ULL +
                               static_cast<std::uint64_t>(img_index)));

    SynthSample sample;
    sample.image.h = sample.image.w = n;
    sample.image.px.assign(static_cast<std::size_t>(n) * n * 3, 0);
    sample.mask.h = sample.mask.w = n;
    sample.mask.v.assign(static_cast<std::size_t>(n) * n, 0);

    // Background layer: per-channel base + directional gradient, plus a few
    // hue-tinted soft patches that look like other classes' colors (so pure
    // "objectness" does not segment), then pixel noise.
    double base[3], grad[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(60.0, 150.0);
        grad[c] = rng.uniform(-30.0, 30.0);
    }
    const bool vertical = rng.below(2) == 0;
    std::vector<double> layer(static_cast<std::size_t>(n) * n * 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int c = 0; c < 3; ++c) {
                double along = static_cast<double>(vertical ? i : j) / n;
                layer[(static_cast<std::size_t>(i) * n + j) * 3 + c] =
                    base[c] + grad[c] * along;
            }
    const int patches = 2 + static_cast<int>(rng.below(3));
    for (int p = 0; p < patches; ++p) {
        const HueKind tint = static_cast<HueKind>(rng.below(4));
        const double boost = rng.uniform(35.0, 85.0);
        const double radius = rng.uniform(n / 10.0, n / 4.0);
        const double ci = rng.uniform(0.0, n);
        const double cj = rng.uniform(0.0, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
                if (d2 > radius * radius) continue;
                const double falloff = 1.0 - std::sqrt(d2) / radius;
                for (int c = 0; c < 3; ++c) {
                    const double delta = hue_channel(tint, c) ? boost : -0.4 * boost;
                    layer[(static_cast<std::size_t>(i) * n + j) * 3 + c] += delta * falloff;
                }
            }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int c = 0; c < 3; ++c)
                sample.image.at(i, j, c) =
                    clamp_byte(layer[(static_cast<std::size_t>(i) * n + j) * 3 + c] +
                               rng.normal() * cfg.noise_sigma);
    if (!with_object) return sample;

    // Geometry, re-rolled if the footprint leaves the allowed area band.
    const double area = static_cast<double>(n) * n;
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::fill(sample.mask.v.begin(), sample.mask.v.end(), 0);
        const int s = n / 4 + static_cast<int>(rng.below(static_cast<std::uint32_t>(n / 4 + 1)));
        const int i0 = 1 + static_cast<int>(rng.below(static_cast<std::uint32_t>(n - s - 1)));
        const int j0 = 1 + static_cast<int>(rng.below(static_cast<std::uint32_t>(n - s - 1)));
        const bool flip = rng.below(2) == 0;
        rasterize(sample.mask, cls.shape, class_id, i0, j0, s, flip);
        const double frac = static_cast<double>(sample.mask.count(class_id)) / area;
        if (frac >= 0.01 && frac <= 0.60) break;
        if (attempt == 15)
            throw ContractError("could not place object within the area band for class " +
                                cls.name());
    }

    // Object fill: hue channels high, others low, with pixel noise. The color
    // ranges overlap the background's on purpose; telling the object apart
    // takes the relation between channels, not a brightness threshold. Any fg
    // pixel that lands exactly on the background layer's value is nudged by
    // one step so the rendered mask stays exact.
    double fill[3];
    for (int c = 0; c < 3; ++c)
        fill[c] = hue_channel(cls.hue, c) ? rng.uniform(170.0, 245.0) : rng.uniform(20.0, 100.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (sample.mask.at(i, j) == 0) continue;
            std::uint8_t before[3] = {sample.image.at(i, j, 0), sample.image.at(i, j, 1),
                                      sample.image.at(i, j, 2)};
            for (int c = 0; c < 3; ++c)
                sample.image.at(i, j, c) = clamp_byte(fill[c] + rng.normal() * cfg.noise_sigma);
            if (sample.image.at(i, j, 0) == before[0] && sample.image.at(i, j, 1) == before[1] &&
                sample.image.at(i, j, 2) == before[2]) {
                std::uint8_t& px = sample.image.at(i, j, 0);
                px = px < 255 ? px + 1 : px - 1;
            }
        }
    return sample;
}

DatasetIndex generate(const SynthConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const fs::path base(out_dir);
    std::error_code ec;
    fs::create_directories(base / "images", ec);
    fs::create_directories(base / "masks", ec);
    if (ec) throw IoError("cannot create output directories under " + out_dir);

    std::ofstream manifest(base / "manifest.txt");
    std::ofstream classes(base / "classes.txt");
    if (!manifest || !classes) throw IoError("cannot write dataset metadata under " + out_dir);

    for (std::size_t ci = 0; ci < cfg.classes.size(); ++ci) {
        const int class_id = static_cast<int>(ci) + 1;
        // Diagonal assignment: consecutive classes land in different folds and
        // so do classes that share a block of the list (e.g. one shape in the
        // default grid), keeping every fold visually mixed.
        const int fold = static_cast<int>(ci + ci / cfg.folds) % cfg.folds;
        classes << class_id << " " << cfg.classes[ci].name() << "\n";
        for (int k = 0; k < cfg.images_per_class; ++k) {
            SynthSample s = render_sample(cfg, static_cast<int>(ci), k);
            const std::string stem = "cls" + std::to_string(class_id) + "_" + std::to_string(k);
            const std::string img_rel = "images/" + stem + ".ppm";
            const std::string mask_rel = "masks/" + stem + ".pgm";
            write_ppm((base / img_rel).string(), s.image);
            write_pgm((base / mask_rel).string(), mask_to_gray(s.mask));
            manifest << img_rel << " " << mask_rel << " " << class_id << " " << fold << "\n";
        }
    }
    manifest.close();
    classes.close();
    if (!manifest || !classes) throw IoError("write failed under " + out_dir);

    save_embeddings(synth_attributes(cfg), (base / "attributes.txt").string());
    return DatasetIndex::load(out_dir);
}

AttributeTable synth_attributes(const SynthConfig& cfg) {
    cfg.validate();
    // Layout: [0,5) shape one-hot, [5,9) hue one-hot, [9,15) noise, 15 reserved.
    // The hue block outweighs the shape block the way rendered appearance
    // does, so attribute distances track visual distances.
    constexpr int kDa = 16;
    constexpr double kShapeScale = 0.55;
    constexpr double kNoiseScale = 0.75;
    constexpr double kBackgroundMix = 0.5;

    AttributeTable table(kDa);
    std::vector<double> mean(kDa, 0.0);
    for (std::size_t ci = 0; ci < cfg.classes.size(); ++ci) {
        Rng rng(substream_seed(cfg.seed, "attr", ci));
        std::vector<double> v(kDa, 0.0);
        v[static_cast<int>(cfg.classes[ci].shape)] = kShapeScale;
        v[5 + static_cast<int>(cfg.classes[ci].hue)] = 1.0;
        for (int j = 9; j < 15; ++j) v[j] = rng.uniform(-kNoiseScale, kNoiseScale);
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (int j = 0; j < kDa; ++j) mean[j] += v[j] / norm;
        table.insert(cfg.classes[ci].name(), std::move(v));
    }

    double mnorm = 0.0;
    for (double x : mean) mnorm += x * x;
    mnorm = std::sqrt(mnorm);
    std::vector<double> bg(kDa, 0.0);
    for (int j = 0; j < 15; ++j) bg[j] = kBackgroundMix * mean[j] / mnorm;
    bg[15] = 1.0;
    table.insert(kBackgroundToken, std::move(bg));
    return table;
}

} // namespace sml
