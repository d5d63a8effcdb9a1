#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sml/attributes.hpp"
#include "sml/episodes.hpp"
#include "sml/pnm.hpp"

namespace sml {

enum class ShapeKind { Square, Circle, Triangle, Cross, Bar };
enum class HueKind { Red, Green, Blue, Yellow };

ShapeKind shape_from_string(const std::string& s);
HueKind hue_from_string(const std::string& s);
std::string shape_to_string(ShapeKind s);
std::string hue_to_string(HueKind h);

struct SynthClass {
    ShapeKind shape;
    HueKind hue;
    std::string name() const { return shape_to_string(shape) + "_" + hue_to_string(hue); }
};

/// Desk-scale dataset recipe: one object per image, class appearance fully
/// determined by (shape, hue family), textured background, Gaussian pixel
/// noise. Class ids are 1-based positions in `classes`; folds are assigned
/// round-robin.
struct SynthConfig {
    int image_size = 32;
    int images_per_class = 60;
    int folds = 4;
    double noise_sigma = 8.0;
    std::uint64_t seed = 1;
    std::vector<SynthClass> classes = default_classes();

    static std::vector<SynthClass> default_classes(); // all 20 shape x hue combos

    void validate() const;
};

struct SynthSample {
    RgbImage image;
    SegmentationMask mask;
};

/// Renders one sample deterministically from (seed, class, index). When
/// with_object is false only the background layer is produced; object pixels
/// always differ from that layer by construction (the object's hue channels
/// live above 160 while background channels stay below 140).
SynthSample render_sample(const SynthConfig& cfg, int class_index, int img_index,
                          bool with_object = true);

/// Writes images/, masks/, manifest.txt, classes.txt and attributes.txt under
/// out_dir, then loads the result back as a DatasetIndex. Byte-identical for a
/// fixed config.
DatasetIndex generate(const SynthConfig& cfg, const std::string& out_dir);

/// Synthetic class-name attribute table (d_a = 16): shape one-hot block, hue
/// one-hot block, small seeded noise, one coordinate reserved for the
/// background token. The background vector mixes that reserved direction with
/// the mean class direction so it correlates mildly but strictly positively
/// with every class, the way generic word embeddings do.
AttributeTable synth_attributes(const SynthConfig& cfg);

} // namespace sml
