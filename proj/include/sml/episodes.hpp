#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sml/errors.hpp"
#include "sml/pnm.hpp"
#include "sml/rng.hpp"

namespace sml {

enum class MaskProvenance { GroundTruth, Dense, Bbox, Scribble, Predicted };
enum class AnnotationMode { Dense, Bbox, Scribble };

AnnotationMode annotation_from_string(const std::string& s);
std::string annotation_to_string(AnnotationMode m);

/// 2-d grid of class indices, 0 = background.
struct SegmentationMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> v;
    MaskProvenance provenance = MaskProvenance::GroundTruth;

    std::uint8_t& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
    std::uint8_t at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }

    std::size_t count(int class_id) const;
    /// Class ids with at least one pixel, ascending, background excluded.
    std::vector<int> present_classes() const;
};

SegmentationMask mask_from_gray(const GrayImage& img, MaskProvenance provenance);
GrayImage mask_to_gray(const SegmentationMask& m);

struct DatasetRecord {
    std::string image_path;
    std::string mask_path;
    int class_id = 0;
    int fold = 0;
    RgbImage image;
    SegmentationMask mask;
};

/// In-memory dataset: the manifest plus every image and mask, decoded once.
/// Records whose foreground covers < 1% or > 99% of pixels are dropped at
/// build time so pooling never degenerates.
class DatasetIndex {
public:
    /// Loads <dir>/manifest.txt and <dir>/classes.txt plus all referenced files.
    static DatasetIndex load(const std::string& dir);

    const std::vector<DatasetRecord>& records() const { return records_; }
    const DatasetRecord& record(std::size_t idx) const { return records_[idx]; }

    const std::vector<std::size_t>& records_of_class(int class_id) const;
    /// All class ids, ascending.
    std::vector<int> class_ids() const;
    /// Class ids assigned to the given fold, ascending.
    std::vector<int> classes_in_fold(int fold) const;
    int fold_of_class(int class_id) const;
    int fold_count() const { return fold_count_; }
    const std::string& class_name(int class_id) const;

private:
    std::vector<DatasetRecord> records_;
    std::map<int, std::vector<std::size_t>> by_class_;
    std::map<int, int> fold_of_class_;
    std::map<int, std::string> class_names_;
    int fold_count_ = 0;
};

enum class Split { Train, Test };

struct EpisodeItem {
    std::size_t record = 0;
    int class_id = 0;        // the roster class this item was drawn for
    SegmentationMask mask;   // support masks may be degraded; query masks stay dense
};

/// One C-way K-shot task. Support and query reference disjoint records.
struct Episode {
    std::vector<int> roster; // ascending class ids
    std::vector<EpisodeItem> support; // roster order, K shots per class
    std::vector<EpisodeItem> query;
    AnnotationMode annotation = AnnotationMode::Dense;
};

/// Samples a C-way K-shot episode with n_q query images from the classes of
/// the requested split (Test = the held-out fold, Train = all other folds).
/// Deterministic given the rng stream state.
Episode sample_episode(const DatasetIndex& index, Split split, int heldout_fold, int c_way,
                       int k_shot, int n_query, Rng& rng);

/// Annotation degradation. Dense is the identity; bbox fills each class's
/// tight bounding box (ascending class order, later boxes overwrite); scribble
/// keeps a connected random walk of ceil(5%) of each class's pixels (at least
/// 3) strictly inside the class region.
SegmentationMask degrade_mask(const SegmentationMask& mask, AnnotationMode mode, Rng& rng);

} // namespace sml
