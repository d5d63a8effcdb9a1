#include "sml/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sml/errors.hpp"

namespace fs = std::filesystem;

namespace sml {

AnnotationMode annotation_from_string(const std::string& s) {
    if (s == "dense") return AnnotationMode::Dense;
    if (s == "bbox") return AnnotationMode::Bbox;
    if (s == "scribble") return AnnotationMode::Scribble;
    throw ConfigError("unknown annotation mode: " + s);
}

std::string annotation_to_string(AnnotationMode m) {
    switch (m) {
        case AnnotationMode::Dense: return "dense";
        case AnnotationMode::Bbox: return "bbox";
        case AnnotationMode::Scribble: return "scribble";
    }
    return "dense";
}

std::size_t SegmentationMask::count(int class_id) const {
    std::size_t n = 0;
    for (std::uint8_t p : v)
        if (p == class_id) ++n;
    return n;
}

std::vector<int> SegmentationMask::present_classes() const {
    std::set<int> seen;
    for (std::uint8_t p : v)
        if (p != 0) seen.insert(p);
    return {seen.begin(), seen.end()};
}

SegmentationMask mask_from_gray(const GrayImage& img, MaskProvenance provenance) {
    SegmentationMask m;
    m.h = img.h;
    m.w = img.w;
    m.v = img.px;
    m.provenance = provenance;
    return m;
}

GrayImage mask_to_gray(const SegmentationMask& m) {
    GrayImage g;
    g.h = m.h;
    g.w = m.w;
    g.px = m.v;
    return g;
}

DatasetIndex DatasetIndex::load(const std::string& dir) {
    DatasetIndex index;
    const fs::path base(dir);

    {
        std::ifstream f(base / "classes.txt");
        if (!f) throw IoError("cannot open " + (base / "classes.txt").string());
        std::string line;
        long line_no = 0;
        while (std::getline(f, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream row(line);
            int id;
            std::string name;
            if (!(row >> id >> name))
                throw ParseError("bad class line in classes.txt", line_no);
            index.class_names_[id] = name;
        }
    }

    std::ifstream f(base / "manifest.txt");
    if (!f) throw IoError("cannot open " + (base / "manifest.txt").string());
    std::string line;
    long line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        DatasetRecord rec;
        if (!(row >> rec.image_path >> rec.mask_path >> rec.class_id >> rec.fold))
            throw ParseError("bad manifest line in " + (base / "manifest.txt").string(), line_no);
        rec.image = read_ppm((base / rec.image_path).string());
        rec.mask = mask_from_gray(read_pgm((base / rec.mask_path).string()),
                                  MaskProvenance::GroundTruth);
        if (rec.mask.h != rec.image.h || rec.mask.w != rec.image.w)
            throw ParseError("mask extents differ from image for " + rec.image_path, line_no);
        if (!index.class_names_.count(rec.class_id))
            throw ParseError("manifest references unlisted class id " +
                             std::to_string(rec.class_id), line_no);

        auto [fold_it, inserted] = index.fold_of_class_.try_emplace(rec.class_id, rec.fold);
        if (!inserted && fold_it->second != rec.fold)
            throw ParseError("class " + std::to_string(rec.class_id) +
                             " appears in multiple folds", line_no);
        index.fold_count_ = std::max(index.fold_count_, rec.fold + 1);

        // Reject near-empty and near-full masks up front.
        const double frac = static_cast<double>(rec.mask.count(rec.class_id)) /
                            (static_cast<double>(rec.mask.h) * rec.mask.w);
        if (frac < 0.01 || frac > 0.99) continue;

        index.by_class_[rec.class_id].push_back(index.records_.size());
        index.records_.push_back(std::move(rec));
    }
    if (index.records_.empty()) throw ParseError("manifest holds no usable records");
    return index;
}

const std::vector<std::size_t>& DatasetIndex::records_of_class(int class_id) const {
    auto it = by_class_.find(class_id);
    if (it == by_class_.end())
        throw ContractError("no records for class " + std::to_string(class_id));
    return it->second;
}

std::vector<int> DatasetIndex::class_ids() const {
    std::vector<int> ids;
    for (const auto& [id, recs] : by_class_) ids.push_back(id);
    return ids;
}

std::vector<int> DatasetIndex::classes_in_fold(int fold) const {
    std::vector<int> ids;
    for (const auto& [id, recs] : by_class_)
        if (fold_of_class_.at(id) == fold) ids.push_back(id);
    return ids;
}

int DatasetIndex::fold_of_class(int class_id) const {
    auto it = fold_of_class_.find(class_id);
    if (it == fold_of_class_.end())
        throw ContractError("unknown class id " + std::to_string(class_id));
    return it->second;
}

const std::string& DatasetIndex::class_name(int class_id) const {
    auto it = class_names_.find(class_id);
    if (it == class_names_.end())
        throw ContractError("unknown class id " + std::to_string(class_id));
    return it->second;
}

Episode sample_episode(const DatasetIndex& index, Split split, int heldout_fold, int c_way,
                       int k_shot, int n_query, Rng& rng) {
    if (c_way < 1 || k_shot < 1 || n_query < 1)
        throw ContractError("episode protocol extents must be >= 1");
    if (heldout_fold < 0 || heldout_fold >= index.fold_count())
        throw ConfigError("held-out fold " + std::to_string(heldout_fold) + " out of range");

    std::vector<int> classes;
    for (int id : index.class_ids()) {
        const bool held = index.fold_of_class(id) == heldout_fold;
        if ((split == Split::Test) == held) classes.push_back(id);
    }
    if (static_cast<int>(classes.size()) < c_way)
        throw SamplingError("split has " + std::to_string(classes.size()) +
                            " classes, need " + std::to_string(c_way));

    Episode ep;
    auto roster_picks = rng.sample_without_replacement(classes.size(), c_way);
    for (std::size_t p : roster_picks) ep.roster.push_back(classes[p]);
    std::sort(ep.roster.begin(), ep.roster.end());

    // Per class, draw k_shot support images plus this class's share of query
    // images, all without replacement within the episode.
    std::vector<int> query_class(n_query);
    for (int q = 0; q < n_query; ++q)
        query_class[q] = ep.roster[rng.below(static_cast<std::uint32_t>(c_way))];

    for (int c : ep.roster) {
        const auto& pool = index.records_of_class(c);
        int wanted = k_shot;
        for (int q = 0; q < n_query; ++q)
            if (query_class[q] == c) ++wanted;
        if (static_cast<int>(pool.size()) < wanted)
            throw SamplingError("class " + std::to_string(c) + " has " +
                                std::to_string(pool.size()) + " usable images, need " +
                                std::to_string(wanted));
        auto picks = rng.sample_without_replacement(pool.size(), wanted);
        for (int s = 0; s < k_shot; ++s) {
            EpisodeItem item;
            item.record = pool[picks[s]];
            item.class_id = c;
            item.mask = index.record(item.record).mask;
            item.mask.provenance = MaskProvenance::Dense;
            ep.support.push_back(std::move(item));
        }
        int next = k_shot;
        for (int q = 0; q < n_query; ++q) {
            if (query_class[q] != c) continue;
            EpisodeItem item;
            item.record = pool[picks[next++]];
            item.class_id = c;
            item.mask = index.record(item.record).mask;
            ep.query.push_back(std::move(item));
        }
    }
    return ep;
}

namespace {

SegmentationMask bbox_mask(const SegmentationMask& mask) {
    SegmentationMask out;
    out.h = mask.h;
    out.w = mask.w;
    out.v.assign(mask.v.size(), 0);
    out.provenance = MaskProvenance::Bbox;
    for (int c : mask.present_classes()) {
        int imin = mask.h, imax = -1, jmin = mask.w, jmax = -1;
        for (int i = 0; i < mask.h; ++i)
            for (int j = 0; j < mask.w; ++j)
                if (mask.at(i, j) == c) {
                    imin = std::min(imin, i);
                    imax = std::max(imax, i);
                    jmin = std::min(jmin, j);
                    jmax = std::max(jmax, j);
                }
        for (int i = imin; i <= imax; ++i)
            for (int j = jmin; j <= jmax; ++j)
                out.at(i, j) = static_cast<std::uint8_t>(c);
    }
    return out;
}

SegmentationMask scribble_mask(const SegmentationMask& mask, Rng& rng) {
    SegmentationMask out;
    out.h = mask.h;
    out.w = mask.w;
    out.v.assign(mask.v.size(), 0);
    out.provenance = MaskProvenance::Scribble;
    for (int c : mask.present_classes()) {
        std::vector<std::pair<int, int>> region;
        double ci = 0, cj = 0;
        for (int i = 0; i < mask.h; ++i)
            for (int j = 0; j < mask.w; ++j)
                if (mask.at(i, j) == c) {
                    region.emplace_back(i, j);
                    ci += i;
                    cj += j;
                }
        ci /= static_cast<double>(region.size());
        cj /= static_cast<double>(region.size());

        // Start at the region pixel nearest the centroid.
        std::size_t start = 0;
        double best = 1e30;
        for (std::size_t r = 0; r < region.size(); ++r) {
            double d = (region[r].first - ci) * (region[r].first - ci) +
                       (region[r].second - cj) * (region[r].second - cj);
            if (d < best) {
                best = d;
                start = r;
            }
        }

        const std::size_t budget =
            std::min(region.size(),
                     std::max<std::size_t>(3, static_cast<std::size_t>(
                                                  std::ceil(0.05 * region.size()))));
        std::vector<std::uint8_t> visited(mask.v.size(), 0);
        int pi = region[start].first, pj = region[start].second;
        out.at(pi, pj) = static_cast<std::uint8_t>(c);
        visited[static_cast<std::size_t>(pi) * mask.w + pj] = 1;
        std::size_t drawn = 1;
        const int di[4] = {-1, 1, 0, 0};
        const int dj[4] = {0, 0, -1, 1};
        while (drawn < budget) {
            int fresh[4], seen[4];
            int n_fresh = 0, n_seen = 0;
            for (int d = 0; d < 4; ++d) {
                int ni = pi + di[d], nj = pj + dj[d];
                if (ni < 0 || ni >= mask.h || nj < 0 || nj >= mask.w) continue;
                if (mask.at(ni, nj) != c) continue;
                if (visited[static_cast<std::size_t>(ni) * mask.w + nj]) seen[n_seen++] = d;
                else fresh[n_fresh++] = d;
            }
            int d;
            if (n_fresh > 0) d = fresh[rng.below(static_cast<std::uint32_t>(n_fresh))];
            else if (n_seen > 0) d = seen[rng.below(static_cast<std::uint32_t>(n_seen))];
            else break; // isolated pixel
            pi += di[d];
            pj += dj[d];
            if (!visited[static_cast<std::size_t>(pi) * mask.w + pj]) {
                visited[static_cast<std::size_t>(pi) * mask.w + pj] = 1;
                out.at(pi, pj) = static_cast<std::uint8_t>(c);
                ++drawn;
            }
        }
    }
    return out;
}

} // namespace

SegmentationMask degrade_mask(const SegmentationMask& mask, AnnotationMode mode, Rng& rng) {
    if (mode == AnnotationMode::Dense) {
        SegmentationMask out = mask;
        out.provenance = MaskProvenance::Dense;
        return out;
    }
    if (mask.present_classes().empty())
        throw DegenerateMaskError("cannot degrade a mask with no foreground");
    return mode == AnnotationMode::Bbox ? bbox_mask(mask) : scribble_mask(mask, rng);
}

} // namespace sml
