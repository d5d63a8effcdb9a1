#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "sml/episodes.hpp"

namespace sml {

struct IouReport {
    double mean_iou = 0.0;
    double binary_iou = 0.0;
    std::map<int, double> per_class;
    std::uint64_t episodes = 0;
};

/// Pools intersection/union pixel counts per class over all accumulated
/// episodes; the binary track collapses every foreground class to one.
/// Accumulators merge by count addition, so shards can run independently.
class IouAccumulator {
public:
    void accumulate(const SegmentationMask& pred, const SegmentationMask& gt);
    void merge(const IouAccumulator& other);

    std::uint64_t episodes() const { return episodes_; }

    /// mean_iou: unweighted mean over foreground classes with union > 0.
    /// binary_iou: mean of the collapsed foreground IoU and the background IoU.
    IouReport finalize() const;

private:
    struct Counts {
        std::uint64_t inter = 0;
        std::uint64_t uni = 0;
    };
    std::map<int, Counts> per_class_;
    Counts binary_fg_;
    Counts binary_bg_;
    std::uint64_t episodes_ = 0;
};

/// Flat "key = value" report block.
std::string format_report(const IouReport& report,
                          const std::map<int, std::string>& class_names = {});

/// Machine-readable summary line.
std::string result_line(const IouReport& report, int ways, int shots,
                        const std::string& annotation);

} // namespace sml
