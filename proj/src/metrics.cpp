#include "sml/metrics.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "sml/errors.hpp"

namespace sml {

void IouAccumulator::accumulate(const SegmentationMask& pred, const SegmentationMask& gt) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw ContractError("prediction and ground truth extents differ");

    std::set<int> classes;
    for (int c : pred.present_classes()) classes.insert(c);
    for (int c : gt.present_classes()) classes.insert(c);

    for (int c : classes) {
        Counts& counts = per_class_[c];
        for (std::size_t i = 0; i < gt.v.size(); ++i) {
            const bool in_pred = pred.v[i] == c;
            const bool in_gt = gt.v[i] == c;
            counts.inter += in_pred && in_gt;
            counts.uni += in_pred || in_gt;
        }
    }
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        const bool pred_fg = pred.v[i] != 0;
        const bool gt_fg = gt.v[i] != 0;
        binary_fg_.inter += pred_fg && gt_fg;
        binary_fg_.uni += pred_fg || gt_fg;
        binary_bg_.inter += !pred_fg && !gt_fg;
        binary_bg_.uni += !pred_fg || !gt_fg;
    }
    ++episodes_;
}

void IouAccumulator::merge(const IouAccumulator& other) {
    for (const auto& [c, counts] : other.per_class_) {
        per_class_[c].inter += counts.inter;
        per_class_[c].uni += counts.uni;
    }
    binary_fg_.inter += other.binary_fg_.inter;
    binary_fg_.uni += other.binary_fg_.uni;
    binary_bg_.inter += other.binary_bg_.inter;
    binary_bg_.uni += other.binary_bg_.uni;
    episodes_ += other.episodes_;
}

IouReport IouAccumulator::finalize() const {
    if (episodes_ == 0) throw ContractError("finalize on an empty accumulator");
    IouReport report;
    report.episodes = episodes_;
    double sum = 0.0;
    int counted = 0;
    for (const auto& [c, counts] : per_class_) {
        if (counts.uni == 0) continue;
        const double iou = static_cast<double>(counts.inter) / static_cast<double>(counts.uni);
        report.per_class[c] = iou;
        sum += iou;
        ++counted;
    }
    report.mean_iou = counted > 0 ? sum / counted : 0.0;
    const double fg = binary_fg_.uni > 0
                          ? static_cast<double>(binary_fg_.inter) / binary_fg_.uni
                          : 1.0;
    const double bg = binary_bg_.uni > 0
                          ? static_cast<double>(binary_bg_.inter) / binary_bg_.uni
                          : 1.0;
    report.binary_iou = 0.5 * (fg + bg);
    return report;
}

std::string format_report(const IouReport& report, const std::map<int, std::string>& class_names) {
    std::ostringstream os;
    char buf[64];
    for (const auto& [c, iou] : report.per_class) {
        std::snprintf(buf, sizeof(buf), "%.4f", iou);
        os << "class_" << c;
        auto it = class_names.find(c);
        if (it != class_names.end()) os << "_" << it->second;
        os << " = " << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%.4f", report.mean_iou);
    os << "mean_iou = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.4f", report.binary_iou);
    os << "binary_iou = " << buf << "\n";
    os << "episodes = " << report.episodes << "\n";
    return os.str();
}

std::string result_line(const IouReport& report, int ways, int shots,
                        const std::string& annotation) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "RESULT mean_iou=%.4f binary_iou=%.4f episodes=%llu ways=%d shots=%d annotation=%s",
                  report.mean_iou, report.binary_iou,
                  static_cast<unsigned long long>(report.episodes), ways, shots,
                  annotation.c_str());
    return buf;
}

} // namespace sml
