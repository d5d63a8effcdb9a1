#pragma once

#include <vector>

#include "sml/injector.hpp"

namespace sml {

/// Scaled-softmax head parameters. Fixed constants, not trained.
struct HeadConfig {
    double alpha = 10.0;
    double beta = 1.0;

    void validate() const;
};

/// Per-class cosine maps for one image, flattened to (h*w) x (C+1). Stack
/// order is background first, then the roster ascending.
template <typename Real>
struct SimilarityStack {
    Tensor<Real> values;
    int h = 0;
    int w = 0;
    std::vector<int> class_order;

    int classes() const { return static_cast<int>(class_order.size()); }
};

/// S_c(m, n) = <feature(m, n), prototype(c)>. Expects per-pixel normalized
/// features; prototypes are normalized by construction, so values are cosines.
template <typename Real>
SimilarityStack<Real> similarity(Tape<Real>& tape, const Tensor<Real>& normalized_features,
                                 const InjectorSolution<Real>& solution);

/// Row-wise softmax over alpha * S + beta, stabilized by max subtraction.
template <typename Real>
Tensor<Real> pixel_logits(Tape<Real>& tape, const SimilarityStack<Real>& stack,
                          const HeadConfig& cfg);

/// Sum over pixels of -log p(true class). Labels come from the mask mapped
/// through the stack's class order.
template <typename Real>
Tensor<Real> cross_entropy_loss(Tape<Real>& tape, const Tensor<Real>& probs,
                                const SegmentationMask& gt,
                                const std::vector<int>& class_order);

/// Per-pixel argmax of alpha * S + beta. Ties go to the lowest stack index
/// (background first).
template <typename Real>
SegmentationMask predict(const SimilarityStack<Real>& stack, const HeadConfig& cfg);

/// Count of pixels whose ground-truth label appears in the stack; the
/// denominator used when the episode loss is normalized per pixel.
std::size_t supervised_pixels(const SegmentationMask& gt);

template <typename Real>
struct ReverseLossResult {
    Tensor<Real> loss;            // scalar; a plain zero constant when degenerate
    bool degenerate = false;      // some predicted mask had no fg or no bg
    std::size_t scored_pixels = 0;
};

/// Swapped-roles alignment loss: queries (with their *predicted* masks) act as
/// the support set to fit prototypes, which must then segment the original
/// support images against their episode masks. Predicted masks are constants;
/// gradients flow through the features and the swapped fit.
template <typename Real>
ReverseLossResult<Real> reverse_alignment_loss(
    Tape<Real>& tape, const std::vector<SupportView<Real>>& swapped_support,
    const std::vector<SupportView<Real>>& score_targets, const std::vector<int>& roster,
    const AttributeTable& attrs, const ClassNamer& namer, const Tensor<Real>& lambda,
    const HeadConfig& cfg, PrototypeMode mode);

} // namespace sml
