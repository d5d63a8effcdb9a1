#include "sml/seghead.hpp"

#include <algorithm>
#include <cmath>

namespace sml {

void HeadConfig::validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
}

template <typename Real>
SimilarityStack<Real> similarity(Tape<Real>& tape, const Tensor<Real>& normalized_features,
                                 const InjectorSolution<Real>& solution) {
    if (normalized_features.rank() != 3)
        throw ContractError("similarity expects h x w x d features");
    const int h = normalized_features.shape()[0];
    const int w = normalized_features.shape()[1];
    const int d = normalized_features.shape()[2];

    SimilarityStack<Real> stack;
    stack.h = h;
    stack.w = w;
    stack.class_order = solution.stack_order();

    std::vector<Tensor<Real>> proto_cols;
    proto_cols.reserve(stack.class_order.size());
    for (int c : stack.class_order) {
        const Tensor<Real>& p = solution.prototypes.at(c);
        if (p.shape()[0] != d)
            throw ContractError("prototype dimensionality " + shape_str(p.shape()) +
                                " does not match features " +
                                shape_str(normalized_features.shape()));
        proto_cols.push_back(tape.reshape(p, {d, 1}));
    }
    auto protos = tape.concat_cols(proto_cols); // d x (C+1)
    auto flat = tape.reshape(normalized_features, {h * w, d});
    stack.values = tape.matmul(flat, protos);   // (h*w) x (C+1)
    return stack;
}

template <typename Real>
Tensor<Real> pixel_logits(Tape<Real>& tape, const SimilarityStack<Real>& stack,
                          const HeadConfig& cfg) {
    cfg.validate();
    if (stack.classes() < 2) throw ContractError("pixel_logits needs stack depth >= 2");
    const int rows = stack.values.shape()[0];
    const int cols = stack.values.shape()[1];
    const Real alpha = static_cast<Real>(cfg.alpha);
    const Real beta = static_cast<Real>(cfg.beta);

    std::vector<Real> probs(stack.values.numel());
    const auto& s = stack.values.values();
    for (int r = 0; r < rows; ++r) {
        const Real* srow = s.data() + static_cast<std::size_t>(r) * cols;
        Real* prow = probs.data() + static_cast<std::size_t>(r) * cols;
        Real m = alpha * srow[0] + beta;
        for (int c = 1; c < cols; ++c) m = std::max(m, alpha * srow[c] + beta);
        Real z = 0;
        for (int c = 0; c < cols; ++c) {
            prow[c] = std::exp(alpha * srow[c] + beta - m);
            z += prow[c];
        }
        for (int c = 0; c < cols; ++c) prow[c] /= z;
    }

    Tensor<Real> input = stack.values;
    return tape.custom(
        {input}, {rows, cols}, std::move(probs),
        [input, rows, cols, alpha](Tensor<Real>& out) mutable {
            if (!input.requires_grad()) return;
            auto& sg = input.grad();
            const auto& g = out.grad();
            const auto& p = out.values();
            for (int r = 0; r < rows; ++r) {
                const std::size_t o = static_cast<std::size_t>(r) * cols;
                Real dot = 0;
                for (int c = 0; c < cols; ++c) dot += g[o + c] * p[o + c];
                for (int c = 0; c < cols; ++c)
                    sg[o + c] += alpha * p[o + c] * (g[o + c] - dot);
            }
        });
}

namespace {

std::vector<int> labels_for(const SegmentationMask& gt, const std::vector<int>& class_order,
                            int rows) {
    if (gt.h * gt.w != rows)
        throw ContractError("mask extents do not match the similarity stack");
    std::vector<int> index_of(256, -1);
    for (std::size_t i = 0; i < class_order.size(); ++i) index_of[class_order[i]] = static_cast<int>(i);
    std::vector<int> labels(rows);
    for (int r = 0; r < rows; ++r) {
        int idx = index_of[gt.v[r]];
        if (idx < 0)
            throw ContractError("mask label " + std::to_string(gt.v[r]) +
                                " is outside the class stack");
        labels[r] = idx;
    }
    return labels;
}

} // namespace

template <typename Real>
Tensor<Real> cross_entropy_loss(Tape<Real>& tape, const Tensor<Real>& probs,
                                const SegmentationMask& gt,
                                const std::vector<int>& class_order) {
    if (probs.rank() != 2) throw ContractError("cross_entropy_loss expects (pixels x classes)");
    const int rows = probs.shape()[0];
    const int cols = probs.shape()[1];
    auto labels = labels_for(gt, class_order, rows);

    double loss = 0.0;
    for (int r = 0; r < rows; ++r)
        loss -= std::log(static_cast<double>(
            probs.values()[static_cast<std::size_t>(r) * cols + labels[r]]));

    Tensor<Real> input = probs;
    return tape.custom({input}, {1}, {static_cast<Real>(loss)},
                       [input, labels = std::move(labels), cols](Tensor<Real>& out) mutable {
                           if (!input.requires_grad()) return;
                           const Real g = out.grad()[0];
                           auto& pg = input.grad();
                           const auto& p = input.values();
                           for (std::size_t r = 0; r < labels.size(); ++r) {
                               const std::size_t i = r * cols + labels[r];
                               pg[i] -= g / p[i];
                           }
                       });
}

template <typename Real>
SegmentationMask predict(const SimilarityStack<Real>& stack, const HeadConfig& cfg) {
    cfg.validate();
    const int rows = stack.values.shape()[0];
    const int cols = stack.values.shape()[1];
    SegmentationMask mask;
    mask.h = stack.h;
    mask.w = stack.w;
    mask.provenance = MaskProvenance::Predicted;
    mask.v.resize(static_cast<std::size_t>(rows));
    const auto& s = stack.values.values();
    const Real alpha = static_cast<Real>(cfg.alpha);
    const Real beta = static_cast<Real>(cfg.beta);
    for (int r = 0; r < rows; ++r) {
        const Real* srow = s.data() + static_cast<std::size_t>(r) * cols;
        int best = 0;
        Real best_v = alpha * srow[0] + beta;
        for (int c = 1; c < cols; ++c) {
            Real v = alpha * srow[c] + beta;
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        mask.v[r] = static_cast<std::uint8_t>(stack.class_order[best]);
    }
    return mask;
}

std::size_t supervised_pixels(const SegmentationMask& gt) {
    return gt.v.size();
}

template <typename Real>
ReverseLossResult<Real> reverse_alignment_loss(
    Tape<Real>& tape, const std::vector<SupportView<Real>>& swapped_support,
    const std::vector<SupportView<Real>>& score_targets, const std::vector<int>& roster,
    const AttributeTable& attrs, const ClassNamer& namer, const Tensor<Real>& lambda,
    const HeadConfig& cfg, PrototypeMode mode) {
    ReverseLossResult<Real> result;

    // The swapped fit needs every predicted mask to carry both a foreground
    // and a background region; otherwise the episode contributes no reverse
    // loss and is only counted.
    std::vector<SupportView<Real>> usable;
    for (const auto& view : swapped_support) {
        auto present = view.mask->present_classes();
        const std::size_t fg = view.mask->v.size() - view.mask->count(0);
        if (present.empty() || fg == view.mask->v.size()) {
            result.degenerate = true;
            result.loss = Tensor<Real>::scalar(Real(0));
            return result;
        }
        for (int c : present) {
            SupportView<Real> per_class = view;
            per_class.class_id = c;
            usable.push_back(per_class);
        }
    }

    InjectorSolution<Real> solution;
    if (mode == PrototypeMode::Injector) {
        auto design = assemble_design(tape, usable, attrs, namer, roster);
        solution = fit_prototypes(tape, design, lambda, attrs, namer);
    } else {
        solution = mean_prototypes(tape, usable, roster);
    }

    Tensor<Real> total = Tensor<Real>::scalar(Real(0));
    for (const auto& target : score_targets) {
        auto stack = similarity(tape, tape.l2_normalize_pixels(target.features), solution);
        auto probs = pixel_logits(tape, stack, cfg);
        total = tape.add(total, cross_entropy_loss(tape, probs, *target.mask, stack.class_order));
        result.scored_pixels += supervised_pixels(*target.mask);
    }
    result.loss = total;
    return result;
}

template struct SimilarityStack<float>;
template struct SimilarityStack<double>;
template SimilarityStack<float> similarity(Tape<float>&, const Tensor<float>&,
                                           const InjectorSolution<float>&);
template SimilarityStack<double> similarity(Tape<double>&, const Tensor<double>&,
                                            const InjectorSolution<double>&);
template Tensor<float> pixel_logits(Tape<float>&, const SimilarityStack<float>&,
                                    const HeadConfig&);
template Tensor<double> pixel_logits(Tape<double>&, const SimilarityStack<double>&,
                                     const HeadConfig&);
template Tensor<float> cross_entropy_loss(Tape<float>&, const Tensor<float>&,
                                          const SegmentationMask&, const std::vector<int>&);
template Tensor<double> cross_entropy_loss(Tape<double>&, const Tensor<double>&,
                                           const SegmentationMask&, const std::vector<int>&);
template SegmentationMask predict(const SimilarityStack<float>&, const HeadConfig&);
template SegmentationMask predict(const SimilarityStack<double>&, const HeadConfig&);
template struct ReverseLossResult<float>;
template struct ReverseLossResult<double>;
template ReverseLossResult<float> reverse_alignment_loss(
    Tape<float>&, const std::vector<SupportView<float>>&, const std::vector<SupportView<float>>&,
    const std::vector<int>&, const AttributeTable&, const ClassNamer&, const Tensor<float>&,
    const HeadConfig&, PrototypeMode);
template ReverseLossResult<double> reverse_alignment_loss(
    Tape<double>&, const std::vector<SupportView<double>>&,
    const std::vector<SupportView<double>>&, const std::vector<int>&, const AttributeTable&,
    const ClassNamer&, const Tensor<double>&, const HeadConfig&, PrototypeMode);

} // namespace sml
