#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sml/attributes.hpp"
#include "sml/backbone.hpp"
#include "sml/episodes.hpp"
#include "sml/linalg.hpp"
#include "sml/tensor.hpp"

namespace sml {

/// How class prototypes are produced: the ridge-fit attribute injector, or the
/// plain normalized mean of pooled support embeddings (the ablation baseline).
enum class PrototypeMode { Injector, MeanPool };

PrototypeMode prototype_mode_from_string(const std::string& s);
std::string prototype_mode_to_string(PrototypeMode m);

/// Maps class ids to attribute-table tokens.
using ClassNamer = std::function<std::string(int)>;

/// One image ready for pooling: its raw feature map plus the mask selecting
/// the class region.
template <typename Real>
struct SupportView {
    Tensor<Real> features;
    const SegmentationMask* mask = nullptr;
    int class_id = 0;
};

/// Matched design matrices: phi columns are normalized pooled embeddings, the
/// attrs columns the matching attribute vectors. Views are consumed in the
/// given order; each view of class c contributes the pair (phi_fg, a_c) then
/// (phi_bg, a_bg), so 2 * |views| columns in total.
template <typename Real>
struct Design {
    Tensor<Real> phi;        // d x 2|views|, on the tape
    Mat attrs;               // d_a x 2|views|, constant
    std::vector<int> roster; // ascending distinct class ids
};

template <typename Real>
Design<Real> assemble_design(Tape<Real>& tape, const std::vector<SupportView<Real>>& views,
                             const AttributeTable& attrs, const ClassNamer& namer,
                             const std::vector<int>& roster);

/// The fitted injector for one episode: W, its lambda snapshot, and the
/// normalized prototype per roster class plus background (key 0). Prototypes
/// whose pre-normalization norm falls under 1e-6 are the zero vector.
template <typename Real>
struct InjectorSolution {
    Tensor<Real> weights; // d x d_a; undefined in MeanPool mode
    double lambda = 0.0;
    std::vector<int> roster;
    std::map<int, Tensor<Real>> prototypes;

    /// Fixed class-stack order: background first, then the roster ascending.
    std::vector<int> stack_order() const;
};

template <typename Real>
InjectorSolution<Real> fit_prototypes(Tape<Real>& tape, const Design<Real>& design,
                                      const Tensor<Real>& lambda, const AttributeTable& attrs,
                                      const ClassNamer& namer);

/// Ablation baseline: prototype(c) is the normalized mean of the class's
/// pooled foreground embeddings, background the normalized mean of all pooled
/// background embeddings. Roster classes with no views map to the zero vector.
template <typename Real>
InjectorSolution<Real> mean_prototypes(Tape<Real>& tape,
                                       const std::vector<SupportView<Real>>& views,
                                       const std::vector<int>& roster);

} // namespace sml
