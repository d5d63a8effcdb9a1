#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sml/attributes.hpp"
#include "sml/backbone.hpp"
#include "sml/checkpoint.hpp"
#include "sml/episodes.hpp"
#include "sml/injector.hpp"
#include "sml/metrics.hpp"
#include "sml/seghead.hpp"

namespace sml {

struct TrainConfig {
    long episodes_total = 30000;
    double lr0 = 1e-3;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double lr_decay_factor = 0.1;
    long lr_decay_every = 10000;
    int c_way = 1;
    int k_shot = 1;
    int n_query = 1;
    AnnotationMode annotation = AnnotationMode::Dense;      // training support masks
    AnnotationMode eval_annotation = AnnotationMode::Dense; // evaluation support masks
    std::uint64_t seed = 1;
    long eval_every = 10000;
    long eval_episodes = 1000;
    double lambda_init = 100.0;
    PrototypeMode prototype_mode = PrototypeMode::Injector;
    // Test hooks: with both off no update is applied at all.
    bool use_ce = true;
    bool use_reverse = true;

    void validate() const;
};

/// Step-decayed learning rate: lr0 * factor^floor(iteration / decay_every).
double lr_at(long iteration, const TrainConfig& cfg);

/// Trainable state: parameters, SGD velocity buffers, episode counter. Every
/// episode draws from a counter-indexed substream of the config seed, so a
/// state restored at step t continues bit-identically to the uninterrupted
/// run.
template <typename Real>
struct ModelState {
    ParameterStore<Real> params;
    std::map<std::string, std::vector<Real>> velocity;
    long step = 0;

    static ModelState init(const FeatureExtractorConfig& cfg, const TrainConfig& tcfg);
};

struct StepLosses {
    double ce = 0.0;
    double reverse = 0.0;
    double normalized = 0.0; // (ce + reverse) / supervised pixel count
    bool reverse_degenerate = false;
};

/// Forward pass only: both episode losses at the current parameters.
template <typename Real>
StepLosses forward_losses(const ParameterStore<Real>& params, const DatasetIndex& index,
                          const Episode& episode, const AttributeTable& attrs,
                          const TrainConfig& tcfg, const HeadConfig& hcfg);

/// One forward + reverse pass, one backward, one SGD update
///   v <- mu v - lr (g + wd theta);  theta <- theta + v
/// with the pixel-normalized combined loss. The injector's log-lambda is
/// exempt from weight decay.
template <typename Real>
StepLosses train_step(ModelState<Real>& state, const DatasetIndex& index, const Episode& episode,
                      const AttributeTable& attrs, const TrainConfig& tcfg,
                      const HeadConfig& hcfg);

struct EvalOptions {
    int heldout_fold = 0;
    long episodes = 1000;
    int c_way = 1;
    int k_shot = 1;
    int n_query = 1;
    AnnotationMode annotation = AnnotationMode::Dense;
    std::uint64_t seed = 1;
};

/// Runs seeded test-split episodes and pools IoU counts over all of them.
template <typename Real>
IouReport evaluate(const ParameterStore<Real>& params, const AttributeTable& attrs,
                   const HeadConfig& hcfg, PrototypeMode mode, const DatasetIndex& index,
                   const EvalOptions& opts);

/// Checkpoint schema on top of the STF1 container: "param/<name>",
/// "vel/<name>", "attr/<token>" and "state/<scalar>" entries. Attributes ride
/// along so a checkpoint is self-contained for prediction.
template <typename Real>
CheckpointData to_checkpoint(const ModelState<Real>& state, const AttributeTable& attrs,
                             const HeadConfig& hcfg, PrototypeMode mode);

template <typename Real>
struct LoadedModel {
    ModelState<Real> state;
    AttributeTable attrs;
    HeadConfig head;
    PrototypeMode mode = PrototypeMode::Injector;
};

template <typename Real>
LoadedModel<Real> from_checkpoint(const CheckpointData& data);

template <typename Real>
void save_model(const std::string& path, const ModelState<Real>& state,
                const AttributeTable& attrs, const HeadConfig& hcfg, PrototypeMode mode);

template <typename Real>
LoadedModel<Real> load_model(const std::string& path);

using LogFn = std::function<void(const std::string&)>;

struct RunResult {
    IouReport final_report;
    std::string result_line;
};

/// Full meta-training run against the non-held-out folds with periodic
/// held-out evaluation, final evaluation, and a checkpoint written to
/// checkpoint_path. Fully reproducible from the config seed; `resume`
/// continues a previous state instead of initializing fresh.
template <typename Real>
RunResult run_training(const DatasetIndex& index, const AttributeTable& attrs,
                       const TrainConfig& tcfg, const HeadConfig& hcfg,
                       const FeatureExtractorConfig& fcfg, int heldout_fold,
                       const std::string& checkpoint_path, const LogFn& log,
                       std::optional<ModelState<Real>> resume = std::nullopt);

/// One-off prediction: fit prototypes from ad-hoc support images whose masks
/// mark the named classes, then segment the query. The returned mask uses ids
/// 1..C for the sorted distinct class tokens.
template <typename Real>
SegmentationMask predict_segmentation(
    const LoadedModel<Real>& model,
    const std::vector<std::tuple<RgbImage, SegmentationMask, std::string>>& support,
    const RgbImage& query);

} // namespace sml
