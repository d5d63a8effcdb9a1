#include "sml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "sml/rng.hpp"

namespace sml {

void TrainConfig::validate() const {
    if (episodes_total < 0) throw ConfigError("episodes_total must be >= 0");
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (lr_decay_factor <= 0.0 || lr_decay_factor > 1.0)
        throw ConfigError("lr_decay_factor must be in (0, 1]");
    if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
    if (c_way < 1 || k_shot < 1 || n_query < 1)
        throw ConfigError("episode protocol extents must be >= 1");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (!(lambda_init > 0.0)) throw ConfigError("lambda_init must be > 0");
}

double lr_at(long iteration, const TrainConfig& cfg) {
    if (iteration < 0) throw ContractError("lr_at: iteration must be >= 0");
    return cfg.lr0 * std::pow(cfg.lr_decay_factor, static_cast<double>(iteration / cfg.lr_decay_every));
}

template <typename Real>
ModelState<Real> ModelState<Real>::init(const FeatureExtractorConfig& cfg,
                                        const TrainConfig& tcfg) {
    ModelState state;
    state.params = ParameterStore<Real>::init(cfg, tcfg.seed, tcfg.lambda_init);
    return state;
}

namespace {

template <typename Real>
InjectorSolution<Real> solve_support(Tape<Real>& tape,
                                     const std::vector<SupportView<Real>>& views,
                                     const std::vector<int>& roster, const AttributeTable& attrs,
                                     const ClassNamer& namer, const Tensor<Real>& lambda,
                                     PrototypeMode mode) {
    if (mode == PrototypeMode::Injector) {
        auto design = assemble_design(tape, views, attrs, namer, roster);
        return fit_prototypes(tape, design, lambda, attrs, namer);
    }
    return mean_prototypes(tape, views, roster);
}

template <typename Real>
struct EpisodeGraph {
    Tensor<Real> total;            // combined loss per the config toggles
    std::size_t total_pixels = 0;  // its supervision count
    StepLosses losses;
};

template <typename Real>
EpisodeGraph<Real> build_episode_graph(Tape<Real>& tape, const ParameterStore<Real>& params,
                                       const DatasetIndex& index, const Episode& episode,
                                       const AttributeTable& attrs, const TrainConfig& tcfg,
                                       const HeadConfig& hcfg) {
    ClassNamer namer = [&index](int id) { return index.class_name(id); };
    auto lambda = tape.exp(params.at(ParameterStore<Real>::kRhoName));

    std::vector<SupportView<Real>> support_views;
    support_views.reserve(episode.support.size());
    for (const auto& item : episode.support) {
        auto features = extract(tape, params, image_to_tensor<Real>(index.record(item.record).image));
        support_views.push_back({features, &item.mask, item.class_id});
    }
    auto solution = solve_support(tape, support_views, episode.roster, attrs, namer, lambda,
                                  tcfg.prototype_mode);

    Tensor<Real> ce = Tensor<Real>::scalar(Real(0));
    std::size_t ce_pixels = 0;
    std::deque<SegmentationMask> predicted;
    std::vector<SupportView<Real>> swapped;
    swapped.reserve(episode.query.size());
    for (const auto& item : episode.query) {
        auto features = extract(tape, params, image_to_tensor<Real>(index.record(item.record).image));
        auto stack = similarity(tape, tape.l2_normalize_pixels(features), solution);
        auto probs = pixel_logits(tape, stack, hcfg);
        ce = tape.add(ce, cross_entropy_loss(tape, probs, item.mask, stack.class_order));
        ce_pixels += supervised_pixels(item.mask);
        predicted.push_back(predict(stack, hcfg));
        swapped.push_back({features, &predicted.back(), item.class_id});
    }

    auto reverse = reverse_alignment_loss(tape, swapped, support_views, episode.roster, attrs,
                                          namer, lambda, hcfg, tcfg.prototype_mode);

    EpisodeGraph<Real> graph;
    graph.losses.ce = static_cast<double>(ce.values()[0]);
    graph.losses.reverse = static_cast<double>(reverse.loss.values()[0]);
    graph.losses.reverse_degenerate = reverse.degenerate;

    graph.total = Tensor<Real>::scalar(Real(0));
    if (tcfg.use_ce) {
        graph.total = tape.add(graph.total, ce);
        graph.total_pixels += ce_pixels;
    }
    if (tcfg.use_reverse && !reverse.degenerate) {
        graph.total = tape.add(graph.total, reverse.loss);
        graph.total_pixels += reverse.scored_pixels;
    }
    if (graph.total_pixels > 0)
        graph.losses.normalized =
            static_cast<double>(graph.total.values()[0]) / static_cast<double>(graph.total_pixels);
    return graph;
}

} // namespace

template <typename Real>
StepLosses forward_losses(const ParameterStore<Real>& params, const DatasetIndex& index,
                          const Episode& episode, const AttributeTable& attrs,
                          const TrainConfig& tcfg, const HeadConfig& hcfg) {
    Tape<Real> tape;
    return build_episode_graph(tape, params, index, episode, attrs, tcfg, hcfg).losses;
}

template <typename Real>
StepLosses train_step(ModelState<Real>& state, const DatasetIndex& index, const Episode& episode,
                      const AttributeTable& attrs, const TrainConfig& tcfg,
                      const HeadConfig& hcfg) {
    Tape<Real> tape;
    auto graph = build_episode_graph(tape, state.params, index, episode, attrs, tcfg, hcfg);

    if (!std::isfinite(graph.losses.ce) || !std::isfinite(graph.losses.reverse))
        throw TrainAbortError("non-finite loss at episode " + std::to_string(state.step) +
                              " (seed " + std::to_string(tcfg.seed) + ")");
    if (graph.total_pixels == 0 || !graph.total.requires_grad()) {
        ++state.step;
        return graph.losses;
    }

    auto objective = tape.scale(graph.total, Real(1) / static_cast<Real>(graph.total_pixels));
    state.params.zero_grad_all();
    tape.backward(objective);

    const double lr = lr_at(state.step, tcfg);
    for (const auto& name : state.params.names()) {
        auto& param = state.params.at(name);
        const double wd = name == ParameterStore<Real>::kRhoName ? 0.0 : tcfg.weight_decay;
        auto& vel = state.velocity[name];
        if (vel.size() != param.numel()) vel.assign(param.numel(), Real(0));
        auto& theta = param.values();
        const auto& g = param.grad();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            vel[i] = static_cast<Real>(tcfg.momentum * vel[i] -
                                       lr * (g[i] + wd * theta[i]));
            theta[i] += vel[i];
        }
    }
    ++state.step;
    return graph.losses;
}

template <typename Real>
IouReport evaluate(const ParameterStore<Real>& params, const AttributeTable& attrs,
                   const HeadConfig& hcfg, PrototypeMode mode, const DatasetIndex& index,
                   const EvalOptions& opts) {
    ClassNamer namer = [&index](int id) { return index.class_name(id); };
    const double lambda_value =
        std::exp(static_cast<double>(params.at(ParameterStore<Real>::kRhoName).values()[0]));
    IouAccumulator acc;
    for (long e = 0; e < opts.episodes; ++e) {
        Rng rng(substream_seed(opts.seed, "eval", static_cast<std::uint64_t>(e)));
        Episode ep = sample_episode(index, Split::Test, opts.heldout_fold, opts.c_way,
                                    opts.k_shot, opts.n_query, rng);
        for (auto& item : ep.support) item.mask = degrade_mask(item.mask, opts.annotation, rng);

        Tape<Real> tape;
        tape.set_recording(false);
        auto lambda = Tensor<Real>::scalar(static_cast<Real>(lambda_value));
        std::vector<SupportView<Real>> views;
        views.reserve(ep.support.size());
        for (const auto& item : ep.support) {
            auto features =
                extract(tape, params, image_to_tensor<Real>(index.record(item.record).image));
            views.push_back({features, &item.mask, item.class_id});
        }
        auto solution = solve_support(tape, views, ep.roster, attrs, namer, lambda, mode);
        for (const auto& item : ep.query) {
            auto features =
                extract(tape, params, image_to_tensor<Real>(index.record(item.record).image));
            auto stack = similarity(tape, tape.l2_normalize_pixels(features), solution);
            acc.accumulate(predict(stack, hcfg), item.mask);
        }
    }
    return acc.finalize();
}

namespace {

template <typename Real>
CheckpointBlob blob_from(const std::vector<Real>& data, std::vector<std::uint32_t> dims) {
    CheckpointBlob blob;
    blob.dims = std::move(dims);
    blob.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) blob.data[i] = static_cast<float>(data[i]);
    return blob;
}

CheckpointBlob scalar_blob(double v) {
    CheckpointBlob blob;
    blob.dims = {1};
    blob.data = {static_cast<float>(v)};
    return blob;
}

} // namespace

template <typename Real>
CheckpointData to_checkpoint(const ModelState<Real>& state, const AttributeTable& attrs,
                             const HeadConfig& hcfg, PrototypeMode mode) {
    CheckpointData data;
    for (const auto& [name, param] : state.params.entries()) {
        std::vector<std::uint32_t> dims;
        for (int e : param.shape()) dims.push_back(static_cast<std::uint32_t>(e));
        data["param/" + name] = blob_from(param.values(), std::move(dims));
    }
    for (const auto& [name, vel] : state.velocity)
        data["vel/" + name] = blob_from(vel, {static_cast<std::uint32_t>(vel.size())});
    for (const auto& [token, vec] : attrs.entries())
        data["attr/" + token] = blob_from(vec, {static_cast<std::uint32_t>(vec.size())});
    data["state/step"] = scalar_blob(static_cast<double>(state.step));
    data["state/alpha"] = scalar_blob(hcfg.alpha);
    data["state/beta"] = scalar_blob(hcfg.beta);
    data["state/mode"] = scalar_blob(mode == PrototypeMode::Injector ? 0.0 : 1.0);
    return data;
}

template <typename Real>
LoadedModel<Real> from_checkpoint(const CheckpointData& data) {
    LoadedModel<Real> model;
    bool saw_param = false;
    for (const auto& [key, blob] : data) {
        if (key.rfind("param/", 0) == 0) {
            Shape shape;
            for (std::uint32_t d : blob.dims) shape.push_back(static_cast<int>(d));
            std::vector<Real> values(blob.data.begin(), blob.data.end());
            model.state.params.insert(key.substr(6),
                                      Tensor<Real>::variable(std::move(shape), std::move(values)));
            saw_param = true;
        } else if (key.rfind("vel/", 0) == 0) {
            model.state.velocity[key.substr(4)] =
                std::vector<Real>(blob.data.begin(), blob.data.end());
        } else if (key.rfind("attr/", 0) == 0) {
            model.attrs.insert_raw(key.substr(5),
                                   std::vector<double>(blob.data.begin(), blob.data.end()));
        }
    }
    auto scalar = [&](const std::string& key) {
        auto it = data.find(key);
        if (it == data.end() || it->second.data.size() != 1)
            throw CheckpointError("checkpoint lacks required entry '" + key + "'");
        return static_cast<double>(it->second.data[0]);
    };
    model.state.step = static_cast<long>(scalar("state/step"));
    model.head.alpha = scalar("state/alpha");
    model.head.beta = scalar("state/beta");
    model.mode = scalar("state/mode") == 0.0 ? PrototypeMode::Injector : PrototypeMode::MeanPool;
    if (!saw_param || !model.state.params.has(ParameterStore<Real>::kRhoName))
        throw CheckpointError("checkpoint holds no parameter tensors");
    if (!model.attrs.has(kBackgroundToken))
        throw CheckpointError("checkpoint lacks the background attribute");
    return model;
}

template <typename Real>
void save_model(const std::string& path, const ModelState<Real>& state,
                const AttributeTable& attrs, const HeadConfig& hcfg, PrototypeMode mode) {
    write_checkpoint(path, to_checkpoint(state, attrs, hcfg, mode));
}

template <typename Real>
LoadedModel<Real> load_model(const std::string& path) {
    return from_checkpoint<Real>(read_checkpoint(path));
}

template <typename Real>
RunResult run_training(const DatasetIndex& index, const AttributeTable& attrs,
                       const TrainConfig& tcfg, const HeadConfig& hcfg,
                       const FeatureExtractorConfig& fcfg, int heldout_fold,
                       const std::string& checkpoint_path, const LogFn& log,
                       std::optional<ModelState<Real>> resume) {
    tcfg.validate();
    hcfg.validate();
    fcfg.validate();
    if (heldout_fold < 0 || heldout_fold >= index.fold_count())
        throw ConfigError("held-out fold " + std::to_string(heldout_fold) +
                          " out of range for " + std::to_string(index.fold_count()) + " folds");

    ModelState<Real> state =
        resume.has_value() ? std::move(*resume) : ModelState<Real>::init(fcfg, tcfg);

    EvalOptions eval_opts;
    eval_opts.heldout_fold = heldout_fold;
    eval_opts.episodes = tcfg.eval_episodes;
    eval_opts.c_way = tcfg.c_way;
    eval_opts.k_shot = tcfg.k_shot;
    eval_opts.n_query = tcfg.n_query;
    eval_opts.annotation = tcfg.eval_annotation;
    eval_opts.seed = tcfg.seed;

    double window_loss = 0.0;
    long window_count = 0;
    while (state.step < tcfg.episodes_total) {
        Rng rng(substream_seed(tcfg.seed, "train", static_cast<std::uint64_t>(state.step)));
        Episode ep = sample_episode(index, Split::Train, heldout_fold, tcfg.c_way, tcfg.k_shot,
                                    tcfg.n_query, rng);
        for (auto& item : ep.support) item.mask = degrade_mask(item.mask, tcfg.annotation, rng);
        auto losses = train_step(state, index, ep, attrs, tcfg, hcfg);
        window_loss += losses.normalized;
        ++window_count;

        if (tcfg.eval_every > 0 && state.step % tcfg.eval_every == 0 &&
            state.step < tcfg.episodes_total) {
            auto report = evaluate(state.params, attrs, hcfg, tcfg.prototype_mode, index, eval_opts);
            if (log)
                log("episode " + std::to_string(state.step) + " avg_loss=" +
                    std::to_string(window_loss / std::max<long>(window_count, 1)) +
                    " eval_mean_iou=" + std::to_string(report.mean_iou));
            window_loss = 0.0;
            window_count = 0;
            if (!checkpoint_path.empty())
                save_model(checkpoint_path, state, attrs, hcfg, tcfg.prototype_mode);
        }
    }

    RunResult result;
    result.final_report = evaluate(state.params, attrs, hcfg, tcfg.prototype_mode, index, eval_opts);
    result.result_line = result_line(result.final_report, tcfg.c_way, tcfg.k_shot,
                                     annotation_to_string(tcfg.eval_annotation));
    if (!checkpoint_path.empty())
        save_model(checkpoint_path, state, attrs, hcfg, tcfg.prototype_mode);
    if (log) log(result.result_line);
    return result;
}

template <typename Real>
SegmentationMask predict_segmentation(
    const LoadedModel<Real>& model,
    const std::vector<std::tuple<RgbImage, SegmentationMask, std::string>>& support,
    const RgbImage& query) {
    if (support.empty()) throw ContractError("predict needs at least one support item");

    std::vector<std::string> tokens;
    for (const auto& [img, mask, token] : support) tokens.push_back(token);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    std::map<std::string, int> id_of;
    std::vector<int> roster;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        model.attrs.at(tokens[i]); // throws UnknownClassError up front
        id_of[tokens[i]] = static_cast<int>(i) + 1;
        roster.push_back(static_cast<int>(i) + 1);
    }
    ClassNamer namer = [&tokens](int id) { return tokens[id - 1]; };

    Tape<Real> tape;
    tape.set_recording(false);
    const double lambda_value = std::exp(static_cast<double>(
        model.state.params.at(ParameterStore<Real>::kRhoName).values()[0]));
    auto lambda = Tensor<Real>::scalar(static_cast<Real>(lambda_value));

    std::deque<SegmentationMask> remapped;
    std::vector<SupportView<Real>> views;
    for (const auto& [img, mask, token] : support) {
        SegmentationMask m = mask;
        const std::uint8_t id = static_cast<std::uint8_t>(id_of.at(token));
        for (auto& px : m.v) px = px != 0 ? id : 0;
        remapped.push_back(std::move(m));
        auto features = extract(tape, model.state.params, image_to_tensor<Real>(img));
        views.push_back({features, &remapped.back(), id_of.at(token)});
    }
    auto solution =
        solve_support(tape, views, roster, model.attrs, namer, lambda, model.mode);
    auto features = extract(tape, model.state.params, image_to_tensor<Real>(query));
    auto stack = similarity(tape, tape.l2_normalize_pixels(features), solution);
    return predict(stack, model.head);
}

template struct ModelState<float>;
template struct ModelState<double>;
template struct LoadedModel<float>;
template struct LoadedModel<double>;
template StepLosses forward_losses(const ParameterStore<float>&, const DatasetIndex&,
                                   const Episode&, const AttributeTable&, const TrainConfig&,
                                   const HeadConfig&);
template StepLosses forward_losses(const ParameterStore<double>&, const DatasetIndex&,
                                   const Episode&, const AttributeTable&, const TrainConfig&,
                                   const HeadConfig&);
template StepLosses train_step(ModelState<float>&, const DatasetIndex&, const Episode&,
                               const AttributeTable&, const TrainConfig&, const HeadConfig&);
template StepLosses train_step(ModelState<double>&, const DatasetIndex&, const Episode&,
                               const AttributeTable&, const TrainConfig&, const HeadConfig&);
template IouReport evaluate(const ParameterStore<float>&, const AttributeTable&,
                            const HeadConfig&, PrototypeMode, const DatasetIndex&,
                            const EvalOptions&);
template IouReport evaluate(const ParameterStore<double>&, const AttributeTable&,
                            const HeadConfig&, PrototypeMode, const DatasetIndex&,
                            const EvalOptions&);
template CheckpointData to_checkpoint(const ModelState<float>&, const AttributeTable&,
                                      const HeadConfig&, PrototypeMode);
template CheckpointData to_checkpoint(const ModelState<double>&, const AttributeTable&,
                                      const HeadConfig&, PrototypeMode);
template LoadedModel<float> from_checkpoint(const CheckpointData&);
template LoadedModel<double> from_checkpoint(const CheckpointData&);
template void save_model(const std::string&, const ModelState<float>&, const AttributeTable&,
                         const HeadConfig&, PrototypeMode);
template void save_model(const std::string&, const ModelState<double>&, const AttributeTable&,
                         const HeadConfig&, PrototypeMode);
template LoadedModel<float> load_model(const std::string&);
template LoadedModel<double> load_model(const std::string&);
template RunResult run_training(const DatasetIndex&, const AttributeTable&, const TrainConfig&,
                                const HeadConfig&, const FeatureExtractorConfig&, int,
                                const std::string&, const LogFn&,
                                std::optional<ModelState<float>>);
template RunResult run_training(const DatasetIndex&, const AttributeTable&, const TrainConfig&,
                                const HeadConfig&, const FeatureExtractorConfig&, int,
                                const std::string&, const LogFn&,
                                std::optional<ModelState<double>>);
template SegmentationMask predict_segmentation(
    const LoadedModel<float>&,
    const std::vector<std::tuple<RgbImage, SegmentationMask, std::string>>&, const RgbImage&);
template SegmentationMask predict_segmentation(
    const LoadedModel<double>&,
    const std::vector<std::tuple<RgbImage, SegmentationMask, std::string>>&, const RgbImage&);

} // namespace sml
