#include "sml.h"

#include <cstring>
#include <filesystem>
#include <string>

#include "sml/config.hpp"
#include "sml/errors.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

int status_of(const std::exception& e) {
    if (dynamic_cast<const sml::ConfigError*>(&e)) return SML_ERR_CONFIG;
    if (dynamic_cast<const sml::IoError*>(&e)) return SML_ERR_IO;
    if (dynamic_cast<const sml::TrainAbortError*>(&e)) return SML_ERR_TRAIN;
    if (dynamic_cast<const sml::CheckpointError*>(&e)) return SML_ERR_CHECKPOINT;
    if (dynamic_cast<const sml::UnknownClassError*>(&e)) return SML_ERR_UNKNOWN_CLASS;
    return SML_ERR_INTERNAL;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SML_OK;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (...) {
        g_last_error = "unknown failure";
        return SML_ERR_INTERNAL;
    }
}

} // namespace

struct sml_config {
    sml::RunConfig cfg;
};

struct sml_model {
    sml::LoadedModel<float> model;
};

extern "C" {

const char* sml_version(void) {
    return "0.1.0";
}

const char* sml_last_error(void) {
    return g_last_error.c_str();
}

void sml_string_free(char* s) {
    delete[] s;
}

int sml_config_create(sml_config** out) {
    return guarded([&] {
        if (!out) throw sml::ContractError("out must not be null");
        *out = new sml_config{};
    });
}

int sml_config_load(const char* path, sml_config** out) {
    return guarded([&] {
        if (!path || !out) throw sml::ContractError("path and out must not be null");
        auto cfg = sml::parse_config_file(path);
        *out = new sml_config{std::move(cfg)};
    });
}

int sml_config_set(sml_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        if (!cfg || !key || !value) throw sml::ContractError("null argument");
        sml::apply_config_entry(cfg->cfg, key, value);
    });
}

void sml_config_free(sml_config* cfg) {
    delete cfg;
}

int sml_dataset_generate(const sml_config* cfg, const char* out_dir, char** manifest_path_out) {
    return guarded([&] {
        if (!cfg || !out_dir) throw sml::ContractError("null argument");
        cfg->cfg.synth.validate();
        sml::generate(cfg->cfg.synth, out_dir);
        if (manifest_path_out)
            *manifest_path_out =
                dup_string((std::filesystem::path(out_dir) / "manifest.txt").string());
    });
}

int sml_train_run(const sml_config* cfg, int heldout_fold, sml_log_fn log, void* user,
                  char** result_line_out) {
    return guarded([&] {
        if (!cfg) throw sml::ContractError("null config");
        cfg->cfg.validate();
        auto index = sml::DatasetIndex::load(cfg->cfg.dataset_dir);
        auto attrs = sml::load_embeddings(cfg->cfg.resolved_attributes_path());
        sml::LogFn logger;
        if (log) logger = [log, user](const std::string& line) { log(line.c_str(), user); };
        auto result = sml::run_training<float>(index, attrs, cfg->cfg.train, cfg->cfg.head,
                                               cfg->cfg.extractor, heldout_fold,
                                               cfg->cfg.checkpoint_path, logger);
        if (result_line_out) *result_line_out = dup_string(result.result_line);
    });
}

int sml_model_load(const char* checkpoint_path, sml_model** out) {
    return guarded([&] {
        if (!checkpoint_path || !out) throw sml::ContractError("null argument");
        *out = new sml_model{sml::load_model<float>(checkpoint_path)};
    });
}

void sml_model_free(sml_model* model) {
    delete model;
}

int sml_eval_run(const sml_config* cfg, const sml_model* model, int heldout_fold,
                 char** report_out) {
    return guarded([&] {
        if (!cfg || !model) throw sml::ContractError("null argument");
        auto index = sml::DatasetIndex::load(cfg->cfg.dataset_dir);
        if (heldout_fold < 0 || heldout_fold >= index.fold_count())
            throw sml::ConfigError("held-out fold " + std::to_string(heldout_fold) +
                                   " out of range");
        sml::EvalOptions opts;
        opts.heldout_fold = heldout_fold;
        opts.episodes = cfg->cfg.train.eval_episodes;
        opts.c_way = cfg->cfg.train.c_way;
        opts.k_shot = cfg->cfg.train.k_shot;
        opts.n_query = cfg->cfg.train.n_query;
        opts.annotation = cfg->cfg.train.eval_annotation;
        opts.seed = cfg->cfg.train.seed;
        auto report = sml::evaluate(model->model.state.params, model->model.attrs,
                                    model->model.head, model->model.mode, index, opts);
        std::map<int, std::string> names;
        for (int id : index.class_ids()) names[id] = index.class_name(id);
        std::string text = sml::format_report(report, names);
        text += sml::result_line(report, opts.c_way, opts.k_shot,
                                 sml::annotation_to_string(opts.annotation));
        text += "\n";
        if (report_out) *report_out = dup_string(text);
    });
}

int sml_model_predict(const sml_model* model, const char* const* support_images,
                      const char* const* support_masks, const char* const* support_classes,
                      int support_count, const char* query_image, const char* out_mask_path,
                      long long* fg_pixels_out) {
    return guarded([&] {
        if (!model || !support_images || !support_masks || !support_classes || !query_image ||
            !out_mask_path)
            throw sml::ContractError("null argument");
        if (support_count < 1) throw sml::ConfigError("need at least one support triple");

        std::vector<std::tuple<sml::RgbImage, sml::SegmentationMask, std::string>> support;
        for (int i = 0; i < support_count; ++i) {
            auto img = sml::read_ppm(support_images[i]);
            auto mask = sml::mask_from_gray(sml::read_pgm(support_masks[i]),
                                            sml::MaskProvenance::Dense);
            support.emplace_back(std::move(img), std::move(mask), support_classes[i]);
        }
        auto query = sml::read_ppm(query_image);
        auto pred = sml::predict_segmentation(model->model, support, query);
        sml::write_pgm(out_mask_path, sml::mask_to_gray(pred));
        if (fg_pixels_out) {
            long long fg = 0;
            for (auto px : pred.v) fg += px != 0;
            *fg_pixels_out = fg;
        }
    });
}

} // extern "C"
