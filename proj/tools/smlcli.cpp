// Command-line front end. Everything goes through the C API in sml.h; flag
// values override config-file keys which override defaults.

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "sml.h"

namespace {

void print_log(const char* line, void*) {
    std::printf("%s\n", line);
    std::fflush(stdout);
}

int fail(int status) {
    std::fprintf(stderr, "error: %s\n", sml_last_error());
    return status;
}

struct ConfigHandle {
    sml_config* cfg = nullptr;
    ~ConfigHandle() { sml_config_free(cfg); }
};

struct ModelHandle {
    sml_model* model = nullptr;
    ~ModelHandle() { sml_model_free(model); }
};

int load_config(const std::string& path, ConfigHandle& handle) {
    return path.empty() ? sml_config_create(&handle.cfg) : sml_config_load(path.c_str(), &handle.cfg);
}

int apply_overrides(ConfigHandle& handle,
                    const std::vector<std::pair<std::string, std::string>>& overrides) {
    for (const auto& [key, value] : overrides) {
        int rc = sml_config_set(handle.cfg, key.c_str(), value.c_str());
        if (rc != SML_OK) return rc;
    }
    return SML_OK;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot semantic segmentation with attribute-fused prototypes"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint, query, out_mask, annotation;
    int fold = 0, episodes = -1, shots = -1, ways = -1;
    std::vector<std::string> support_triples;

    auto* gen = app.add_subcommand("gen-data", "Render the synthetic dataset");
    gen->add_option("--config", config_path, "Config file")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Meta-train, holding one fold out");
    train->add_option("--config", config_path, "Config file")->required();
    train->add_option("--fold", fold, "Held-out fold index")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out fold");
    eval->add_option("--config", config_path, "Config file")->required();
    eval->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
    eval->add_option("--fold", fold, "Held-out fold index")->required();
    eval->add_option("--episodes", episodes, "Test episode count");
    eval->add_option("--annotation", annotation, "dense|bbox|scribble");
    eval->add_option("--shots", shots, "Support shots per class");
    eval->add_option("--ways", ways, "Classes per episode");

    auto* predict = app.add_subcommand("predict", "Segment one query image");
    predict->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
    predict->add_option("--support", support_triples, "img:mask:class triple")->required();
    predict->add_option("--query", query, "Query image (PPM)")->required();
    predict->add_option("--out", out_mask, "Output mask path (PGM)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return SML_ERR_CONFIG;
    }

    if (gen->parsed()) {
        ConfigHandle cfg;
        int rc = load_config(config_path, cfg);
        if (rc != SML_OK) return fail(rc);
        char* manifest = nullptr;
        rc = sml_dataset_generate(cfg.cfg, out_dir.c_str(), &manifest);
        if (rc != SML_OK) return fail(rc);
        std::printf("%s\n", manifest);
        sml_string_free(manifest);
        return 0;
    }

    if (train->parsed()) {
        ConfigHandle cfg;
        int rc = load_config(config_path, cfg);
        if (rc != SML_OK) return fail(rc);
        char* result = nullptr;
        rc = sml_train_run(cfg.cfg, fold, print_log, nullptr, &result);
        if (rc != SML_OK) return fail(rc);
        sml_string_free(result);
        return 0;
    }

    if (eval->parsed()) {
        ConfigHandle cfg;
        int rc = load_config(config_path, cfg);
        if (rc != SML_OK) return fail(rc);
        std::vector<std::pair<std::string, std::string>> overrides;
        if (episodes >= 0) overrides.emplace_back("eval_episodes", std::to_string(episodes));
        if (!annotation.empty()) overrides.emplace_back("eval_annotation", annotation);
        if (shots >= 0) overrides.emplace_back("k_shot", std::to_string(shots));
        if (ways >= 0) overrides.emplace_back("c_way", std::to_string(ways));
        rc = apply_overrides(cfg, overrides);
        if (rc != SML_OK) return fail(rc);

        ModelHandle model;
        rc = sml_model_load(checkpoint.c_str(), &model.model);
        if (rc != SML_OK) return fail(rc);
        char* report = nullptr;
        rc = sml_eval_run(cfg.cfg, model.model, fold, &report);
        if (rc != SML_OK) return fail(rc);
        std::printf("%s", report);
        sml_string_free(report);
        return 0;
    }

    if (predict->parsed()) {
        std::vector<std::string> images, masks, classes;
        for (const std::string& triple : support_triples) {
            auto first = triple.find(':');
            auto second = first == std::string::npos ? std::string::npos
                                                     : triple.find(':', first + 1);
            if (second == std::string::npos || triple.find(':', second + 1) != std::string::npos) {
                std::fprintf(stderr, "error: --support expects img:mask:class, got '%s'\n",
                             triple.c_str());
                return SML_ERR_CONFIG;
            }
            images.push_back(triple.substr(0, first));
            masks.push_back(triple.substr(first + 1, second - first - 1));
            classes.push_back(triple.substr(second + 1));
        }
        std::vector<const char*> image_ptrs, mask_ptrs, class_ptrs;
        for (std::size_t i = 0; i < images.size(); ++i) {
            image_ptrs.push_back(images[i].c_str());
            mask_ptrs.push_back(masks[i].c_str());
            class_ptrs.push_back(classes[i].c_str());
        }

        ModelHandle model;
        int rc = sml_model_load(checkpoint.c_str(), &model.model);
        if (rc != SML_OK) return fail(rc);
        long long fg = 0;
        rc = sml_model_predict(model.model, image_ptrs.data(), mask_ptrs.data(),
                               class_ptrs.data(), static_cast<int>(image_ptrs.size()),
                               query.c_str(), out_mask.c_str(), &fg);
        if (rc != SML_OK) return fail(rc);
        std::printf("foreground_pixels %lld\n", fg);
        return 0;
    }
    return SML_ERR_CONFIG;
}
