#pragma once

#include <string>

#include "sml/seghead.hpp"
#include "sml/synthdata.hpp"
#include "sml/trainer.hpp"

namespace sml {

/// One run configuration covering generation, model, training and paths.
/// Parsed from plain "key = value" lines; '#' starts a comment; unknown keys
/// are rejected. Command-line flags override file values which override
/// defaults.
struct RunConfig {
    SynthConfig synth;
    FeatureExtractorConfig extractor;
    TrainConfig train;
    HeadConfig head;

    std::string dataset_dir = "data";
    std::string attributes_path; // defaults to <dataset_dir>/attributes.txt
    std::string checkpoint_path = "checkpoint.stf";

    std::string resolved_attributes_path() const;
    void validate() const;
};

RunConfig parse_config_file(const std::string& path);

/// Applies one "key" = "value" override; throws ConfigError for unknown keys
/// or unparsable values.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

} // namespace sml
