#include "sml/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sml {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long parse_long(const std::string& key, const std::string& value) {
    long out = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || p != value.data() + value.size())
        throw ConfigError("key '" + key + "': cannot parse integer from '" + value + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse real from '" + value + "'");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream stream(s);
    std::string part;
    while (std::getline(stream, part, sep)) out.push_back(trim(part));
    return out;
}

std::vector<SynthClass> parse_classes(const std::string& value) {
    std::vector<SynthClass> out;
    for (const std::string& entry : split(value, ',')) {
        auto parts = split(entry, ':');
        if (parts.size() != 2)
            throw ConfigError("classes entries must look like shape:hue, got '" + entry + "'");
        out.push_back({shape_from_string(parts[0]), hue_from_string(parts[1])});
    }
    if (out.empty()) throw ConfigError("classes must not be empty");
    return out;
}

std::vector<int> parse_channels(const std::string& value) {
    std::vector<int> out;
    for (const std::string& entry : split(value, ','))
        out.push_back(static_cast<int>(parse_long("block_channels", entry)));
    if (out.empty()) throw ConfigError("block_channels must not be empty");
    return out;
}

} // namespace

std::string RunConfig::resolved_attributes_path() const {
    if (!attributes_path.empty()) return attributes_path;
    return (std::filesystem::path(dataset_dir) / "attributes.txt").string();
}

void RunConfig::validate() const {
    synth.validate();
    extractor.validate();
    train.validate();
    head.validate();
    if (dataset_dir.empty()) throw ConfigError("dataset_dir must not be empty");
    if (checkpoint_path.empty()) throw ConfigError("checkpoint must not be empty");
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "image_size") cfg.synth.image_size = static_cast<int>(parse_long(key, value));
    else if (key == "images_per_class")
        cfg.synth.images_per_class = static_cast<int>(parse_long(key, value));
    else if (key == "folds") cfg.synth.folds = static_cast<int>(parse_long(key, value));
    else if (key == "noise_sigma") cfg.synth.noise_sigma = parse_double(key, value);
    else if (key == "classes") cfg.synth.classes = parse_classes(value);
    else if (key == "seed") {
        cfg.synth.seed = static_cast<std::uint64_t>(parse_long(key, value));
        cfg.train.seed = cfg.synth.seed;
    } else if (key == "dataset_dir") cfg.dataset_dir = value;
    else if (key == "attributes") cfg.attributes_path = value;
    else if (key == "checkpoint") cfg.checkpoint_path = value;
    else if (key == "episodes_total") cfg.train.episodes_total = parse_long(key, value);
    else if (key == "lr0") cfg.train.lr0 = parse_double(key, value);
    else if (key == "momentum") cfg.train.momentum = parse_double(key, value);
    else if (key == "weight_decay") cfg.train.weight_decay = parse_double(key, value);
    else if (key == "lr_decay_factor") cfg.train.lr_decay_factor = parse_double(key, value);
    else if (key == "lr_decay_every") cfg.train.lr_decay_every = parse_long(key, value);
    else if (key == "c_way") cfg.train.c_way = static_cast<int>(parse_long(key, value));
    else if (key == "k_shot") cfg.train.k_shot = static_cast<int>(parse_long(key, value));
    else if (key == "n_query") cfg.train.n_query = static_cast<int>(parse_long(key, value));
    else if (key == "annotation") cfg.train.annotation = annotation_from_string(value);
    else if (key == "eval_annotation") cfg.train.eval_annotation = annotation_from_string(value);
    else if (key == "eval_every") cfg.train.eval_every = parse_long(key, value);
    else if (key == "eval_episodes") cfg.train.eval_episodes = parse_long(key, value);
    else if (key == "lambda_init") cfg.train.lambda_init = parse_double(key, value);
    else if (key == "prototype_mode")
        cfg.train.prototype_mode = prototype_mode_from_string(value);
    else if (key == "block_channels") cfg.extractor.block_channels = parse_channels(value);
    else if (key == "kernel") cfg.extractor.kernel = static_cast<int>(parse_long(key, value));
    else if (key == "alpha") cfg.head.alpha = parse_double(key, value);
    else if (key == "beta") cfg.head.beta = parse_double(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    long line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key = value in " + path, line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError("empty key or value in " + path, line_no);
        try {
            apply_config_entry(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ParseError(std::string(e.what()) + " in " + path, line_no);
        }
    }
    return cfg;
}

} // namespace sml
