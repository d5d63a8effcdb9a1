#include "sml/backbone.hpp"

#include <cmath>

#include "sml/rng.hpp"

namespace sml {

void FeatureExtractorConfig::validate() const {
    if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
    if (block_channels.empty()) throw ConfigError("block_channels must not be empty");
    for (int c : block_channels)
        if (c < 1) throw ConfigError("block channel counts must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel extent must be odd and >= 1");
}

template <typename Real>
ParameterStore<Real> ParameterStore<Real>::init(const FeatureExtractorConfig& cfg,
                                                std::uint64_t seed, double lambda_init) {
    cfg.validate();
    if (!(lambda_init > 0.0)) throw ConfigError("lambda_init must be > 0");
    ParameterStore store;
    int cin = cfg.in_channels;
    for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
        const int cout = cfg.block_channels[b];
        const int k = cfg.kernel;
        const std::string stem = "block" + std::to_string(b);

        Rng rng(substream_seed(seed, "init/" + stem + "/kernel"));
        const double stddev = std::sqrt(2.0 / (static_cast<double>(k) * k * cin));
        std::vector<Real> kv(static_cast<std::size_t>(k) * k * cin * cout);
        for (auto& v : kv) v = static_cast<Real>(rng.normal() * stddev);
        store.insert(stem + "/kernel", Tensor<Real>::variable({k, k, cin, cout}, std::move(kv)));
        // small positive bias keeps first-layer relus alive at high rates
        std::vector<Real> bv(cout, Real(0.05));
        store.insert(stem + "/bias", Tensor<Real>::variable({cout}, std::move(bv)));
        cin = cout;
    }
    store.insert(kRhoName,
                 Tensor<Real>::variable({1}, {static_cast<Real>(std::log(lambda_init))}));
    return store;
}

template <typename Real>
void ParameterStore<Real>::insert(const std::string& name, Tensor<Real> t) {
    if (!t.requires_grad()) throw ContractError("parameter '" + name + "' must require grad");
    if (!params_.emplace(name, std::move(t)).second)
        throw ContractError("duplicate parameter name '" + name + "'");
}

template <typename Real>
const Tensor<Real>& ParameterStore<Real>::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

template <typename Real>
Tensor<Real>& ParameterStore<Real>::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

template <typename Real>
std::vector<std::string> ParameterStore<Real>::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(name);
    return out;
}

template <typename Real>
void ParameterStore<Real>::zero_grad_all() {
    for (auto& [name, t] : params_) t.zero_grad();
}

template <typename Real>
Tensor<Real> image_to_tensor(const RgbImage& img) {
    std::vector<Real> v(img.px.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = static_cast<Real>(img.px[i]) / Real(255);
    return Tensor<Real>::constant({img.h, img.w, 3}, std::move(v));
}

template <typename Real>
Tensor<Real> extract(Tape<Real>& tape, const ParameterStore<Real>& params,
                     const Tensor<Real>& image) {
    if (image.rank() != 3) throw ContractError("extract expects an h x w x c image tensor");
    Tensor<Real> x = image;
    for (int b = 0;; ++b) {
        const std::string stem = "block" + std::to_string(b);
        if (!params.has(stem + "/kernel")) {
            if (b == 0) throw ContractError("parameter store holds no feature-extractor blocks");
            break;
        }
        if (params.has("block" + std::to_string(b + 1) + "/kernel")) {
            x = tape.relu(tape.conv2d(x, params.at(stem + "/kernel"), params.at(stem + "/bias")));
        } else {
            x = tape.conv2d(x, params.at(stem + "/kernel"), params.at(stem + "/bias"));
        }
    }
    return x;
}

template <typename Real>
std::pair<Tensor<Real>, Tensor<Real>> masked_mean(Tape<Real>& tape, const Tensor<Real>& features,
                                                  const SegmentationMask& mask, int class_id) {
    if (features.rank() != 3) throw ContractError("masked_mean expects h x w x d features");
    const int h = features.shape()[0], w = features.shape()[1], d = features.shape()[2];
    if (mask.h != h || mask.w != w)
        throw ContractError("mask extents " + std::to_string(mask.h) + "x" +
                            std::to_string(mask.w) + " do not match features " +
                            shape_str(features.shape()));

    const std::size_t fg_count = mask.count(class_id);
    const std::size_t bg_count = static_cast<std::size_t>(h) * w - fg_count;
    if (fg_count == 0 || bg_count == 0)
        throw DegenerateMaskError("mask has an empty region for class " +
                                  std::to_string(class_id));

    auto pool = [&](bool foreground, std::size_t count) {
        std::vector<Real> acc(d, Real(0));
        const auto& fv = features.values();
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                if ((mask.at(i, j) == class_id) != foreground) continue;
                const Real* row = fv.data() + (static_cast<std::size_t>(i) * w + j) * d;
                for (int c = 0; c < d; ++c) acc[c] += row[c];
            }
        const Real inv = Real(1) / static_cast<Real>(count);
        for (auto& v : acc) v *= inv;

        SegmentationMask mask_copy = mask;
        Tensor<Real> features_h = features;
        return tape.custom(
            {features}, {d}, std::move(acc),
            [features = features_h, mask_copy = std::move(mask_copy), class_id, foreground, count,
             h, w, d](Tensor<Real>& out) mutable {
                if (!features.requires_grad()) return;
                const Real inv = Real(1) / static_cast<Real>(count);
                auto& fg_grad = features.grad();
                const auto& g = out.grad();
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        if ((mask_copy.at(i, j) == class_id) != foreground) continue;
                        Real* row = fg_grad.data() + (static_cast<std::size_t>(i) * w + j) * d;
                        for (int c = 0; c < d; ++c) row[c] += g[c] * inv;
                    }
            });
    };
    return {pool(true, fg_count), pool(false, bg_count)};
}

template <typename Real>
std::pair<Tensor<Real>, Tensor<Real>> masked_average_pool(Tape<Real>& tape,
                                                          const Tensor<Real>& features,
                                                          const SegmentationMask& mask,
                                                          int class_id, Real eps) {
    auto [fg, bg] = masked_mean(tape, features, mask, class_id);
    return {tape.l2_normalize(fg, eps), tape.l2_normalize(bg, eps)};
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template Tensor<float> image_to_tensor<float>(const RgbImage&);
template Tensor<double> image_to_tensor<double>(const RgbImage&);
template Tensor<float> extract(Tape<float>&, const ParameterStore<float>&, const Tensor<float>&);
template Tensor<double> extract(Tape<double>&, const ParameterStore<double>&,
                                const Tensor<double>&);
template std::pair<Tensor<float>, Tensor<float>> masked_mean(Tape<float>&, const Tensor<float>&,
                                                             const SegmentationMask&, int);
template std::pair<Tensor<double>, Tensor<double>> masked_mean(Tape<double>&,
                                                               const Tensor<double>&,
                                                               const SegmentationMask&, int);
template std::pair<Tensor<float>, Tensor<float>> masked_average_pool(Tape<float>&,
                                                                     const Tensor<float>&,
                                                                     const SegmentationMask&, int,
                                                                     float);
template std::pair<Tensor<double>, Tensor<double>> masked_average_pool(Tape<double>&,
                                                                       const Tensor<double>&,
                                                                       const SegmentationMask&,
                                                                       int, double);

} // namespace sml
