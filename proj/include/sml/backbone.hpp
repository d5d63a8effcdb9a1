#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sml/episodes.hpp"
#include "sml/pnm.hpp"
#include "sml/tensor.hpp"

namespace sml {

/// Compact stride-1 same-padding convolutional feature extractor. The final
/// block's channel count is the embedding dimensionality d; relu sits between
/// blocks, the last block stays linear so per-pixel embeddings are signed.
struct FeatureExtractorConfig {
    int in_channels = 3;
    std::vector<int> block_channels = {16, 32, 32};
    int kernel = 3;

    int d() const { return block_channels.back(); }
    void validate() const;
};

/// Named map of trainable leaves (block kernels/biases plus the injector's
/// log-lambda). Iteration order is name-sorted.
template <typename Real>
class ParameterStore {
public:
    static constexpr const char* kRhoName = "injector/rho";

    ParameterStore() = default;

    /// Fresh parameters: kernels from a fan-in-scaled normal, biases zero,
    /// rho = ln(lambda_init). Each tensor draws from its own named substream
    /// so initialization does not depend on creation order.
    static ParameterStore init(const FeatureExtractorConfig& cfg, std::uint64_t seed,
                               double lambda_init);

    void insert(const std::string& name, Tensor<Real> t);
    const Tensor<Real>& at(const std::string& name) const;
    Tensor<Real>& at(const std::string& name);
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    std::vector<std::string> names() const;
    std::size_t size() const { return params_.size(); }
    void zero_grad_all();

    const std::map<std::string, Tensor<Real>>& entries() const { return params_; }

private:
    std::map<std::string, Tensor<Real>> params_;
};

/// Image bytes -> constant h x w x 3 tensor scaled to [0, 1].
template <typename Real>
Tensor<Real> image_to_tensor(const RgbImage& img);

/// f(image): per-pixel d-vector map at full image resolution. The block
/// structure is read back from the parameter names and shapes.
template <typename Real>
Tensor<Real> extract(Tape<Real>& tape, const ParameterStore<Real>& params,
                     const Tensor<Real>& image);

/// Raw (un-normalized) masked means: fg over pixels == class_id, bg over the
/// rest. Throws DegenerateMaskError when either region is empty.
template <typename Real>
std::pair<Tensor<Real>, Tensor<Real>> masked_mean(Tape<Real>& tape, const Tensor<Real>& features,
                                                  const SegmentationMask& mask, int class_id);

/// Masked means followed by L2 normalization, the embedding pair an episode's
/// design columns are built from.
template <typename Real>
std::pair<Tensor<Real>, Tensor<Real>> masked_average_pool(Tape<Real>& tape,
                                                          const Tensor<Real>& features,
                                                          const SegmentationMask& mask,
                                                          int class_id,
                                                          Real eps = Real(1e-8));

} // namespace sml
