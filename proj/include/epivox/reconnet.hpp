#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "epivox/tensor.hpp"

namespace epivox::net {

enum class Family { baseline, efficient };
enum class Tier { fast, accurate };

std::string family_name(Family f);
std::string tier_name(Tier t);
Family family_from_name(const std::string& s);
Tier tier_from_name(const std::string& s);

// Architecture description. The baseline family decodes every view separately
// and merges the volumes with score-weighted fusion; the efficient family
// collapses the stacked view latents with one 3D convolution and runs a single
// decoder. The fast tier drops the refiner and uses smaller deconv kernels.
struct ModelConfig {
    Family family = Family::efficient;
    Tier tier = Tier::fast;
    int num_views = 2;
    int image_size = 64;
    std::vector<int> encoder_channels;        // one entry per conv+pool block
    std::array<int, 4> latent{2, 4, 4, 4};    // (C, D, H, W), D = H = W
    std::vector<int> decoder_channels;        // one entry per upsample block
    int resolution = 32;                      // output volume edge R
    bool refiner_enabled = false;
    int refiner_channels = 8;
    int scorer_hidden = 4;
    std::uint64_t seed = 1;

    int encoder_blocks() const { return tier == Tier::fast ? 3 : 4; }
    int deconv_kernel() const { return tier == Tier::fast ? 2 : 4; }
    int deconv_padding() const { return tier == Tier::fast ? 0 : 1; }

    void validate() const;  // InvalidSpec when the shape arithmetic is broken

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
    static ModelConfig from_json_file(const std::string& path);

    // sensible widths for a given family/tier/V/resolution at image size 64
    static ModelConfig make_default(Family family, Tier tier, int num_views,
                                    int resolution);
};

using ModelParams = std::map<std::string, ad::Tensor>;

// Deterministic fan-in-scaled uniform init. The view-fusion kernel starts as
// uniform averaging over views; the refiner head starts at zero so the refiner
// is the identity at initialization.
ModelParams init_params(const ModelConfig& cfg);

// shared-weight 2D conv stack per view, reshaped to the 3D latent grid
std::vector<ad::Tensor> encode_views(const ModelConfig& cfg, const ModelParams& params,
                                     const std::vector<ad::Tensor>& images,
                                     ad::Tape* tape = nullptr);

// efficient family: stacked latents collapsed over the view axis by a 3D
// convolution with full view depth and 3x3 spatial extent
ad::Tensor fuse_views_efficient(const ModelConfig& cfg, const ModelParams& params,
                                const std::vector<ad::Tensor>& latents,
                                ad::Tape* tape = nullptr);

struct Decoded {
    ad::Tensor volume;    // [R,R,R] in (0,1)
    ad::Tensor features;  // [C_last,R,R,R], pre-head activations
};
Decoded decode(const ModelConfig& cfg, const ModelParams& params,
               const ad::Tensor& latent, ad::Tape* tape = nullptr);

// per-view raw score map from decoder features (baseline fusion input)
ad::Tensor score_map(const ModelConfig& cfg, const ModelParams& params,
                     const ad::Tensor& features, ad::Tape* tape = nullptr);

// RefinerDisabled unless the config enables it
ad::Tensor refine(const ModelConfig& cfg, const ModelParams& params,
                  const ad::Tensor& volume, ad::Tape* tape = nullptr);

// Full reconstruction pass. The efficient family accepts more images than the
// trained view count by mean-pooling latents in contiguous groups; fewer is a
// ViewCountMismatch. The baseline family accepts any view count.
ad::Tensor forward(const ModelConfig& cfg, const ModelParams& params,
                   const std::vector<ad::Tensor>& images, ad::Tape* tape = nullptr);

struct ComplexityReport {
    struct Row {
        std::string module;
        std::uint64_t params = 0;
        std::uint64_t macs = 0;
    };
    std::vector<Row> rows;
    std::uint64_t total_params = 0;
    std::uint64_t total_macs = 0;
    int num_views = 0;

    const Row& module(const std::string& name) const;
    std::string to_csv() const;  // module,params,macs with a trailing total row
};

// parameter and multiply/add accounting over the exact layers forward runs
ComplexityReport report_complexity(const ModelConfig& cfg);

}  // namespace epivox::net
