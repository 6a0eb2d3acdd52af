#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvematch/image.hpp"

namespace curvematch {

struct ConvSpec {
    int channels = 0;
    int kernel = 0;
    int stride = 1;
    int pad = 0;
};

struct PoolSpec {
    int kernel = 0;
    int stride = 0;
};

struct LayerSpec {
    enum class Kind { Conv, ReLU, MaxPool, Gap };
    Kind kind = Kind::Conv;
    ConvSpec conv;
    PoolSpec pool;

    static LayerSpec make_conv(int n, int k, int s, int p);
    static LayerSpec make_relu();
    static LayerSpec make_pool(int k, int s);
    static LayerSpec make_gap();
};

struct LayerShape {
    int size = 0;  // feature maps are square
    int channels = 0;
};

// Sub-network architecture. The embedding is the global average pool of the
// layer at embed_tap; by default that is the activation after the last
// convolution.
struct NetConfig {
    int input_size = 64;
    std::vector<LayerSpec> layers;
    int embed_tap = -1;  // -1 resolves to the default tap

    void validate() const;
    std::vector<LayerShape> shapes() const;  // output shape per layer
    int gap_index() const;
    int resolved_tap() const;
    int embed_dim() const;
    // one tap per conv depth (the activation following each conv)
    std::vector<int> tappable_layers() const;

    static NetConfig tiny();
    static NetConfig paper_alexnet_conv4();
    static NetConfig preset(const std::string& name);
};

// One parameter set; both inputs of a pair run through it (weight tying is
// structural, there is no second copy).
template <typename Scalar>
struct EmbeddingNetT {
    NetConfig config;
    std::uint64_t rng_seed = 0;
    std::vector<std::vector<Scalar>> weights;  // per layer, empty unless conv
    std::vector<std::vector<Scalar>> biases;

    static EmbeddingNetT random_init(const NetConfig& cfg, std::uint64_t seed);

    template <typename Other>
    EmbeddingNetT<Other> cast() const {
        EmbeddingNetT<Other> out;
        out.config = config;
        out.rng_seed = rng_seed;
        out.weights.resize(weights.size());
        out.biases.resize(biases.size());
        for (std::size_t i = 0; i < weights.size(); ++i) {
            out.weights[i].assign(weights[i].begin(), weights[i].end());
            out.biases[i].assign(biases[i].begin(), biases[i].end());
        }
        return out;
    }
};

using EmbeddingNet = EmbeddingNetT<float>;
using EmbeddingNetD = EmbeddingNetT<double>;

// Per-layer outputs plus max-pool argmax trails, kept for backprop.
template <typename Scalar>
struct ForwardCacheT {
    std::vector<std::vector<Scalar>> outputs;
    std::vector<std::vector<std::int32_t>> pool_argmax;
};

template <typename Scalar>
struct GradientsT {
    std::vector<std::vector<Scalar>> weights;
    std::vector<std::vector<Scalar>> biases;

    static GradientsT zeros_like(const EmbeddingNetT<Scalar>& net);
    void add(const GradientsT& other);
};

// Embedding of a binary image already sized to config.input_size.
template <typename Scalar>
std::vector<Scalar> forward(const EmbeddingNetT<Scalar>& net, const BinaryImage& image);

template <typename Scalar>
std::vector<Scalar> image_planes(const EmbeddingNetT<Scalar>& net, const BinaryImage& image);

template <typename Scalar>
std::vector<Scalar> forward_cached(const EmbeddingNetT<Scalar>& net,
                                   const std::vector<Scalar>& input, ForwardCacheT<Scalar>& cache);

// Backprop of an embedding gradient down to parameter gradients.
template <typename Scalar>
void backward(const EmbeddingNetT<Scalar>& net, const std::vector<Scalar>& input,
              const ForwardCacheT<Scalar>& cache, const std::vector<Scalar>& grad_embedding,
              GradientsT<Scalar>& grads);

// loss = l*D^2 + (1-l)*max(m - D, 0)^2 with D = |fa - fb|_2
template <typename Scalar>
struct ContrastiveResult {
    Scalar loss = 0;
    std::vector<Scalar> grad_a;
    std::vector<Scalar> grad_b;
};

template <typename Scalar>
ContrastiveResult<Scalar> contrastive_loss(const std::vector<Scalar>& fa,
                                           const std::vector<Scalar>& fb, int label,
                                           double margin);

// Training pair, both sides masked and resized to the net input size.
struct LabeledPair {
    BinaryImage a;
    BinaryImage b;
    int label = 0;
};

struct TrainConfig {
    double margin = 0.5;
    int batch_size = 32;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double base_lr = 1e-4;
    int max_iters = 2000;           // desk-scale default; paper regime used 50000
    double lr_decay_factor = 0.5;
    int lr_decay_every = 0;         // 0 -> max_iters / 4
    int neg_pos_cap = 10;           // <= 0 keeps every negative
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
    int decay_interval() const;
    double lr_at(int iter) const;
};

template <typename Scalar>
struct SgdStateT {
    std::vector<std::vector<Scalar>> w_vel;
    std::vector<std::vector<Scalar>> b_vel;

    static SgdStateT zeros_like(const EmbeddingNetT<Scalar>& net);
};

// One SGD step over a batch: mean contrastive loss and gradients across the
// pairs, momentum + weight decay update. Pair forward/backward passes may
// fan out over threads; the merge order is fixed, so results do not depend
// on the thread count. Returns the batch loss.
template <typename Scalar>
Scalar backward_and_step(EmbeddingNetT<Scalar>& net, const std::vector<LabeledPair>& batch,
                         const TrainConfig& config, SgdStateT<Scalar>& state, int iter);

}  // namespace curvematch
