#include "curvematch/net.hpp"

#include <algorithm>
#include <cmath>

#include "curvematch/error.hpp"
#include "curvematch/rng.hpp"

namespace curvematch {

LayerSpec LayerSpec::make_conv(int n, int k, int s, int p) {
    LayerSpec l;
    l.kind = Kind::Conv;
    l.conv = ConvSpec{n, k, s, p};
    return l;
}

LayerSpec LayerSpec::make_relu() {
    LayerSpec l;
    l.kind = Kind::ReLU;
    return l;
}

LayerSpec LayerSpec::make_pool(int k, int s) {
    LayerSpec l;
    l.kind = Kind::MaxPool;
    l.pool = PoolSpec{k, s};
    return l;
}

LayerSpec LayerSpec::make_gap() {
    LayerSpec l;
    l.kind = Kind::Gap;
    return l;
}

// ---------------------------------------------------------------------------
// configuration arithmetic
// ---------------------------------------------------------------------------

void NetConfig::validate() const {
    if (input_size < 1) throw config_error("net input_size must be >= 1");
    if (layers.empty() || layers.back().kind != LayerSpec::Kind::Gap)
        throw config_error("net layer list must end with GAP");
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        if (layers[i].kind == LayerSpec::Kind::Gap)
            throw config_error("GAP must be the terminal layer");
    shapes();        // throws on inconsistent dimensions
    resolved_tap();  // throws on a bad tap
}

std::vector<LayerShape> NetConfig::shapes() const {
    std::vector<LayerShape> out;
    int size = input_size;
    int channels = 1;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        switch (l.kind) {
            case LayerSpec::Kind::Conv: {
                const auto& c = l.conv;
                if (c.channels < 1 || c.kernel < 1 || c.stride < 1 || c.pad < 0)
                    throw config_error("bad conv spec at layer " + std::to_string(i));
                const int padded = size + 2 * c.pad;
                if (c.kernel > padded)
                    throw config_error("conv kernel exceeds input at layer " + std::to_string(i));
                size = (padded - c.kernel) / c.stride + 1;
                channels = c.channels;
                break;
            }
            case LayerSpec::Kind::ReLU:
                break;
            case LayerSpec::Kind::MaxPool: {
                const auto& p = l.pool;
                if (p.kernel < 1 || p.stride < 1)
                    throw config_error("bad pool spec at layer " + std::to_string(i));
                if (p.kernel > size)
                    throw config_error("pool kernel exceeds input at layer " + std::to_string(i));
                size = (size - p.kernel) / p.stride + 1;
                break;
            }
            case LayerSpec::Kind::Gap:
                size = 1;
                break;
        }
        if (size < 1) throw config_error("layer " + std::to_string(i) + " output collapses to 0");
        out.push_back({size, channels});
    }
    return out;
}

int NetConfig::gap_index() const { return static_cast<int>(layers.size()) - 1; }

int NetConfig::resolved_tap() const {
    if (embed_tap >= 0) {
        if (embed_tap >= gap_index())
            throw config_error("embed_tap must name a layer before GAP");
        return embed_tap;
    }
    int last_conv = -1;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerSpec::Kind::Conv) last_conv = static_cast<int>(i);
    if (last_conv < 0) throw config_error("net has no conv layer");
    if (last_conv + 1 < gap_index() && layers[last_conv + 1].kind == LayerSpec::Kind::ReLU)
        return last_conv + 1;
    return last_conv;
}

int NetConfig::embed_dim() const { return shapes()[resolved_tap()].channels; }

std::vector<int> NetConfig::tappable_layers() const {
    std::vector<int> taps;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].kind != LayerSpec::Kind::Conv) continue;
        if (i + 1 < layers.size() - 1 && layers[i + 1].kind == LayerSpec::Kind::ReLU)
            taps.push_back(static_cast<int>(i + 1));
        else
            taps.push_back(static_cast<int>(i));
    }
    return taps;
}

NetConfig NetConfig::tiny() {
    NetConfig c;
    c.input_size = 64;
    c.layers = {LayerSpec::make_conv(16, 5, 2, 2), LayerSpec::make_relu(),
                LayerSpec::make_pool(2, 2),        LayerSpec::make_conv(32, 3, 1, 1),
                LayerSpec::make_relu(),            LayerSpec::make_pool(2, 2),
                LayerSpec::make_conv(64, 3, 1, 1), LayerSpec::make_relu(),
                LayerSpec::make_gap()};
    return c;
}

NetConfig NetConfig::paper_alexnet_conv4() {
    NetConfig c;
    c.input_size = 227;
    c.layers = {LayerSpec::make_conv(96, 11, 4, 0), LayerSpec::make_relu(),
                LayerSpec::make_pool(3, 2),         LayerSpec::make_conv(256, 5, 1, 2),
                LayerSpec::make_relu(),             LayerSpec::make_pool(3, 2),
                LayerSpec::make_conv(384, 3, 1, 1), LayerSpec::make_relu(),
                LayerSpec::make_conv(384, 3, 1, 1), LayerSpec::make_relu(),
                LayerSpec::make_gap()};
    return c;
}

NetConfig NetConfig::preset(const std::string& name) {
    if (name == "tiny") return tiny();
    if (name == "paper-alexnet-conv4") return paper_alexnet_conv4();
    throw argument_error("unknown net preset \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

template <typename Scalar>
EmbeddingNetT<Scalar> EmbeddingNetT<Scalar>::random_init(const NetConfig& cfg,
                                                         std::uint64_t seed) {
    cfg.validate();
    EmbeddingNetT net;
    net.config = cfg;
    net.rng_seed = seed;
    net.weights.resize(cfg.layers.size());
    net.biases.resize(cfg.layers.size());

    Rng rng(derive_seed(seed, "net-init"));
    int in_ch = 1;
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const LayerSpec& l = cfg.layers[i];
        if (l.kind != LayerSpec::Kind::Conv) continue;
        const int fan_in = in_ch * l.conv.kernel * l.conv.kernel;
        const double bound = std::sqrt(6.0 / fan_in);
        auto& w = net.weights[i];
        w.resize(static_cast<std::size_t>(l.conv.channels) * fan_in);
        for (auto& v : w) v = static_cast<Scalar>(rng.uniform(-bound, bound));
        net.biases[i].assign(static_cast<std::size_t>(l.conv.channels), Scalar{0});
        in_ch = l.conv.channels;
    }
    return net;
}

template <typename Scalar>
GradientsT<Scalar> GradientsT<Scalar>::zeros_like(const EmbeddingNetT<Scalar>& net) {
    GradientsT g;
    g.weights.resize(net.weights.size());
    g.biases.resize(net.biases.size());
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        g.weights[i].assign(net.weights[i].size(), Scalar{0});
        g.biases[i].assign(net.biases[i].size(), Scalar{0});
    }
    return g;
}

template <typename Scalar>
void GradientsT<Scalar>::add(const GradientsT& other) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        for (std::size_t j = 0; j < weights[i].size(); ++j) weights[i][j] += other.weights[i][j];
        for (std::size_t j = 0; j < biases[i].size(); ++j) biases[i][j] += other.biases[i][j];
    }
}

template <typename Scalar>
SgdStateT<Scalar> SgdStateT<Scalar>::zeros_like(const EmbeddingNetT<Scalar>& net) {
    SgdStateT s;
    s.w_vel.resize(net.weights.size());
    s.b_vel.resize(net.biases.size());
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        s.w_vel[i].assign(net.weights[i].size(), Scalar{0});
        s.b_vel[i].assign(net.biases[i].size(), Scalar{0});
    }
    return s;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

template <typename Scalar>
std::vector<Scalar> image_planes(const EmbeddingNetT<Scalar>& net, const BinaryImage& image) {
    const int s = net.config.input_size;
    if (image.width != s || image.height != s)
        throw config_error("forward input must be " + std::to_string(s) + "x" +
                           std::to_string(s) + ", got " + std::to_string(image.width) + "x" +
                           std::to_string(image.height));
    std::vector<Scalar> planes(image.pixels.size());
    for (std::size_t i = 0; i < image.pixels.size(); ++i)
        planes[i] = image.pixels[i] ? Scalar{1} : Scalar{0};
    return planes;
}

namespace {

template <typename Scalar>
void conv_forward(const ConvSpec& c, const std::vector<Scalar>& in, int in_size, int in_ch,
                  const std::vector<Scalar>& w, const std::vector<Scalar>& b,
                  std::vector<Scalar>& out, int out_size) {
    const std::size_t in_plane = static_cast<std::size_t>(in_size) * in_size;
    const std::size_t out_plane = static_cast<std::size_t>(out_size) * out_size;
    const std::size_t w_per_oc = static_cast<std::size_t>(in_ch) * c.kernel * c.kernel;
    out.assign(static_cast<std::size_t>(c.channels) * out_plane, Scalar{0});

    for (int oc = 0; oc < c.channels; ++oc) {
        Scalar* op = out.data() + oc * out_plane;
        const Scalar* wc = w.data() + oc * w_per_oc;
        for (int oy = 0; oy < out_size; ++oy) {
            const int iy0 = oy * c.stride - c.pad;
            for (int ox = 0; ox < out_size; ++ox) {
                const int ix0 = ox * c.stride - c.pad;
                Scalar acc = b[oc];
                for (int ic = 0; ic < in_ch; ++ic) {
                    const Scalar* ip = in.data() + ic * in_plane;
                    const Scalar* wk = wc + static_cast<std::size_t>(ic) * c.kernel * c.kernel;
                    for (int ky = 0; ky < c.kernel; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= in_size) continue;
                        const Scalar* row = ip + static_cast<std::size_t>(iy) * in_size;
                        const Scalar* wrow = wk + static_cast<std::size_t>(ky) * c.kernel;
                        const int kx_lo = std::max(0, -ix0);
                        const int kx_hi = std::min(c.kernel, in_size - ix0);
                        for (int kx = kx_lo; kx < kx_hi; ++kx)
                            acc += wrow[kx] * row[ix0 + kx];
                    }
                }
                op[static_cast<std::size_t>(oy) * out_size + ox] = acc;
            }
        }
    }
}

template <typename Scalar>
void pool_forward(const PoolSpec& p, const std::vector<Scalar>& in, int in_size, int ch,
                  std::vector<Scalar>& out, std::vector<std::int32_t>& argmax, int out_size) {
    const std::size_t in_plane = static_cast<std::size_t>(in_size) * in_size;
    const std::size_t out_plane = static_cast<std::size_t>(out_size) * out_size;
    out.assign(static_cast<std::size_t>(ch) * out_plane, Scalar{0});
    argmax.assign(out.size(), 0);
    for (int c = 0; c < ch; ++c) {
        const Scalar* ip = in.data() + c * in_plane;
        Scalar* op = out.data() + c * out_plane;
        std::int32_t* ap = argmax.data() + c * out_plane;
        for (int oy = 0; oy < out_size; ++oy) {
            for (int ox = 0; ox < out_size; ++ox) {
                const int iy0 = oy * p.stride;
                const int ix0 = ox * p.stride;
                Scalar best = ip[static_cast<std::size_t>(iy0) * in_size + ix0];
                std::int32_t best_idx = iy0 * in_size + ix0;
                for (int ky = 0; ky < p.kernel; ++ky) {
                    const int iy = iy0 + ky;
                    if (iy >= in_size) break;
                    for (int kx = 0; kx < p.kernel; ++kx) {
                        const int ix = ix0 + kx;
                        if (ix >= in_size) break;
                        const Scalar v = ip[static_cast<std::size_t>(iy) * in_size + ix];
                        if (v > best) {  // ties keep the first in scan order
                            best = v;
                            best_idx = iy * in_size + ix;
                        }
                    }
                }
                op[static_cast<std::size_t>(oy) * out_size + ox] = best;
                ap[static_cast<std::size_t>(oy) * out_size + ox] = best_idx;
            }
        }
    }
}

template <typename Scalar>
std::vector<Scalar> gap_of(const std::vector<Scalar>& map, int size, int ch) {
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    std::vector<Scalar> e(static_cast<std::size_t>(ch), Scalar{0});
    for (int c = 0; c < ch; ++c) {
        Scalar acc{0};
        const Scalar* p = map.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        e[c] = acc / static_cast<Scalar>(plane);
    }
    return e;
}

}  // namespace

template <typename Scalar>
std::vector<Scalar> forward_cached(const EmbeddingNetT<Scalar>& net,
                                   const std::vector<Scalar>& input,
                                   ForwardCacheT<Scalar>& cache) {
    const NetConfig& cfg = net.config;
    const auto shapes = cfg.shapes();
    const int tap = cfg.resolved_tap();

    cache.outputs.assign(cfg.layers.size(), {});
    cache.pool_argmax.assign(cfg.layers.size(), {});

    const std::vector<Scalar>* cur = &input;
    int size = cfg.input_size;
    int ch = 1;
    for (int i = 0; i <= tap; ++i) {
        const LayerSpec& l = cfg.layers[i];
        switch (l.kind) {
            case LayerSpec::Kind::Conv:
                conv_forward(l.conv, *cur, size, ch, net.weights[i], net.biases[i],
                             cache.outputs[i], shapes[i].size);
                break;
            case LayerSpec::Kind::ReLU: {
                cache.outputs[i] = *cur;
                for (auto& v : cache.outputs[i]) v = std::max(v, Scalar{0});
                break;
            }
            case LayerSpec::Kind::MaxPool:
                pool_forward(l.pool, *cur, size, ch, cache.outputs[i], cache.pool_argmax[i],
                             shapes[i].size);
                break;
            case LayerSpec::Kind::Gap:
                throw config_error("GAP reached before the embedding tap");
        }
        size = shapes[i].size;
        ch = shapes[i].channels;
        cur = &cache.outputs[i];
    }
    return gap_of(*cur, size, ch);
}

template <typename Scalar>
std::vector<Scalar> forward(const EmbeddingNetT<Scalar>& net, const BinaryImage& image) {
    ForwardCacheT<Scalar> cache;
    const auto planes = image_planes(net, image);
    return forward_cached(net, planes, cache);
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

namespace {

template <typename Scalar>
void conv_backward(const ConvSpec& c, const std::vector<Scalar>& in, int in_size, int in_ch,
                   const std::vector<Scalar>& w, const std::vector<Scalar>& grad_out,
                   int out_size, std::vector<Scalar>& grad_in, std::vector<Scalar>& grad_w,
                   std::vector<Scalar>& grad_b) {
    const std::size_t in_plane = static_cast<std::size_t>(in_size) * in_size;
    const std::size_t out_plane = static_cast<std::size_t>(out_size) * out_size;
    const std::size_t w_per_oc = static_cast<std::size_t>(in_ch) * c.kernel * c.kernel;
    grad_in.assign(in.size(), Scalar{0});

    for (int oc = 0; oc < c.channels; ++oc) {
        const Scalar* gop = grad_out.data() + oc * out_plane;
        const Scalar* wc = w.data() + oc * w_per_oc;
        Scalar* gwc = grad_w.data() + oc * w_per_oc;
        Scalar gb{0};
        for (int oy = 0; oy < out_size; ++oy) {
            const int iy0 = oy * c.stride - c.pad;
            for (int ox = 0; ox < out_size; ++ox) {
                const Scalar g = gop[static_cast<std::size_t>(oy) * out_size + ox];
                if (g == Scalar{0}) continue;
                const int ix0 = ox * c.stride - c.pad;
                gb += g;
                for (int ic = 0; ic < in_ch; ++ic) {
                    const Scalar* ip = in.data() + ic * in_plane;
                    Scalar* gip = grad_in.data() + ic * in_plane;
                    const std::size_t koff = static_cast<std::size_t>(ic) * c.kernel * c.kernel;
                    for (int ky = 0; ky < c.kernel; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= in_size) continue;
                        const std::size_t roff = static_cast<std::size_t>(iy) * in_size;
                        const int kx_lo = std::max(0, -ix0);
                        const int kx_hi = std::min(c.kernel, in_size - ix0);
                        for (int kx = kx_lo; kx < kx_hi; ++kx) {
                            const std::size_t widx = koff + static_cast<std::size_t>(ky) * c.kernel + kx;
                            gwc[widx] += g * ip[roff + ix0 + kx];
                            gip[roff + ix0 + kx] += g * wc[widx];
                        }
                    }
                }
            }
        }
        grad_b[oc] += gb;
    }
}

}  // namespace

template <typename Scalar>
void backward(const EmbeddingNetT<Scalar>& net, const std::vector<Scalar>& input,
              const ForwardCacheT<Scalar>& cache, const std::vector<Scalar>& grad_embedding,
              GradientsT<Scalar>& grads) {
    const NetConfig& cfg = net.config;
    const auto shapes = cfg.shapes();
    const int tap = cfg.resolved_tap();

    // GAP backward: spread each channel gradient uniformly over the map
    const int tap_size = shapes[tap].size;
    const int tap_ch = shapes[tap].channels;
    const std::size_t plane = static_cast<std::size_t>(tap_size) * tap_size;
    std::vector<Scalar> grad(static_cast<std::size_t>(tap_ch) * plane);
    for (int c = 0; c < tap_ch; ++c) {
        const Scalar g = grad_embedding[c] / static_cast<Scalar>(plane);
        std::fill_n(grad.data() + c * plane, plane, g);
    }

    for (int i = tap; i >= 0; --i) {
        const LayerSpec& l = cfg.layers[i];
        const std::vector<Scalar>& layer_in = (i == 0) ? input : cache.outputs[i - 1];
        const int in_size = (i == 0) ? cfg.input_size : shapes[i - 1].size;
        const int in_ch = (i == 0) ? 1 : shapes[i - 1].channels;
        switch (l.kind) {
            case LayerSpec::Kind::Conv: {
                std::vector<Scalar> grad_in;
                conv_backward(l.conv, layer_in, in_size, in_ch, net.weights[i], grad,
                              shapes[i].size, grad_in, grads.weights[i], grads.biases[i]);
                grad = std::move(grad_in);
                break;
            }
            case LayerSpec::Kind::ReLU: {
                const auto& out = cache.outputs[i];
                for (std::size_t j = 0; j < grad.size(); ++j)
                    if (out[j] <= Scalar{0}) grad[j] = Scalar{0};
                break;
            }
            case LayerSpec::Kind::MaxPool: {
                std::vector<Scalar> grad_in(layer_in.size(), Scalar{0});
                const auto& amax = cache.pool_argmax[i];
                const std::size_t out_plane =
                    static_cast<std::size_t>(shapes[i].size) * shapes[i].size;
                const std::size_t in_plane = static_cast<std::size_t>(in_size) * in_size;
                for (int c = 0; c < in_ch; ++c)
                    for (std::size_t j = 0; j < out_plane; ++j)
                        grad_in[c * in_plane + amax[c * out_plane + j]] +=
                            grad[c * out_plane + j];
                grad = std::move(grad_in);
                break;
            }
            case LayerSpec::Kind::Gap:
                throw config_error("unexpected GAP in backward walk");
        }
    }
}

// ---------------------------------------------------------------------------
// contrastive loss
// ---------------------------------------------------------------------------

template <typename Scalar>
ContrastiveResult<Scalar> contrastive_loss(const std::vector<Scalar>& fa,
                                           const std::vector<Scalar>& fb, int label,
                                           double margin) {
    if (fa.size() != fb.size()) throw argument_error("contrastive_loss dimension mismatch");
    if (!(margin > 0)) throw argument_error("contrastive_loss margin must be > 0");

    const std::size_t n = fa.size();
    ContrastiveResult<Scalar> r;
    r.grad_a.assign(n, Scalar{0});
    r.grad_b.assign(n, Scalar{0});

    Scalar d2{0};
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar d = fa[i] - fb[i];
        d2 += d * d;
    }
    const Scalar dist = std::sqrt(d2);

    if (label == 1) {
        r.loss = d2;
        for (std::size_t i = 0; i < n; ++i) {
            r.grad_a[i] = Scalar{2} * (fa[i] - fb[i]);
            r.grad_b[i] = -r.grad_a[i];
        }
    } else {
        const Scalar slack = static_cast<Scalar>(margin) - dist;
        if (slack > Scalar{0}) {
            r.loss = slack * slack;
            const Scalar denom = std::max(dist, static_cast<Scalar>(1e-12));
            const Scalar coeff = Scalar{-2} * slack / denom;
            for (std::size_t i = 0; i < n; ++i) {
                r.grad_a[i] = coeff * (fa[i] - fb[i]);
                r.grad_b[i] = -r.grad_a[i];
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// SGD
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(margin > 0)) throw argument_error("train margin must be > 0");
    if (batch_size < 2) throw argument_error("train batch_size must be >= 2");
    if (!(base_lr > 0) || !(lr_decay_factor > 0)) throw argument_error("train rates must be > 0");
    if (max_iters < 1) throw argument_error("train max_iters must be >= 1");
}

int TrainConfig::decay_interval() const {
    if (lr_decay_every > 0) return lr_decay_every;
    return std::max(1, max_iters / 4);
}

double TrainConfig::lr_at(int iter) const {
    return base_lr * std::pow(lr_decay_factor, iter / decay_interval());
}

template <typename Scalar>
Scalar backward_and_step(EmbeddingNetT<Scalar>& net, const std::vector<LabeledPair>& batch,
                         const TrainConfig& config, SgdStateT<Scalar>& state, int iter) {
    // single steps tolerate lr = 0 (a frozen step); the training loop
    // validates the full config
    if (!(config.margin > 0)) throw argument_error("train margin must be > 0");
    if (config.base_lr < 0) throw argument_error("learning rate must be >= 0");
    if (config.max_iters < 1) throw argument_error("train max_iters must be >= 1");
    if (batch.empty()) throw argument_error("backward_and_step: empty batch");

    const std::size_t n = batch.size();
    GradientsT<Scalar> total = GradientsT<Scalar>::zeros_like(net);
    std::vector<Scalar> losses(n, Scalar{0});

    // pair passes fan out; gradients land in per-pair buffers inside a
    // fixed-size chunk and are merged in index order
    const std::size_t chunk = std::min<std::size_t>(n, 8);
    std::vector<GradientsT<Scalar>> part(chunk);
    for (std::size_t base = 0; base < n; base += chunk) {
        const std::size_t count = std::min(chunk, n - base);
        const auto icount = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic) if (config.threads != 1)
        for (std::int64_t j = 0; j < icount; ++j) {
            const LabeledPair& pair = batch[base + j];
            part[j] = GradientsT<Scalar>::zeros_like(net);
            const auto pa = image_planes(net, pair.a);
            const auto pb = image_planes(net, pair.b);
            ForwardCacheT<Scalar> ca, cb;
            const auto fa = forward_cached(net, pa, ca);
            const auto fb = forward_cached(net, pb, cb);
            const auto cl = contrastive_loss(fa, fb, pair.label, config.margin);
            losses[base + j] = cl.loss;
            backward(net, pa, ca, cl.grad_a, part[j]);
            backward(net, pb, cb, cl.grad_b, part[j]);
        }
        for (std::size_t j = 0; j < count; ++j) total.add(part[j]);
    }

    Scalar loss_sum{0};
    for (const auto l : losses) loss_sum += l;
    const Scalar batch_loss = loss_sum / static_cast<Scalar>(n);
    if (!std::isfinite(static_cast<double>(batch_loss)))
        throw train_error("non-finite loss at iteration " + std::to_string(iter));

    const auto lr = static_cast<Scalar>(config.lr_at(iter));
    const auto mu = static_cast<Scalar>(config.momentum);
    const auto wd = static_cast<Scalar>(config.weight_decay);
    const auto inv_n = Scalar{1} / static_cast<Scalar>(n);
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        auto& w = net.weights[i];
        auto& b = net.biases[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            const Scalar g = total.weights[i][j] * inv_n + wd * w[j];
            state.w_vel[i][j] = mu * state.w_vel[i][j] - lr * g;
            w[j] += state.w_vel[i][j];
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            const Scalar g = total.biases[i][j] * inv_n + wd * b[j];
            state.b_vel[i][j] = mu * state.b_vel[i][j] - lr * g;
            b[j] += state.b_vel[i][j];
        }
    }
    return batch_loss;
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

template struct EmbeddingNetT<float>;
template struct EmbeddingNetT<double>;
template struct GradientsT<float>;
template struct GradientsT<double>;
template struct SgdStateT<float>;
template struct SgdStateT<double>;

template std::vector<float> image_planes(const EmbeddingNetT<float>&, const BinaryImage&);
template std::vector<double> image_planes(const EmbeddingNetT<double>&, const BinaryImage&);
template std::vector<float> forward_cached(const EmbeddingNetT<float>&, const std::vector<float>&,
                                           ForwardCacheT<float>&);
template std::vector<double> forward_cached(const EmbeddingNetT<double>&,
                                            const std::vector<double>&, ForwardCacheT<double>&);
template std::vector<float> forward(const EmbeddingNetT<float>&, const BinaryImage&);
template std::vector<double> forward(const EmbeddingNetT<double>&, const BinaryImage&);
template void backward(const EmbeddingNetT<float>&, const std::vector<float>&,
                       const ForwardCacheT<float>&, const std::vector<float>&,
                       GradientsT<float>&);
template void backward(const EmbeddingNetT<double>&, const std::vector<double>&,
                       const ForwardCacheT<double>&, const std::vector<double>&,
                       GradientsT<double>&);
template ContrastiveResult<float> contrastive_loss(const std::vector<float>&,
                                                   const std::vector<float>&, int, double);
template ContrastiveResult<double> contrastive_loss(const std::vector<double>&,
                                                    const std::vector<double>&, int, double);
template float backward_and_step(EmbeddingNetT<float>&, const std::vector<LabeledPair>&,
                                 const TrainConfig&, SgdStateT<float>&, int);
template double backward_and_step(EmbeddingNetT<double>&, const std::vector<LabeledPair>&,
                                  const TrainConfig&, SgdStateT<double>&, int);

}  // namespace curvematch
