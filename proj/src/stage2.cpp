#include "curvematch/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "curvematch/error.hpp"
#include "curvematch/rng.hpp"

namespace curvematch {

BinaryImage apply_augmentation(const BinaryImage& image, const AugmentationSpec& aug,
                               std::size_t index) {
    if (index >= aug.size()) throw argument_error("augmentation index out of range");
    const std::size_t per_rot = aug.flips.size() * aug.exponents.size();
    const int rot = aug.rotations[index / per_rot];
    const FlipMode fm = aug.flips[(index % per_rot) / aug.exponents.size()];
    const double exp = aug.exponents[index % aug.exponents.size()];
    return fisheye(flip(rotate(image, rot), fm), exp);
}

// ---------------------------------------------------------------------------
// psi
// ---------------------------------------------------------------------------

namespace {

double squared_distance(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

std::vector<float> embed(const EmbeddingNet& net, const BinaryImage& image) {
    const int s = net.config.input_size;
    return forward(net, resize_nearest(image, s, s));
}

}  // namespace

double psi(const EmbeddingNet& net, const BinaryImage& a, const BinaryImage& b) {
    return squared_distance(embed(net, a), embed(net, b));
}

double psi_bar(const EmbeddingNet& net, const BinaryImage& a, const BinaryImage& b,
               const AugmentationSpec& aug) {
    double acc = 0.0;
    for (std::size_t i = 0; i < aug.size(); ++i)
        acc += squared_distance(embed(net, apply_augmentation(a, aug, i)),
                                embed(net, apply_augmentation(b, aug, i)));
    return acc / static_cast<double>(aug.size());
}

// ---------------------------------------------------------------------------
// training set
// ---------------------------------------------------------------------------

namespace {

const Design& find_design(const std::vector<Design>& catalog, const std::string& id) {
    for (const auto& d : catalog)
        if (d.id == id) return d;
    throw argument_error("unknown design id \"" + id + "\"");
}

// a Stage-1 candidate counts as the true matching when it sits on the truth
// design within one suppression cell of the truth pose
bool is_true_matching(const Candidate& c, const TrainingSherd& sherd, int theta_stride) {
    if (c.design_id != sherd.truth_design) return false;
    if (std::abs(c.pose.x - sherd.truth_pose.x) > 2) return false;
    if (std::abs(c.pose.y - sherd.truth_pose.y) > 2) return false;
    int dt = std::abs(c.pose.theta - sherd.truth_pose.theta);
    dt = std::min(dt, 360 - dt);
    return dt <= theta_stride;
}

}  // namespace

std::vector<LabeledPair> build_training_set(const std::vector<Design>& catalog,
                                            const std::vector<TrainingSherd>& sherds,
                                            const std::vector<std::vector<Candidate>>& candidates,
                                            const AugmentationSpec& aug,
                                            const MatchConfig& match_config,
                                            const TrainConfig& train_config, int input_size) {
    if (sherds.size() != candidates.size())
        throw argument_error("one candidate list per training sherd required");
    if (input_size < 1) throw argument_error("input_size must be >= 1");

    std::vector<LabeledPair> pairs;
    for (std::size_t si = 0; si < sherds.size(); ++si) {
        const TrainingSherd& sherd = sherds[si];
        if (sherd.truth_design.empty())
            throw argument_error("training sherd " + sherd.id + " has no ground truth");
        const Design& truth = find_design(catalog, sherd.truth_design);
        const PoseGrid grid = pose_grid(truth.image.width, truth.image.height,
                                        sherd.tmpl.curve.width, sherd.tmpl.curve.height);
        if (!grid.contains(sherd.truth_pose.x, sherd.truth_pose.y))
            throw argument_error("training sherd " + sherd.id + " truth pose outside grid");

        const BinaryImage truth_patch = crop_patch(truth.image, sherd.truth_pose, sherd.tmpl);

        // positives: every augmentation applied to both sides at once
        std::size_t positives = 0;
        for (std::size_t j = 0; j < aug.size(); ++j) {
            LabeledPair p;
            p.a = resize_nearest(apply_augmentation(sherd.tmpl.curve, aug, j), input_size,
                                 input_size);
            p.b = resize_nearest(apply_augmentation(truth_patch, aug, j), input_size, input_size);
            p.label = 1;
            pairs.push_back(std::move(p));
            ++positives;
        }

        // negatives: false Stage-1 candidates, subsampled to the cap
        std::vector<std::size_t> false_idx;
        for (std::size_t ci = 0; ci < candidates[si].size(); ++ci)
            if (!is_true_matching(candidates[si][ci], sherd, match_config.theta_stride))
                false_idx.push_back(ci);

        std::size_t keep = false_idx.size();
        if (train_config.neg_pos_cap > 0)
            keep = std::min(keep, static_cast<std::size_t>(train_config.neg_pos_cap) * positives);
        if (keep < false_idx.size()) {
            Rng rng(derive_seed(train_config.seed, "negatives-" + sherd.id));
            rng.shuffle(false_idx);
            false_idx.resize(keep);
            std::sort(false_idx.begin(), false_idx.end());
        }

        for (const std::size_t ci : false_idx) {
            const Candidate& c = candidates[si][ci];
            const Design& d = find_design(catalog, c.design_id);
            LabeledPair p;
            p.a = resize_nearest(sherd.tmpl.curve, input_size, input_size);
            p.b = resize_nearest(crop_patch(d.image, c.pose, sherd.tmpl), input_size, input_size);
            p.label = 0;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

TrainResult train_model(const std::vector<LabeledPair>& raw_pairs, const NetConfig& net_config,
                        const TrainConfig& train_config) {
    train_config.validate();
    net_config.validate();
    if (raw_pairs.empty()) throw argument_error("train_model: no training pairs");

    // size every pair for the net once up front
    const int s = net_config.input_size;
    std::vector<LabeledPair> pairs;
    pairs.reserve(raw_pairs.size());
    for (const auto& p : raw_pairs)
        pairs.push_back(LabeledPair{resize_nearest(p.a, s, s), resize_nearest(p.b, s, s),
                                    p.label});

    TrainResult result;
    result.net = EmbeddingNet::random_init(net_config, train_config.seed);
    auto state = SgdStateT<float>::zeros_like(result.net);
    Rng rng(derive_seed(train_config.seed, "batches"));

    result.losses.reserve(train_config.max_iters);
    std::vector<LabeledPair> batch(train_config.batch_size);
    for (int iter = 0; iter < train_config.max_iters; ++iter) {
        for (int j = 0; j < train_config.batch_size; ++j)
            batch[j] = pairs[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(pairs.size()) - 1))];
        result.losses.push_back(
            backward_and_step(result.net, batch, train_config, state, iter));
    }
    return result;
}

// ---------------------------------------------------------------------------
// re-ranking
// ---------------------------------------------------------------------------

std::vector<Candidate> rerank(const EmbeddingNet& net, const SherdTemplate& tmpl,
                              const std::vector<Design>& catalog,
                              const std::vector<Candidate>& candidates, bool tta, int threads) {
    const AugmentationSpec aug = tta ? AugmentationSpec::full()
                                     : AugmentationSpec::identity_only();
    const int s = net.config.input_size;

    for (const auto& c : candidates) find_design(catalog, c.design_id);  // validate ids

    // template-side embeddings are shared by every candidate
    std::vector<std::vector<float>> tmpl_embed(aug.size());
    {
        const auto n = static_cast<std::int64_t>(aug.size());
#pragma omp parallel for schedule(dynamic) if (threads != 1)
        for (std::int64_t j = 0; j < n; ++j)
            tmpl_embed[j] = forward(
                net, resize_nearest(apply_augmentation(tmpl.curve, aug, j), s, s));
    }

    std::vector<Candidate> scored(candidates.size());
    {
        const auto n = static_cast<std::int64_t>(candidates.size());
#pragma omp parallel for schedule(dynamic) if (threads != 1)
        for (std::int64_t i = 0; i < n; ++i) {
            const Candidate& c = candidates[i];
            const Design& d = find_design(catalog, c.design_id);
            const BinaryImage patch = crop_patch(d.image, c.pose, tmpl);
            double acc = 0.0;
            for (std::size_t j = 0; j < aug.size(); ++j) {
                const auto fb = forward(
                    net, resize_nearest(apply_augmentation(patch, aug, j), s, s));
                acc += squared_distance(tmpl_embed[j], fb);
            }
            scored[i] = c;
            scored[i].psi_bar = acc / static_cast<double>(aug.size());
        }
    }

    // per design keep the lowest psi_bar
    std::map<std::string, Candidate> best;
    for (const auto& c : scored) {
        auto it = best.find(c.design_id);
        if (it == best.end()) {
            best.emplace(c.design_id, c);
            continue;
        }
        const Candidate& cur = it->second;
        const auto key = [](const Candidate& x) {
            return std::make_tuple(*x.psi_bar, x.phi, x.pose.theta, x.pose.y, x.pose.x);
        };
        if (key(c) < key(cur)) it->second = c;
    }

    std::vector<Candidate> out;
    out.reserve(best.size());
    for (auto& [id, c] : best) out.push_back(std::move(c));
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return std::make_tuple(*a.psi_bar, a.phi, a.design_id) <
               std::make_tuple(*b.psi_bar, b.phi, b.design_id);
    });
    return out;
}

// ---------------------------------------------------------------------------
// model file
// ---------------------------------------------------------------------------

namespace {

nlohmann::json layer_to_json(const LayerSpec& l) {
    switch (l.kind) {
        case LayerSpec::Kind::Conv:
            return {{"type", "conv"},   {"n", l.conv.channels}, {"k", l.conv.kernel},
                    {"s", l.conv.stride}, {"p", l.conv.pad}};
        case LayerSpec::Kind::ReLU:
            return {{"type", "relu"}};
        case LayerSpec::Kind::MaxPool:
            return {{"type", "maxpool"}, {"k", l.pool.kernel}, {"s", l.pool.stride}};
        case LayerSpec::Kind::Gap:
            return {{"type", "gap"}};
    }
    throw config_error("unknown layer kind");
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "conv")
        return LayerSpec::make_conv(j.at("n").get<int>(), j.at("k").get<int>(),
                                    j.at("s").get<int>(), j.at("p").get<int>());
    if (type == "relu") return LayerSpec::make_relu();
    if (type == "maxpool") return LayerSpec::make_pool(j.at("k").get<int>(), j.at("s").get<int>());
    if (type == "gap") return LayerSpec::make_gap();
    throw format_error("unknown layer type \"" + type + "\"");
}

nlohmann::json config_json(const NetConfig& c) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : c.layers) layers.push_back(layer_to_json(l));
    return {{"input_size", c.input_size}, {"layers", layers}, {"embed_tap", c.embed_tap}};
}

NetConfig config_from(const nlohmann::json& j) {
    NetConfig c;
    c.input_size = j.at("input_size").get<int>();
    c.embed_tap = j.at("embed_tap").get<int>();
    for (const auto& l : j.at("layers")) c.layers.push_back(layer_from_json(l));
    return c;
}

constexpr char kMagic[4] = {'C', 'P', 'M', '1'};
constexpr std::uint8_t kVersion = 1;

}  // namespace

std::string net_config_to_json(const NetConfig& config) { return config_json(config).dump(); }

NetConfig net_config_from_json(const std::string& text) {
    try {
        return config_from(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("net config JSON: ") + e.what());
    }
}

void save_model(const EmbeddingNet& net, const std::string& path) {
    nlohmann::json header;
    header["config"] = config_json(net.config);
    header["seed"] = net.rng_seed;
    nlohmann::json shapes = nlohmann::json::array();
    for (std::size_t i = 0; i < net.weights.size(); ++i)
        shapes.push_back({{"layer", i},
                          {"weights", net.weights[i].size()},
                          {"biases", net.biases[i].size()}});
    header["tensors"] = shapes;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    const auto hlen = static_cast<std::uint32_t>(htext.size());
    char lenbuf[4] = {static_cast<char>(hlen & 0xff), static_cast<char>((hlen >> 8) & 0xff),
                      static_cast<char>((hlen >> 16) & 0xff),
                      static_cast<char>((hlen >> 24) & 0xff)};
    out.write(lenbuf, 4);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));

    auto write_floats = [&](const std::vector<float>& v) {
        for (const float f : v) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
            out.write(b, 4);
        }
    };
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        write_floats(net.weights[i]);
        write_floats(net.biases[i]);
    }
    if (!out) throw io_error("short write to " + path);
}

EmbeddingNet load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    if (bytes.size() < 9) throw format_error(path + ": truncated model header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw format_error(path + ": bad model magic");
    if (static_cast<std::uint8_t>(bytes[4]) != kVersion)
        throw format_error(path + ": unsupported model version " +
                           std::to_string(static_cast<int>(bytes[4])));
    const std::uint32_t hlen = static_cast<std::uint8_t>(bytes[5]) |
                               (static_cast<std::uint8_t>(bytes[6]) << 8) |
                               (static_cast<std::uint8_t>(bytes[7]) << 16) |
                               (static_cast<std::uint8_t>(bytes[8]) << 24);
    if (bytes.size() < 9 + static_cast<std::size_t>(hlen))
        throw format_error(path + ": truncated model header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 9, bytes.begin() + 9 + hlen);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": model header: " + e.what());
    }

    EmbeddingNet net;
    try {
        net.config = config_from(header.at("config"));
        net.rng_seed = header.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": model header: " + e.what());
    }
    net.config.validate();

    net.weights.resize(net.config.layers.size());
    net.biases.resize(net.config.layers.size());
    const auto& tensors = header.at("tensors");
    if (tensors.size() != net.config.layers.size())
        throw format_error(path + ": tensor count does not match layer count");

    // expected sizes from the config itself
    const auto expected = EmbeddingNet::random_init(net.config, 0);

    std::size_t pos = 9 + hlen;
    auto read_floats = [&](std::vector<float>& v, std::size_t count) {
        if (bytes.size() < pos + count * 4)
            throw format_error(path + ": truncated model payload");
        v.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits = static_cast<std::uint8_t>(bytes[pos]) |
                                 (static_cast<std::uint8_t>(bytes[pos + 1]) << 8) |
                                 (static_cast<std::uint8_t>(bytes[pos + 2]) << 16) |
                                 (static_cast<std::uint8_t>(bytes[pos + 3]) << 24);
            std::memcpy(&v[i], &bits, 4);
            pos += 4;
        }
    };
    for (std::size_t i = 0; i < net.config.layers.size(); ++i) {
        const auto wsize = tensors[i].at("weights").get<std::size_t>();
        const auto bsize = tensors[i].at("biases").get<std::size_t>();
        if (wsize != expected.weights[i].size() || bsize != expected.biases[i].size())
            throw format_error(path + ": tensor shape mismatch at layer " + std::to_string(i));
        read_floats(net.weights[i], wsize);
        read_floats(net.biases[i], bsize);
    }
    if (pos != bytes.size()) throw format_error(path + ": trailing bytes after parameters");
    return net;
}

}  // namespace curvematch
