#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvematch/image.hpp"
#include "curvematch/net.hpp"
#include "curvematch/stage1.hpp"

namespace curvematch {

// Combined rotation / flip / fisheye augmentation set. The full set has
// 8 x 3 x 4 = 96 elements; element 0 is the identity.
struct AugmentationSpec {
    std::vector<int> rotations{0, 45, 90, 135, 180, 225, 270, 315};
    std::vector<FlipMode> flips{FlipMode::None, FlipMode::Horizontal, FlipMode::Vertical};
    std::vector<double> exponents{1.0, 1.25, 1.5, 1.75};

    std::size_t size() const { return rotations.size() * flips.size() * exponents.size(); }

    static AugmentationSpec full() { return {}; }
    static AugmentationSpec identity_only() {
        return {{0}, {FlipMode::None}, {1.0}};
    }
};

// Element i of the spec applied to one image (rotate, then flip, then
// fisheye). The identity element reproduces the input bit-exactly.
BinaryImage apply_augmentation(const BinaryImage& image, const AugmentationSpec& aug,
                               std::size_t index);

// Squared embedding distance of a pair; inputs are resized internally.
double psi(const EmbeddingNet& net, const BinaryImage& a, const BinaryImage& b);

// Mean of psi over the simultaneously augmented pairs.
double psi_bar(const EmbeddingNet& net, const BinaryImage& a, const BinaryImage& b,
               const AugmentationSpec& aug);

// Ground truth for one training sherd.
struct TrainingSherd {
    std::string id;
    SherdTemplate tmpl;
    std::string truth_design;
    Pose truth_pose;
};

// Positive pairs from the augmented truth match, negative pairs from the
// Stage-1 false candidates (identity only, capped per positive). Every pair
// is resized to input_size x input_size.
std::vector<LabeledPair> build_training_set(const std::vector<Design>& catalog,
                                            const std::vector<TrainingSherd>& sherds,
                                            const std::vector<std::vector<Candidate>>& candidates,
                                            const AugmentationSpec& aug,
                                            const MatchConfig& match_config,
                                            const TrainConfig& train_config, int input_size);

struct TrainResult {
    EmbeddingNet net;
    std::vector<float> losses;  // batch loss per iteration
};

// Seeded SGD loop over uniformly sampled batches.
TrainResult train_model(const std::vector<LabeledPair>& pairs, const NetConfig& net_config,
                        const TrainConfig& train_config);

// psi_bar for every candidate, then the per-design minimum, sorted by
// (psi_bar, phi, design_id). Candidate evaluation fans out over threads.
std::vector<Candidate> rerank(const EmbeddingNet& net, const SherdTemplate& tmpl,
                              const std::vector<Design>& catalog,
                              const std::vector<Candidate>& candidates, bool tta,
                              int threads = 1);

// Model file: magic "CPM1", version byte, LE header length, JSON header,
// float32 LE parameters in header order.
void save_model(const EmbeddingNet& net, const std::string& path);
EmbeddingNet load_model(const std::string& path);

std::string net_config_to_json(const NetConfig& config);
NetConfig net_config_from_json(const std::string& text);

}  // namespace curvematch
