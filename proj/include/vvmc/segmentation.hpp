#pragma once

#include <string>
#include <vector>

#include "vvmc/layers.hpp"
#include "vvmc/metrics.hpp"
#include "vvmc/rng.hpp"

namespace vvmc {

// Small encoder-decoder head good enough to exercise the latent-space
// segmentation protocol end to end. Any external head can replace it as
// long as it consumes per-slice features of the declared channel count and
// emits per-class logits at the input resolution.
struct SegHeadConfig {
  int in_channels = 16;
  int num_classes = 3;
  int width = 16;

  bool operator==(const SegHeadConfig&) const = default;
  std::string to_json() const;
  static SegHeadConfig from_json(const std::string& s);
};

struct SegHead {
  SegHeadConfig cfg;
  ParamStore params;

  static SegHead init(const SegHeadConfig& cfg, std::uint64_t seed);
  // features (in_channels,H,W) -> logits (num_classes,H,W)
  Var logits(const VarMap& p, const Var& features) const;
  Tensor infer(const Tensor& features) const;
};

void save_seg_head(const std::string& path, const SegHead& head);
SegHead load_seg_head(const std::string& path);

// mean over positions of -log softmax(logits)[label]
Var cross_entropy_with_labels(const Var& logits,
                              const std::vector<int>& labels);

struct SegTrainConfig {
  int steps = 400;
  double lr = 1e-3;
  std::uint64_t seed = 7;
};

// features[volume][slice] is (in_channels,Hp,Wp); labels give the original
// dims. Returns the final loss.
double train_seg_head(SegHead& head,
                      const std::vector<std::vector<Tensor>>& feature_volumes,
                      const std::vector<LabelVolume>& gts,
                      const SegTrainConfig& cfg);

struct SegScores {
  std::vector<double> dice_per_class;  // foreground classes 1..C-1
  std::vector<double> hd95_per_class;
  double mean_dice = 0;
  double mean_hd95 = 0;
  LabelVolume prediction;
};

SegScores evaluate_segmentation(const std::vector<Tensor>& features,
                                const SegHead& head, const LabelVolume& gt,
                                const Spacing& spacing = {});

}  // namespace vvmc
