#include "vvmc/segmentation.hpp"

#include <cmath>
#include <json.hpp>

#include "vvmc/training.hpp"

namespace vvmc {

using nlohmann::json;

std::string SegHeadConfig::to_json() const {
  json j;
  j["in_channels"] = in_channels;
  j["num_classes"] = num_classes;
  j["width"] = width;
  return j.dump();
}

SegHeadConfig SegHeadConfig::from_json(const std::string& s) {
  json j = json::parse(s);
  SegHeadConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.width = j.at("width").get<int>();
  return c;
}

namespace {
struct HeadArch {
  Conv2dLayer c1, c2, c3, out;
  SubpixelUp up;

  explicit HeadArch(const SegHeadConfig& c)
      : c1("seg.c1", c.in_channels, c.width, 3, 1),
        c2("seg.c2", c.width, 2 * c.width, 3, 2),
        c3("seg.c3", 2 * c.width, 2 * c.width, 3, 1),
        out("seg.out", c.width, c.num_classes, 1, 1),
        up("seg.up", 2 * c.width, c.width, 2) {}
};
}  // namespace

SegHead SegHead::init(const SegHeadConfig& cfg, std::uint64_t seed) {
  SegHead h;
  h.cfg = cfg;
  Rng rng(seed);
  HeadArch a(cfg);
  a.c1.init(h.params, rng);
  a.c2.init(h.params, rng);
  a.c3.init(h.params, rng);
  a.up.init(h.params, rng);
  a.out.init(h.params, rng);
  return h;
}

Var SegHead::logits(const VarMap& p, const Var& features) const {
  if (features->value.dim(0) != cfg.in_channels)
    throw std::invalid_argument(
        "seg head: feature channels " + std::to_string(features->value.dim(0)) +
        " do not match configured input " + std::to_string(cfg.in_channels));
  HeadArch a(cfg);
  Var t = gelu(a.c1(p, features));
  t = gelu(a.c2(p, t));
  t = gelu(a.c3(p, t));
  t = gelu(a.up(p, t));
  return a.out(p, t);
}

Tensor SegHead::infer(const Tensor& features) const {
  VarMap p = VarMap::from(params, false);
  return logits(p, make_const(features))->value;
}

void save_seg_head(const std::string& path, const SegHead& head) {
  ParamContainer pc;
  pc.kind = "seg_head";
  pc.config_json = head.cfg.to_json();
  pc.params = head.params;
  write_param_container(path, pc);
}

SegHead load_seg_head(const std::string& path) {
  ParamContainer pc = read_param_container(path);
  if (pc.kind != "seg_head")
    throw FormatError("seg head: not a seg_head container (" + pc.kind + ")");
  SegHead h;
  h.cfg = SegHeadConfig::from_json(pc.config_json);
  h.params = std::move(pc.params);
  SegHead ref = SegHead::init(h.cfg, 0);
  for (const auto& [name, t] : ref.params.tensors)
    if (!h.params.has(name) || h.params.at(name).shape != t.shape)
      throw FormatError("seg head: parameter mismatch for " + name);
  return h;
}

Var cross_entropy_with_labels(const Var& logits, const std::vector<int>& labels) {
  const int c = logits->value.dim(0);
  const int hw = logits->value.dim(1) * logits->value.dim(2);
  if (static_cast<int>(labels.size()) != hw)
    throw std::invalid_argument("cross entropy: label count mismatch");

  auto softmax = std::make_shared<Tensor>(Tensor({c, hw}));
  double nll = 0.0;
  for (int i = 0; i < hw; ++i) {
    double mx = -1e300;
    for (int ch = 0; ch < c; ++ch)
      mx = std::max(mx, logits->value.data[static_cast<std::size_t>(ch) * hw + i]);
    double denom = 0.0;
    for (int ch = 0; ch < c; ++ch)
      denom += std::exp(logits->value.data[static_cast<std::size_t>(ch) * hw + i] - mx);
    double lse = mx + std::log(denom);
    for (int ch = 0; ch < c; ++ch)
      softmax->data[static_cast<std::size_t>(ch) * hw + i] = std::exp(
          logits->value.data[static_cast<std::size_t>(ch) * hw + i] - lse);
    nll += lse - logits->value.data[static_cast<std::size_t>(labels[i]) * hw + i];
  }
  nll /= hw;

  Var pl = logits;
  std::vector<int> lab = labels;
  return make_node(
      Tensor({1}, std::vector<double>{nll}), {logits},
      [pl, lab, softmax, c, hw](Node& n) {
        double g = n.grad.data[0] / hw;
        Tensor& grad = pl->ensure_grad();
        for (int i = 0; i < hw; ++i)
          for (int ch = 0; ch < c; ++ch)
            grad.data[static_cast<std::size_t>(ch) * hw + i] +=
                g * (softmax->data[static_cast<std::size_t>(ch) * hw + i] -
                     (lab[i] == ch ? 1.0 : 0.0));
      });
}

double train_seg_head(SegHead& head,
                      const std::vector<std::vector<Tensor>>& feature_volumes,
                      const std::vector<LabelVolume>& gts,
                      const SegTrainConfig& cfg) {
  if (feature_volumes.size() != gts.size() || feature_volumes.empty())
    throw std::invalid_argument("train_seg_head: dataset mismatch");
  Adam opt(cfg.lr);
  Rng rng(cfg.seed);
  double loss_val = 0.0;
  for (int step = 0; step < cfg.steps; ++step) {
    int vi = rng.uniform_int(static_cast<int>(feature_volumes.size()));
    const auto& vol = feature_volumes[vi];
    const LabelVolume& gt = gts[vi];
    int z = rng.uniform_int(static_cast<int>(vol.size()));

    std::vector<int> labels(static_cast<std::size_t>(gt.height) * gt.width);
    for (int y = 0; y < gt.height; ++y)
      for (int x = 0; x < gt.width; ++x)
        labels[static_cast<std::size_t>(y) * gt.width + x] = gt.at(z, y, x);

    VarMap p = VarMap::from(head.params, true);
    Var lg = head.logits(p, make_const(vol[z]));
    lg = crop_spatial(lg, gt.height, gt.width);
    Var loss = cross_entropy_with_labels(lg, labels);
    loss_val = loss->value.data[0];
    backward(loss);
    opt.step(head.params, p);
  }
  return loss_val;
}

SegScores evaluate_segmentation(const std::vector<Tensor>& features,
                                const SegHead& head, const LabelVolume& gt,
                                const Spacing& spacing) {
  if (static_cast<int>(features.size()) != gt.depth)
    throw std::invalid_argument("evaluate_segmentation: slice count mismatch");
  LabelVolume pred;
  pred.width = gt.width;
  pred.height = gt.height;
  pred.depth = gt.depth;
  pred.num_classes = gt.num_classes;
  pred.labels.assign(pred.numel(), 0);

  for (int z = 0; z < gt.depth; ++z) {
    Tensor lg = head.infer(features[z]);
    for (int y = 0; y < gt.height; ++y)
      for (int x = 0; x < gt.width; ++x) {
        int best = 0;
        double bv = lg.at3(0, y, x);
        for (int ch = 1; ch < gt.num_classes; ++ch)
          if (lg.at3(ch, y, x) > bv) {
            bv = lg.at3(ch, y, x);
            best = ch;
          }
        pred.at(z, y, x) = static_cast<std::uint16_t>(best);
      }
  }

  SegScores s;
  s.prediction = pred;
  for (int ch = 1; ch < gt.num_classes; ++ch) {
    s.dice_per_class.push_back(dice(pred, gt, ch));
    s.hd95_per_class.push_back(hd95(pred, gt, ch, spacing));
  }
  for (double d : s.dice_per_class) s.mean_dice += d;
  for (double d : s.hd95_per_class) s.mean_hd95 += d;
  s.mean_dice /= static_cast<double>(s.dice_per_class.size());
  s.mean_hd95 /= static_cast<double>(s.hd95_per_class.size());
  return s;
}

}  // namespace vvmc
