#pragma once

#include <map>
#include <string>
#include <vector>

#include "vvmc/autodiff.hpp"
#include "vvmc/rng.hpp"
#include "vvmc/tensor.hpp"

namespace vvmc {

// Named parameter tensors. std::map keeps iteration order stable, which the
// optimizer and the checkpoint digest rely on.
struct ParamStore {
  std::map<std::string, Tensor> tensors;

  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  void put(const std::string& name, Tensor t);
};

// Per-graph leaves wrapping the store. Gradients are read back from these
// after backward().
struct VarMap {
  std::map<std::string, Var> vars;

  static VarMap from(const ParamStore& p, bool requires_grad);
  const Var& at(const std::string& name) const;
};

// Versioned tensor container shared by model checkpoints, segmentation
// heads and optimizer state: "VVCK" | version u8 | kind | config json |
// extra json | named f64 tensors, everything little-endian.
struct ParamContainer {
  std::string kind;
  std::string config_json = "{}";
  std::string extra_json = "{}";
  ParamStore params;
};

void write_param_container(const std::string& path, const ParamContainer& pc);
ParamContainer read_param_container(const std::string& path);

// ---------------------------------------------------------------------------
// Layer descriptors: stateless recipes binding names in a ParamStore.

struct Conv2dLayer {
  std::string name;
  int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
  double gain = 1.0;  // init scale relative to 1/sqrt(fan_in)

  Conv2dLayer() = default;
  Conv2dLayer(std::string n, int ci, int co, int kk, int s, double g = 1.0)
      : name(std::move(n)), cin(ci), cout(co), k(kk), stride(s), pad(kk / 2),
        gain(g) {}

  void init(ParamStore& p, Rng& rng) const;
  Var operator()(const VarMap& p, const Var& x) const;
};

struct ConvT2dLayer {
  std::string name;
  int cin = 0, cout = 0, k = 5, stride = 2, pad = 2, opad = 1;
  double gain = 1.0;

  ConvT2dLayer() = default;
  ConvT2dLayer(std::string n, int ci, int co, int kk, int s, double g = 1.0)
      : name(std::move(n)), cin(ci), cout(co), k(kk), stride(s), pad(kk / 2),
        opad(s - 1), gain(g) {}

  void init(ParamStore& p, Rng& rng) const;
  Var operator()(const VarMap& p, const Var& x) const;
};

// beta = beta_raw^2 + 1e-6, gamma = gamma_raw^2 keep the coefficients in
// range for any checkpoint.
struct GdnLayer {
  std::string name;
  int channels = 0;
  bool inverse = false;

  GdnLayer() = default;
  GdnLayer(std::string n, int c, bool inv)
      : name(std::move(n)), channels(c), inverse(inv) {}

  void init(ParamStore& p, Rng& rng) const;
  Var operator()(const VarMap& p, const Var& x) const;
};

// conv3x3 -> GELU -> conv3x3, additive skip
struct ResBlock {
  std::string name;
  int channels = 0;

  ResBlock() = default;
  ResBlock(std::string n, int c) : name(std::move(n)), channels(c) {}

  void init(ParamStore& p, Rng& rng) const;
  Var operator()(const VarMap& p, const Var& x) const;
};

// conv3x3 to cout*r^2 followed by pixel shuffle
struct SubpixelUp {
  std::string name;
  int cin = 0, cout = 0, r = 2;
  double gain = 1.0;

  SubpixelUp() = default;
  SubpixelUp(std::string n, int ci, int co, int rr, double g = 1.0)
      : name(std::move(n)), cin(ci), cout(co), r(rr), gain(g) {}

  void init(ParamStore& p, Rng& rng) const;
  Var operator()(const VarMap& p, const Var& x) const;
};

}  // namespace vvmc
