#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "flowcast/autodiff/ops.hpp"
#include "flowcast/core/error.hpp"
#include "flowcast/model/config.hpp"
#include "flowcast/model/geometry.hpp"
#include "flowcast/model/time_embed.hpp"

namespace flowcast::model {

/// Per sub-block record of max |gate * branch| from one forward pass.
struct ForwardTrace {
  struct Entry {
    std::string block;
    double attn_max = 0;
    double mlp_max = 0;
  };
  std::vector<Entry> blocks;
};

/// The time-modulated windowed-attention velocity field v(x, t, c).
///
/// Inputs are flat row-major planes: state [C, H*W] and conditioning
/// [cond_channels, H*W]. Tokens of the latent grid are ordered depth-major,
/// with depth 0 holding the surface patches and depths 1.. the pressure patches.
template <typename T>
class VelocityNet {
 public:
  using P = ad::Parameter<T>;
  using V = ad::Var<T>;

  explicit VelocityNet(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build_geometry();
    build_parameters();
    initialize(cfg_.seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ad::ParameterSet<T>& parameters() { return params_; }
  const ad::ParameterSet<T>& parameters() const { return params_; }

  /// Latent grid of the first and third layers.
  geometry::Dims3 latent_dims() const { return dims1_; }

  /// Draws all parameters from the seed. Modulation V/bias and the up-sampling
  /// projection start at zero.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      const auto& n = p.name;
      const bool bias = ends_with(n, ".b") || ends_with(n, ".mod.bias") || ends_with(n, ".beta");
      if (bias || ends_with(n, ".mod.V") || ends_with(n, ".mod.M") || n == "up.w") {
        std::fill(p.value.begin(), p.value.end(), T(0));
      } else if (ends_with(n, ".gamma")) {
        std::fill(p.value.begin(), p.value.end(), T(1));
      } else {
        const double fan_in = static_cast<double>(p.shape.front());
        const bool embed = n.rfind("embed.", 0) == 0 || n.rfind("time.", 0) == 0;
        std::normal_distribution<double> dist(0.0, embed ? 1.0 / std::sqrt(fan_in) : 0.02);
        for (auto& v : p.value) v = static_cast<T>(dist(rng));
      }
    }
  }

  /// Shared time MLP: sinusoid -> linear -> SiLU -> linear, then SiLU once more
  /// as the input activation of every modulation projection.
  V time_features(ad::Tape<T>& tape, double t) const {
    const auto e = sinusoidal_time_embed(t, cfg_.time_embed_dim);
    std::vector<T> et(e.begin(), e.end());
    const std::size_t Td = cfg_.time_embed_dim;
    V x = tape.input(std::move(et), 1, Td);
    V h = ad::silu(ad::linear(x, tape.param(*time_w1_, Td, Td), tape.param(*time_b1_, 1, Td)));
    V y = ad::linear(h, tape.param(*time_w2_, Td, Td), tape.param(*time_b2_, 1, Td));
    return ad::silu(y);
  }

  /// Fused latent map [D*H'*W', E] before any block runs.
  V embed(ad::Tape<T>& tape, V state, V cond) const {
    check_inputs(state, cond);
    const std::size_t E = cfg_.embed_dim;
    V all = ad::concat_rows(state, cond);
    V ps = ad::gather(all, pmap_, n_press_tokens_, press_feat_);
    V ss = ad::gather(all, smap_, n_surf_tokens_, surf_feat_);
    V pe = ad::linear(ps, tape.param(*embed_pw_, press_feat_, E), tape.param(*embed_pb_, 1, E));
    V se = ad::linear(ss, tape.param(*embed_sw_, surf_feat_, E), tape.param(*embed_sb_, 1, E));
    return ad::concat_rows(se, pe);
  }

  /// Latent map [tokens, E] back to the state layout [C, H*W].
  V recover(ad::Tape<T>& tape, V latent) const {
    const std::size_t E = cfg_.embed_dim;
    V s = ad::slice_rows(latent, 0, n_surf_tokens_);
    V p = ad::slice_rows(latent, n_surf_tokens_, n_press_tokens_);
    const std::size_t hw = cfg_.n_lat * cfg_.n_lon;
    V so = ad::linear(s, tape.param(*rec_sw_, E, surf_out_), tape.param(*rec_sb_, 1, surf_out_));
    V po = ad::linear(p, tape.param(*rec_pw_, E, press_out_), tape.param(*rec_pb_, 1, press_out_));
    V sf = ad::gather(so, srec_, cfg_.n_surface, hw);
    V pf = ad::gather(po, prec_, cfg_.n_pressure_vars * cfg_.n_levels, hw);
    return ad::concat_rows(sf, pf);
  }

  /// v(x_t, t, c) as a [C, H*W] node on `tape`.
  V forward(ad::Tape<T>& tape, V state, double t, V cond, ForwardTrace* trace = nullptr) const {
    V temb = time_features(tape, t);
    V h1 = run_layer(tape, 0, embed(tape, state, cond), temb, trace);
    V h2 = run_layer(tape, 1, downsample(tape, h1), temb, trace);
    V mid = ad::add(upsample(tape, h2), h1);
    V h3 = ad::add(run_layer(tape, 2, mid, temb, trace), h1);
    V out = recover(tape, h3);
    require_finite(out, "patch_recovery");
    return out;
  }

  /// Plain evaluation without gradient recording.
  std::vector<T> evaluate(std::span<const T> state, double t, std::span<const T> cond, ForwardTrace* trace = nullptr) const {
    ad::Tape<T> tape(false);
    const std::size_t hw = cfg_.n_lat * cfg_.n_lon;
    V s = tape.input(state, cfg_.channels(), hw);
    V c = tape.input(cond, cfg_.cond_channels, hw);
    V out = forward(tape, s, t, c, trace);
    return {out.data(), out.data() + out.size()};
  }

  /// Names of the modulation parameters of block `b` in layer `l`.
  static std::string block_name(std::size_t layer, std::size_t block) {
    return "layer" + std::to_string(layer + 1) + ".block" + std::to_string(block);
  }

 private:
  struct Block {
    std::string name;
    std::size_t dim = 0;
    std::size_t hidden = 0;
    geometry::WindowPartition part;
    P* qkv_w;
    P* qkv_b;
    P* proj_w;
    P* proj_b;
    P* rel;
    P* fc1_w;
    P* fc1_b;
    P* fc2_w;
    P* fc2_b;
    P* mod_u = nullptr;  // low rank: U [Td, r], V [r, 6C]
    P* mod_v = nullptr;  // full rank: M [Td, 6C] stored here
    P* mod_b;
  };

  static bool ends_with(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
  }

  void check_inputs(V state, V cond) const {
    const std::size_t hw = cfg_.n_lat * cfg_.n_lon;
    if (state.rows() != cfg_.channels() || state.cols() != hw) throw Error("VelocityNet: state shape does not match the config");
    if (cond.rows() != cfg_.cond_channels || cond.cols() != hw) throw Error("VelocityNet: conditioning shape does not match the config");
  }

  static void require_finite(V v, const std::string& where) {
    const T* d = v.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(static_cast<double>(d[i]))) throw NumericalError("non-finite activation in " + where);
    }
  }

  void build_geometry() {
    const auto& c = cfg_;
    const std::size_t Hp = c.latent_lat(), Wp = c.latent_lon(), Dp = c.pressure_depth();
    dims1_ = {c.latent_depth(), Hp, Wp};
    dims2_ = geometry::merged(dims1_);
    n_surf_tokens_ = Hp * Wp;
    n_press_tokens_ = Dp * Hp * Wp;
    press_feat_ = c.n_pressure_vars * c.pressure_patch[0] * c.pressure_patch[1] * c.pressure_patch[2];
    surf_feat_ = (c.n_surface + c.cond_channels) * c.surface_patch[0] * c.surface_patch[1];
    press_out_ = press_feat_;
    surf_out_ = c.n_surface * c.surface_patch[0] * c.surface_patch[1];
    pmap_ = geometry::pressure_patch_map(c);
    smap_ = geometry::surface_patch_map(c);
    prec_ = geometry::pressure_recover_map(c);
    srec_ = geometry::surface_recover_map(c);
    merge_ = geometry::merge_map(dims1_, c.embed_dim);
    expand_ = geometry::expand_map(dims1_, c.embed_dim);
  }

  void build_parameters() {
    const auto& c = cfg_;
    const std::size_t E = c.embed_dim, Td = c.time_embed_dim;
    time_w1_ = &params_.add("time.fc1.w", {Td, Td});
    time_b1_ = &params_.add("time.fc1.b", {Td});
    time_w2_ = &params_.add("time.fc2.w", {Td, Td});
    time_b2_ = &params_.add("time.fc2.b", {Td});
    embed_pw_ = &params_.add("embed.pressure.w", {press_feat_, E});
    embed_pb_ = &params_.add("embed.pressure.b", {E});
    embed_sw_ = &params_.add("embed.surface.w", {surf_feat_, E});
    embed_sb_ = &params_.add("embed.surface.b", {E});
    for (std::size_t l = 0; l < 3; ++l) {
      const geometry::Dims3 dims = l == 1 ? dims2_ : dims1_;
      const std::size_t C = c.layer_dim(l), heads = c.head_count(l);
      for (std::size_t b = 0; b < c.depths[l]; ++b) {
        Block blk;
        blk.name = block_name(l, b);
        blk.dim = C;
        blk.hidden = c.mlp_ratio * C;
        blk.part = geometry::window_partition(dims, c.window, b % 2 == 1, heads, C);
        const std::string& n = blk.name;
        blk.qkv_w = &params_.add(n + ".qkv.w", {C, 3 * C});
        blk.qkv_b = &params_.add(n + ".qkv.b", {3 * C});
        blk.proj_w = &params_.add(n + ".proj.w", {C, C});
        blk.proj_b = &params_.add(n + ".proj.b", {C});
        blk.rel = &params_.add(n + ".rel_bias", {blk.part.layout->n_rel, heads});
        blk.fc1_w = &params_.add(n + ".fc1.w", {C, blk.hidden});
        blk.fc1_b = &params_.add(n + ".fc1.b", {blk.hidden});
        blk.fc2_w = &params_.add(n + ".fc2.w", {blk.hidden, C});
        blk.fc2_b = &params_.add(n + ".fc2.b", {C});
        if (c.low_rank) {
          blk.mod_u = &params_.add(n + ".mod.U", {Td, c.lowrank_r});
          blk.mod_v = &params_.add(n + ".mod.V", {c.lowrank_r, 6 * C});
        } else {
          blk.mod_v = &params_.add(n + ".mod.M", {Td, 6 * C});
        }
        blk.mod_b = &params_.add(n + ".mod.bias", {6 * C});
        layers_[l].push_back(std::move(blk));
      }
      if (l == 0) {
        down_gamma_ = &params_.add("down.norm.gamma", {4 * E});
        down_beta_ = &params_.add("down.norm.beta", {4 * E});
        down_w_ = &params_.add("down.w", {4 * E, 2 * E});
        up_w_ = &params_.add("up.w", {2 * E, 4 * E});
      }
    }
    rec_pw_ = &params_.add("recover.pressure.w", {E, press_out_});
    rec_pb_ = &params_.add("recover.pressure.b", {press_out_});
    rec_sw_ = &params_.add("recover.surface.w", {E, surf_out_});
    rec_sb_ = &params_.add("recover.surface.b", {surf_out_});
  }

  V downsample(ad::Tape<T>& tape, V h) const {
    const std::size_t E = cfg_.embed_dim;
    V m = ad::gather(h, merge_, dims2_.count(), 4 * E);
    V n = ad::affine_rows(ad::layernorm(m), tape.param(*down_gamma_, 1, 4 * E), tape.param(*down_beta_, 1, 4 * E), false);
    return ad::linear(n, tape.param(*down_w_, 4 * E, 2 * E));
  }

  V upsample(ad::Tape<T>& tape, V h) const {
    const std::size_t E = cfg_.embed_dim;
    V u = ad::linear(h, tape.param(*up_w_, 2 * E, 4 * E));
    return ad::gather(u, expand_, dims1_.count(), E);
  }

  V run_layer(ad::Tape<T>& tape, std::size_t l, V x, V temb, ForwardTrace* trace) const {
    for (const auto& blk : layers_[l]) x = run_block(tape, blk, x, temb, trace);
    return x;
  }

  static double gated_max(V branch, V gate) {
    const std::size_t n = branch.rows(), c = branch.cols();
    const T* y = branch.data();
    const T* g = gate.data();
    double m = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) m = std::max(m, std::abs(static_cast<double>(g[j] * y[i * c + j])));
    return m;
  }

  V run_block(ad::Tape<T>& tape, const Block& blk, V x, V temb, ForwardTrace* trace) const {
    const std::size_t C = blk.dim, Td = cfg_.time_embed_dim;
    V mod;
    if (blk.mod_u) {
      V low = ad::linear(temb, tape.param(*blk.mod_u, Td, cfg_.lowrank_r));
      mod = ad::linear(low, tape.param(*blk.mod_v, cfg_.lowrank_r, 6 * C), tape.param(*blk.mod_b, 1, 6 * C));
    } else {
      mod = ad::linear(temb, tape.param(*blk.mod_v, Td, 6 * C), tape.param(*blk.mod_b, 1, 6 * C));
    }
    V scale_a = ad::slice_cols(mod, 0, C), shift_a = ad::slice_cols(mod, C, C), gate_a = ad::slice_cols(mod, 2 * C, C);
    V scale_m = ad::slice_cols(mod, 3 * C, C), shift_m = ad::slice_cols(mod, 4 * C, C), gate_m = ad::slice_cols(mod, 5 * C, C);

    V a = ad::affine_rows(ad::layernorm(x), scale_a, shift_a, true);
    V slots = ad::gather_rows(a, blk.part.to_slots);
    V qkv = ad::linear(slots, tape.param(*blk.qkv_w, C, 3 * C), tape.param(*blk.qkv_b, 1, 3 * C));
    V att = ad::window_attention(qkv, tape.param(*blk.rel, blk.part.layout->n_rel, blk.part.layout->heads), blk.part.layout);
    V proj = ad::linear(att, tape.param(*blk.proj_w, C, C), tape.param(*blk.proj_b, 1, C));
    V back = ad::gather_rows(proj, blk.part.from_slots);
    V x1 = ad::gated_add(x, back, gate_a);

    V m = ad::affine_rows(ad::layernorm(x1), scale_m, shift_m, true);
    V f = ad::gelu(ad::linear(m, tape.param(*blk.fc1_w, C, blk.hidden), tape.param(*blk.fc1_b, 1, blk.hidden)));
    V g = ad::linear(f, tape.param(*blk.fc2_w, blk.hidden, C), tape.param(*blk.fc2_b, 1, C));
    V x2 = ad::gated_add(x1, g, gate_m);

    if (trace) trace->blocks.push_back({blk.name, gated_max(back, gate_a), gated_max(g, gate_m)});
    require_finite(x2, blk.name);
    return x2;
  }

  ModelConfig cfg_;
  ad::ParameterSet<T> params_;
  geometry::Dims3 dims1_{}, dims2_{};
  std::size_t n_surf_tokens_ = 0, n_press_tokens_ = 0;
  std::size_t press_feat_ = 0, surf_feat_ = 0, press_out_ = 0, surf_out_ = 0;
  ad::IndexMap pmap_, smap_, prec_, srec_, merge_, expand_;
  std::vector<Block> layers_[3];
  P *time_w1_, *time_b1_, *time_w2_, *time_b2_;
  P *embed_pw_, *embed_pb_, *embed_sw_, *embed_sb_;
  P *down_gamma_, *down_beta_, *down_w_, *up_w_;
  P *rec_pw_, *rec_pb_, *rec_sw_, *rec_sb_;
};

}  // namespace flowcast::model
