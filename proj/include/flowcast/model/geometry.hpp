#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "flowcast/autodiff/ops.hpp"
#include "flowcast/model/config.hpp"

// Index maps that move data between the C x H x W state layout and the
// token-major latent layout. They are pure functions of the config and are
// built once per network.
namespace flowcast::model::geometry {

using ad::IndexMap;

struct Dims3 {
  std::size_t d, h, w;
  std::size_t count() const { return d * h * w; }
};

inline IndexMap make_map(std::vector<long>&& v) { return std::make_shared<const std::vector<long>>(std::move(v)); }

/// Rows of padding added above the first latitude row; the rest goes below.
inline std::size_t lat_pad_top(const ModelConfig& c) {
  return (c.latent_lat() * c.pressure_patch[1] - c.n_lat) / 2;
}

/// Padded latitude row -> source row, replicating the edge rows.
inline std::size_t source_row(const ModelConfig& c, std::size_t padded_row) {
  const long i = static_cast<long>(padded_row) - static_cast<long>(lat_pad_top(c));
  if (i < 0) return 0;
  if (i >= static_cast<long>(c.n_lat)) return c.n_lat - 1;
  return static_cast<std::size_t>(i);
}

/// Padded longitude column -> source column, wrapping around the globe.
inline std::size_t source_col(const ModelConfig& c, std::size_t padded_col) { return padded_col % c.n_lon; }

/// Combined input rows are [state channels | conditioning channels], columns H*W.
/// Pressure tokens (dp, hp, wp) x features (var, kl, kh, kw); levels past the
/// last one are zero.
inline IndexMap pressure_patch_map(const ModelConfig& c) {
  const auto [pl, ph, pw] = c.pressure_patch;
  const std::size_t Dp = c.pressure_depth(), Hp = c.latent_lat(), Wp = c.latent_lon();
  const std::size_t feat = c.n_pressure_vars * pl * ph * pw, hw = c.n_lat * c.n_lon;
  std::vector<long> idx(Dp * Hp * Wp * feat, -1);
  std::size_t k = 0;
  for (std::size_t dp = 0; dp < Dp; ++dp)
    for (std::size_t hp = 0; hp < Hp; ++hp)
      for (std::size_t wp = 0; wp < Wp; ++wp)
        for (std::size_t v = 0; v < c.n_pressure_vars; ++v)
          for (std::size_t kl = 0; kl < pl; ++kl)
            for (std::size_t kh = 0; kh < ph; ++kh)
              for (std::size_t kw = 0; kw < pw; ++kw, ++k) {
                const std::size_t level = dp * pl + kl;
                if (level >= c.n_levels) continue;
                const std::size_t row = c.n_surface + v * c.n_levels + level;
                const std::size_t i = source_row(c, hp * ph + kh), j = source_col(c, wp * pw + kw);
                idx[k] = static_cast<long>(row * hw + i * c.n_lon + j);
              }
  return make_map(std::move(idx));
}

/// Surface tokens (hp, wp) x features (channel, kh, kw) over surface state and conditioning channels.
inline IndexMap surface_patch_map(const ModelConfig& c) {
  const auto [ph, pw] = c.surface_patch;
  const std::size_t Hp = c.latent_lat(), Wp = c.latent_lon(), hw = c.n_lat * c.n_lon;
  const std::size_t nin = c.n_surface + c.cond_channels, feat = nin * ph * pw;
  std::vector<long> idx(Hp * Wp * feat, -1);
  std::size_t k = 0;
  for (std::size_t hp = 0; hp < Hp; ++hp)
    for (std::size_t wp = 0; wp < Wp; ++wp)
      for (std::size_t ch = 0; ch < nin; ++ch)
        for (std::size_t kh = 0; kh < ph; ++kh)
          for (std::size_t kw = 0; kw < pw; ++kw, ++k) {
            const std::size_t row = ch < c.n_surface ? ch : c.channels() + (ch - c.n_surface);
            const std::size_t i = source_row(c, hp * ph + kh), j = source_col(c, wp * pw + kw);
            idx[k] = static_cast<long>(row * hw + i * c.n_lon + j);
          }
  return make_map(std::move(idx));
}

/// Surface recovery output [Hp*Wp, Cs*ph*pw] -> [Cs, H*W], dropping padding.
inline IndexMap surface_recover_map(const ModelConfig& c) {
  const auto [ph, pw] = c.surface_patch;
  const std::size_t Wp = c.latent_lon(), feat = c.n_surface * ph * pw, top = lat_pad_top(c);
  std::vector<long> idx(c.n_surface * c.n_lat * c.n_lon);
  std::size_t k = 0;
  for (std::size_t ch = 0; ch < c.n_surface; ++ch)
    for (std::size_t i = 0; i < c.n_lat; ++i)
      for (std::size_t j = 0; j < c.n_lon; ++j, ++k) {
        const std::size_t ip = i + top;
        const std::size_t tok = (ip / ph) * Wp + j / pw;
        idx[k] = static_cast<long>(tok * feat + (ch * ph + ip % ph) * pw + j % pw);
      }
  return make_map(std::move(idx));
}

/// Pressure recovery output [Dp*Hp*Wp, V*pl*ph*pw] -> [V*L, H*W].
inline IndexMap pressure_recover_map(const ModelConfig& c) {
  const auto [pl, ph, pw] = c.pressure_patch;
  const std::size_t Hp = c.latent_lat(), Wp = c.latent_lon(), top = lat_pad_top(c);
  const std::size_t feat = c.n_pressure_vars * pl * ph * pw;
  std::vector<long> idx(c.n_pressure_vars * c.n_levels * c.n_lat * c.n_lon);
  std::size_t k = 0;
  for (std::size_t v = 0; v < c.n_pressure_vars; ++v)
    for (std::size_t l = 0; l < c.n_levels; ++l)
      for (std::size_t i = 0; i < c.n_lat; ++i)
        for (std::size_t j = 0; j < c.n_lon; ++j, ++k) {
          const std::size_t ip = i + top;
          const std::size_t tok = ((l / pl) * Hp + ip / ph) * Wp + j / pw;
          idx[k] = static_cast<long>(tok * feat + ((v * pl + l % pl) * ph + ip % ph) * pw + j % pw);
        }
  return make_map(std::move(idx));
}

inline Dims3 merged(Dims3 d) { return {d.d, (d.h + 1) / 2, (d.w + 1) / 2}; }

/// Patch merging over (1, 2, 2): [N, E] -> [N', 4E], zero where the 2x2 block runs off the grid.
inline IndexMap merge_map(Dims3 in, std::size_t dim) {
  const Dims3 out = merged(in);
  std::vector<long> idx(out.count() * 4 * dim, -1);
  std::size_t k = 0;
  for (std::size_t d = 0; d < out.d; ++d)
    for (std::size_t i = 0; i < out.h; ++i)
      for (std::size_t j = 0; j < out.w; ++j)
        for (std::size_t a = 0; a < 2; ++a)
          for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t e = 0; e < dim; ++e, ++k) {
              const std::size_t si = 2 * i + a, sj = 2 * j + b;
              if (si >= in.h || sj >= in.w) continue;
              idx[k] = static_cast<long>(((d * in.h + si) * in.w + sj) * dim + e);
            }
  return make_map(std::move(idx));
}

/// Inverse of merge_map's layout: [N', 4E] -> [N, E] (sub-pixel shuffle and crop).
inline IndexMap expand_map(Dims3 fine, std::size_t dim) {
  const Dims3 coarse = merged(fine);
  std::vector<long> idx(fine.count() * dim);
  std::size_t k = 0;
  for (std::size_t d = 0; d < fine.d; ++d)
    for (std::size_t i = 0; i < fine.h; ++i)
      for (std::size_t j = 0; j < fine.w; ++j)
        for (std::size_t e = 0; e < dim; ++e, ++k) {
          const std::size_t src = (d * coarse.h + i / 2) * coarse.w + j / 2;
          const std::size_t sub = (i % 2) * 2 + j % 2;
          idx[k] = static_cast<long>(src * 4 * dim + sub * dim + e);
        }
  return make_map(std::move(idx));
}

/// Effective window per dimension: the configured window, clipped to the grid.
inline std::array<std::size_t, 3> effective_window(Dims3 dims, const std::array<std::size_t, 3>& window) {
  return {std::min(window[0], dims.d), std::min(window[1], dims.h), std::min(window[2], dims.w)};
}

inline std::size_t relative_table_size(const std::array<std::size_t, 3>& win) {
  return (2 * win[0] - 1) * (2 * win[1] - 1) * (2 * win[2] - 1);
}

/// Window partition (optionally shifted by half a window) of a D x H x W token grid.
struct WindowPartition {
  IndexMap to_slots;    // slot -> token row, -1 for padding
  IndexMap from_slots;  // token row -> slot
  std::shared_ptr<const ad::AttentionLayout> layout;
};

/// Shifted windows roll the grid by half a window before partitioning. The
/// longitude axis is periodic, so tokens rolled across the date line still
/// attend to each other; across the depth and latitude edges, and across a
/// padded longitude edge, they are masked apart.
inline WindowPartition window_partition(Dims3 dims, const std::array<std::size_t, 3>& window, bool shifted,
                                        std::size_t heads, std::size_t dim) {
  const auto win = effective_window(dims, window);
  const std::array<std::size_t, 3> size{dims.d, dims.h, dims.w};
  std::array<std::size_t, 3> padded{}, shift{}, nwin{};
  for (int k = 0; k < 3; ++k) {
    padded[k] = (size[k] + win[k] - 1) / win[k] * win[k];
    shift[k] = shifted && win[k] < size[k] ? win[k] / 2 : 0;
    nwin[k] = padded[k] / win[k];
  }
  const bool lon_periodic = padded[2] == size[2];
  const std::size_t nt = win[0] * win[1] * win[2];
  const std::size_t windows = nwin[0] * nwin[1] * nwin[2];

  auto layout = std::make_shared<ad::AttentionLayout>();
  layout->windows = windows;
  layout->window_tokens = nt;
  layout->heads = heads;
  layout->dim = dim;
  layout->n_rel = relative_table_size(win);
  layout->slot_label.assign(windows * nt, -1);
  std::vector<long> to(windows * nt, -1), from(dims.count(), -1);

  std::size_t slot = 0;
  for (std::size_t bd = 0; bd < nwin[0]; ++bd)
    for (std::size_t bh = 0; bh < nwin[1]; ++bh)
      for (std::size_t bw = 0; bw < nwin[2]; ++bw)
        for (std::size_t pd = 0; pd < win[0]; ++pd)
          for (std::size_t ph = 0; ph < win[1]; ++ph)
            for (std::size_t pw = 0; pw < win[2]; ++pw, ++slot) {
              const std::array<std::size_t, 3> c{bd * win[0] + pd, bh * win[1] + ph, bw * win[2] + pw};
              std::array<std::size_t, 3> src{};
              int label = 0;
              bool pad = false;
              for (int k = 0; k < 3; ++k) {
                const bool wrapped = c[k] + shift[k] >= padded[k];
                src[k] = (c[k] + shift[k]) % padded[k];
                if (src[k] >= size[k]) pad = true;
                if (wrapped && !(k == 2 && lon_periodic)) label |= 1 << k;
              }
              if (pad) continue;
              const std::size_t tok = (src[0] * size[1] + src[1]) * size[2] + src[2];
              to[slot] = static_cast<long>(tok);
              from[tok] = static_cast<long>(slot);
              layout->slot_label[slot] = label;
            }

  layout->rel_index.resize(nt * nt);
  const long sh = static_cast<long>(2 * win[1] - 1), sw = static_cast<long>(2 * win[2] - 1);
  for (std::size_t a = 0; a < nt; ++a) {
    const long ad = static_cast<long>(a / (win[1] * win[2])), ah = static_cast<long>(a / win[2] % win[1]),
               aw = static_cast<long>(a % win[2]);
    for (std::size_t b = 0; b < nt; ++b) {
      const long bd = static_cast<long>(b / (win[1] * win[2])), bh = static_cast<long>(b / win[2] % win[1]),
                 bw = static_cast<long>(b % win[2]);
      layout->rel_index[a * nt + b] = ((ad - bd + static_cast<long>(win[0]) - 1) * sh + (ah - bh + static_cast<long>(win[1]) - 1)) * sw +
                                      (aw - bw + static_cast<long>(win[2]) - 1);
    }
  }
  return {make_map(std::move(to)), make_map(std::move(from)), layout};
}

}  // namespace flowcast::model::geometry
