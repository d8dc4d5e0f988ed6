#pragma once

#include <cstddef>

#include "flowcast/model/config.hpp"
#include "flowcast/model/geometry.hpp"

namespace flowcast::model {

struct ParamCount {
  std::size_t total = 0;
  std::size_t modulation = 0;
};

/// Modulation parameters of one block with channel width C.
inline std::size_t modulation_params(std::size_t time_dim, std::size_t C, bool low_rank, std::size_t r) {
  return low_rank ? time_dim * r + r * 6 * C + 6 * C : time_dim * 6 * C + 6 * C;
}

/// Closed-form count of every trainable parameter the network allocates.
inline ParamCount count_parameters(const ModelConfig& c, bool low_rank) {
  const std::size_t E = c.embed_dim, Td = c.time_embed_dim;
  const auto [pl, ph, pw] = c.pressure_patch;
  const std::size_t press_feat = c.n_pressure_vars * pl * ph * pw;
  const std::size_t surf_in = (c.n_surface + c.cond_channels) * ph * pw;
  const std::size_t surf_out = c.n_surface * ph * pw;
  const geometry::Dims3 d1{c.latent_depth(), c.latent_lat(), c.latent_lon()};
  const geometry::Dims3 d2 = geometry::merged(d1);

  ParamCount n;
  n.total += 2 * (Td * Td + Td);
  n.total += press_feat * E + E + surf_in * E + E;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t C = c.layer_dim(l), hidden = c.mlp_ratio * C, heads = c.head_count(l);
    const auto win = geometry::effective_window(l == 1 ? d2 : d1, c.window);
    const std::size_t mod = modulation_params(Td, C, low_rank, c.lowrank_r);
    const std::size_t block = (C * 3 * C + 3 * C) + (C * C + C) + geometry::relative_table_size(win) * heads +
                              (C * hidden + hidden) + (hidden * C + C) + mod;
    n.total += c.depths[l] * block;
    n.modulation += c.depths[l] * mod;
  }
  n.total += 2 * 4 * E + 4 * E * 2 * E + 2 * E * 4 * E;
  n.total += E * press_feat + press_feat + E * surf_out + surf_out;
  return n;
}

}  // namespace flowcast::model
