#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowcast/core/error.hpp"

namespace flowcast {

/// One entry of the flattened channel axis.
struct ChannelInfo {
  std::string name;            // "MSLP", "T850", ...
  std::string variable;        // "MSLP", "T", ...
  std::optional<double> level; // hPa for pressure variables
};

/// Variable taxonomy. The channel axis is laid out as all surface variables
/// first, then each pressure variable over all levels (variable-major).
class VariableRegistry {
 public:
  VariableRegistry() = default;
  VariableRegistry(std::vector<std::string> surface, std::vector<std::string> pressure,
                   std::vector<double> levels, std::vector<std::string> statics = {},
                   std::vector<std::string> clocks = {})
      : surface_(std::move(surface)),
        pressure_(std::move(pressure)),
        levels_(std::move(levels)),
        static_(std::move(statics)),
        clock_(std::move(clocks)) {
    std::set<std::string> seen;
    auto add = [&](const std::vector<std::string>& names) {
      for (const auto& n : names) {
        if (!seen.insert(n).second) throw Error("VariableRegistry: duplicate name '" + n + "'");
      }
    };
    add(surface_);
    add(pressure_);
    add(static_);
    add(clock_);
    if (!pressure_.empty() && levels_.empty()) throw Error("VariableRegistry: pressure variables need levels");
    for (std::size_t i = 1; i < levels_.size(); ++i) {
      if (!(levels_[i] > levels_[i - 1])) {
        throw Error("VariableRegistry: levels must be ordered top of atmosphere first (increasing hPa)");
      }
    }
    std::set<std::string> flat(static_.begin(), static_.end());
    flat.insert(clock_.begin(), clock_.end());
    for (const auto& c : channels()) {
      if (!flat.insert(c.name).second) {
        throw Error("VariableRegistry: channel name '" + c.name + "' collides with another name");
      }
    }
  }

  const std::vector<std::string>& surface_vars() const { return surface_; }
  const std::vector<std::string>& pressure_vars() const { return pressure_; }
  const std::vector<double>& levels() const { return levels_; }
  const std::vector<std::string>& static_vars() const { return static_; }
  const std::vector<std::string>& clock_vars() const { return clock_; }

  std::size_t n_surface() const { return surface_.size(); }
  std::size_t n_pressure() const { return pressure_.size(); }
  std::size_t n_levels() const { return levels_.size(); }
  std::size_t n_channels() const { return surface_.size() + pressure_.size() * levels_.size(); }

  static std::string level_name(const std::string& var, double level) {
    return var + std::to_string(static_cast<long>(level));
  }

  std::vector<ChannelInfo> channels() const {
    std::vector<ChannelInfo> out;
    out.reserve(n_channels());
    for (const auto& s : surface_) out.push_back({s, s, std::nullopt});
    for (const auto& p : pressure_) {
      for (double l : levels_) out.push_back({level_name(p, l), p, l});
    }
    return out;
  }

  std::optional<std::size_t> find_surface(const std::string& var) const {
    auto it = std::find(surface_.begin(), surface_.end(), var);
    if (it == surface_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - surface_.begin());
  }

  std::optional<std::size_t> find_pressure(const std::string& var, double level) const {
    auto pv = std::find(pressure_.begin(), pressure_.end(), var);
    auto lv = std::find(levels_.begin(), levels_.end(), level);
    if (pv == pressure_.end() || lv == levels_.end()) return std::nullopt;
    return surface_.size() + static_cast<std::size_t>(pv - pressure_.begin()) * levels_.size() +
           static_cast<std::size_t>(lv - levels_.begin());
  }

  /// Channel index by flattened name ("MSLP", "T850"); throws if absent.
  std::size_t channel(const std::string& name) const {
    const auto all = channels();
    for (std::size_t c = 0; c < all.size(); ++c) {
      if (all[c].name == name) return c;
    }
    throw Error("VariableRegistry: unknown channel '" + name + "'");
  }

  std::size_t channel(const std::string& var, double level) const {
    if (auto c = find_pressure(var, level)) return *c;
    throw Error("VariableRegistry: missing channel " + level_name(var, level));
  }

  bool operator==(const VariableRegistry&) const = default;

 private:
  std::vector<std::string> surface_;
  std::vector<std::string> pressure_;
  std::vector<double> levels_;
  std::vector<std::string> static_;
  std::vector<std::string> clock_;
};

}  // namespace flowcast
