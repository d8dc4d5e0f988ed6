#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "flowcast/core/keyvalue.hpp"
#include "flowcast/core/time.hpp"
#include "flowcast/diag/energy.hpp"
#include "flowcast/diag/jumps.hpp"
#include "flowcast/diag/spectrum.hpp"

namespace flowcast::diag {

struct RmseRow {
  std::size_t lead_hour = 0;
  std::string channel;
  double value = 0;
};

struct SpectrumRow {
  int wavenumber = 0;
  double energy = 0;
  double lead_day = 0;
  std::string channel;
};

namespace detail {
inline std::ofstream open_csv(const std::filesystem::path& path, const std::string& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << header << '\n';
  return out;
}
inline std::string num(double v) { return KeyValueFile::format_double(v); }
}  // namespace detail

inline void write_rmse_csv(const std::filesystem::path& path, const std::vector<RmseRow>& rows) {
  auto out = detail::open_csv(path, "lead_hour,channel,value");
  for (const auto& r : rows) out << r.lead_hour << ',' << r.channel << ',' << detail::num(r.value) << '\n';
}

/// The header comment records the normalisation convention.
inline void write_spectrum_csv(const std::filesystem::path& path, const std::vector<SpectrumRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "# normalization: " << SpectrumResult::kNormalization << '\n';
  out << "wavenumber,energy,lead_day,channel\n";
  for (const auto& r : rows)
    out << r.wavenumber << ',' << detail::num(r.energy) << ',' << detail::num(r.lead_day) << ',' << r.channel << '\n';
}

inline void write_energy_csv(const std::filesystem::path& path, const std::vector<EnergyBudget>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "# c_v=" << kCv << " L_v(Tc)=" << kLv0 << "-" << kLvSlope << "*Tc g=" << kGravity << " bottom_hPa=" << kBottomPressureHpa
      << '\n';
  out << "timestamp,internal,latent,potential,kinetic\n";
  for (const auto& b : rows)
    out << format_iso8601(b.time) << ',' << detail::num(b.internal) << ',' << detail::num(b.latent) << ','
        << detail::num(b.potential) << ',' << detail::num(b.kinetic) << '\n';
}

inline void write_jumps_csv(const std::filesystem::path& path, const JumpReport& rep) {
  auto out = detail::open_csv(path, "hour,utc_hour,z,flag");
  for (const auto& r : rep.rows) out << r.index << ',' << r.utc_hour << ',' << detail::num(r.z) << ',' << (r.flag ? 1 : 0) << '\n';
}

}  // namespace flowcast::diag
