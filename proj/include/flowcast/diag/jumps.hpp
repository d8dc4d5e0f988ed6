#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "flowcast/core/error.hpp"

namespace flowcast::diag {

struct JumpRow {
  std::size_t index = 0;  // position in the series; the increment runs from index-1 to index
  int utc_hour = 0;
  double z = 0;
  bool boundary = false;
  bool flag = false;
};

struct JumpReport {
  std::vector<JumpRow> rows;
  double median_increment = 0;
  double threshold = 3;

  std::vector<JumpRow> flagged() const {
    std::vector<JumpRow> out;
    for (const auto& r : rows)
      if (r.flag) out.push_back(r);
    return out;
  }
  std::vector<JumpRow> boundary_rows() const {
    std::vector<JumpRow> out;
    for (const auto& r : rows)
      if (r.boundary) out.push_back(r);
    return out;
  }
  double max_boundary_z() const {
    double m = 0;
    for (const auto& r : rows)
      if (r.boundary) m = std::max(m, r.z);
    return m;
  }
};

/// Scores every hourly increment of `series` (first sample at UTC hour
/// `start_hour`) as z = |increment| / median |increment| over the increments
/// that do not end on a boundary hour, and flags z > threshold. A zero
/// increment has z = 0 even when the median is zero.
inline JumpReport discontinuity_score(const std::vector<double>& series, int start_hour,
                                      const std::vector<int>& boundary_hours = {9, 21}, double threshold = 3.0,
                                      std::size_t min_length = 48) {
  if (series.size() < min_length) throw Error("discontinuity_score: need at least " + std::to_string(min_length) + " hourly points");
  const std::set<int> bset(boundary_hours.begin(), boundary_hours.end());
  std::vector<double> inc(series.size(), 0.0), calm;
  for (std::size_t k = 1; k < series.size(); ++k) {
    inc[k] = std::abs(series[k] - series[k - 1]);
    if (!bset.contains((start_hour + static_cast<int>(k)) % 24)) calm.push_back(inc[k]);
  }
  if (calm.empty()) throw Error("discontinuity_score: no non-boundary increments");
  std::sort(calm.begin(), calm.end());
  const std::size_t n = calm.size();
  const double med = n % 2 ? calm[n / 2] : 0.5 * (calm[n / 2 - 1] + calm[n / 2]);
  JumpReport rep;
  rep.median_increment = med;
  rep.threshold = threshold;
  for (std::size_t k = 1; k < series.size(); ++k) {
    JumpRow r;
    r.index = k;
    r.utc_hour = (start_hour + static_cast<int>(k)) % 24;
    r.boundary = bset.contains(r.utc_hour);
    if (inc[k] == 0) {
      r.z = 0;
    } else {
      r.z = med > 0 ? inc[k] / med : std::numeric_limits<double>::infinity();
    }
    r.flag = r.z > threshold;
    rep.rows.push_back(r);
  }
  return rep;
}

}  // namespace flowcast::diag
