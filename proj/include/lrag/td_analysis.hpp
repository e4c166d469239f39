/* Copyright 2026 The lrag Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Transformation divergence (TD): the entropy of a weight matrix's normalized
// singular-value spectrum, profiled layer by layer.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrag/error.hpp"
#include "lrag/format.hpp"
#include "lrag/linalg.hpp"
#include "lrag/matrix.hpp"
#include "lrag/tensor_store.hpp"

namespace lrag {

struct TDProfile {
  std::vector<std::size_t> layer_indices;
  std::vector<double> td_values;
  std::string matrix_name_pattern;
  std::string model_label;

  std::size_t size() const { return td_values.size(); }
};

/// Boundaries are positions in the profile: extract = [0, extract_end),
/// process = [extract_end, process_end), generate = [process_end, size).
struct PhaseSegmentation {
  std::size_t extract_end = 0;
  std::size_t process_end = 0;

  bool operator==(const PhaseSegmentation&) const = default;
};

/// Which axis of a stored W_v is split into heads in per-head mode. Checkpoints
/// that store [out, in] split rows; the toy model stores [in, out] and splits
/// columns.
enum class HeadAxis { Rows, Cols };

struct TDOptions {
  bool per_head = false;
  std::size_t n_heads = 1;
  HeadAxis head_axis = HeadAxis::Rows;
  double tol = kDefaultSvdTol;
};

inline double transformation_divergence(std::span<const double> spectrum) {
  require(!spectrum.empty(), ErrorCode::AllZeroSpectrum, "empty spectrum");
  double total = 0.0;
  for (double s : spectrum) {
    require(s >= 0.0 && std::isfinite(s), ErrorCode::InvalidValue, "singular values must be finite and >= 0");
    total += s;
  }
  require(total > 0.0, ErrorCode::AllZeroSpectrum, "spectrum is all zero");
  double td = 0.0;
  for (double s : spectrum) {
    if (s == 0.0) continue;
    const double p = s / total;
    td -= p * std::log(p);
  }
  return std::max(td, 0.0);
}

inline double transformation_divergence(const SingularSpectrum& spectrum) {
  return transformation_divergence(spectrum.values);
}

inline double transformation_divergence(const Matrix& w, double tol = kDefaultSvdTol) {
  return transformation_divergence(singular_values(w, tol));
}

/// The rank-1 factors u_i v_i^T of w, ordered by descending singular value.
inline std::vector<Matrix> transformation_direction(const Matrix& w, double tol = kDefaultSvdTol) {
  if (std::all_of(w.data.begin(), w.data.end(), [](double v) { return v == 0.0; }))
    fail(ErrorCode::ZeroMatrix, "transformation direction of a zero matrix");
  const SvdResult s = svd(w, tol);
  std::vector<Matrix> dirs;
  dirs.reserve(s.sigma.size());
  for (std::size_t k = 0; k < s.sigma.size(); ++k) {
    Matrix d(w.rows, w.cols);
    for (std::size_t i = 0; i < w.rows; ++i)
      for (std::size_t j = 0; j < w.cols; ++j) d(i, j) = s.u(i, k) * s.v(j, k);
    dirs.push_back(std::move(d));
  }
  return dirs;
}

/// Matches "prefix{}suffix" against a name; returns the integer in the slot.
class LayerPattern {
 public:
  explicit LayerPattern(const std::string& pattern) : pattern_(pattern) {
    const auto pos = pattern.find("{}");
    if (pos == std::string::npos || pattern.find("{}", pos + 2) != std::string::npos)
      fail(ErrorCode::PatternMatchesNothing, "pattern '" + pattern + "' must contain exactly one {} placeholder");
    prefix_ = pattern.substr(0, pos);
    suffix_ = pattern.substr(pos + 2);
  }

  std::optional<std::size_t> match(const std::string& name) const {
    if (name.size() <= prefix_.size() + suffix_.size()) return std::nullopt;
    if (name.compare(0, prefix_.size(), prefix_) != 0) return std::nullopt;
    if (name.compare(name.size() - suffix_.size(), suffix_.size(), suffix_) != 0) return std::nullopt;
    const std::string mid = name.substr(prefix_.size(), name.size() - prefix_.size() - suffix_.size());
    if (mid.size() > 9 || !std::all_of(mid.begin(), mid.end(), [](unsigned char c) { return std::isdigit(c); }))
      return std::nullopt;
    return static_cast<std::size_t>(std::stoul(mid));
  }

  std::string name_for(std::size_t layer) const { return prefix_ + std::to_string(layer) + suffix_; }
  const std::string& pattern() const { return pattern_; }

 private:
  std::string pattern_, prefix_, suffix_;
};

/// Mean TD over equal head slices of w.
inline double per_head_mean_td(const Matrix& w, std::size_t n_heads, HeadAxis axis, double tol) {
  const std::size_t extent = axis == HeadAxis::Rows ? w.rows : w.cols;
  require(n_heads >= 1 && extent % n_heads == 0, ErrorCode::ShapeMismatch,
          std::to_string(extent) + " is not divisible into " + std::to_string(n_heads) + " heads");
  const std::size_t width = extent / n_heads;
  double sum = 0.0;
  for (std::size_t h = 0; h < n_heads; ++h) {
    Matrix slice = axis == HeadAxis::Rows ? Matrix(width, w.cols) : Matrix(w.rows, width);
    for (std::size_t i = 0; i < slice.rows; ++i)
      for (std::size_t j = 0; j < slice.cols; ++j)
        slice(i, j) = axis == HeadAxis::Rows ? w(h * width + i, j) : w(i, h * width + j);
    sum += transformation_divergence(singular_values(slice, tol));
  }
  return sum / static_cast<double>(n_heads);
}

inline TDProfile td_profile(const TensorStore& store, const std::string& name_pattern, const TDOptions& opts = {},
                            const std::string& model_label = "") {
  const LayerPattern pattern(name_pattern);
  std::vector<std::pair<std::size_t, const Matrix*>> layers;
  for (const auto& [name, m] : store.entries)
    if (auto idx = pattern.match(name)) layers.emplace_back(*idx, &m);
  if (layers.empty()) fail(ErrorCode::PatternMatchesNothing, "no tensor matches '" + name_pattern + "'");
  std::sort(layers.begin(), layers.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  TDProfile profile;
  profile.matrix_name_pattern = name_pattern;
  profile.model_label = model_label;
  for (const auto& [idx, m] : layers) {
    try {
      const double td = opts.per_head ? per_head_mean_td(*m, opts.n_heads, opts.head_axis, opts.tol)
                                      : transformation_divergence(singular_values(*m, opts.tol));
      profile.layer_indices.push_back(idx);
      profile.td_values.push_back(td);
    } catch (const Error& e) {
      throw Error(e.code(), "layer " + std::to_string(idx) + ": " + e.what());
    }
  }
  return profile;
}

/// Layer index of the smallest TD after skipping the first `skip_first`
/// entries; ties go to the later layer.
inline std::size_t min_td_layer(const TDProfile& profile, std::size_t skip_first = 1) {
  if (profile.size() <= skip_first)
    fail(ErrorCode::EmptyAfterSkip, "profile has " + std::to_string(profile.size()) + " layers, skipping " +
                                        std::to_string(skip_first));
  std::size_t best = skip_first;
  for (std::size_t i = skip_first + 1; i < profile.size(); ++i)
    if (profile.td_values[i] <= profile.td_values[best]) best = i;
  return profile.layer_indices[best];
}

namespace detail {

inline double segment_sse(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  double mean = 0.0;
  for (std::size_t i = begin; i < end; ++i) mean += v[i];
  mean /= static_cast<double>(end - begin);
  double sse = 0.0;
  for (std::size_t i = begin; i < end; ++i) sse += (v[i] - mean) * (v[i] - mean);
  return sse;
}

}  // namespace detail

/// Best piecewise-constant 3-segment fit by exhaustive search over boundary
/// pairs. Near-ties (within rounding) keep the lexicographically first pair.
inline PhaseSegmentation detect_phases(const TDProfile& profile) {
  const auto& v = profile.td_values;
  const std::size_t n = v.size();
  if (n < 3) fail(ErrorCode::TooFewLayers, "phase detection needs >= 3 layers, got " + std::to_string(n));

  double scale = detail::segment_sse(v, 0, n);
  const double eps = 1e-12 * (1.0 + scale);
  PhaseSegmentation best{1, 2};
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t a = 1; a + 1 < n; ++a) {
    const double first = detail::segment_sse(v, 0, a);
    for (std::size_t b = a + 1; b < n; ++b) {
      const double cost = first + detail::segment_sse(v, a, b) + detail::segment_sse(v, b, n);
      if (cost < best_cost - eps) {
        best_cost = cost;
        best = {a, b};
      }
    }
  }
  return best;
}

inline std::string td_profile_csv(const TDProfile& profile) {
  std::string out = "layer,td\n";
  for (std::size_t i = 0; i < profile.size(); ++i)
    out += std::to_string(profile.layer_indices[i]) + "," + format_double(profile.td_values[i]) + "\n";
  return out;
}

inline nlohmann::json td_report_json(const TDProfile& profile, const std::optional<PhaseSegmentation>& phases,
                                     const std::optional<std::size_t>& min_layer) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < profile.size(); ++i)
    layers.push_back({{"index", profile.layer_indices[i]}, {"td", profile.td_values[i]}});
  nlohmann::json report = {{"model_label", profile.model_label},
                           {"pattern", profile.matrix_name_pattern},
                           {"layers", std::move(layers)}};
  report["phases"] = phases ? nlohmann::json{{"extract_end", phases->extract_end}, {"process_end", phases->process_end}}
                            : nlohmann::json(nullptr);
  report["min_td_layer"] = min_layer ? nlohmann::json(*min_layer) : nlohmann::json(nullptr);
  return report;
}

}  // namespace lrag
