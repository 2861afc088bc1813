// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "aeskd/image.hpp"
#include "aeskd/score_dist.hpp"

namespace aeskd {

/// Either a scalar MOS or a full score distribution.
using Label = std::variant<double, ScoreDistribution>;

struct SampleRecord {
  std::string id;
  std::string uri;
  std::string source;
  std::optional<Label> label;
};

/// A typed list of samples. Labeled manifests carry a label on every record,
/// unlabeled manifests on none.
struct Manifest {
  bool labeled = false;
  std::vector<double> bin_values = default_bin_values();
  double score_lo = 1.0;
  double score_hi = 10.0;
  std::vector<SampleRecord> records;
  /// Relative uris resolve against this directory. Not serialized.
  std::filesystem::path base_dir;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::filesystem::path resolve(const SampleRecord& r) const;
  /// Throws ValidationError on any broken invariant.
  void validate() const;
};

/// Line-delimited JSON: one header object, then one object per record with
/// keys id, uri, source, label (null, a number, or an array of bin masses).
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

std::map<std::string, std::size_t> source_counts(const Manifest& manifest);

struct MergeResult {
  Manifest manifest;
  std::size_t duplicates = 0;  // records dropped because their id was already present
};

/// Concatenates, keeps the first record per id, and sorts by id. All inputs
/// must be unlabeled, or all labeled with identical bins.
MergeResult merge_manifests(std::span<const Manifest> sources);

/// Training target for a labeled record. Scalar labels go through
/// scalar_to_distribution with `mode`.
ScoreDistribution target_distribution(const SampleRecord& record, const Manifest& manifest,
                                      Discretization mode = Discretization::linear_split);

/// Scalar ground truth used by the metrics.
double target_mos(const SampleRecord& record, const Manifest& manifest);

/// Decodes and caches resized rasters by uri. Undecodable records are
/// skipped and their ids collected for the skip report.
class ImageLoader {
 public:
  const Raster* load(const Manifest& manifest, const SampleRecord& record, int resize);

  const std::vector<std::string>& skipped() const noexcept { return skipped_; }
  void write_skip_report(const std::filesystem::path& path) const;

 private:
  std::map<std::pair<std::string, int>, std::optional<Raster>> cache_;
  std::vector<std::string> skipped_;
};

}  // namespace aeskd
