// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "aeskd/errors.hpp"

namespace aeskd {

namespace {

constexpr const char* kManifestFormat = "aeskd-manifest";

}  // namespace

std::filesystem::path Manifest::resolve(const SampleRecord& r) const {
  std::filesystem::path p(r.uri);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void Manifest::validate() const {
  if (labeled) {
    validate_bin_values(bin_values);
    if (!(score_lo < score_hi)) throw ValidationError("manifest score range is empty");
  }
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (r.uri.empty()) throw ValidationError(fmt::format("record '{}' has an empty uri", r.id));
    if (!ids.insert(r.id).second) throw ValidationError(fmt::format("duplicate id '{}'", r.id));
    if (labeled != r.label.has_value()) {
      throw ValidationError(fmt::format("record '{}' breaks the manifest's all-or-none labeling", r.id));
    }
    if (!r.label) continue;
    if (const auto* s = std::get_if<double>(&*r.label)) {
      if (!(*s >= score_lo && *s <= score_hi)) {
        throw ValidationError(fmt::format("record '{}' score {} outside [{}, {}]", r.id, *s,
                                          score_lo, score_hi));
      }
    } else if (std::get<ScoreDistribution>(*r.label).bin_values().size() != bin_values.size() ||
               !std::equal(bin_values.begin(), bin_values.end(),
                           std::get<ScoreDistribution>(*r.label).bin_values().begin())) {
      throw ValidationError(fmt::format("record '{}' uses different bins", r.id));
    }
  }
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read manifest {}", path.string()));
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != kManifestFormat) {
          throw ValidationError(fmt::format("{}: missing manifest header", path.string()));
        }
        m.labeled = j.at("labeled").get<bool>();
        m.bin_values = j.at("bin_values").get<std::vector<double>>();
        const auto range = j.at("score_range").get<std::vector<double>>();
        if (range.size() != 2) throw ValidationError("score_range needs two entries");
        m.score_lo = range[0];
        m.score_hi = range[1];
        have_header = true;
        continue;
      }
      SampleRecord r;
      r.id = j.at("id").get<std::string>();
      r.uri = j.at("uri").get<std::string>();
      r.source = j.value("source", "");
      const auto& label = j.contains("label") ? j.at("label") : nlohmann::json(nullptr);
      if (label.is_number()) {
        r.label = label.get<double>();
      } else if (label.is_array()) {
        r.label = ScoreDistribution::from_file_values(label.get<std::vector<double>>(), m.bin_values);
      } else if (!label.is_null()) {
        throw ValidationError("label must be null, a number or an array");
      }
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  if (!have_header) throw ValidationError(fmt::format("{}: empty manifest file", path.string()));
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  manifest.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write manifest {}", path.string()));
  nlohmann::json header = {{"format", kManifestFormat},
                           {"version", 1},
                           {"labeled", manifest.labeled},
                           {"bin_values", manifest.bin_values},
                           {"score_range", {manifest.score_lo, manifest.score_hi}}};
  out << header.dump() << '\n';
  for (const auto& r : manifest.records) {
    nlohmann::json j = {{"id", r.id}, {"uri", r.uri}, {"source", r.source}, {"label", nullptr}};
    if (r.label) {
      if (const auto* s = std::get_if<double>(&*r.label)) {
        j["label"] = *s;
      } else {
        const auto probs = std::get<ScoreDistribution>(*r.label).probs();
        j["label"] = std::vector<double>(probs.begin(), probs.end());
      }
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError(fmt::format("short write to {}", path.string()));
}

std::map<std::string, std::size_t> source_counts(const Manifest& manifest) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : manifest.records) ++counts[r.source];
  return counts;
}

MergeResult merge_manifests(std::span<const Manifest> sources) {
  if (sources.empty()) throw ArgumentError("nothing to merge");
  const auto& first = sources.front();
  for (const auto& s : sources) {
    if (s.labeled != first.labeled) {
      throw CompositionError("cannot merge labeled and unlabeled manifests");
    }
    if (s.labeled && (s.bin_values != first.bin_values || s.score_lo != first.score_lo ||
                      s.score_hi != first.score_hi)) {
      throw CompositionError("labeled manifests must share one bin specification");
    }
  }
  MergeResult result;
  result.manifest.labeled = first.labeled;
  result.manifest.bin_values = first.bin_values;
  result.manifest.score_lo = first.score_lo;
  result.manifest.score_hi = first.score_hi;
  std::set<std::string> seen;
  for (const auto& s : sources) {
    for (const auto& r : s.records) {
      if (!seen.insert(r.id).second) {
        ++result.duplicates;
        continue;
      }
      auto copy = r;
      // Keep records loadable once detached from their source file.
      if (!s.base_dir.empty()) copy.uri = s.resolve(r).string();
      result.manifest.records.push_back(std::move(copy));
    }
  }
  std::sort(result.manifest.records.begin(), result.manifest.records.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.id < b.id; });
  if (result.duplicates > 0) {
    spdlog::warn("merge dropped {} duplicate ids", result.duplicates);
  }
  return result;
}

ScoreDistribution target_distribution(const SampleRecord& record, const Manifest& manifest,
                                      Discretization mode) {
  if (!record.label) throw ArgumentError(fmt::format("record '{}' has no label", record.id));
  if (const auto* s = std::get_if<double>(&*record.label)) {
    return scalar_to_distribution(*s, manifest.bin_values, mode);
  }
  return std::get<ScoreDistribution>(*record.label);
}

double target_mos(const SampleRecord& record, const Manifest& manifest) {
  (void)manifest;
  if (!record.label) throw ArgumentError(fmt::format("record '{}' has no label", record.id));
  if (const auto* s = std::get_if<double>(&*record.label)) return *s;
  return mos(std::get<ScoreDistribution>(*record.label)).value;
}

const Raster* ImageLoader::load(const Manifest& manifest, const SampleRecord& record, int resize) {
  const auto path = manifest.resolve(record).string();
  auto key = std::make_pair(path, resize);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    auto decoded = decode_image(path);
    std::optional<Raster> entry;
    if (decoded && decoded->width > 0 && decoded->height > 0) {
      entry = resize_square(*decoded, resize);
    } else {
      spdlog::warn("skipping undecodable image '{}' ({})", record.id, path);
      skipped_.push_back(record.id);
    }
    it = cache_.emplace(std::move(key), std::move(entry)).first;
  }
  return it->second ? &*it->second : nullptr;
}

void ImageLoader::write_skip_report(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write skip report {}", path.string()));
  for (const auto& id : skipped_) out << id << '\n';
}

}  // namespace aeskd
