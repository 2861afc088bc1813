// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aeskd/manifest.hpp"
#include "aeskd/model_zoo.hpp"
#include "aeskd/nn/layers.hpp"

namespace aeskd {

/// Binary checkpoint: an 8-byte magic, a length-prefixed JSON header holding
/// `meta` plus the tensor directory, then every tensor as little-endian
/// float64 in directory order. Tensors are stored sorted by name, so equal
/// contents give byte-identical files.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, nn::Matrix> tensors;
};

/// Writes to a temporary sibling, then renames over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void store_parameters(Checkpoint& ckpt, const std::string& prefix, const nn::ParameterList& params);
/// Throws IntegrityError when a tensor is missing or has the wrong shape.
void restore_parameters(const Checkpoint& ckpt, const std::string& prefix,
                        const nn::ParameterList& params);

/// Records the backbone spec under meta["backbone_spec"] and its tensors
/// under "backbone/".
void store_backbone(Checkpoint& ckpt, Encoder& backbone);
std::unique_ptr<Encoder> load_backbone(const Checkpoint& ckpt);

void store_score_model(Checkpoint& ckpt, ScoreModel& model);
std::unique_ptr<ScoreModel> load_score_model(const Checkpoint& ckpt);

void store_projector(Checkpoint& ckpt, Mlp& projector);
/// Rebuilds a projector from meta["projector_dims"] and "projector/" tensors.
void restore_projector(const Checkpoint& ckpt, Mlp& projector);

/// Teacher features keyed by sample id, tied to the teacher that produced
/// them and to the preprocessing that fed it.
struct FeatureCache {
  std::string teacher_id;
  std::string preprocess_fingerprint;
  std::size_t feature_dim = 0;
  std::map<std::string, std::vector<double>> features;

  /// Digest of teacher_id and preprocess_fingerprint, stored in the header.
  std::string fingerprint() const;
  std::size_t size() const noexcept { return features.size(); }
  /// Throws ArgumentError when the id was never cached.
  const std::vector<double>& at(const std::string& id) const;
};

void save_feature_cache(const std::filesystem::path& path, const FeatureCache& cache);
FeatureCache load_feature_cache(const std::filesystem::path& path);

/// Encodes every decodable record of `manifest` with eval-mode preprocessing.
FeatureCache cache_features(FrozenEncoder& teacher, const Manifest& manifest, ImageLoader& loader,
                            const PreprocessSpec& spec, std::size_t batch_size = 32);

/// Reuses the cache at `path` when its fingerprint matches the current
/// teacher and preprocessing, rebuilds (and overwrites) it when the
/// fingerprint differs. A matching fingerprint with different underlying
/// identities is a hash collision and raises IntegrityError.
FeatureCache load_or_build_feature_cache(const std::filesystem::path& path, FrozenEncoder& teacher,
                                         const Manifest& manifest, ImageLoader& loader,
                                         const PreprocessSpec& spec);

}  // namespace aeskd
