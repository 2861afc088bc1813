// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd {

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'E', 'S', 'K', 'D', 'C', 'K', '1'};
constexpr char kCacheMagic[8] = {'A', 'E', 'S', 'K', 'D', 'F', 'C', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof bits);
    write_u64(out, bits);
  }
}

void read_doubles(std::istream& in, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = read_u64(in);
    std::memcpy(&data[i], &bits, sizeof bits);
  }
}

/// Header framing shared by checkpoints and caches.
template <typename Body>
void atomic_write(const std::filesystem::path& path, const char (&magic)[8], const nlohmann::json& header,
                  Body&& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write {}", tmp.string()));
    out.write(magic, 8);
    const std::string text = header.dump();
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    body(out);
    out.flush();
    if (!out) throw IoError(fmt::format("short write to {}", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(fmt::format("cannot move {} into place: {}", path.string(), ec.message()));
}

nlohmann::json read_header(std::istream& in, const std::filesystem::path& path, const char (&magic)[8]) {
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0) {
    throw IntegrityError(fmt::format("{} is not a {} file", path.string(), std::string(magic, 8)));
  }
  const auto len = read_u64(in);
  if (!in || len > (std::uint64_t{1} << 32)) throw IntegrityError(fmt::format("{}: corrupt header", path.string()));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IntegrityError(fmt::format("{}: truncated header", path.string()));
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["meta"] = ckpt.meta;
  auto dir = nlohmann::json::array();
  for (const auto& [name, m] : ckpt.tensors) dir.push_back({name, m.rows(), m.cols()});
  header["tensors"] = dir;
  atomic_write(path, kCheckpointMagic, header, [&](std::ostream& out) {
    for (const auto& [name, m] : ckpt.tensors) write_doubles(out, m.data(), static_cast<std::size_t>(m.size()));
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read checkpoint {}", path.string()));
  const auto header = read_header(in, path, kCheckpointMagic);
  Checkpoint ckpt;
  ckpt.meta = header.at("meta");
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at(0).get<std::string>();
    const auto rows = entry.at(1).get<Eigen::Index>();
    const auto cols = entry.at(2).get<Eigen::Index>();
    nn::Matrix m(rows, cols);
    read_doubles(in, m.data(), static_cast<std::size_t>(m.size()));
    if (!in) throw IntegrityError(fmt::format("{}: truncated tensor '{}'", path.string(), name));
    ckpt.tensors.emplace(name, std::move(m));
  }
  return ckpt;
}

void store_parameters(Checkpoint& ckpt, const std::string& prefix, const nn::ParameterList& params) {
  for (const auto* p : params) ckpt.tensors[prefix + p->name] = p->value;
}

void restore_parameters(const Checkpoint& ckpt, const std::string& prefix,
                        const nn::ParameterList& params) {
  for (auto* p : params) {
    const auto it = ckpt.tensors.find(prefix + p->name);
    if (it == ckpt.tensors.end()) {
      throw IntegrityError(fmt::format("checkpoint has no tensor '{}{}'", prefix, p->name));
    }
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw IntegrityError(fmt::format("tensor '{}{}' is {}x{}, model expects {}x{}", prefix, p->name,
                                       it->second.rows(), it->second.cols(), p->value.rows(),
                                       p->value.cols()));
    }
    p->value = it->second;
  }
}

void store_backbone(Checkpoint& ckpt, Encoder& backbone) {
  ckpt.meta["backbone_spec"] = backbone.spec();
  store_parameters(ckpt, "backbone/", backbone.parameters());
}

std::unique_ptr<Encoder> load_backbone(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("backbone_spec")) throw IntegrityError("checkpoint has no backbone");
  auto enc = make_encoder(ckpt.meta.at("backbone_spec").get<EncoderSpec>(), 0);
  restore_parameters(ckpt, "backbone/", enc->parameters());
  return enc;
}

void store_score_model(Checkpoint& ckpt, ScoreModel& model) {
  store_backbone(ckpt, model.backbone());
  ckpt.meta["head_spec"] = model.head_spec();
  store_parameters(ckpt, "head/", model.head().parameters());
}

std::unique_ptr<ScoreModel> load_score_model(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("head_spec")) throw IntegrityError("checkpoint has no prediction head");
  auto model = std::make_unique<ScoreModel>(load_backbone(ckpt), ckpt.meta.at("head_spec").get<HeadSpec>(), 0);
  restore_parameters(ckpt, "head/", model->head().parameters());
  return model;
}

void store_projector(Checkpoint& ckpt, Mlp& projector) {
  ckpt.meta["projector_dims"] = projector.dims();
  store_parameters(ckpt, "projector/", projector.parameters());
}

void restore_projector(const Checkpoint& ckpt, Mlp& projector) {
  if (ckpt.meta.value("projector_dims", std::vector<std::size_t>{}) != projector.dims()) {
    throw IntegrityError("projector shape in checkpoint does not match the model");
  }
  restore_parameters(ckpt, "projector/", projector.parameters());
}

// --- feature cache --------------------------------------------------------

std::string FeatureCache::fingerprint() const {
  return fmt::format("{:016x}", fnv1a(preprocess_fingerprint, fnv1a(teacher_id + "\n")));
}

const std::vector<double>& FeatureCache::at(const std::string& id) const {
  const auto it = features.find(id);
  if (it == features.end()) throw ArgumentError(fmt::format("no cached teacher feature for '{}'", id));
  return it->second;
}

void save_feature_cache(const std::filesystem::path& path, const FeatureCache& cache) {
  nlohmann::json header = {{"teacher_id", cache.teacher_id},
                           {"preprocess_fingerprint", cache.preprocess_fingerprint},
                           {"fingerprint", cache.fingerprint()},
                           {"feature_dim", cache.feature_dim},
                           {"count", cache.features.size()}};
  atomic_write(path, kCacheMagic, header, [&](std::ostream& out) {
    for (const auto& [id, v] : cache.features) {
      if (v.size() != cache.feature_dim) throw IntegrityError(fmt::format("feature for '{}' has the wrong length", id));
      write_u64(out, id.size());
      out.write(id.data(), static_cast<std::streamsize>(id.size()));
      write_doubles(out, v.data(), v.size());
    }
  });
}

FeatureCache load_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read feature cache {}", path.string()));
  const auto header = read_header(in, path, kCacheMagic);
  FeatureCache cache;
  cache.teacher_id = header.at("teacher_id").get<std::string>();
  cache.preprocess_fingerprint = header.at("preprocess_fingerprint").get<std::string>();
  cache.feature_dim = header.at("feature_dim").get<std::size_t>();
  const auto count = header.at("count").get<std::size_t>();
  if (header.at("fingerprint").get<std::string>() != cache.fingerprint()) {
    throw IntegrityError(fmt::format("{}: header fingerprint does not match its contents", path.string()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = read_u64(in);
    if (!in || len > 4096) throw IntegrityError(fmt::format("{}: corrupt record {}", path.string(), i));
    std::string id(len, '\0');
    in.read(id.data(), static_cast<std::streamsize>(len));
    std::vector<double> v(cache.feature_dim);
    read_doubles(in, v.data(), v.size());
    if (!in) throw IntegrityError(fmt::format("{}: truncated record {}", path.string(), i));
    cache.features.emplace(std::move(id), std::move(v));
  }
  return cache;
}

FeatureCache cache_features(FrozenEncoder& teacher, const Manifest& manifest, ImageLoader& loader,
                            const PreprocessSpec& spec, std::size_t batch_size) {
  auto eval_spec = spec;
  eval_spec.mode = PreprocessMode::eval;
  eval_spec.validate();
  if (batch_size == 0) batch_size = 1;
  FeatureCache cache;
  cache.teacher_id = teacher.teacher_id();
  cache.preprocess_fingerprint = eval_spec.fingerprint();
  cache.feature_dim = teacher.spec().feature_dim;

  std::vector<ImageTensor> images;
  std::vector<std::string> ids;
  auto flush = [&] {
    if (images.empty()) return;
    const nn::Matrix feats = teacher.encode(images);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto row = feats.row(static_cast<Eigen::Index>(i));
      cache.features[ids[i]] = std::vector<double>(row.begin(), row.end());
    }
    images.clear();
    ids.clear();
  };
  for (const auto& r : manifest.records) {
    const Raster* raster = loader.load(manifest, r, eval_spec.resize);
    if (!raster) continue;
    images.push_back(normalize(apply_view(*raster, eval_spec.crop, draw_view(eval_spec, 0)), eval_spec.mean,
                               eval_spec.std));
    ids.push_back(r.id);
    if (images.size() == batch_size) flush();
  }
  flush();
  return cache;
}

FeatureCache load_or_build_feature_cache(const std::filesystem::path& path, FrozenEncoder& teacher,
                                         const Manifest& manifest, ImageLoader& loader,
                                         const PreprocessSpec& spec) {
  auto eval_spec = spec;
  eval_spec.mode = PreprocessMode::eval;
  FeatureCache expected;
  expected.teacher_id = teacher.teacher_id();
  expected.preprocess_fingerprint = eval_spec.fingerprint();

  if (std::filesystem::exists(path)) {
    auto cached = load_feature_cache(path);
    if (cached.fingerprint() == expected.fingerprint()) {
      if (cached.teacher_id != expected.teacher_id ||
          cached.preprocess_fingerprint != expected.preprocess_fingerprint) {
        throw IntegrityError(fmt::format("{}: fingerprint collision between different teachers", path.string()));
      }
      bool complete = cached.feature_dim == teacher.spec().feature_dim;
      for (const auto& r : manifest.records) {
        if (!complete) break;
        complete = cached.features.count(r.id) > 0 || !loader.load(manifest, r, eval_spec.resize);
      }
      if (complete) return cached;
    }
  }
  auto cache = cache_features(teacher, manifest, loader, eval_spec);
  save_feature_cache(path, cache);
  return cache;
}

}  // namespace aeskd
