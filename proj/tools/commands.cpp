// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "aeskd/checkpoint.hpp"
#include "aeskd/config.hpp"
#include "aeskd/rng.hpp"
#include "aeskd/synthetic.hpp"
#include "aeskd/trainer_cfa.hpp"
#include "aeskd/trainer_skd.hpp"

namespace aeskd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::io:
      return 3;
    case ErrorKind::numerical:
      return 4;
    case ErrorKind::unsupported:
      return 6;
    default:
      return 5;
  }
}

namespace {

bool is_image(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  return out;
}

/// id,score or id,p_1,...,p_d per line; an optional header starting with "id".
std::map<std::string, Label> read_labels(const fs::path& path, const std::vector<double>& bins) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read label file {}", path.string()));
  std::map<std::string, Label> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cells = split_csv(line);
    if (cells.empty() || cells[0].empty()) continue;
    if (lineno == 1 && cells[0] == "id") continue;
    const auto where = fmt::format("{}:{}", path.string(), lineno);
    std::vector<double> values;
    try {
      for (std::size_t i = 1; i < cells.size(); ++i) values.push_back(std::stod(cells[i]));
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("{}: non-numeric label", where));
    }
    if (values.size() == 1) {
      labels[cells[0]] = values[0];
    } else if (values.size() == bins.size()) {
      labels[cells[0]] = ScoreDistribution::from_file_values(values, bins);
    } else {
      throw ValidationError(
          fmt::format("{}: expected 1 score or {} bin probabilities, got {}", where, bins.size(), values.size()));
    }
  }
  return labels;
}

Manifest listing(const fs::path& dir, const std::string& source) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(fmt::format("cannot read image directory {}", dir.string()));
  Manifest m;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && is_image(entry.path())) files.push_back(entry.path());
  }
  if (ec) throw IoError(fmt::format("cannot list {}: {}", dir.string(), ec.message()));
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    m.records.push_back({f.stem().string(), fs::absolute(f).string(), source, std::nullopt});
  }
  return m;
}

json manifest_stats(const Manifest& m, std::size_t duplicates) {
  json counts = json::object();
  for (const auto& [source, n] : source_counts(m)) counts[source] = n;
  return {{"count", m.size()}, {"labeled", m.labeled}, {"sources", counts}, {"duplicates", duplicates}};
}

Manifest manifest_from(const json& config, const std::string& key, const std::optional<fs::path>& override = {}) {
  fs::path path = override ? *override : fs::path(config.at("data").at(key).get<std::string>());
  if (path.empty()) throw ConfigError(fmt::format("data.{} is not set", key));
  return read_manifest(path);
}

std::uint64_t seed_of(const json& config) { return config.at("seed").get<std::uint64_t>(); }

std::unique_ptr<Encoder> fresh_student(const json& config) {
  return make_encoder(student_spec_from(config), mix_seed({seed_of(config), 1}));
}

std::unique_ptr<Encoder> backbone_or_fresh(const json& config, const std::string& init) {
  if (init.empty()) return fresh_student(config);
  return load_backbone(load_checkpoint(init));
}

std::unique_ptr<Encoder> teacher_encoder(const json& config) {
  const auto ckpt = config.at("teacher").at("checkpoint").get<std::string>();
  if (!ckpt.empty()) return load_backbone(load_checkpoint(ckpt));
  return make_encoder(teacher_spec_from(config), config.at("teacher").at("init_seed").get<std::uint64_t>());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

TrainHooks hooks_for(const TrainOptions& opts, const fs::path& run_dir) {
  TrainHooks hooks;
  hooks.run_dir = run_dir;
  hooks.resume_from = opts.resume;
  hooks.max_steps = opts.max_steps;
  return hooks;
}

json train_report(const TrainResult& r) {
  json j;
  j["steps"] = r.steps;
  j["final"] = r.final_report ? json(*r.final_report) : json(nullptr);
  if (r.best) {
    j["best"] = {{"epoch", r.best->epoch}, {"metrics", r.best->report}};
  } else {
    j["best"] = nullptr;
  }
  json epochs = json::array();
  for (const auto& e : r.evals) epochs.push_back({{"epoch", e.epoch}, {"metrics", e.report}, {"degenerate", e.degenerate}});
  j["epochs"] = epochs;
  return j;
}

std::string tsv_number(double v) { return std::isfinite(v) ? fmt::format("{:.10g}", v) : "nan"; }

}  // namespace

json cmd_make_manifest(const MakeManifestOptions& opts) {
  if (opts.dirs.empty() && opts.merge.empty()) throw ArgumentError("give at least one --dir or --merge input");
  if (!opts.merge.empty() && (!opts.dirs.empty() || opts.labels)) {
    throw ArgumentError("--merge cannot be combined with --dir or --labels");
  }
  if (!opts.sources.empty() && opts.sources.size() != opts.dirs.size()) {
    throw ArgumentError("give one --source per --dir, or none");
  }

  MergeResult merged;
  if (!opts.merge.empty()) {
    std::vector<Manifest> inputs;
    for (const auto& p : opts.merge) inputs.push_back(read_manifest(p));
    merged = merge_manifests(inputs);
  } else {
    std::vector<Manifest> inputs;
    for (std::size_t i = 0; i < opts.dirs.size(); ++i) {
      const auto source = opts.sources.empty() ? fs::absolute(opts.dirs[i]).lexically_normal().filename().string()
                                               : opts.sources[i];
      inputs.push_back(listing(opts.dirs[i], source));
    }
    merged = merge_manifests(inputs);
    merged.manifest.bin_values = default_bin_values(opts.bins);
    merged.manifest.score_lo = merged.manifest.bin_values.front();
    merged.manifest.score_hi = merged.manifest.bin_values.back();
    if (opts.labels) {
      const auto labels = read_labels(*opts.labels, merged.manifest.bin_values);
      std::vector<SampleRecord> kept;
      for (auto& r : merged.manifest.records) {
        auto it = labels.find(r.id);
        if (it == labels.end()) {
          spdlog::warn("no label for image '{}'; left out of the labeled manifest", r.id);
          continue;
        }
        r.label = it->second;
        kept.push_back(std::move(r));
      }
      for (const auto& [id, label] : labels) {
        if (std::none_of(kept.begin(), kept.end(), [&](const SampleRecord& r) { return r.id == id; })) {
          spdlog::warn("label row '{}' has no image", id);
        }
      }
      merged.manifest.records = std::move(kept);
      merged.manifest.labeled = true;
    }
  }
  merged.manifest.validate();
  write_manifest(opts.out, merged.manifest);
  return manifest_stats(merged.manifest, merged.duplicates);
}

json cmd_synth(const SynthOptions& opts) {
  SyntheticSpec spec;
  spec.n = opts.n;
  spec.unlabeled_n = opts.unlabeled;
  spec.image_size = opts.image_size;
  spec.seed = opts.seed;
  spec.label_noise = opts.noise;
  spec.spread = opts.spread;
  spec.source = opts.source;
  const auto ds = generate_synthetic(spec, opts.out);
  return {{"labeled", manifest_stats(ds.labeled, 0)}, {"unlabeled", manifest_stats(ds.unlabeled, 0)}};
}

fs::path cmd_cfa(const TrainOptions& opts) {
  const auto& config = opts.config;
  const Manifest unlabeled = manifest_from(config, "unlabeled");
  const auto run_dir = prepare_run_dir(config, "cfa");
  const auto cfg = cfa_from(config);
  const auto spec = preprocess_from(config);

  FrozenEncoder teacher(teacher_encoder(config), config.at("teacher").at("name").get<std::string>());
  const auto hash_before = teacher.parameter_hash();
  auto backbone = fresh_student(config);
  auto dims = config.at("projector").at("dims").get<std::vector<std::size_t>>();
  if (dims.empty()) dims = default_projector_dims(backbone->spec().feature_dim, teacher.spec().feature_dim);
  if (dims.front() != backbone->spec().feature_dim) {
    throw ConfigError(fmt::format("projector.dims starts at {} but the student emits {} features", dims.front(),
                                  backbone->spec().feature_dim));
  }
  ProjectedEncoder student(std::move(backbone), dims, mix_seed({seed_of(config), 3}));

  ImageLoader loader;
  PreprocessSpec teacher_spec = spec;
  teacher_spec.mode = PreprocessMode::eval;
  teacher_spec.mean = teacher_mean_from(config);
  teacher_spec.std = teacher_std_from(config);

  CfaResult result;
  if (cfg.teacher_source == TeacherSourceKind::cache) {
    fs::path cache_path = config.at("cfa").at("cache").get<std::string>();
    if (cache_path.empty()) cache_path = run_dir / "teacher_features.cache";
    const auto cache = load_or_build_feature_cache(cache_path, teacher, unlabeled, loader, teacher_spec);
    CachedTeacher source(cache);
    result = run_cfa(student, source, unlabeled, loader, spec, cfg, hooks_for(opts, run_dir));
  } else {
    LiveTeacher source(teacher, teacher_spec.mean, teacher_spec.std);
    result = run_cfa(student, source, unlabeled, loader, spec, cfg, hooks_for(opts, run_dir));
  }
  const auto hash_after = teacher.parameter_hash();
  if (hash_after != hash_before) throw IntegrityError("teacher parameters changed during alignment");
  write_json(run_dir / "cfa_summary.json", {{"steps", result.steps},
                                            {"epoch_mean_loss", result.epoch_mean_loss},
                                            {"teacher_id", teacher.teacher_id()},
                                            {"teacher_hash", fmt::format("{:016x}", hash_after)}});
  return run_dir;
}

fs::path cmd_finetune_teacher(const TrainOptions& opts) {
  const auto& config = opts.config;
  const Manifest labeled = manifest_from(config, "labeled");
  std::optional<Manifest> eval;
  if (!config.at("data").at("eval").get<std::string>().empty()) eval = manifest_from(config, "eval");
  const auto run_dir = prepare_run_dir(config, "finetune-teacher");

  ScoreModel model(backbone_or_fresh(config, config.at("finetune").at("init").get<std::string>()),
                   head_spec_from(config), mix_seed({seed_of(config), 2}));
  ImageLoader loader;
  const auto result = finetune_teacher(model, labeled, eval ? &*eval : nullptr, loader, preprocess_from(config),
                                       supervised_from(config), hooks_for(opts, run_dir), "teacher");
  write_json(run_dir / "report.json", train_report(result));
  return run_dir;
}

fs::path cmd_skd(const TrainOptions& opts) {
  const auto& config = opts.config;
  const Manifest labeled = manifest_from(config, "labeled");
  const auto cfg = skd_from(config);
  const Manifest unlabeled = cfg.plan.mu > 0 ? manifest_from(config, "unlabeled") : Manifest{};
  std::optional<Manifest> eval;
  if (!config.at("data").at("eval").get<std::string>().empty()) eval = manifest_from(config, "eval");
  const auto teacher_path = config.at("skd").at("teacher_checkpoint").get<std::string>();
  if (teacher_path.empty()) throw ConfigError("skd.teacher_checkpoint is not set");
  const auto run_dir = prepare_run_dir(config, "skd");

  FrozenScoreModel teacher(load_score_model(load_checkpoint(teacher_path)));
  const auto hash_before = teacher.parameter_hash();
  ScoreModel student(backbone_or_fresh(config, config.at("skd").at("student_init").get<std::string>()),
                     head_spec_from(config), mix_seed({seed_of(config), 2}));
  ImageLoader loader;
  const auto result = run_skd(student, teacher, labeled, unlabeled, eval ? &*eval : nullptr, loader,
                              preprocess_from(config), cfg, hooks_for(opts, run_dir));
  if (teacher.parameter_hash() != hash_before) throw IntegrityError("teacher parameters changed during distillation");
  auto report = train_report(result);
  report["teacher_hash"] = fmt::format("{:016x}", hash_before);
  write_json(run_dir / "report.json", report);
  return run_dir;
}

json cmd_eval(const EvalOptions& opts) {
  const Manifest manifest = manifest_from(opts.config, "eval", opts.manifest);
  if (manifest.empty()) throw ArgumentError("eval manifest is empty");
  auto model = load_score_model(load_checkpoint(opts.checkpoint));
  ImageLoader loader;
  const auto out = evaluate_model(*model, manifest, loader, preprocess_from(opts.config));
  const auto ier = interval_error_rate(out.pairs, ier_from(opts.config));

  json j{{"checkpoint", opts.checkpoint.string()},
         {"metrics", out.report},
         {"ier", ier},
         {"degenerate", out.degenerate},
         {"skipped", loader.skipped()}};
  fs::create_directories(opts.out);
  write_json(opts.out / "metrics.json", j);

  std::ofstream plot(opts.out / "ier_plot.tsv");
  if (!plot) throw IoError(fmt::format("cannot write {}", (opts.out / "ier_plot.tsv").string()));
  plot << "interval\tlo\thi\tcount\terrors\trate\n";
  for (std::size_t k = 0; k < ier.intervals.size(); ++k) {
    const auto& iv = ier.intervals[k];
    plot << k << '\t' << tsv_number(iv.lo) << '\t' << tsv_number(iv.hi) << '\t' << iv.count << '\t' << iv.errors
         << '\t' << (iv.rate ? tsv_number(*iv.rate) : "nan") << '\n';
  }
  return j;
}

namespace {

AttentionStats probe_stats(const fs::path& checkpoint, const Manifest& probe, ImageLoader& loader,
                           const PreprocessSpec& spec, std::size_t probe_size) {
  auto encoder = load_backbone(load_checkpoint(checkpoint));
  if (!encoder->has_attention()) {
    throw UnsupportedError(fmt::format("{} holds a {} backbone without attention maps", checkpoint.string(),
                                       to_string(encoder->spec().family)));
  }
  if (encoder->spec().image_size != static_cast<std::size_t>(spec.crop)) {
    throw ConfigError(fmt::format("{} expects {}px inputs but preprocess.crop is {}", checkpoint.string(),
                                  encoder->spec().image_size, spec.crop));
  }
  std::vector<ImageTensor> images;
  for (const auto& r : probe.records) {
    if (images.size() == probe_size) break;
    if (const Raster* img = loader.load(probe, r, spec.resize)) {
      images.push_back(preprocess(*img, spec, 0));
    }
  }
  if (images.empty()) throw ArgumentError("probe manifest has no decodable images");
  std::vector<std::vector<AttentionMap>> maps;
  constexpr std::size_t kChunk = 16;
  for (std::size_t i = 0; i < images.size(); i += kChunk) {
    const auto n = std::min(kChunk, images.size() - i);
    auto part = capture_attention(*encoder, std::span(images).subspan(i, n));
    for (auto& m : part) maps.push_back(std::move(m));
  }
  return summarize_attention(maps);
}

}  // namespace

json cmd_attn_report(const AttnOptions& opts) {
  const Manifest probe = manifest_from(opts.config, "probe", opts.manifest);
  auto spec = preprocess_from(opts.config);
  spec.mode = PreprocessMode::eval;
  const auto probe_size = opts.config.at("attention").at("probe_size").get<std::size_t>();
  if (probe_size == 0) throw ConfigError("attention.probe_size must be >= 1");
  ImageLoader loader;
  const auto before = probe_stats(opts.before, probe, loader, spec, probe_size);
  const auto after = probe_stats(opts.after, probe, loader, spec, probe_size);
  const auto comparison = compare_stats(before, after);

  json j{{"before", opts.before.string()}, {"after", opts.after.string()}, {"comparison", comparison}};
  fs::create_directories(opts.out);
  write_json(opts.out / "attention_report.json", j);

  std::ofstream plot(opts.out / "attention_plot.tsv");
  if (!plot) throw IoError(fmt::format("cannot write {}", (opts.out / "attention_plot.tsv").string()));
  plot << "checkpoint\tlayer\tmean_distance\tdistance_std\tmean_entropy\n";
  const std::pair<const char*, const AttentionStats*> sides[] = {{"before", &before}, {"after", &after}};
  for (const auto& [name, stats] : sides) {
    for (std::size_t l = 0; l < stats->per_layer.size(); ++l) {
      const auto& s = stats->per_layer[l];
      plot << name << '\t' << l << '\t' << tsv_number(s.mean_distance) << '\t' << tsv_number(s.distance_std)
           << '\t' << tsv_number(s.mean_entropy) << '\n';
    }
  }
  return j;
}

}  // namespace aeskd::cli
