// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/training.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd {

void ScheduleConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
}

double lr_at(std::size_t epoch, const ScheduleConfig& cfg) {
  double lr = cfg.lr;
  for (auto boundary : cfg.decay_epochs) {
    if (epoch >= boundary) lr *= cfg.decay_factor;
  }
  return lr;
}

void to_json(nlohmann::json& j, const StepRecord& r) {
  j = {{"step", r.step}, {"epoch", r.epoch}, {"lr", r.lr}, {"loss", r.loss}, {"batch", r.batch_digest}};
  if (r.loss_s) j["loss_s"] = *r.loss_s;
  if (r.loss_kd) j["loss_kd"] = *r.loss_kd;
  if (r.loss_s) j["loss_total"] = r.loss;
  if (r.n_labeled) j["n_labeled"] = *r.n_labeled;
  if (r.n_unlabeled) j["n_unlabeled"] = *r.n_unlabeled;
  if (r.kd_terms) j["kd_terms"] = *r.kd_terms;
}

void from_json(const nlohmann::json& j, StepRecord& r) {
  j.at("step").get_to(r.step);
  j.at("epoch").get_to(r.epoch);
  j.at("lr").get_to(r.lr);
  j.at("loss").get_to(r.loss);
  j.at("batch").get_to(r.batch_digest);
  if (j.contains("loss_s")) r.loss_s = j.at("loss_s").get<double>();
  if (j.contains("loss_kd")) r.loss_kd = j.at("loss_kd").get<double>();
  if (j.contains("n_labeled")) r.n_labeled = j.at("n_labeled").get<std::size_t>();
  if (j.contains("n_unlabeled")) r.n_unlabeled = j.at("n_unlabeled").get<std::size_t>();
  if (j.contains("kd_terms")) r.kd_terms = j.at("kd_terms").get<std::size_t>();
}

std::string batch_digest(std::span<const std::string> ids) {
  std::uint64_t h = fnv1a("batch");
  for (const auto& id : ids) h = fnv1a(id + "\n", h);
  return fmt::format("{:016x}", h);
}

void write_log(const std::filesystem::path& path, std::span<const StepRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write log {}", path.string()));
  for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
}

std::vector<StepRecord> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read log {}", path.string()));
  std::vector<StepRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line).get<StepRecord>());
  }
  return out;
}

std::vector<StepRecord> prior_log(const std::filesystem::path& checkpoint, const std::string& log_name,
                                  std::uint64_t step) {
  const auto path = checkpoint.parent_path() / log_name;
  if (!std::filesystem::exists(path)) return {};
  auto records = read_log(path);
  std::erase_if(records, [&](const StepRecord& r) { return r.step > step; });
  return records;
}

Manifest decodable_subset(const Manifest& manifest, ImageLoader& loader, int resize) {
  Manifest out = manifest;
  out.records.clear();
  for (const auto& r : manifest.records) {
    if (loader.load(manifest, r, resize)) out.records.push_back(r);
  }
  return out;
}

std::vector<Raster> make_views(const Manifest& manifest, std::span<const std::size_t> indices,
                               ImageLoader& loader, const PreprocessSpec& spec, std::size_t epoch) {
  std::vector<Raster> views;
  views.reserve(indices.size());
  for (auto i : indices) {
    const auto& r = manifest.records.at(i);
    const Raster* raster = loader.load(manifest, r, spec.resize);
    if (!raster) throw IoError(fmt::format("image for '{}' cannot be decoded", r.id));
    const auto draw = draw_view(spec, view_seed(spec.seed, epoch, r.id));
    views.push_back(apply_view(*raster, spec.crop, draw));
  }
  return views;
}

std::vector<ImageTensor> normalize_all(std::span<const Raster> views, const std::array<double, 3>& mean,
                                       const std::array<double, 3>& std) {
  std::vector<ImageTensor> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(normalize(v, mean, std));
  return out;
}

EvalOutput evaluate_model(ScoreModel& model, const Manifest& manifest, ImageLoader& loader,
                          const PreprocessSpec& spec, std::size_t batch_size) {
  if (manifest.empty()) throw ArgumentError("evaluation manifest is empty");
  if (!manifest.labeled) throw ArgumentError("evaluation needs a labeled manifest");
  if (manifest.bin_values.size() != model.bins()) {
    throw ConfigError(fmt::format("model head has {} bins but the manifest uses {}", model.bins(),
                                  manifest.bin_values.size()));
  }
  auto eval_spec = spec;
  eval_spec.mode = PreprocessMode::eval;
  eval_spec.validate();
  if (batch_size == 0) batch_size = 1;

  EvalOutput out;
  std::vector<std::size_t> chunk;
  auto flush = [&] {
    if (chunk.empty()) return;
    const auto views = make_views(manifest, chunk, loader, eval_spec, 0);
    const auto preds = predict_distribution(model, normalize_all(views, eval_spec.mean, eval_spec.std),
                                            manifest.bin_values);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.pairs.push_back({mos(preds[i]), {target_mos(manifest.records[chunk[i]], manifest)}});
    }
    chunk.clear();
  };
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (!loader.load(manifest, manifest.records[i], eval_spec.resize)) continue;
    chunk.push_back(i);
    if (chunk.size() == batch_size) flush();
  }
  flush();
  if (out.pairs.empty()) throw ArgumentError("no decodable images in the evaluation manifest");
  out.report.n = out.pairs.size();
  out.report.mse = mse(out.pairs);
  try {
    out.report.srcc = srcc(out.pairs);
    out.report.plcc = plcc(out.pairs);
  } catch (const DegenerateInputError&) {
    out.degenerate = true;
    out.report.srcc = std::nan("");
    out.report.plcc = std::nan("");
  }
  return out;
}

void check_finite(double value, std::uint64_t step, double lr, std::span<const std::string> ids) {
  if (std::isfinite(value)) return;
  throw NumericalError(fmt::format("non-finite loss {} at step {} (lr {}), batch ids: {}", value, step, lr,
                                   fmt::join(ids, ",")));
}

}  // namespace aeskd
