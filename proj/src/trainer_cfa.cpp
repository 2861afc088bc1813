// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/trainer_cfa.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "aeskd/batching.hpp"
#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd {

void CfaConfig::validate() const {
  schedule.validate();
  if (batch_size < 1) throw ConfigError("cfa batch_size must be >= 1");
  if (!(alignment.epsilon > 0.0)) throw ConfigError("alignment epsilon must be positive");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be positive when set");
}

nn::Matrix LiveTeacher::features(std::span<const SampleRecord* const> records, std::span<const Raster> views) {
  (void)records;
  return encoder_.encode(normalize_all(views, mean_, std_));
}

nn::Matrix CachedTeacher::features(std::span<const SampleRecord* const> records, std::span<const Raster> views) {
  (void)views;
  nn::Matrix out(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(cache_.feature_dim));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& f = cache_.at(records[i]->id);
    for (std::size_t k = 0; k < f.size(); ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = f[k];
  }
  return out;
}

namespace {

constexpr std::uint64_t kBatchStream = 0xcfa;

void save_epoch_checkpoint(const std::filesystem::path& path, ProjectedEncoder& student, const nn::Adam& opt,
                           std::size_t epoch, std::uint64_t steps) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "cfa";
  ckpt.meta["epoch"] = epoch;
  ckpt.meta["step"] = steps;
  store_backbone(ckpt, student.backbone());
  store_projector(ckpt, student.projector());
  std::uint64_t t = 0;
  opt.export_state("optim/", ckpt.tensors, t);
  ckpt.meta["optim_steps"] = t;
  save_checkpoint(path, ckpt);
}

}  // namespace

CfaResult run_cfa(ProjectedEncoder& student, TeacherFeatureSource& teacher, const Manifest& unlabeled,
                  ImageLoader& loader, const PreprocessSpec& student_spec, const CfaConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  student_spec.validate();
  if (student.projector().out_dim() != teacher.feature_dim()) {
    throw ConfigError(fmt::format("projector emits {} features but the teacher has {}",
                                  student.projector().out_dim(), teacher.feature_dim()));
  }
  auto train_spec = student_spec;
  train_spec.mode = PreprocessMode::train;
  const Manifest pool = decodable_subset(unlabeled, loader, train_spec.resize);
  if (pool.size() < cfg.batch_size) {
    throw ArgumentError(fmt::format("unlabeled pool of {} is smaller than one batch of {}", pool.size(),
                                    cfg.batch_size));
  }

  auto params = student.parameters();
  nn::Adam opt(params, cfg.adam);
  CfaResult result;
  std::size_t start_epoch = 0;
  if (hooks.resume_from) {
    const auto ckpt = load_checkpoint(*hooks.resume_from);
    if (ckpt.meta.value("kind", "") != "cfa") throw ConfigError("resume checkpoint is not a cfa checkpoint");
    restore_parameters(ckpt, "backbone/", student.backbone().parameters());
    restore_projector(ckpt, student.projector());
    opt.import_state("optim/", ckpt.tensors, ckpt.meta.at("optim_steps").get<std::uint64_t>());
    start_epoch = ckpt.meta.at("epoch").get<std::size_t>() + 1;
    result.steps = ckpt.meta.at("step").get<std::uint64_t>();
    result.log = prior_log(*hooks.resume_from, "cfa_log.jsonl", result.steps);
  }

  const BatchPlan plan{cfg.batch_size, 0};
  bool stopped = false;
  for (std::size_t epoch = start_epoch; epoch < cfg.schedule.total_epochs && !stopped; ++epoch) {
    const double lr = lr_at(epoch, cfg.schedule);
    opt.set_lr(lr);
    BatchComposer composer(pool.size(), 0, plan, mix_seed({cfg.seed, kBatchStream, epoch}));
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    while (auto batch = composer.next()) {
      if (hooks.max_steps && result.steps >= *hooks.max_steps) {
        stopped = true;
        break;
      }
      std::vector<const SampleRecord*> records;
      std::vector<std::string> ids;
      for (auto i : batch->labeled) {
        records.push_back(&pool.records[i]);
        ids.push_back(pool.records[i].id);
      }
      const auto views = make_views(pool, batch->labeled, loader, train_spec, epoch);
      const nn::Matrix target = teacher.features(records, views);
      const nn::Matrix projected = student.forward(normalize_all(views, train_spec.mean, train_spec.std));

      const auto n = static_cast<Eigen::Index>(records.size());
      nn::Matrix grad(n, projected.cols());
      double loss = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto row = projected.row(r);
        const auto trow = target.row(r);
        // Teacher CLS feature first, projected student feature second.
        const auto g = alignment_loss_grad(std::span<const double>(trow.data(), static_cast<std::size_t>(trow.size())),
                                           std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                           cfg.alignment);
        loss += g.value;
        for (Eigen::Index k = 0; k < grad.cols(); ++k) grad(r, k) = g.d_x2[static_cast<std::size_t>(k)] / static_cast<double>(n);
      }
      loss /= static_cast<double>(n);
      check_finite(loss, result.steps, lr, ids);

      opt.zero_grad();
      student.backward(grad);
      if (cfg.grad_clip) nn::clip_gradients(params, *cfg.grad_clip);
      opt.step();
      ++result.steps;

      StepRecord rec;
      rec.step = result.steps;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.loss = loss;
      rec.batch_digest = batch_digest(ids);
      if (hooks.on_step) hooks.on_step(rec);
      result.log.push_back(std::move(rec));
      epoch_loss += loss;
      ++epoch_batches;
    }
    if (epoch_batches > 0) {
      result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_batches));
      spdlog::info("cfa epoch {} lr {:.3g} mean loss {:.6f}", epoch, lr, result.epoch_mean_loss.back());
    }
    result.next_epoch = epoch + 1;
    if (hooks.run_dir && !stopped) {
      save_epoch_checkpoint(*hooks.run_dir / fmt::format("cfa_epoch_{}.ckpt", epoch), student, opt, epoch,
                            result.steps);
      write_log(*hooks.run_dir / "cfa_log.jsonl", result.log);
    }
  }

  if (hooks.run_dir) {
    Checkpoint backbone;
    backbone.meta["kind"] = "backbone";
    backbone.meta["step"] = result.steps;
    store_backbone(backbone, student.backbone());
    save_checkpoint(*hooks.run_dir / "backbone.ckpt", backbone);
    Checkpoint projector;
    projector.meta["kind"] = "projector";
    store_projector(projector, student.projector());
    save_checkpoint(*hooks.run_dir / "projector.ckpt", projector);
    write_log(*hooks.run_dir / "cfa_log.jsonl", result.log);
    loader.write_skip_report(*hooks.run_dir / "skip_report.txt");
  }
  return result;
}

}  // namespace aeskd
