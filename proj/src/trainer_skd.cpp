// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/trainer_skd.hpp"

#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd {

void SupervisedConfig::validate() const {
  schedule.validate();
  emd.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be positive when set");
}

void SkdRunConfig::validate() const {
  schedule.validate();
  emd.validate();
  loss.validate();
  plan.validate();
  if (plan.mu != loss.mu) {
    throw ConfigError(fmt::format("batch plan mu {} differs from loss mu {}", plan.mu, loss.mu));
  }
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be positive when set");
}

namespace {

// Both trainers draw batches from this stream so that a degenerate SKD run
// sees exactly the batches of the supervised run.
constexpr std::uint64_t kBatchStream = 0x5d;

std::vector<ScoreDistribution> rows_as_distributions(const nn::Matrix& probs, const std::vector<double>& bins,
                                                     Eigen::Index first, Eigen::Index count) {
  std::vector<ScoreDistribution> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index r = first; r < first + count; ++r) {
    out.emplace_back(std::vector<double>(probs.row(r).begin(), probs.row(r).end()), bins);
  }
  return out;
}

/// Non-finite model outputs abort with the step context before they reach
/// distribution validation.
void check_outputs(const nn::Matrix& m, std::uint64_t step, double lr, std::span<const std::string> ids) {
  if (!m.allFinite()) check_finite(std::numeric_limits<double>::quiet_NaN(), step, lr, ids);
}

std::span<const double> row_span(const nn::Matrix& m, Eigen::Index r) {
  return {m.row(r).data(), static_cast<std::size_t>(m.cols())};
}

struct LoopState {
  nn::ParameterList params;
  nn::Adam opt;
  TrainResult result;
  std::size_t start_epoch = 0;
  double best_srcc = -std::numeric_limits<double>::infinity();
};

void save_model_checkpoint(const std::filesystem::path& path, const std::string& kind, ScoreModel& model,
                           const nn::Adam* opt, std::size_t epoch, std::uint64_t steps,
                           const std::optional<MetricsReport>& report) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = kind;
  ckpt.meta["epoch"] = epoch;
  ckpt.meta["step"] = steps;
  if (report) ckpt.meta["eval"] = *report;
  store_score_model(ckpt, model);
  if (opt) {
    std::uint64_t t = 0;
    opt->export_state("optim/", ckpt.tensors, t);
    ckpt.meta["optim_steps"] = t;
  }
  save_checkpoint(path, ckpt);
}

void maybe_resume(LoopState& state, ScoreModel& model, const TrainHooks& hooks, const std::string& name) {
  if (!hooks.resume_from) return;
  const auto ckpt = load_checkpoint(*hooks.resume_from);
  if (ckpt.meta.value("kind", "") != name + "_epoch") {
    throw ConfigError(fmt::format("resume checkpoint is not a {} epoch checkpoint", name));
  }
  restore_parameters(ckpt, "backbone/", model.backbone().parameters());
  restore_parameters(ckpt, "head/", model.head().parameters());
  state.opt.import_state("optim/", ckpt.tensors, ckpt.meta.at("optim_steps").get<std::uint64_t>());
  state.start_epoch = ckpt.meta.at("epoch").get<std::size_t>() + 1;
  state.result.steps = ckpt.meta.at("step").get<std::uint64_t>();
  state.result.log = prior_log(*hooks.resume_from, name + "_log.jsonl", state.result.steps);
  if (ckpt.meta.contains("best_srcc")) state.best_srcc = ckpt.meta.at("best_srcc").get<double>();
}

/// Per-epoch evaluation, best tracking and checkpointing.
void end_epoch(LoopState& state, ScoreModel& model, const Manifest* eval, ImageLoader& loader,
               const PreprocessSpec& spec, const TrainHooks& hooks, const std::string& name, std::size_t epoch) {
  std::optional<MetricsReport> report;
  if (eval) {
    const auto out = evaluate_model(model, *eval, loader, spec);
    state.result.evals.push_back({epoch, out.report, out.degenerate});
    report = out.report;
    spdlog::info("{} epoch {} eval srcc {:.4f} plcc {:.4f} mse {:.4f}", name, epoch, out.report.srcc,
                 out.report.plcc, out.report.mse);
    if (!out.degenerate && out.report.srcc > state.best_srcc) {
      state.best_srcc = out.report.srcc;
      state.result.best = state.result.evals.back();
      if (hooks.run_dir) {
        save_model_checkpoint(*hooks.run_dir / (name + "_best.ckpt"), name + "_best", model, nullptr, epoch,
                              state.result.steps, report);
      }
    }
  }
  if (hooks.run_dir) {
    const auto path = *hooks.run_dir / fmt::format("{}_epoch_{}.ckpt", name, epoch);
    save_model_checkpoint(path, name + "_epoch", model, &state.opt, epoch, state.result.steps, report);
    if (std::isfinite(state.best_srcc)) {
      auto ckpt = load_checkpoint(path);
      ckpt.meta["best_srcc"] = state.best_srcc;
      save_checkpoint(path, ckpt);
    }
    write_log(*hooks.run_dir / (name + "_log.jsonl"), state.result.log);
  }
}

void finish(LoopState& state, ScoreModel& model, const Manifest* eval, ImageLoader& loader,
            const PreprocessSpec& spec, const TrainHooks& hooks, const std::string& name) {
  if (eval) {
    state.result.final_report = evaluate_model(model, *eval, loader, spec).report;
  }
  if (hooks.run_dir) {
    save_model_checkpoint(*hooks.run_dir / (name + ".ckpt"), name, model, nullptr,
                          state.result.evals.empty() ? 0 : state.result.evals.back().epoch, state.result.steps,
                          state.result.final_report);
    write_log(*hooks.run_dir / (name + "_log.jsonl"), state.result.log);
    loader.write_skip_report(*hooks.run_dir / "skip_report.txt");
  }
}

}  // namespace

TrainResult finetune_teacher(ScoreModel& model, const Manifest& labeled, const Manifest* eval,
                             ImageLoader& loader, const PreprocessSpec& spec, const SupervisedConfig& cfg,
                             const TrainHooks& hooks, const std::string& name) {
  cfg.validate();
  spec.validate();
  if (!labeled.labeled) throw ArgumentError("fine-tuning needs a labeled manifest");
  if (labeled.bin_values.size() != model.bins() || cfg.emd.d != model.bins()) {
    throw ConfigError(fmt::format("head has {} bins, manifest {} and emd config {}", model.bins(),
                                  labeled.bin_values.size(), cfg.emd.d));
  }
  auto train_spec = spec;
  train_spec.mode = PreprocessMode::train;
  const Manifest data = decodable_subset(labeled, loader, train_spec.resize);

  LoopState state{model.parameters(), nn::Adam(model.parameters(), cfg.adam), {}, 0,
                  -std::numeric_limits<double>::infinity()};
  maybe_resume(state, model, hooks, name);
  const BatchPlan plan{cfg.batch_size, 0};

  bool stopped = false;
  for (std::size_t epoch = state.start_epoch; epoch < cfg.schedule.total_epochs && !stopped; ++epoch) {
    const double lr = lr_at(epoch, cfg.schedule);
    state.opt.set_lr(lr);
    BatchComposer composer(data.size(), 0, plan, mix_seed({cfg.seed, kBatchStream, epoch}));
    while (auto batch = composer.next()) {
      if (hooks.max_steps && state.result.steps >= *hooks.max_steps) {
        stopped = true;
        break;
      }
      std::vector<std::string> ids;
      std::vector<ScoreDistribution> targets;
      for (auto i : batch->labeled) {
        ids.push_back(data.records[i].id);
        targets.push_back(target_distribution(data.records[i], data, cfg.discretization));
      }
      const auto views = make_views(data, batch->labeled, loader, train_spec, epoch);
      const nn::Matrix probs = model.forward(normalize_all(views, train_spec.mean, train_spec.std));
      check_outputs(probs, state.result.steps, lr, ids);
      const auto n = static_cast<Eigen::Index>(ids.size());

      const auto preds = rows_as_distributions(probs, data.bin_values, 0, n);
      const double loss = supervised_loss(preds, targets, cfg.emd);
      check_finite(loss, state.result.steps, lr, ids);

      nn::Matrix grad(n, probs.cols());
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto g = emd_value_and_grad(row_span(probs, r), targets[static_cast<std::size_t>(r)].probs(), cfg.emd);
        for (Eigen::Index k = 0; k < grad.cols(); ++k) {
          grad(r, k) = g.d_p[static_cast<std::size_t>(k)] / static_cast<double>(n);
        }
      }
      state.opt.zero_grad();
      model.backward(grad);
      if (cfg.grad_clip) nn::clip_gradients(state.params, *cfg.grad_clip);
      state.opt.step();
      ++state.result.steps;

      StepRecord rec;
      rec.step = state.result.steps;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.loss = loss;
      rec.batch_digest = batch_digest(ids);
      if (hooks.on_step) hooks.on_step(rec);
      state.result.log.push_back(std::move(rec));
    }
    if (!stopped) end_epoch(state, model, eval, loader, spec, hooks, name, epoch);
  }
  finish(state, model, eval, loader, spec, hooks, name);
  return state.result;
}

std::vector<ScoreDistribution> generate_pseudo_labels(FrozenScoreModel& teacher,
                                                      std::span<const ImageTensor> images,
                                                      const std::vector<double>& bin_values) {
  if (bin_values.size() != teacher.bins()) {
    throw ShapeError(fmt::format("teacher predicts {} bins, task has {}", teacher.bins(), bin_values.size()));
  }
  const nn::Matrix probs = teacher.predict(images);
  return rows_as_distributions(probs, bin_values, 0, probs.rows());
}

TrainResult run_skd(ScoreModel& student, FrozenScoreModel& teacher, const Manifest& labeled,
                    const Manifest& unlabeled, const Manifest* eval, ImageLoader& loader,
                    const PreprocessSpec& spec, const SkdRunConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  spec.validate();
  if (!labeled.labeled) throw ArgumentError("distillation needs a labeled manifest");
  if (unlabeled.labeled) throw ArgumentError("the unlabeled pool must be an unlabeled manifest");
  if (student.bins() != teacher.bins()) {
    throw ConfigError(fmt::format("student predicts {} bins but the teacher {}", student.bins(), teacher.bins()));
  }
  if (labeled.bin_values.size() != student.bins() || cfg.emd.d != student.bins()) {
    throw ConfigError(fmt::format("head has {} bins, manifest {} and emd config {}", student.bins(),
                                  labeled.bin_values.size(), cfg.emd.d));
  }
  auto train_spec = spec;
  train_spec.mode = PreprocessMode::train;
  const Manifest data = decodable_subset(labeled, loader, train_spec.resize);
  const Manifest pool = cfg.plan.mu > 0 ? decodable_subset(unlabeled, loader, train_spec.resize) : Manifest{};
  const auto teacher_mean = cfg.teacher_mean.value_or(train_spec.mean);
  const auto teacher_std = cfg.teacher_std.value_or(train_spec.std);

  LoopState state{student.parameters(), nn::Adam(student.parameters(), cfg.adam), {}, 0,
                  -std::numeric_limits<double>::infinity()};
  maybe_resume(state, student, hooks, "student");
  const double beta = cfg.loss.beta;

  bool stopped = false;
  for (std::size_t epoch = state.start_epoch; epoch < cfg.schedule.total_epochs && !stopped; ++epoch) {
    const double lr = lr_at(epoch, cfg.schedule);
    state.opt.set_lr(lr);
    BatchComposer composer(data.size(), pool.size(), cfg.plan, mix_seed({cfg.seed, kBatchStream, epoch}));
    while (auto batch = composer.next()) {
      if (hooks.max_steps && state.result.steps >= *hooks.max_steps) {
        stopped = true;
        break;
      }
      std::vector<std::string> ids;
      std::vector<ScoreDistribution> targets;
      for (auto i : batch->labeled) {
        ids.push_back(data.records[i].id);
        targets.push_back(target_distribution(data.records[i], data, cfg.discretization));
      }
      for (auto i : batch->unlabeled) ids.push_back(pool.records[i].id);

      auto views = make_views(data, batch->labeled, loader, train_spec, epoch);
      const auto unlabeled_views = make_views(pool, batch->unlabeled, loader, train_spec, epoch);
      views.insert(views.end(), unlabeled_views.begin(), unlabeled_views.end());

      const auto b_s = static_cast<Eigen::Index>(batch->labeled.size());
      const auto total = static_cast<Eigen::Index>(views.size());
      const nn::Matrix probs = student.forward(normalize_all(views, train_spec.mean, train_spec.std));
      check_outputs(probs, state.result.steps, lr, ids);
      // Pseudo labels come from the same augmented view the student sees.
      const nn::Matrix teacher_probs = teacher.predict(normalize_all(views, teacher_mean, teacher_std));
      check_outputs(teacher_probs, state.result.steps, lr, ids);
      const auto pseudo = rows_as_distributions(teacher_probs, data.bin_values, 0, teacher_probs.rows());

      const auto preds = rows_as_distributions(probs, data.bin_values, 0, total);
      const double loss_s = supervised_loss(std::span(preds).first(static_cast<std::size_t>(b_s)), targets, cfg.emd);
      const double loss_kd = kd_loss(preds, pseudo, cfg.emd);
      const double loss = student_loss(loss_s, loss_kd, cfg.loss);
      check_finite(loss, state.result.steps, lr, ids);

      nn::Matrix grad = nn::Matrix::Zero(total, probs.cols());
      for (Eigen::Index r = 0; r < b_s; ++r) {
        const auto g = emd_value_and_grad(row_span(probs, r), targets[static_cast<std::size_t>(r)].probs(), cfg.emd);
        for (Eigen::Index k = 0; k < grad.cols(); ++k) {
          grad(r, k) = g.d_p[static_cast<std::size_t>(k)] / static_cast<double>(b_s);
        }
      }
      for (Eigen::Index r = 0; r < total; ++r) {
        const auto g = emd_value_and_grad(row_span(probs, r), pseudo[static_cast<std::size_t>(r)].probs(), cfg.emd);
        for (Eigen::Index k = 0; k < grad.cols(); ++k) {
          grad(r, k) += beta * (g.d_p[static_cast<std::size_t>(k)] / static_cast<double>(total));
        }
      }
      state.opt.zero_grad();
      student.backward(grad);
      if (cfg.grad_clip) nn::clip_gradients(state.params, *cfg.grad_clip);
      state.opt.step();
      ++state.result.steps;

      StepRecord rec;
      rec.step = state.result.steps;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.loss = loss;
      rec.batch_digest = batch_digest(ids);
      rec.loss_s = loss_s;
      rec.loss_kd = loss_kd;
      rec.n_labeled = static_cast<std::size_t>(b_s);
      rec.n_unlabeled = batch->unlabeled.size();
      rec.kd_terms = preds.size();
      if (hooks.on_step) hooks.on_step(rec);
      state.result.log.push_back(std::move(rec));
    }
    if (!stopped) end_epoch(state, student, eval, loader, spec, hooks, "student", epoch);
  }
  finish(state, student, eval, loader, spec, hooks, "student");
  return state.result;
}

}  // namespace aeskd
