#pragma once

#include <filesystem>
#include <future>
#include <iostream>
#include <mutex>
#include <optional>

#include "pixdesc/config.hpp"
#include "pixdesc/eval.hpp"

#include <json.hpp>

namespace pixdesc {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct Datasets {
  std::vector<Scene> train;
  std::vector<Scene> val;
  std::vector<Scene> test;
};

// Directories win when set; otherwise the scene generator builds all three
// splits from one object library (split index keeps their scenes disjoint).
inline std::vector<Scene> generate_split(const GenSpec& base, std::uint64_t seed,
                                         int split, int n_scenes,
                                         bool multi_object_override = false) {
  GenSpec spec = base;
  spec.n_scenes = n_scenes;
  if (multi_object_override) spec.single_object = false;
  Rng lib_rng(mix_seed(seed, 0x6c696272ull));
  std::vector<ObjectSpec> library = make_object_library(spec, lib_rng);
  std::vector<Scene> scenes;
  for (int s = 0; s < n_scenes; ++s) {
    Rng rng(mix_seed(seed, 0x7363656eull + std::uint64_t(split) * 0x9e37u,
                     std::uint64_t(s)));
    std::vector<ObjectSpec> chosen;
    if (spec.single_object) {
      chosen.push_back(library[std::size_t(s % spec.library_size)]);
    } else {
      std::vector<int> order(library.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
      for (std::size_t i = 0; i + 1 < order.size(); ++i)
        std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
      int take = std::min<int>(spec.objects_per_scene, int(library.size()));
      for (int i = 0; i < take; ++i) chosen.push_back(library[std::size_t(order[i])]);
    }
    for (int d = 0; d < spec.distractors_per_scene; ++d)
      chosen.push_back(detail::random_object_shape(rng, spec, kDistractorId));
    scenes.push_back(generate_scene(spec, std::move(chosen), rng, s));
  }
  return scenes;
}

inline Datasets load_or_generate_datasets(const RunConfig& cfg, std::uint64_t seed) {
  Datasets d;
  if (!cfg.train_dir.empty()) {
    d.train = load_dataset(cfg.train_dir);
    if (!cfg.val_dir.empty()) d.val = load_dataset(cfg.val_dir);
    if (!cfg.test_dir.empty()) d.test = load_dataset(cfg.test_dir);
  } else {
    d.train = generate_split(cfg.scenegen, seed, 0, cfg.scenegen.n_scenes);
    // validation/test splits stay multi-object even for single-object training
    d.val = generate_split(cfg.scenegen, seed, 1, cfg.val_scenes, true);
    d.test = generate_split(cfg.scenegen, seed, 2, cfg.test_scenes, true);
  }
  if (d.train.empty()) throw DataError("datasets: no training scenes");
  return d;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0;
  int steps = 0;
  int skipped_steps = 0;
  std::optional<double> val_metric;
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  int epoch = 0;
  double best_val_metric = -1;
  std::string best_checkpoint;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> log;
  ModelParams best_params;  // params at the best validation event
  bool has_best = false;
};

namespace traindet {

struct PreparedPair {
  ImageU8 aug_a, aug_b;
  std::vector<Pixel> pixels_a, pixels_b;
  int scene = 0;
};

// Samples a constrained pair, augments, computes the validity mask on the
// unaugmented frames, samples correspondences and remaps them through the
// augmentation coordinate maps.
inline std::optional<PreparedPair> prepare_pair(const RunConfig& cfg,
                                                const std::vector<Scene>& scenes,
                                                const PairIndex& index, Rng& rng) {
  SampledPair sp = index.sample(rng);
  const Scene& sc = scenes[std::size_t(sp.scene)];
  const RgbdFrame& fa = sc.frames[std::size_t(sp.frame_a)];
  const RgbdFrame& fb = sc.frames[std::size_t(sp.frame_b)];

  AugmentationSpec spec_a = cfg.augment.enabled
                                ? sample_augmentation_sequence(cfg.augment, fa.width(),
                                                               fa.height(), rng)
                                : AugmentationSpec::identity(fa.width(), fa.height());
  AugmentationSpec spec_b =
      (cfg.augment.enabled && cfg.augment.apply_to == ApplyTo::Both)
          ? sample_augmentation_sequence(cfg.augment, fb.width(), fb.height(), rng)
          : AugmentationSpec::identity(fb.width(), fb.height());

  ValidityMask vm = compute_validity_mask(fa, fb, cfg.occlusion_tol);
  if (vm.count_valid() == 0) return std::nullopt;
  std::vector<PixelPair> pairs =
      sample_correspondences(vm, cfg.loss.n_correspondences, rng);
  RemappedPairs remapped = remap_correspondences(pairs, spec_a, spec_b);

  PreparedPair out;
  out.scene = sp.scene;
  for (std::size_t i = 0; i < remapped.pairs.size(); ++i) {
    if (!remapped.valid[i]) continue;
    out.pixels_a.push_back(remapped.pairs[i].a);
    out.pixels_b.push_back(remapped.pairs[i].b);
  }
  if (out.pixels_a.size() < 2) return std::nullopt;
  out.aug_a = apply_augmentation(fa.rgb, spec_a);
  out.aug_b = apply_augmentation(fb.rgb, spec_b);
  return out;
}

// Uniform non-match pixels in B, at least exclusion_radius away from the
// true match.
inline std::vector<Pixel> sample_nonmatches(Pixel match, int count, int w, int h,
                                            int exclusion_radius, Rng& rng) {
  std::vector<Pixel> out;
  out.reserve(std::size_t(count));
  int guard = 0;
  while (int(out.size()) < count && guard < count * 50) {
    ++guard;
    Pixel p{int(rng.uniform_index(std::uint64_t(w))),
            int(rng.uniform_index(std::uint64_t(h)))};
    if (std::hypot(p.u - match.u, p.v - match.v) <= exclusion_radius) continue;
    out.push_back(p);
  }
  return out;
}

// Scenes whose known-object set differs from the given one (for the
// cross-object triplet's third image).
inline std::vector<int> different_object_scenes(const std::vector<Scene>& scenes,
                                                int scene_idx) {
  std::vector<int> ids = scenes[std::size_t(scene_idx)].known_object_ids();
  std::sort(ids.begin(), ids.end());
  std::vector<int> out;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    if (int(s) == scene_idx) continue;
    std::vector<int> other = scenes[s].known_object_ids();
    std::sort(other.begin(), other.end());
    if (other != ids) out.push_back(int(s));
  }
  return out;
}

}  // namespace traindet

// One full training run for a single seed. Deterministic: every step draws
// from a generator seeded by (seed, step index), validation by (seed, epoch).
inline TrainResult train(const RunConfig& cfg, std::uint64_t seed,
                         const Datasets& data, const std::string& out_dir = "",
                         std::ostream* log_stream = nullptr) {
  cfg.validate();
  namespace fs = std::filesystem;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    sceneio::write_text(out_dir + "/config.ini", cfg.to_text());
  }

  TrainResult result;
  result.state.params = ModelParams::init(cfg.architecture(), seed);
  result.state.adam = AdamState::init(result.state.params, cfg.optimizer);
  const Measure measure = measure_for(cfg.loss.kind);
  const int batch = cfg.effective_batch_size();
  const int steps_per_epoch = std::max(1, cfg.pairs_per_epoch / batch);

  PairIndex index(data.train, cfg.pair_constraint());
  if (index.empty())
    throw NoAdmissiblePair("train: no admissible pair in the training set");

  bool warned_no_cross = false;
  std::int64_t global_step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0;
    int steps_done = 0, skipped = 0;
    for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
      Rng rng(mix_seed(seed, 0x73746570ull, std::uint64_t(global_step)));

      Tape tape;
      std::vector<int> param_ids;
      param_ids.reserve(result.state.params.tensors.size());
      for (const auto& t : result.state.params.tensors)
        param_ids.push_back(tape.leaf(t.tensor));

      std::vector<int> batch_a, batch_b;  // gathered descriptor rows per pair
      std::vector<int> pair_losses;       // pixelwise only
      for (int b = 0; b < batch; ++b) {
        std::optional<traindet::PreparedPair> prep;
        for (int attempt = 0; attempt < cfg.retry_limit && !prep; ++attempt)
          prep = traindet::prepare_pair(cfg, data.train, index, rng);
        if (!prep) continue;

        int in_a = tape.leaf(image_to_input<float>(prep->aug_a));
        int in_b = tape.leaf(image_to_input<float>(prep->aug_b));
        int desc_a = build_forward(tape, result.state.params.arch, param_ids, in_a);
        int desc_b = build_forward(tape, result.state.params.arch, param_ids, in_b);
        int ga = tape.gather_pixels(desc_a, prep->pixels_a);
        int gb = tape.gather_pixels(desc_b, prep->pixels_b);

        if (cfg.loss.kind == LossKind::Ntxent) {
          batch_a.push_back(ga);
          batch_b.push_back(gb);
          continue;
        }

        // pixelwise: per-pair loss with sampled non-matches
        const int w = prep->aug_b.width, h = prep->aug_b.height;
        std::vector<Pixel> nm_a, nm_b;
        for (std::size_t i = 0; i < prep->pixels_a.size(); ++i) {
          auto negs = traindet::sample_nonmatches(
              prep->pixels_b[i], cfg.loss.n_noncorrespondences_per_match, w, h,
              cfg.loss.exclusion_radius, rng);
          for (const Pixel& n : negs) {
            nm_a.push_back(prep->pixels_a[i]);
            nm_b.push_back(n);
          }
        }
        int na = -1, nb = -1;
        if (!nm_a.empty()) {
          na = tape.gather_pixels(desc_a, nm_a);
          nb = tape.gather_pixels(desc_b, nm_b);
        }
        int pair_loss = build_pixelwise(tape, ga, gb, na, nb, float(cfg.loss.margin));

        if (cfg.loss.kind == LossKind::PixelwiseCrossObject) {
          auto others = traindet::different_object_scenes(data.train, prep->scene);
          if (others.empty()) {
            if (!warned_no_cross && log_stream) {
              *log_stream << "warning: no scene with a different object set; "
                             "cross-object term skipped\n";
              warned_no_cross = true;
            }
          } else {
            const Scene& oc = data.train[std::size_t(others[rng.uniform_index(
                others.size())])];
            const RgbdFrame& fc =
                oc.frames[rng.uniform_index(oc.frames.size())];
            int in_c = tape.leaf(image_to_input<float>(fc.rgb));
            int desc_c =
                build_forward(tape, result.state.params.arch, param_ids, in_c);
            std::vector<Pixel> px_a, px_c;
            for (int i = 0; i < cfg.loss.n_cross_object_samples; ++i) {
              px_a.push_back({int(rng.uniform_index(std::uint64_t(w))),
                              int(rng.uniform_index(std::uint64_t(h)))});
              px_c.push_back({int(rng.uniform_index(std::uint64_t(fc.width()))),
                              int(rng.uniform_index(std::uint64_t(fc.height())))});
            }
            int ca = tape.gather_pixels(desc_a, px_a);
            int cc = tape.gather_pixels(desc_c, px_c);
            int cross = build_cross_object_term(tape, ca, cc, float(cfg.loss.margin));
            pair_loss = tape.add(pair_loss, cross);
          }
        }
        pair_losses.push_back(pair_loss);
      }

      int loss_id = -1;
      if (cfg.loss.kind == LossKind::Ntxent) {
        if (batch_a.empty()) {
          ++skipped;
          if (log_stream)
            *log_stream << "warning: step " << global_step
                        << " skipped (no usable pair)\n";
          continue;
        }
        int da = batch_a.size() == 1 ? batch_a[0] : tape.concat_rows(batch_a);
        int db = batch_b.size() == 1 ? batch_b[0] : tape.concat_rows(batch_b);
        loss_id = build_ntxent(tape, da, db, float(cfg.loss.tau), !cfg.loss.sum_mode);
      } else {
        if (pair_losses.empty()) {
          ++skipped;
          if (log_stream)
            *log_stream << "warning: step " << global_step
                        << " skipped (no usable pair)\n";
          continue;
        }
        loss_id = pair_losses[0];
        for (std::size_t i = 1; i < pair_losses.size(); ++i)
          loss_id = tape.add(loss_id, pair_losses[i]);
        if (pair_losses.size() > 1)
          loss_id = tape.scale(loss_id, 1.f / float(pair_losses.size()));
      }

      loss_sum += double(tape.value(loss_id).data[0]);
      ++steps_done;
      tape.backward(loss_id);

      std::vector<TensorF> grads;
      grads.reserve(param_ids.size());
      for (int id : param_ids) grads.push_back(tape.grad(id));
      adam_step(result.state.params, grads, result.state.adam);
    }

    EpochLog el;
    el.epoch = epoch;
    el.steps = steps_done;
    el.skipped_steps = skipped;
    el.mean_loss = steps_done ? loss_sum / steps_done : 0.0;

    if (!data.val.empty() && epoch % cfg.validation_every == 0) {
      CorrespondenceEvalConfig ec;
      ec.constraint = cfg.pair_constraint();
      ec.n_pairs = cfg.validation_pairs;
      ec.n_queries = cfg.validation_queries;
      ec.k_max = cfg.eval_k_max;
      ec.occlusion_tol = cfg.occlusion_tol;
      auto res = correspondence_accuracy_eval(
          model_descriptor_fn(result.state.params), data.val, ec, measure,
          mix_seed(seed, 0x76616c69ull, std::uint64_t(epoch)));
      double metric = res.curve.at(cfg.validation_pck_k);
      el.val_metric = metric;
      // ties resolve to the later (longer-trained) checkpoint
      if (metric >= result.state.best_val_metric) {
        result.state.best_val_metric = metric;
        result.best_params = result.state.params;
        result.has_best = true;
        if (!out_dir.empty()) {
          result.state.best_checkpoint = out_dir + "/best.ckpt";
          save_checkpoint(result.state.best_checkpoint, result.state.params,
                          global_step);
        }
      }
    }
    result.state.epoch = epoch;
    result.log.push_back(el);
    if (log_stream) {
      *log_stream << "epoch " << epoch << " loss " << el.mean_loss;
      if (el.val_metric) *log_stream << " val_pck@" << cfg.validation_pck_k
                                     << " " << *el.val_metric;
      *log_stream << "\n";
    }
  }

  if (!out_dir.empty()) {
    if (cfg.epochs > 0)
      save_checkpoint(out_dir + "/last.ckpt", result.state.params,
                      std::int64_t(cfg.epochs) * steps_per_epoch);
    std::ostringstream csv;
    csv << "epoch,mean_loss,steps,skipped,val_metric\n";
    for (const auto& el : result.log) {
      csv << el.epoch << "," << el.mean_loss << "," << el.steps << ","
          << el.skipped_steps << ",";
      if (el.val_metric) csv << *el.val_metric;
      csv << "\n";
    }
    sceneio::write_text(out_dir + "/train_log.csv", csv.str());

    nlohmann::json summary;
    summary["seed"] = seed;
    summary["epochs"] = cfg.epochs;
    summary["best_val_metric"] = result.state.best_val_metric;
    summary["validation_pck_k"] = cfg.validation_pck_k;
    summary["loss"] = loss_kind_name(cfg.loss.kind);
    sceneio::write_text(out_dir + "/summary.json", summary.dump(2) + "\n");
  }
  return result;
}

// Convenience: generate/load datasets, then train one seed.
inline TrainResult train(const RunConfig& cfg, std::uint64_t seed,
                         const std::string& out_dir = "",
                         std::ostream* log_stream = nullptr) {
  Datasets data = load_or_generate_datasets(cfg, seed);
  return train(cfg, seed, data, out_dir, log_stream);
}

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

enum class AblationAxis {
  Augmentations,
  Dimension,
  Temperature,
  BatchSize,
  NCorrespondences,
  NScenes,
};

inline AblationAxis parse_axis(const std::string& s) {
  if (s == "augmentations") return AblationAxis::Augmentations;
  if (s == "dimension") return AblationAxis::Dimension;
  if (s == "temperature") return AblationAxis::Temperature;
  if (s == "batch_size") return AblationAxis::BatchSize;
  if (s == "n_correspondences") return AblationAxis::NCorrespondences;
  if (s == "n_scenes") return AblationAxis::NScenes;
  throw ConfigError("unknown ablation axis: " + s);
}

inline std::string axis_name(AblationAxis a) {
  switch (a) {
    case AblationAxis::Augmentations: return "augmentations";
    case AblationAxis::Dimension: return "dimension";
    case AblationAxis::Temperature: return "temperature";
    case AblationAxis::BatchSize: return "batch_size";
    case AblationAxis::NCorrespondences: return "n_correspondences";
    case AblationAxis::NScenes: return "n_scenes";
  }
  return "?";
}

// Augmentation presets accepted as values on the augmentations axis.
inline void apply_augmentation_preset(AugmentConfig& cfg, const std::string& value) {
  if (value == "none") {
    cfg.enabled = false;
  } else if (value == "geometric") {
    cfg.enabled = true;
    cfg.blur = cfg.color_jitter = cfg.grayscale = false;
  } else if (value == "full") {
    cfg.enabled = true;
  } else {
    throw ConfigError("augmentations axis accepts none|geometric|full, got " + value);
  }
}

inline RunConfig apply_axis_value(const RunConfig& base, AblationAxis axis,
                                  const std::string& value) {
  RunConfig c = base;
  switch (axis) {
    case AblationAxis::Augmentations:
      apply_augmentation_preset(c.augment, value);
      break;
    case AblationAxis::Dimension:
      c.descriptor_dim = cfgdet::to_int(value, "dimension");
      break;
    case AblationAxis::Temperature:
      c.loss.tau = cfgdet::to_real(value, "temperature");
      break;
    case AblationAxis::BatchSize:
      c.batch_size = cfgdet::to_int(value, "batch_size");
      break;
    case AblationAxis::NCorrespondences:
      c.loss.n_correspondences = cfgdet::to_int(value, "n_correspondences");
      break;
    case AblationAxis::NScenes:
      c.scenegen.n_scenes = cfgdet::to_int(value, "n_scenes");
      break;
  }
  c.validate();
  return c;
}

struct AblationRow {
  std::string value;
  std::vector<double> per_seed_auc;
  double mean = 0;
  double sigma = 0;
};

struct AblationTable {
  AblationAxis axis;
  std::vector<AblationRow> rows;

  std::string to_text() const {
    std::ostringstream os;
    os << axis_name(axis) << " | AUC+/-sigma for PCK@k, k in [1,100]\n";
    for (const auto& r : rows) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3f +/- %.3f", r.mean, r.sigma);
      os << r.value << " | " << buf << "\n";
    }
    return os.str();
  }
};

// Trains one model per (value, seed) and evaluates AUC on the test split.
inline AblationTable run_ablation(const RunConfig& base, AblationAxis axis,
                                  const std::vector<std::string>& values,
                                  const std::string& out_dir = "", int threads = 1,
                                  std::ostream* log_stream = nullptr) {
  if (values.empty()) throw ConfigError("run_ablation: values must be nonempty");
  AblationTable table;
  table.axis = axis;

  struct Job {
    std::size_t row;
    std::uint64_t seed;
    RunConfig cfg;
  };
  std::vector<Job> jobs;
  for (const std::string& v : values) {
    table.rows.push_back({v, {}, 0, 0});
    RunConfig cfg = apply_axis_value(base, axis, v);
    for (std::uint64_t seed : cfg.seeds)
      jobs.push_back({table.rows.size() - 1, seed, cfg});
  }

  std::vector<double> auc(jobs.size(), 0.0);
  auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    Datasets data = load_or_generate_datasets(job.cfg, job.seed);
    TrainResult tr = train(job.cfg, job.seed, data);
    const ModelParams& model = tr.has_best ? tr.best_params : tr.state.params;

    CorrespondenceEvalConfig ec;
    ec.constraint = job.cfg.pair_constraint();
    ec.n_pairs = job.cfg.eval_pairs;
    ec.n_queries = job.cfg.eval_queries;
    ec.k_max = job.cfg.eval_k_max;
    ec.occlusion_tol = job.cfg.occlusion_tol;
    const std::vector<Scene>& eval_scenes = data.test.empty() ? data.val : data.test;
    auto res = correspondence_accuracy_eval(
        model_descriptor_fn(model), eval_scenes, ec, measure_for(job.cfg.loss.kind),
        mix_seed(job.seed, 0x61626c61ull));
    auc[j] = res.auc;
    if (log_stream)
      *log_stream << axis_name(axis) << "=" << table.rows[job.row].value << " seed "
                  << job.seed << " auc " << res.auc << "\n";
  };

  if (threads <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
      for (;;) {
        std::size_t j;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= jobs.size()) return;
          j = next++;
        }
        run_job(j);
      }
    };
    std::vector<std::future<void>> pool;
    for (int t = 0; t < std::min<int>(threads, int(jobs.size())); ++t)
      pool.push_back(std::async(std::launch::async, worker));
    for (auto& f : pool) f.get();
  }

  for (std::size_t j = 0; j < jobs.size(); ++j)
    table.rows[jobs[j].row].per_seed_auc.push_back(auc[j]);
  for (auto& row : table.rows) {
    double sum = 0;
    for (double a : row.per_seed_auc) sum += a;
    row.mean = sum / double(row.per_seed_auc.size());
    double var = 0;
    for (double a : row.per_seed_auc) var += (a - row.mean) * (a - row.mean);
    row.sigma = row.per_seed_auc.size() > 1
                    ? std::sqrt(var / double(row.per_seed_auc.size() - 1))
                    : 0.0;
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream csv;
    csv << "value,seed,auc\n";
    for (std::size_t j = 0; j < jobs.size(); ++j)
      csv << table.rows[jobs[j].row].value << "," << jobs[j].seed << "," << auc[j]
          << "\n";
    sceneio::write_text(out_dir + "/ablation_" + axis_name(axis) + ".csv", csv.str());
    std::ostringstream sum;
    sum << "value,mean_auc,sigma\n";
    for (const auto& r : table.rows)
      sum << r.value << "," << r.mean << "," << r.sigma << "\n";
    sceneio::write_text(out_dir + "/ablation_" + axis_name(axis) + "_summary.csv",
                        sum.str());
  }
  return table;
}

// ---------------------------------------------------------------------------
// Report writers shared by the CLI
// ---------------------------------------------------------------------------

inline void write_pck_report(const std::string& dir,
                             const CorrespondenceEvalResult& res) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  csv << "k,pck\n";
  for (std::size_t i = 0; i < res.curve.values.size(); ++i)
    csv << (i + 1) << "," << res.curve.values[i] << "\n";
  sceneio::write_text(dir + "/pck_curve.csv", csv.str());

  nlohmann::json j;
  j["auc"] = res.auc;
  j["pairs_evaluated"] = res.pairs_evaluated;
  j["pairs_skipped"] = res.pairs_skipped;
  j["queries"] = res.distances.size();
  j["pck@5"] = res.curve.at(5);
  j["pck@10"] = res.curve.at(std::min(10, res.curve.k_max));
  j["pck@80"] = res.curve.at(std::min(80, res.curve.k_max));
  sceneio::write_text(dir + "/summary.json", j.dump(2) + "\n");
}

inline void write_tracking_report(const std::string& dir, const TrackingReport& rep) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  csv << "query,observation,error_mm\n";
  for (std::size_t q = 0; q < rep.per_query_errors_mm.size(); ++q)
    for (std::size_t i = 0; i < rep.per_query_errors_mm[q].size(); ++i)
      csv << q << "," << i << "," << rep.per_query_errors_mm[q][i] << "\n";
  sceneio::write_text(dir + "/tracking_errors.csv", csv.str());

  // log-scale histogram, decade bins from 0.1 mm to 1 m
  std::ostringstream hist;
  hist << "bin_lo_mm,bin_hi_mm,count\n";
  const double edges[] = {0.0, 0.1, 0.316, 1.0, 3.16, 10.0, 31.6, 100.0, 316.0, 1000.0};
  for (std::size_t b = 0; b + 1 < std::size(edges); ++b) {
    std::size_t count = 0;
    for (double e : rep.all_errors_mm)
      if (e >= edges[b] && e < edges[b + 1]) ++count;
    hist << edges[b] << "," << edges[b + 1] << "," << count << "\n";
  }
  sceneio::write_text(dir + "/tracking_histogram.csv", hist.str());

  nlohmann::json j;
  j["median_mm"] = rep.median_mm;
  j["p75_mm"] = rep.p75_mm;
  j["p90_mm"] = rep.p90_mm;
  j["mean_mm"] = rep.mean_mm;
  j["misses"] = rep.misses;
  j["observations"] = rep.all_errors_mm.size();
  sceneio::write_text(dir + "/summary.json", j.dump(2) + "\n");
}

}  // namespace pixdesc
