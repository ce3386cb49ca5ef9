// Command-line surface for the dense-descriptor lab: scene generation,
// training, evaluation, ablations, and descriptor visualization.

#include <CLI11.hpp>
#include <iostream>

#include "pixdesc/pixdesc.hpp"

namespace {

using namespace pixdesc;

std::vector<KeypointQuery> load_queries(const std::string& path) {
  std::istringstream is(sceneio::read_text(path));
  std::vector<KeypointQuery> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = line.substr(0, line.find('#'));
    std::istringstream ls(s);
    KeypointQuery q;
    if (!(ls >> q.frame >> q.pixel.u >> q.pixel.v)) {
      if (s.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected 'frame u v [object_id]'");
    }
    ls >> q.object_id;
    out.push_back(q);
  }
  if (out.empty()) throw ParseError(path + ": no queries");
  return out;
}

struct AxisSpec {
  int frame = 0;
  Pixel p1, p2;
};

AxisSpec load_axis_spec(const std::string& path) {
  auto v = sceneio::parse_reals(path, 5);
  return {int(v[0]), {int(v[1]), int(v[2])}, {int(v[3]), int(v[4])}};
}

Measure parse_measure(const std::string& s) {
  if (s == "cosine") return Measure::Cosine;
  if (s == "l2") return Measure::L2;
  throw ConfigError("measure must be cosine or l2, got " + s);
}

std::vector<std::string> split_values(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"dense pixel descriptor lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "run", checkpoint, scenes_path, extra_path;
  std::string axis_str, values_str, measure_str = "cosine", viz_out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  int eval_pairs = 0, eval_queries = 0;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the random seed")
        ->each([&](const std::string&) { seed_set = true; });
  };

  auto* gen = app.add_subcommand("gen-scenes", "render scene directories");
  gen->add_option("spec", config_path, "config file with a [scenegen] section")
      ->required();
  gen->add_option("out", scenes_path, "output directory")->required();
  add_seed(gen);

  auto* tr = app.add_subcommand("train", "train a descriptor model");
  tr->add_option("config", config_path, "run configuration file")->required();
  tr->add_option("--out-dir", out_dir, "run output directory");
  add_seed(tr);
  tr->add_option("--threads", threads, "worker threads (reserved for ablation)");

  auto* ep = app.add_subcommand("eval-pck", "correspondence accuracy (PCK / AUC)");
  ep->add_option("checkpoint", checkpoint)->required();
  ep->add_option("scenes", scenes_path, "scene directory or collection")->required();
  ep->add_option("--out-dir", out_dir);
  ep->add_option("--pairs", eval_pairs, "image pairs to sample");
  ep->add_option("--queries", eval_queries, "queries per pair");
  ep->add_option("--measure", measure_str, "cosine|l2");
  add_seed(ep);

  auto* et = app.add_subcommand("eval-tracking", "keypoint tracking in world frame");
  et->add_option("checkpoint", checkpoint)->required();
  et->add_option("scene", scenes_path, "scene directory")->required();
  et->add_option("queries", extra_path, "query file: 'frame u v [object_id]' lines")
      ->required();
  et->add_option("--out-dir", out_dir);
  et->add_option("--measure", measure_str, "cosine|l2");

  auto* eg = app.add_subcommand("eval-grasp", "two-keypoint grasp axis estimation");
  eg->add_option("checkpoint", checkpoint)->required();
  eg->add_option("scene", scenes_path, "scene directory")->required();
  eg->add_option("axis-spec", extra_path, "file: 'frame u1 v1 u2 v2'")->required();
  eg->add_option("--out-dir", out_dir);
  eg->add_option("--measure", measure_str, "cosine|l2");

  auto* ab = app.add_subcommand("ablate", "sweep one axis, train per value and seed");
  ab->add_option("config", config_path)->required();
  ab->add_option("--axis", axis_str,
                 "augmentations|dimension|temperature|batch_size|"
                 "n_correspondences|n_scenes")
      ->required();
  ab->add_option("--values", values_str, "comma-separated values")->required();
  ab->add_option("--out-dir", out_dir);
  ab->add_option("--threads", threads, "parallel training runs");

  auto* vz = app.add_subcommand("viz", "PCA visualization of a descriptor image");
  vz->add_option("checkpoint", checkpoint)->required();
  vz->add_option("image", scenes_path, "input PPM image")->required();
  vz->add_option("--out", viz_out, "output PPM path (default <image>.viz.ppm)");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    RunConfig cfg = RunConfig::load(config_path);
    std::uint64_t s = seed_set ? seed : cfg.seeds[0];
    auto scenes = generate_dataset(cfg.scenegen, s);
    save_scenes(scenes, scenes_path);
    std::cout << "wrote " << scenes.size() << " scenes to " << scenes_path << "\n";
    return 0;
  }

  if (tr->parsed()) {
    RunConfig cfg = RunConfig::load(config_path);
    std::uint64_t s = seed_set ? seed : cfg.seeds[0];
    TrainResult r = train(cfg, s, out_dir, &std::cout);
    std::cout << "best validation PCK@" << cfg.validation_pck_k << " = "
              << r.state.best_val_metric << "\n";
    if (r.has_best) std::cout << "checkpoint: " << r.state.best_checkpoint << "\n";
    return 0;
  }

  if (ep->parsed()) {
    Checkpoint ck = load_checkpoint(checkpoint);
    auto scenes = load_dataset(scenes_path);
    CorrespondenceEvalConfig ec;
    RunConfig defaults;
    ec.constraint = defaults.pair_constraint();
    ec.n_pairs = eval_pairs > 0 ? eval_pairs : defaults.eval_pairs;
    ec.n_queries = eval_queries > 0 ? eval_queries : defaults.eval_queries;
    auto res = correspondence_accuracy_eval(model_descriptor_fn(ck.params), scenes,
                                            ec, parse_measure(measure_str),
                                            seed_set ? seed : 1);
    write_pck_report(out_dir, res);
    std::cout << "AUC " << res.auc << " PCK@5 " << res.curve.at(5) << " over "
              << res.distances.size() << " queries\n";
    std::cout << "reports in " << out_dir << "\n";
    return 0;
  }

  if (et->parsed()) {
    Checkpoint ck = load_checkpoint(checkpoint);
    auto scenes = load_dataset(scenes_path);
    if (scenes.size() != 1)
      throw ConfigError("eval-tracking expects a single scene directory");
    auto queries = load_queries(extra_path);
    TrackingReport rep = keypoint_tracking_eval(model_descriptor_fn(ck.params),
                                                scenes[0], queries,
                                                parse_measure(measure_str));
    write_tracking_report(out_dir, rep);
    std::cout << "median " << rep.median_mm << " mm, p90 " << rep.p90_mm
              << " mm, misses " << rep.misses << "\n";
    std::cout << "reports in " << out_dir << "\n";
    return 0;
  }

  if (eg->parsed()) {
    Checkpoint ck = load_checkpoint(checkpoint);
    auto scenes = load_dataset(scenes_path);
    if (scenes.size() != 1)
      throw ConfigError("eval-grasp expects a single scene directory");
    const Scene& sc = scenes[0];
    AxisSpec spec = load_axis_spec(extra_path);
    Measure measure = parse_measure(measure_str);

    DescriptorCache cache(model_descriptor_fn(ck.params));
    const RgbdFrame& ref = sc.frames.at(std::size_t(spec.frame));
    const TensorF& rd = cache.get(sc.scene_id, spec.frame, ref);
    const int d = rd.dim(2);
    Eigen::VectorXd d1(d), d2(d);
    for (int k = 0; k < d; ++k) {
      d1(k) = rd.at3(spec.p1.v, spec.p1.u, k);
      d2(k) = rd.at3(spec.p2.v, spec.p2.u, k);
    }

    std::ostringstream csv;
    csv << "frame,px,py,pz,ax,ay,az,apx,apy,apz\n";
    std::vector<GraspEstimate> grasps;
    int degenerate = 0, misses = 0;
    for (std::size_t fi = 0; fi < sc.frames.size(); ++fi) {
      if (int(fi) == spec.frame) continue;
      const RgbdFrame& f = sc.frames[fi];
      const TensorF& fd = cache.get(sc.scene_id, int(fi), f);
      Pixel q1 = nearest_match(fd, d1, measure);
      Pixel q2 = nearest_match(fd, d2, measure);
      if (!f.depth.valid_at(q1.u, q1.v) || !f.depth.valid_at(q2.u, q2.v)) {
        ++misses;
        continue;
      }
      Vec3 w1 = f.pose.apply(backproject(q1, double(f.depth.at(q1.u, q1.v)), f.intrinsics));
      Vec3 w2 = f.pose.apply(backproject(q2, double(f.depth.at(q2.u, q2.v)), f.intrinsics));
      try {
        GraspEstimate g = grasp_axis_estimate(w1, w2);
        grasps.push_back(g);
        csv << fi << "," << g.position.x() << "," << g.position.y() << ","
            << g.position.z() << "," << g.axis.x() << "," << g.axis.y() << ","
            << g.axis.z() << "," << g.approach.x() << "," << g.approach.y() << ","
            << g.approach.z() << "\n";
      } catch (const DegenerateAxis&) {
        ++degenerate;
      }
    }
    std::filesystem::create_directories(out_dir);
    sceneio::write_text(out_dir + "/grasp_estimates.csv", csv.str());

    nlohmann::json j;
    j["frames_estimated"] = grasps.size();
    j["misses"] = misses;
    j["degenerate"] = degenerate;
    if (!grasps.empty()) {
      Vec3 mean_pos = Vec3::Zero();
      for (const auto& g : grasps) mean_pos += g.position;
      mean_pos /= double(grasps.size());
      double pos_spread = 0, axis_spread = 0;
      for (const auto& g : grasps) {
        pos_spread += (g.position - mean_pos).norm();
        axis_spread += std::acos(std::clamp(
            std::abs(g.axis.dot(grasps[0].axis)), 0.0, 1.0));
      }
      j["mean_position"] = {mean_pos.x(), mean_pos.y(), mean_pos.z()};
      j["mean_position_spread_mm"] = pos_spread / double(grasps.size()) * 1000.0;
      j["mean_axis_angle_to_first_deg"] =
          axis_spread / double(grasps.size()) * 180.0 / M_PI;
    }
    sceneio::write_text(out_dir + "/summary.json", j.dump(2) + "\n");
    std::cout << "estimated " << grasps.size() << " grasps (" << misses
              << " misses, " << degenerate << " degenerate); reports in " << out_dir
              << "\n";
    return 0;
  }

  if (ab->parsed()) {
    RunConfig cfg = RunConfig::load(config_path);
    AblationTable t = run_ablation(cfg, parse_axis(axis_str),
                                   split_values(values_str), out_dir, threads,
                                   &std::cout);
    std::cout << t.to_text();
    std::cout << "tables in " << out_dir << "\n";
    return 0;
  }

  if (vz->parsed()) {
    Checkpoint ck = load_checkpoint(checkpoint);
    ImageU8 img = sceneio::read_ppm(scenes_path);
    TensorF desc = forward(ck.params, img);
    ImageU8 vis = pca_visualize(desc);
    std::string out = viz_out.empty() ? scenes_path + ".viz.ppm" : viz_out;
    sceneio::write_ppm(out, vis);
    std::cout << "wrote " << out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const pixdesc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pixdesc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const pixdesc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
