#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pixdesc/augment.hpp"
#include "pixdesc/losses.hpp"
#include "pixdesc/netcore.hpp"
#include "pixdesc/scenegen.hpp"
#include "pixdesc/sceneio.hpp"

namespace pixdesc {

// ---------------------------------------------------------------------------
// Flat INI: [section] lines with key = value pairs, '#' comments.
// ---------------------------------------------------------------------------

class Ini {
 public:
  static Ini parse(const std::string& text, const std::string& origin = "<config>") {
    Ini ini;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        ini.sections_.try_emplace(section);
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(s.substr(0, eq));
      std::string value = trim(s.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      ini.sections_[section][key] = value;
    }
    return ini;
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  std::string get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key))
      throw ConfigError("config: missing " + section + "." + key);
    return s->second.at(key);
  }

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// ---------------------------------------------------------------------------
// Run configuration (all module configs plus the training schedule)
// ---------------------------------------------------------------------------

struct RunConfig {
  // [data]
  std::string train_dir, val_dir, test_dir;

  // [scenegen] (used when the directories above are empty)
  GenSpec scenegen;
  int val_scenes = 2;
  int test_scenes = 2;

  // [model]
  int descriptor_dim = 16;
  std::string layers = "compact";

  // [loss]
  LossConfig loss;

  // [augment]
  AugmentConfig augment;

  // [optimizer]
  AdamConfig optimizer;

  // [run]
  int epochs = 500;
  int pairs_per_epoch = 1000;
  int batch_size = 0;  // 0 = auto: 2 for ntxent, 1 for pixelwise losses
  int validation_every = 5;
  int validation_pairs = 16;
  int validation_queries = 50;
  int validation_pck_k = 80;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int retry_limit = 8;
  double occlusion_tol = kDefaultOcclusionTol;
  double pair_min_translation = 0.20;
  double pair_min_angle = M_PI / 12.0;

  // [eval]
  int eval_pairs = 100;
  int eval_queries = 100;
  int eval_k_max = 100;

  int effective_batch_size() const {
    if (batch_size > 0) return batch_size;
    return loss.kind == LossKind::Ntxent ? 2 : 1;
  }

  Architecture architecture() const {
    if (layers == "compact") return Architecture::compact(descriptor_dim);
    Architecture a = Architecture::parse(layers);
    a.descriptor_dim = descriptor_dim;
    return a;
  }

  PairConstraint pair_constraint() const {
    return {pair_min_translation, pair_min_angle};
  }

  void validate() const {
    loss.validate();
    augment.validate();
    if (epochs < 0 || pairs_per_epoch < 1)
      throw ConfigError("run: epochs must be >= 0 and pairs_per_epoch >= 1");
    if (validation_every < 1 || validation_pairs < 1 || validation_queries < 1)
      throw ConfigError("run: validation settings must be >= 1");
    if (validation_pck_k < 1 || validation_pck_k > eval_k_max)
      throw ConfigError("run: validation_pck_k must lie in [1, eval.k_max]");
    if (seeds.empty()) throw ConfigError("run: at least one seed required");
    if (retry_limit < 1) throw ConfigError("run: retry_limit must be >= 1");
    if (train_dir.empty()) scenegen.validate();
  }

  std::string to_text() const;
  static RunConfig from_text(const std::string& text,
                             const std::string& origin = "<config>");
  static RunConfig load(const std::string& path) {
    std::string text;
    try {
      text = sceneio::read_text(path);
    } catch (const DataError&) {
      throw ConfigError("cannot open config file: " + path);
    }
    return from_text(text, path);
  }
};

namespace cfgdet {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double to_real(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad real for " + what + ": '" + s + "'");
  }
}

inline int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + what + ": '" + s + "'");
  }
}

inline bool to_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config: bad bool for " + what + ": '" + s + "'");
}

}  // namespace cfgdet

inline std::string RunConfig::to_text() const {
  using cfgdet::fmt;
  std::ostringstream os;
  os << "[data]\n";
  os << "train_dir = " << train_dir << "\n";
  os << "val_dir = " << val_dir << "\n";
  os << "test_dir = " << test_dir << "\n";
  os << "\n[scenegen]\n";
  os << "n_scenes = " << scenegen.n_scenes << "\n";
  os << "val_scenes = " << val_scenes << "\n";
  os << "test_scenes = " << test_scenes << "\n";
  os << "library_size = " << scenegen.library_size << "\n";
  os << "objects_per_scene = " << scenegen.objects_per_scene << "\n";
  os << "distractors_per_scene = " << scenegen.distractors_per_scene << "\n";
  os << "single_object = " << (scenegen.single_object ? "true" : "false") << "\n";
  os << "image_width = " << scenegen.image_width << "\n";
  os << "image_height = " << scenegen.image_height << "\n";
  os << "focal = " << fmt(scenegen.focal) << "\n";
  os << "workspace_radius = " << fmt(scenegen.workspace_radius) << "\n";
  os << "box_size_min = " << fmt(scenegen.box_size_min) << "\n";
  os << "box_size_max = " << fmt(scenegen.box_size_max) << "\n";
  os << "sphere_radius_min = " << fmt(scenegen.sphere_radius_min) << "\n";
  os << "sphere_radius_max = " << fmt(scenegen.sphere_radius_max) << "\n";
  os << "plane_extent = " << fmt(scenegen.plane.extent) << "\n";
  os << "frame_count = " << scenegen.trajectory.frame_count << "\n";
  os << "radius_min = " << fmt(scenegen.trajectory.radius_min) << "\n";
  os << "radius_max = " << fmt(scenegen.trajectory.radius_max) << "\n";
  os << "elevation_min_deg = " << fmt(scenegen.trajectory.elevation_min_deg) << "\n";
  os << "elevation_max_deg = " << fmt(scenegen.trajectory.elevation_max_deg) << "\n";
  os << "azimuth_span_deg = " << fmt(scenegen.trajectory.azimuth_span_deg) << "\n";
  os << "min_rot_deg = " << fmt(scenegen.trajectory.min_rot_deg) << "\n";
  os << "min_trans = " << fmt(scenegen.trajectory.min_trans_m) << "\n";
  os << "\n[model]\n";
  os << "descriptor_dim = " << descriptor_dim << "\n";
  os << "layers = " << layers << "\n";
  os << "\n[loss]\n";
  os << "kind = " << loss_kind_name(loss.kind) << "\n";
  os << "tau = " << fmt(loss.tau) << "\n";
  os << "margin = " << fmt(loss.margin) << "\n";
  os << "n_correspondences = " << loss.n_correspondences << "\n";
  os << "n_noncorrespondences_per_match = " << loss.n_noncorrespondences_per_match
     << "\n";
  os << "n_cross_object_samples = " << loss.n_cross_object_samples << "\n";
  os << "exclusion_radius = " << loss.exclusion_radius << "\n";
  os << "sum_mode = " << (loss.sum_mode ? "true" : "false") << "\n";
  os << "\n[augment]\n";
  os << "enabled = " << (augment.enabled ? "true" : "false") << "\n";
  os << "apply_to = " << (augment.apply_to == ApplyTo::AOnly ? "A_only" : "both")
     << "\n";
  os << "resize_crop = " << (augment.resize_crop ? "true" : "false") << "\n";
  os << "resize_crop_prob = " << fmt(augment.resize_crop_prob) << "\n";
  os << "resize_crop_scale_min = " << fmt(augment.resize_crop_scale_min) << "\n";
  os << "resize_crop_scale_max = " << fmt(augment.resize_crop_scale_max) << "\n";
  os << "perspective = " << (augment.perspective ? "true" : "false") << "\n";
  os << "perspective_prob = " << fmt(augment.perspective_prob) << "\n";
  os << "perspective_distortion = " << fmt(augment.perspective_distortion) << "\n";
  os << "affine = " << (augment.affine ? "true" : "false") << "\n";
  os << "affine_prob = " << fmt(augment.affine_prob) << "\n";
  os << "affine_rot_deg = " << fmt(augment.affine_rot_deg) << "\n";
  os << "affine_translate = " << fmt(augment.affine_translate) << "\n";
  os << "affine_shear_deg = " << fmt(augment.affine_shear_deg) << "\n";
  os << "hflip = " << (augment.hflip ? "true" : "false") << "\n";
  os << "hflip_prob = " << fmt(augment.hflip_prob) << "\n";
  os << "vflip = " << (augment.vflip ? "true" : "false") << "\n";
  os << "vflip_prob = " << fmt(augment.vflip_prob) << "\n";
  os << "rotation = " << (augment.rotation ? "true" : "false") << "\n";
  os << "rotation_prob = " << fmt(augment.rotation_prob) << "\n";
  os << "rotation_deg = " << fmt(augment.rotation_deg) << "\n";
  os << "blur = " << (augment.blur ? "true" : "false") << "\n";
  os << "blur_prob = " << fmt(augment.blur_prob) << "\n";
  os << "blur_kernel = " << augment.blur_kernel << "\n";
  os << "blur_sigma_min = " << fmt(augment.blur_sigma_min) << "\n";
  os << "blur_sigma_max = " << fmt(augment.blur_sigma_max) << "\n";
  os << "color_jitter = " << (augment.color_jitter ? "true" : "false") << "\n";
  os << "color_jitter_prob = " << fmt(augment.color_jitter_prob) << "\n";
  os << "cj_brightness = " << fmt(augment.cj_brightness) << "\n";
  os << "cj_contrast = " << fmt(augment.cj_contrast) << "\n";
  os << "cj_saturation = " << fmt(augment.cj_saturation) << "\n";
  os << "cj_hue = " << fmt(augment.cj_hue) << "\n";
  os << "grayscale = " << (augment.grayscale ? "true" : "false") << "\n";
  os << "grayscale_prob = " << fmt(augment.grayscale_prob) << "\n";
  os << "\n[optimizer]\n";
  os << "lr = " << fmt(optimizer.lr) << "\n";
  os << "beta1 = " << fmt(optimizer.beta1) << "\n";
  os << "beta2 = " << fmt(optimizer.beta2) << "\n";
  os << "weight_decay = " << fmt(optimizer.weight_decay) << "\n";
  os << "eps = " << fmt(optimizer.eps) << "\n";
  os << "\n[run]\n";
  os << "epochs = " << epochs << "\n";
  os << "pairs_per_epoch = " << pairs_per_epoch << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "validation_every = " << validation_every << "\n";
  os << "validation_pairs = " << validation_pairs << "\n";
  os << "validation_queries = " << validation_queries << "\n";
  os << "validation_pck_k = " << validation_pck_k << "\n";
  os << "seeds =";
  for (auto s : seeds) os << " " << s;
  os << "\n";
  os << "retry_limit = " << retry_limit << "\n";
  os << "occlusion_tol = " << fmt(occlusion_tol) << "\n";
  os << "pair_min_translation = " << fmt(pair_min_translation) << "\n";
  os << "pair_min_angle = " << fmt(pair_min_angle) << "\n";
  os << "\n[eval]\n";
  os << "pairs = " << eval_pairs << "\n";
  os << "queries = " << eval_queries << "\n";
  os << "k_max = " << eval_k_max << "\n";
  return os.str();
}

inline RunConfig RunConfig::from_text(const std::string& text,
                                      const std::string& origin) {
  using namespace cfgdet;
  Ini ini = Ini::parse(text, origin);
  RunConfig c;

  auto str = [&](const char* sec, const char* key, std::string& out) {
    if (ini.has(sec, key)) out = ini.get(sec, key);
  };
  auto real = [&](const char* sec, const char* key, double& out) {
    if (ini.has(sec, key))
      out = to_real(ini.get(sec, key), std::string(sec) + "." + key);
  };
  auto integer = [&](const char* sec, const char* key, int& out) {
    if (ini.has(sec, key))
      out = to_int(ini.get(sec, key), std::string(sec) + "." + key);
  };
  auto boolean = [&](const char* sec, const char* key, bool& out) {
    if (ini.has(sec, key))
      out = to_bool(ini.get(sec, key), std::string(sec) + "." + key);
  };

  str("data", "train_dir", c.train_dir);
  str("data", "val_dir", c.val_dir);
  str("data", "test_dir", c.test_dir);

  integer("scenegen", "n_scenes", c.scenegen.n_scenes);
  integer("scenegen", "val_scenes", c.val_scenes);
  integer("scenegen", "test_scenes", c.test_scenes);
  integer("scenegen", "library_size", c.scenegen.library_size);
  integer("scenegen", "objects_per_scene", c.scenegen.objects_per_scene);
  integer("scenegen", "distractors_per_scene", c.scenegen.distractors_per_scene);
  boolean("scenegen", "single_object", c.scenegen.single_object);
  integer("scenegen", "image_width", c.scenegen.image_width);
  integer("scenegen", "image_height", c.scenegen.image_height);
  real("scenegen", "focal", c.scenegen.focal);
  real("scenegen", "workspace_radius", c.scenegen.workspace_radius);
  real("scenegen", "box_size_min", c.scenegen.box_size_min);
  real("scenegen", "box_size_max", c.scenegen.box_size_max);
  real("scenegen", "sphere_radius_min", c.scenegen.sphere_radius_min);
  real("scenegen", "sphere_radius_max", c.scenegen.sphere_radius_max);
  real("scenegen", "plane_extent", c.scenegen.plane.extent);
  integer("scenegen", "frame_count", c.scenegen.trajectory.frame_count);
  real("scenegen", "radius_min", c.scenegen.trajectory.radius_min);
  real("scenegen", "radius_max", c.scenegen.trajectory.radius_max);
  real("scenegen", "elevation_min_deg", c.scenegen.trajectory.elevation_min_deg);
  real("scenegen", "elevation_max_deg", c.scenegen.trajectory.elevation_max_deg);
  real("scenegen", "azimuth_span_deg", c.scenegen.trajectory.azimuth_span_deg);
  real("scenegen", "min_rot_deg", c.scenegen.trajectory.min_rot_deg);
  real("scenegen", "min_trans", c.scenegen.trajectory.min_trans_m);

  integer("model", "descriptor_dim", c.descriptor_dim);
  str("model", "layers", c.layers);

  if (ini.has("loss", "kind")) c.loss.kind = parse_loss_kind(ini.get("loss", "kind"));
  real("loss", "tau", c.loss.tau);
  real("loss", "margin", c.loss.margin);
  integer("loss", "n_correspondences", c.loss.n_correspondences);
  integer("loss", "n_noncorrespondences_per_match",
          c.loss.n_noncorrespondences_per_match);
  integer("loss", "n_cross_object_samples", c.loss.n_cross_object_samples);
  integer("loss", "exclusion_radius", c.loss.exclusion_radius);
  boolean("loss", "sum_mode", c.loss.sum_mode);

  boolean("augment", "enabled", c.augment.enabled);
  if (ini.has("augment", "apply_to")) {
    std::string m = ini.get("augment", "apply_to");
    if (m == "A_only")
      c.augment.apply_to = ApplyTo::AOnly;
    else if (m == "both")
      c.augment.apply_to = ApplyTo::Both;
    else
      throw ConfigError("config: augment.apply_to must be A_only or both");
  }
  boolean("augment", "resize_crop", c.augment.resize_crop);
  real("augment", "resize_crop_prob", c.augment.resize_crop_prob);
  real("augment", "resize_crop_scale_min", c.augment.resize_crop_scale_min);
  real("augment", "resize_crop_scale_max", c.augment.resize_crop_scale_max);
  boolean("augment", "perspective", c.augment.perspective);
  real("augment", "perspective_prob", c.augment.perspective_prob);
  real("augment", "perspective_distortion", c.augment.perspective_distortion);
  boolean("augment", "affine", c.augment.affine);
  real("augment", "affine_prob", c.augment.affine_prob);
  real("augment", "affine_rot_deg", c.augment.affine_rot_deg);
  real("augment", "affine_translate", c.augment.affine_translate);
  real("augment", "affine_shear_deg", c.augment.affine_shear_deg);
  boolean("augment", "hflip", c.augment.hflip);
  real("augment", "hflip_prob", c.augment.hflip_prob);
  boolean("augment", "vflip", c.augment.vflip);
  real("augment", "vflip_prob", c.augment.vflip_prob);
  boolean("augment", "rotation", c.augment.rotation);
  real("augment", "rotation_prob", c.augment.rotation_prob);
  real("augment", "rotation_deg", c.augment.rotation_deg);
  boolean("augment", "blur", c.augment.blur);
  real("augment", "blur_prob", c.augment.blur_prob);
  integer("augment", "blur_kernel", c.augment.blur_kernel);
  real("augment", "blur_sigma_min", c.augment.blur_sigma_min);
  real("augment", "blur_sigma_max", c.augment.blur_sigma_max);
  boolean("augment", "color_jitter", c.augment.color_jitter);
  real("augment", "color_jitter_prob", c.augment.color_jitter_prob);
  real("augment", "cj_brightness", c.augment.cj_brightness);
  real("augment", "cj_contrast", c.augment.cj_contrast);
  real("augment", "cj_saturation", c.augment.cj_saturation);
  real("augment", "cj_hue", c.augment.cj_hue);
  boolean("augment", "grayscale", c.augment.grayscale);
  real("augment", "grayscale_prob", c.augment.grayscale_prob);

  real("optimizer", "lr", c.optimizer.lr);
  real("optimizer", "beta1", c.optimizer.beta1);
  real("optimizer", "beta2", c.optimizer.beta2);
  real("optimizer", "weight_decay", c.optimizer.weight_decay);
  real("optimizer", "eps", c.optimizer.eps);

  integer("run", "epochs", c.epochs);
  integer("run", "pairs_per_epoch", c.pairs_per_epoch);
  integer("run", "batch_size", c.batch_size);
  integer("run", "validation_every", c.validation_every);
  integer("run", "validation_pairs", c.validation_pairs);
  integer("run", "validation_queries", c.validation_queries);
  integer("run", "validation_pck_k", c.validation_pck_k);
  if (ini.has("run", "seeds")) {
    c.seeds.clear();
    std::istringstream is(ini.get("run", "seeds"));
    std::uint64_t s;
    while (is >> s) c.seeds.push_back(s);
    if (c.seeds.empty()) throw ConfigError("config: run.seeds must list seeds");
  }
  integer("run", "retry_limit", c.retry_limit);
  real("run", "occlusion_tol", c.occlusion_tol);
  real("run", "pair_min_translation", c.pair_min_translation);
  real("run", "pair_min_angle", c.pair_min_angle);

  integer("eval", "pairs", c.eval_pairs);
  integer("eval", "queries", c.eval_queries);
  integer("eval", "k_max", c.eval_k_max);

  c.validate();
  return c;
}

}  // namespace pixdesc
