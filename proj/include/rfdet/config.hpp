// Run configuration: one JSON document covering model, sampling, camera,
// loss, train, and data settings. A provided config file must carry exactly
// the documented key set; missing and unknown keys are both rejected with
// the offending dotted path named. --set overrides address the same paths.
#pragma once

#include "rfdet/eval.hpp"
#include "rfdet/gen.hpp"
#include "rfdet/scene_io.hpp"

namespace rfdet {

inline std::string modality_to_string(const Modality& m) { return modality_name(m); }

inline Modality modality_from_string(const std::string& s) {
  Modality m{false, false, false};
  size_t start = 0;
  while (start <= s.size()) {
    const size_t plus = s.find('+', start);
    const std::string part = s.substr(start, plus == std::string::npos ? plus : plus - start);
    if (part == "raw") m.raw = true;
    else if (part == "color") m.color = true;
    else if (part == "depth") m.depth = true;
    else throw ConfigError("config: unknown modality channel '" + part + "'");
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  if (!m.any()) throw ConfigError("config: empty modality");
  return m;
}

inline FusionKind fusion_from_string(const std::string& s) {
  if (s == "attention") return FusionKind::attention;
  if (s == "mlp") return FusionKind::mlp;
  throw ConfigError("config: unknown fusion '" + s + "'");
}

inline StreamMode streams_from_string(const std::string& s) {
  if (s == "fused") return StreamMode::fused;
  if (s == "fine_only") return StreamMode::fine_only;
  if (s == "coarse_only") return StreamMode::coarse_only;
  throw ConfigError("config: unknown streams mode '" + s + "'");
}

struct RunConfig {
  uint64_t seed = 1;
  ModelConfig model;
  SamplingConfig sampling;
  CameraConfig camera;
  LossConfig loss;
  TrainConfig train;
  DataConfig data;

  Intrinsics intrinsics() const {
    return {camera.focal, sampling.width / 2.0, sampling.height / 2.0, sampling.width,
            sampling.height};
  }

  void validate() const {
    model.validate();
    sampling.validate();
    camera.validate();
    loss.validate();
    train.validate();
    data.validate();
    if (data.objects_max > model.queries)
      throw ConfigError("config: data.objects_max exceeds model.queries");
    if (model.num_classes != 4)
      throw ConfigError("config: the scene generator defines 4 classes");
  }

  json to_json() const {
    json j;
    j["seed"] = seed;
    j["model"] = {{"d_model", model.d_model},
                  {"heads", model.heads},
                  {"layers_fine", model.layers_fine},
                  {"layers_coarse", model.layers_coarse},
                  {"layers_decoder", model.layers_decoder},
                  {"queries", model.queries},
                  {"num_classes", model.num_classes},
                  {"ffn_mult", model.ffn_mult},
                  {"modality", modality_to_string(model.modality)},
                  {"fusion", to_string(model.fusion)},
                  {"streams", to_string(model.streams)}};
    j["sampling"] = {{"delta", sampling.delta},   {"n_samples", sampling.n_samples},
                     {"width", sampling.width},   {"height", sampling.height},
                     {"t_near", sampling.t_near}, {"t_far", sampling.t_far}};
    j["camera"] = {{"focal", camera.focal},
                   {"poses_per_scene", camera.poses_per_scene},
                   {"radius_min", camera.radius_min},
                   {"radius_max", camera.radius_max},
                   {"elev_min", camera.elev_min},
                   {"elev_max", camera.elev_max}};
    j["loss"] = {{"lambda_iou", loss.lambda_iou},
                 {"lambda_l1", loss.lambda_l1},
                 {"noobj_weight", loss.noobj_weight}};
    j["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"base_lr", train.base_lr},
                  {"warmup_lr", train.warmup_lr},
                  {"warmup_epochs", train.warmup_epochs},
                  {"min_lr", train.min_lr},
                  {"weight_decay", train.weight_decay},
                  {"grad_clip", train.grad_clip}};
    j["data"] = {{"n_scenes", data.n_scenes},
                 {"objects_min", data.objects_min},
                 {"objects_max", data.objects_max},
                 {"val_fraction", data.val_fraction}};
    return j;
  }
};

namespace detail {

inline void collect_key_mismatches(const json& expect, const json& got, const std::string& path,
                                   std::vector<std::string>& missing,
                                   std::vector<std::string>& unknown) {
  for (const auto& [key, value] : expect.items()) {
    const std::string sub = path.empty() ? key : path + "." + key;
    if (!got.contains(key)) {
      missing.push_back(sub);
    } else if (value.is_object()) {
      if (!got[key].is_object())
        unknown.push_back(sub + " (expected an object)");
      else
        collect_key_mismatches(value, got[key], sub, missing, unknown);
    }
  }
  for (const auto& [key, value] : got.items()) {
    (void)value;
    if (!expect.contains(key)) unknown.push_back(path.empty() ? key : path + "." + key);
  }
}

}  // namespace detail

inline void validate_config_keys(const json& doc) {
  const json expect = RunConfig{}.to_json();
  std::vector<std::string> missing, unknown;
  detail::collect_key_mismatches(expect, doc, "", missing, unknown);
  if (!missing.empty() || !unknown.empty()) {
    std::string msg = "config:";
    for (const auto& k : missing) msg += " missing key " + k + ";";
    for (const auto& k : unknown) msg += " unknown key " + k + ";";
    msg.pop_back();
    throw ConfigError(msg);
  }
}

inline RunConfig config_from_json(const json& doc) {
  validate_config_keys(doc);
  RunConfig c;
  try {
    c.seed = doc.at("seed").get<uint64_t>();
    const json& m = doc.at("model");
    c.model.d_model = m.at("d_model").get<int>();
    c.model.heads = m.at("heads").get<int>();
    c.model.layers_fine = m.at("layers_fine").get<int>();
    c.model.layers_coarse = m.at("layers_coarse").get<int>();
    c.model.layers_decoder = m.at("layers_decoder").get<int>();
    c.model.queries = m.at("queries").get<int>();
    c.model.num_classes = m.at("num_classes").get<int>();
    c.model.ffn_mult = m.at("ffn_mult").get<int>();
    c.model.modality = modality_from_string(m.at("modality").get<std::string>());
    c.model.fusion = fusion_from_string(m.at("fusion").get<std::string>());
    c.model.streams = streams_from_string(m.at("streams").get<std::string>());
    const json& s = doc.at("sampling");
    c.sampling.delta = s.at("delta").get<double>();
    c.sampling.n_samples = s.at("n_samples").get<int>();
    c.sampling.width = s.at("width").get<int>();
    c.sampling.height = s.at("height").get<int>();
    c.sampling.t_near = s.at("t_near").get<double>();
    c.sampling.t_far = s.at("t_far").get<double>();
    const json& cam = doc.at("camera");
    c.camera.focal = cam.at("focal").get<double>();
    c.camera.poses_per_scene = cam.at("poses_per_scene").get<int>();
    c.camera.radius_min = cam.at("radius_min").get<double>();
    c.camera.radius_max = cam.at("radius_max").get<double>();
    c.camera.elev_min = cam.at("elev_min").get<double>();
    c.camera.elev_max = cam.at("elev_max").get<double>();
    const json& l = doc.at("loss");
    c.loss.lambda_iou = l.at("lambda_iou").get<double>();
    c.loss.lambda_l1 = l.at("lambda_l1").get<double>();
    c.loss.noobj_weight = l.at("noobj_weight").get<double>();
    const json& t = doc.at("train");
    c.train.epochs = t.at("epochs").get<int>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.base_lr = t.at("base_lr").get<double>();
    c.train.warmup_lr = t.at("warmup_lr").get<double>();
    c.train.warmup_epochs = t.at("warmup_epochs").get<int>();
    c.train.min_lr = t.at("min_lr").get<double>();
    c.train.weight_decay = t.at("weight_decay").get<double>();
    c.train.grad_clip = t.at("grad_clip").get<double>();
    const json& d = doc.at("data");
    c.data.n_scenes = d.at("n_scenes").get<int>();
    c.data.objects_min = d.at("objects_min").get<int>();
    c.data.objects_max = d.at("objects_max").get<int>();
    c.data.val_fraction = d.at("val_fraction").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value type: ") + e.what());
  }
  c.train.seed = c.seed;
  c.validate();
  return c;
}

// Applies one dotted-path override. The path must already exist in the
// document; the value is parsed as JSON when it parses, else kept a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config: --set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &doc;
  size_t start = 0;
  std::string walked;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    walked += walked.empty() ? key : "." + key;
    if (!node->is_object() || !node->contains(key))
      throw ConfigError("config: unknown key " + walked);
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted strings like --set model.fusion=mlp
  }
  *node = value;
}

// Resolves the effective config document: file (or built-in defaults), then
// --set overrides, then the --seed flag.
inline RunConfig resolve_config(const std::string& config_path,
                                const std::vector<std::string>& overrides,
                                const uint64_t* seed_flag) {
  json doc;
  if (config_path.empty()) {
    doc = RunConfig{}.to_json();
  } else {
    std::ifstream in(config_path);
    if (!in) throw IoError("config: cannot read " + config_path);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: parse error in ") + config_path + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed_flag) doc["seed"] = *seed_flag;
  return config_from_json(doc);
}

}  // namespace rfdet
