// Detection-set evaluation: per-class average precision from greedy
// score-ranked matching against unclaimed ground truths, summarized as mAP
// at several IoU thresholds. Also the single-sample inference helpers the
// CLI uses for infer/track and the ablation variant tables.
#pragma once

#include <algorithm>
#include <cstdio>

#include "rfdet/trainer.hpp"

namespace rfdet {

struct ClassAP {
  int class_id = 0;
  double ap = 0;
  int64_t n_gt = 0;
};

struct MetricsReport {
  std::vector<double> thresholds;
  std::vector<double> map_at;                 // aligned with thresholds
  double average = 0;
  std::vector<std::vector<ClassAP>> per_class;  // [threshold][class]
};

template <class T>
Detections infer_sample(Model<T>& model, const SyntheticScene& scene, const Pose& pose,
                        const Intrinsics& intr, const SamplingConfig& scfg) {
  const auto view =
      tokenize_view<T>(scene, pose, intr, scfg, model.cfg.modality, model.cfg.streams);
  Tape<T> t;
  const auto out = model.forward(t, view, scene.bounds);
  return extract_detections<T>(out);
}

// Independent per-pose inference; no state is carried between steps.
template <class T>
std::vector<Detections> track(Model<T>& model, const SyntheticScene& scene,
                              const std::vector<Pose>& poses, const Intrinsics& intr,
                              const SamplingConfig& scfg) {
  std::vector<Detections> out;
  out.reserve(poses.size());
  for (const Pose& p : poses) out.push_back(infer_sample(model, scene, p, intr, scfg));
  return out;
}

// Area under the all-point-interpolated precision-recall curve: precision is
// replaced by its running maximum from the right, then integrated exactly
// over the recall steps.
inline double average_precision(const std::vector<char>& tp_flags, int64_t n_gt) {
  if (n_gt <= 0) return 0;
  const size_t n = tp_flags.size();
  if (n == 0) return 0;
  std::vector<double> precision(n), recall(n);
  double tp = 0;
  for (size_t i = 0; i < n; ++i) {
    tp += tp_flags[i] ? 1.0 : 0.0;
    precision[i] = tp / static_cast<double>(i + 1);
    recall[i] = tp / static_cast<double>(n_gt);
  }
  for (size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0, prev_recall = 0;
  for (size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

// One evaluated sample: the detections for a (scene, pose) pair plus that
// scene's ground truths.
struct EvalSample {
  Detections det;
  const std::vector<LabeledBox>* gts = nullptr;
};

inline MetricsReport metrics_from_samples(const std::vector<EvalSample>& samples,
                                          int num_classes,
                                          const std::vector<double>& thresholds) {
  check(!samples.empty(), "evaluate: empty dataset");
  check(!thresholds.empty(), "evaluate: empty threshold list");

  struct ScoredDet {
    double score;
    size_t sample;
    int det;
  };
  std::vector<int64_t> gt_count(static_cast<size_t>(num_classes), 0);
  for (const auto& s : samples)
    for (const auto& gt : *s.gts) gt_count[static_cast<size_t>(gt.class_id)]++;

  MetricsReport report;
  report.thresholds = thresholds;
  for (const double threshold : thresholds) {
    std::vector<ClassAP> rows;
    double map_sum = 0;
    int64_t classes_with_gt = 0;
    for (int c = 0; c < num_classes; ++c) {
      std::vector<ScoredDet> dets;
      for (size_t s = 0; s < samples.size(); ++s) {
        const Detections& d = samples[s].det;
        for (int j = 0; j < d.logits.shape[0]; ++j)
          dets.push_back({softmax_row(d.logits, j)[static_cast<size_t>(c)], s, j});
      }
      std::sort(dets.begin(), dets.end(), [](const ScoredDet& a, const ScoredDet& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.sample != b.sample) return a.sample < b.sample;
        return a.det < b.det;
      });

      // greedy matching in score order against unclaimed same-class GTs of
      // the detection's own sample
      std::vector<std::vector<char>> claimed(samples.size());
      for (size_t s = 0; s < samples.size(); ++s)
        claimed[s].assign(samples[s].gts->size(), 0);
      std::vector<char> tp(dets.size(), 0);
      for (size_t i = 0; i < dets.size(); ++i) {
        const auto& gts = *samples[dets[i].sample].gts;
        const Box3D box = detection_box(samples[dets[i].sample].det, dets[i].det);
        double best = threshold;
        int best_m = -1;
        for (size_t m = 0; m < gts.size(); ++m) {
          if (gts[m].class_id != c || claimed[dets[i].sample][m]) continue;
          const double v = iou3d(box, gts[m].box);
          if (v >= best && (best_m < 0 || v > best)) {
            best = v;
            best_m = static_cast<int>(m);
          }
        }
        if (best_m >= 0) {
          claimed[dets[i].sample][static_cast<size_t>(best_m)] = 1;
          tp[i] = 1;
        }
      }
      const double ap = average_precision(tp, gt_count[static_cast<size_t>(c)]);
      rows.push_back({c, ap, gt_count[static_cast<size_t>(c)]});
      if (gt_count[static_cast<size_t>(c)] > 0) {
        map_sum += ap;
        classes_with_gt++;
      }
    }
    report.per_class.push_back(std::move(rows));
    report.map_at.push_back(classes_with_gt > 0 ? map_sum / classes_with_gt : 0.0);
  }
  double total = 0;
  for (const double v : report.map_at) total += v;
  report.average = total / static_cast<double>(report.map_at.size());
  return report;
}

template <class T>
MetricsReport evaluate(Model<T>& model, const std::vector<TrainItem>& data,
                       const Intrinsics& intr, const SamplingConfig& scfg,
                       const std::vector<double>& thresholds = {0.1, 0.5, 0.9}) {
  check(!data.empty(), "evaluate: empty dataset");
  std::vector<std::vector<LabeledBox>> gts(data.size());
  std::vector<EvalSample> samples;
  for (size_t s = 0; s < data.size(); ++s) {
    gts[s] = gt_boxes(data[s].scene);
    for (const Pose& p : data[s].poses)
      samples.push_back({infer_sample(model, data[s].scene, p, intr, scfg), &gts[s]});
  }
  return metrics_from_samples(samples, model.cfg.num_classes, thresholds);
}

// Table row naming for the metrics CSV.
inline std::string metrics_csv_header(const std::vector<double>& thresholds) {
  std::string h = "variant";
  char buf[32];
  for (const double t : thresholds) {
    std::snprintf(buf, sizeof(buf), ",map_%g", t);
    h += buf;
  }
  h += ",average";
  return h;
}

inline std::string metrics_csv_row(const std::string& variant, const MetricsReport& r) {
  std::string row = variant;
  char buf[32];
  for (const double v : r.map_at) {
    std::snprintf(buf, sizeof(buf), ",%.6f", v);
    row += buf;
  }
  std::snprintf(buf, sizeof(buf), ",%.6f", r.average);
  row += buf;
  return row;
}

inline std::string modality_name(const Modality& m) {
  std::string out;
  if (m.raw) out += "raw";
  if (m.color) out += out.empty() ? "color" : "+color";
  if (m.depth) out += out.empty() ? "depth" : "+depth";
  return out.empty() ? "none" : out;
}

struct Variant {
  std::string name;
  ModelConfig model;
};

// The seven nonempty channel subsets, full set first.
inline std::vector<Variant> modality_variants(const ModelConfig& base) {
  std::vector<Variant> out;
  const bool flags[7][3] = {{true, true, true},  {true, false, false}, {false, true, false},
                            {false, false, true}, {true, true, false},  {true, false, true},
                            {false, true, true}};
  for (const auto& f : flags) {
    ModelConfig m = base;
    m.modality = Modality{f[0], f[1], f[2]};
    out.push_back({modality_name(m.modality), m});
  }
  return out;
}

inline std::vector<Variant> fusion_variants(const ModelConfig& base) {
  std::vector<Variant> out;
  for (const FusionKind k : {FusionKind::attention, FusionKind::mlp}) {
    ModelConfig m = base;
    m.fusion = k;
    m.streams = StreamMode::fused;
    out.push_back({std::string("fusion_") + to_string(k), m});
  }
  return out;
}

inline std::vector<Variant> stream_variants(const ModelConfig& base) {
  std::vector<Variant> out;
  for (const StreamMode s : {StreamMode::fused, StreamMode::fine_only, StreamMode::coarse_only}) {
    ModelConfig m = base;
    m.streams = s;
    out.push_back({to_string(s), m});
  }
  return out;
}

struct AblationRow {
  std::string variant;
  MetricsReport report;
  double final_loss = 0;
};

// Trains and evaluates each variant from a fresh identically-seeded model on
// identical data.
template <class T>
std::vector<AblationRow> ablate(const std::vector<Variant>& variants,
                                const std::vector<TrainItem>& data, const Intrinsics& intr,
                                const SamplingConfig& scfg, const LossConfig& lcfg,
                                const TrainConfig& tcfg, uint64_t model_seed,
                                const std::vector<double>& thresholds = {0.1, 0.5, 0.9},
                                std::ostream* log = nullptr) {
  check(!variants.empty(), "ablate: empty variant list");
  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    if (log) (*log) << "variant " << v.name << "\n";
    Model<T> model;
    model.cfg = v.model;
    model.set_samples_per_ray(scfg.n_samples);
    model.init(model_seed);
    const TrainResult tr = train(model, data, intr, scfg, lcfg, tcfg, log);
    rows.push_back({v.name, evaluate(model, data, intr, scfg, thresholds), tr.final_loss});
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows,
                                const std::vector<double>& thresholds) {
  std::string out = metrics_csv_header(thresholds) + "\n";
  for (const auto& r : rows) out += metrics_csv_row(r.variant, r.report) + "\n";
  return out;
}

}  // namespace rfdet
