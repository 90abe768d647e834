// Training loop: cosine learning-rate schedule with linear warmup, adaptive
// moments with decoupled weight decay, global gradient-norm clipping, and
// deterministic epoch shuffling. Tokens are cached per (scene, pose) since
// the sampling pipeline has no learnable state.
#pragma once

#include <cmath>
#include <iostream>
#include <sstream>

#include "rfdet/matching.hpp"
#include "rfdet/model.hpp"

namespace rfdet {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 4;
  double base_lr = 5e-4;
  double warmup_lr = 1e-6;
  int warmup_epochs = 9;
  double min_lr = 1e-6;
  uint64_t seed = 1;
  double weight_decay = 1e-4;
  double grad_clip = 0.1;

  void validate() const {
    if (!(epochs >= 1 && batch_size >= 1))
      throw ConfigError("train: epochs and batch_size must be >= 1");
    if (!(warmup_epochs >= 0 && warmup_epochs < epochs))
      throw ConfigError("train: need 0 <= warmup_epochs < epochs");
    if (!(base_lr > 0 && warmup_lr > 0 && min_lr > 0))
      throw ConfigError("train: learning rates must be > 0");
    if (!(weight_decay >= 0 && grad_clip > 0))
      throw ConfigError("train: weight_decay >= 0 and grad_clip > 0 required");
  }
};

// Linear ramp warmup_lr -> base_lr over the warmup epochs, then a half
// cosine from base_lr down to min_lr at the final epoch. Continuous at the
// boundary; exact at epoch 0, warmup_epochs, and epochs.
inline double lr_at(double epoch, const TrainConfig& cfg) {
  cfg.validate();
  if (!(epoch >= 0.0 && epoch <= static_cast<double>(cfg.epochs)))
    throw ConfigError("lr_at: epoch outside [0, epochs]");
  if (epoch <= cfg.warmup_epochs) {
    if (cfg.warmup_epochs == 0) return cfg.base_lr;
    return cfg.warmup_lr + (cfg.base_lr - cfg.warmup_lr) * (epoch / cfg.warmup_epochs);
  }
  const double u = (epoch - cfg.warmup_epochs) / (cfg.epochs - cfg.warmup_epochs);
  if (u >= 1.0) return cfg.min_lr;
  return cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) * (1.0 + std::cos(M_PI * u));
}

// Global L2 norm of all gradients, rescaled in place to max_norm when it
// exceeds it. Returns the pre-clip norm. Deterministic accumulation order:
// parameters in creation order, entries in storage order.
template <class T>
double clip_grad_norm(ParamStore<T>& store, double max_norm) {
  double sq = 0;
  for (size_t i = 0; i < store.count(); ++i)
    for (const T& g : store.at(i).grad.data) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (size_t i = 0; i < store.count(); ++i)
      for (T& g : store.at(i).grad.data) g *= scale;
  }
  return norm;
}

// Adaptive-moment update with decoupled weight decay. With a zero gradient
// and zero decay the parameters are left bit-identical (both moments stay
// zero, so the update term is exactly 0 / (0 + eps) = 0).
template <class T>
class AdamW {
 public:
  AdamW(ParamStore<T>& store, double weight_decay)
      : store_(store), weight_decay_(weight_decay) {
    m_.reserve(store.count());
    v_.reserve(store.count());
    for (size_t i = 0; i < store.count(); ++i) {
      m_.push_back(Array<T>::zeros(store.at(i).value.shape));
      v_.push_back(Array<T>::zeros(store.at(i).value.shape));
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (size_t i = 0; i < store_.count(); ++i) {
      Parameter<T>& p = store_.at(i);
      check(m_[i].shape == p.value.shape, "optimizer state shape drift");
      for (int64_t k = 0; k < p.value.numel(); ++k) {
        const double g = static_cast<double>(p.grad[k]);
        const double m = beta1 * static_cast<double>(m_[i][k]) + (1.0 - beta1) * g;
        const double v = beta2 * static_cast<double>(v_[i][k]) + (1.0 - beta2) * g * g;
        m_[i][k] = static_cast<T>(m);
        v_[i][k] = static_cast<T>(v);
        const double update = (m / bc1) / (std::sqrt(v / bc2) + eps);
        double value = static_cast<double>(p.value[k]);
        value -= lr * update;
        value -= lr * weight_decay_ * static_cast<double>(p.value[k]);
        p.value[k] = static_cast<T>(value);
      }
    }
  }

  int64_t steps() const { return t_; }

  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

 private:
  ParamStore<T>& store_;
  double weight_decay_;
  int64_t t_ = 0;
  std::vector<Array<T>> m_, v_;
};

// One scene with its fixed camera set.
struct TrainItem {
  SyntheticScene scene;
  std::vector<Pose> poses;
};

struct EpochPoint {
  int epoch = 0;
  double loss = 0;
  double lr = 0;
};

struct TrainResult {
  std::vector<EpochPoint> curve;
  double initial_loss = 0;
  double final_loss = 0;
};

inline std::string loss_curve_csv(const std::vector<EpochPoint>& curve) {
  std::string out = "epoch,loss,lr\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", p.epoch, p.loss, p.lr);
    out += buf;
  }
  return out;
}

// Deterministic in-place Fisher-Yates driven by the given rng.
template <class V>
void shuffle_indices(V& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
}

template <class T>
TrainResult train(Model<T>& model, const std::vector<TrainItem>& data, const Intrinsics& intr,
                  const SamplingConfig& scfg, const LossConfig& lcfg, const TrainConfig& tcfg,
                  std::ostream* log = nullptr) {
  tcfg.validate();
  lcfg.validate();
  if (data.empty()) throw ConfigError("train: empty dataset");
  check(model.store.count() > 0, "train: model not initialized");

  struct Sample {
    int item, pose;
  };
  std::vector<Sample> samples;
  std::vector<std::vector<LabeledBox>> gts(data.size());
  for (size_t s = 0; s < data.size(); ++s) {
    gts[s] = gt_boxes(data[s].scene);
    if (static_cast<int>(gts[s].size()) > model.cfg.queries)
      throw ConfigError("train: scene " + std::to_string(s) + " has more objects than queries");
    if (data[s].poses.empty()) throw ConfigError("train: scene without poses");
    for (size_t p = 0; p < data[s].poses.size(); ++p)
      samples.push_back({static_cast<int>(s), static_cast<int>(p)});
  }

  // The sampling pipeline is a pure function of (scene, pose, config), so
  // tokens are computed once and reused every epoch.
  std::vector<TokenizedView<T>> tokens;
  tokens.reserve(samples.size());
  for (const Sample& s : samples)
    tokens.push_back(tokenize_view<T>(data[static_cast<size_t>(s.item)].scene,
                                      data[static_cast<size_t>(s.item)].poses[static_cast<size_t>(s.pose)],
                                      intr, scfg, model.cfg.modality, model.cfg.streams));

  AdamW<T> opt(model.store, tcfg.weight_decay);
  const int n = static_cast<int>(samples.size());
  const int batches = (n + tcfg.batch_size - 1) / tcfg.batch_size;

  TrainResult result;
  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    Rng shuffle_rng(sub_seed(tcfg.seed, "shuffle", static_cast<uint64_t>(epoch)));
    shuffle_indices(order, shuffle_rng);

    double epoch_loss = 0;
    for (int b = 0; b < batches; ++b) {
      const int lo = b * tcfg.batch_size;
      const int hi = std::min(n, lo + tcfg.batch_size);
      const double frac_epoch = epoch + static_cast<double>(lo) / n;
      const double lr = lr_at(frac_epoch, tcfg);

      Tape<T> tape;
      Node<T>* batch_loss = nullptr;
      int batch_item = -1;
      try {
        for (int k = lo; k < hi; ++k) {
          const Sample& s = samples[static_cast<size_t>(order[static_cast<size_t>(k)])];
          batch_item = order[static_cast<size_t>(k)];
          const auto out = model.forward(tape, tokens[static_cast<size_t>(batch_item)],
                                         data[static_cast<size_t>(s.item)].scene.bounds);
          Node<T>* l = hungarian_loss<T>(tape, out, gts[static_cast<size_t>(s.item)], lcfg);
          batch_loss = batch_loss ? add(tape, batch_loss, l) : l;
        }
        batch_loss = scalar_mul(tape, batch_loss, static_cast<T>(1.0 / (hi - lo)));
        model.store.zero_grad();
        tape.backward(batch_loss);
      } catch (const NumericalError& e) {
        std::ostringstream msg;
        msg << "train: non-finite value at epoch " << epoch << " batch " << b << " (sample "
            << batch_item << ", lr " << lr << ", last epoch loss "
            << (result.curve.empty() ? 0.0 : result.curve.back().loss) << "): " << e.what();
        throw NumericalError(msg.str());
      }
      clip_grad_norm(model.store, tcfg.grad_clip);
      opt.step(lr);
      epoch_loss += static_cast<double>(batch_loss->value[0]) * (hi - lo);
    }
    epoch_loss /= n;
    result.curve.push_back({epoch, epoch_loss, lr_at(static_cast<double>(epoch), tcfg)});
    if (log && (epoch % 25 == 0 || epoch + 1 == tcfg.epochs))
      (*log) << "epoch " << epoch << " loss " << epoch_loss << " lr "
             << lr_at(static_cast<double>(epoch), tcfg) << "\n";
  }
  result.initial_loss = result.curve.front().loss;
  result.final_loss = result.curve.back().loss;
  return result;
}

}  // namespace rfdet
