#pragma once

#include <cstdint>
#include <string>

#include "aamgan/datasets.hpp"
#include "aamgan/losses.hpp"
#include "aamgan/nets.hpp"

namespace aamgan::train {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
  int64_t total_iterations = 5000;  // desk default; the paper trains 200K
  double lr_initial = 1e-4;
  int64_t lr_decay_every = 10000;
  double lr_decay_factor = 0.5;
  int batch_size = 16;
  int d_steps_per_g_step = 1;
  uint64_t seed = 1;
  int64_t checkpoint_every = 1000;
  int64_t log_every = 100;
  losses::LossWeights weights;

  heads::HeadKind head_kind = heads::HeadKind::Aam;
  double scale_s = 30.0;
  double margin_m = 0.35;
  double margin_fake = -1.0;  // < 0 means: use margin_m for the fake-image loss too

  bool g_adv_saturating = false;  // exact-form switch for the G adversarial term
  bool gradient_penalty = false;  // adds a directional gradient penalty on D
  double gp_weight = 10.0;

  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.5;
  double beta2 = 0.999;

  nets::NetConfig net;

  void validate() const;
};

// lr_initial * lr_decay_factor^floor(iteration / lr_decay_every)
double lr_at(int64_t iteration, const TrainConfig& cfg);

template <typename T>
struct OptimizerState {
  int64_t t = 0;
  std::vector<Tensor<T>> m, v;
  void init(const std::vector<nets::ParamRef<T>>& params);
  void step(std::vector<nets::ParamRef<T>>& params, T lr, const TrainConfig& cfg);
};

template <typename T>
struct GanModel {
  nets::Generator<T> generator;
  nets::Discriminator<T> discriminator;
  heads::HeadParams<T> head;
  Tensor<T> head_grad_weight, head_grad_bias;

  explicit GanModel(const TrainConfig& cfg);
  void init(Rng& rng);
  std::vector<nets::ParamRef<T>> g_params();
  std::vector<nets::ParamRef<T>> d_params();  // discriminator plus head
};

template <typename T>
struct TrainState {
  int64_t iteration = 0;
  OptimizerState<T> opt_g, opt_d;
  Rng rng{0};

  void init(GanModel<T>& model, const TrainConfig& cfg);
};

// One discriminator update on the batch (Eq.-5-style objective).
// Returns (adv, cls_real) values.
template <typename T>
std::pair<double, double> d_update(GanModel<T>& model, const Tensor<T>& images, std::span<const int> labels,
                                   const Tensor<T>& codes, const TrainConfig& cfg, TrainState<T>& state);

// One generator update (Eq.-6-style objective). Returns (adv_g, cls_fake, rec).
template <typename T>
std::tuple<double, double, double> g_update(GanModel<T>& model, const Tensor<T>& images,
                                            std::span<const int> labels, const Tensor<T>& codes,
                                            const TrainConfig& cfg, TrainState<T>& state);

// d_steps_per_g_step discriminator updates followed by one generator update.
// Target codes are drawn by permuting the batch labels.
template <typename T>
losses::LossBreakdown train_step(GanModel<T>& model, const Tensor<T>& images, std::span<const int> labels,
                                 const TrainConfig& cfg, TrainState<T>& state);

// ---- checkpoints (float production format: little-endian float32 blocks) ----

struct Checkpoint {
  TrainConfig config;
  GanModel<float> model;
  TrainState<float> state;
  std::string config_snapshot;

  explicit Checkpoint(const TrainConfig& cfg) : model(cfg) {}
};

void save_checkpoint(const std::string& path, const TrainConfig& cfg, GanModel<float>& model,
                     TrainState<float>& state, const std::string& config_snapshot);
Checkpoint load_checkpoint(const std::string& path);

// Full training loop: iterates train_step over deterministic batches, writes
// log.txt / metrics.csv and checkpoints under run_dir, returns the final
// checkpoint path.
std::string run_training(const TrainConfig& cfg, const data::Dataset& dataset, const std::string& run_dir,
                         const std::string& config_snapshot = "");

}  // namespace aamgan::train
