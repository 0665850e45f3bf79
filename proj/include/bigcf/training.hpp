#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bigcf/dataset.hpp"
#include "bigcf/intent.hpp"
#include "bigcf/losses.hpp"

namespace bigcf {

// Model selection: the full model, the six ablations, and the two reference
// baselines, all running through one pipeline.
enum class Variant {
  full,
  wo_gcr,   // no contrastive regularization at all
  wo_ir,    // keep HNR, drop the user-item alignment term
  wo_hnr,   // keep IR, drop both self-contrast terms
  wo_bir,   // drop the intent-space regularization
  wo_bigr,  // no intent machinery; structural means used directly
  wo_pgr,   // average pooling of mu and sigma instead of noise fusion
  baseline_mf,
  baseline_lightgcn,
};

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
const std::vector<Variant>& ablation_variants();  // the six wo_* variants

struct TrainConfig {
  int dim = 32;
  std::int64_t batch_size = 10240;
  int layers = 2;
  int intents = 64;
  double kappa = 1.0;
  double tau = 0.2;
  double lambda1 = 0.2;
  double lambda2 = 1e-5;
  double kl_weight = 1.0;
  double lr = 1e-3;
  int max_epochs = 100;
  int patience = 10;
  double val_fraction = 0.1;  // 0 disables validation and early stopping
  std::uint64_t seed = 2024;
  Variant variant = Variant::full;
  NoiseMode noise_mode = NoiseMode::sample;
  bool include_layer0 = true;
  Reduction gcr_reduction = Reduction::mean;

  void validate() const;
};

// Which loss terms a variant wires up. baseline_mf additionally forces L=0.
struct LossWiring {
  bool use_intents = true;
  bool use_kl = true;
  bool use_ir = true;
  bool use_hnr = true;
  bool use_bir = true;
  FusionMode fusion = FusionMode::reparameterized;
  int force_layers = -1;

  bool use_gcr_inter() const { return use_ir || use_hnr; }
};

LossWiring apply_variant(Variant v);

// Trainable parameters and their Adam moment accumulators.
struct ModelParams {
  std::int64_t num_users = 0;
  std::int64_t num_items = 0;
  DenseMat e0;           // (M+N) x d
  DenseMat table_users;  // K x d
  DenseMat table_items;  // K x d

  DenseMat m_e0, v_e0, m_tu, v_tu, m_ti, v_ti;
  std::int64_t adam_t = 0;
};

// Xavier-uniform initialization: entries of each matrix drawn from
// U(-b, b) with b = sqrt(6 / (rows + cols)); moments zeroed.
ModelParams init_params(const TrainConfig& cfg, std::int64_t num_users,
                        std::int64_t num_items, Rng& rng);

// One bias-corrected Adam update of x given gradient g. t is 1-based.
void adam_update(DenseMat& x, DenseMat& m, DenseMat& v, const DenseMat& g,
                 double lr, double beta1, double beta2, double eps,
                 std::int64_t t);

// Fixed noise draws for one step, shared by every loss term of that step.
struct StepNoise {
  NoiseMode mode = NoiseMode::sample;
  Rng* rng = nullptr;
};

// Builds the complete loss for one batch on `tape` and returns the total
// node plus its decomposition. Exposed for gradient-check tests.
struct StepLoss {
  VarId total;
  LossReport report;
  VarId e0_leaf, table_users_leaf, table_items_leaf;
  EmbeddingBundle bundle;
};

StepLoss build_step_loss(Tape& tape, const NormalizedAdjacency& adj,
                         const ModelParams& params, const TrainBatch& batch,
                         const TrainConfig& cfg, const LossWiring& wiring,
                         StepNoise noise);

// Runs ceil(train_edges / batch_size) optimization steps; returns the
// epoch-mean loss report. Throws NumericError on non-finite losses or
// gradients.
LossReport train_epoch(const InteractionDataset& ds,
                       const NormalizedAdjacency& adj, ModelParams& params,
                       const TrainConfig& cfg, Rng& sample_rng, Rng& noise_rng);

// Frozen-parameter embeddings for ranking: fused user and item matrices
// under the requested noise mode (deterministic for zero/one).
struct InferenceEmbeddings {
  DenseMat users;
  DenseMat items;
};

InferenceEmbeddings inference_embeddings(const ModelParams& params,
                                         const NormalizedAdjacency& adj,
                                         const TrainConfig& cfg,
                                         NoiseMode noise_mode,
                                         Rng* rng = nullptr);

// Intent correlation scores for every user (M x K), from frozen parameters.
DenseMat user_intent_scores(const ModelParams& params,
                            const NormalizedAdjacency& adj,
                            const TrainConfig& cfg);

struct FitResult {
  ModelParams params;                  // best checkpoint by validation recall
  std::vector<std::string> log_lines;  // one per epoch
  int best_epoch = -1;                 // 1-based; -1 if never evaluated
  double best_recall = 0.0;
  int epochs_run = 0;
  bool aborted = false;                // true if a numeric failure stopped it
};

// Full training loop with optional validation holdout and early stopping on
// validation Recall@20 (patience counts non-improving evaluations).
FitResult fit(const InteractionDataset& ds, const TrainConfig& cfg);

}  // namespace bigcf
