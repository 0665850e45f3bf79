#include "bigcf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "bigcf/errors.hpp"
#include "bigcf/evaluation.hpp"

namespace bigcf {

namespace {

std::vector<std::int64_t> widen(const std::vector<std::int32_t>& v) {
  return {v.begin(), v.end()};
}

void fill_xavier(DenseMat& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
  for (double& x : m.v) x = rng.uniform(-bound, bound);
}

void check_finite(const DenseMat& g, const char* name) {
  if (!g.all_finite())
    throw NumericError(std::string("non-finite gradient in ") + name);
}

}  // namespace

Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "wo_gcr") return Variant::wo_gcr;
  if (s == "wo_ir") return Variant::wo_ir;
  if (s == "wo_hnr") return Variant::wo_hnr;
  if (s == "wo_bir") return Variant::wo_bir;
  if (s == "wo_bigr") return Variant::wo_bigr;
  if (s == "wo_pgr") return Variant::wo_pgr;
  if (s == "baseline_mf") return Variant::baseline_mf;
  if (s == "baseline_lightgcn") return Variant::baseline_lightgcn;
  throw ConfigError("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::wo_gcr: return "wo_gcr";
    case Variant::wo_ir: return "wo_ir";
    case Variant::wo_hnr: return "wo_hnr";
    case Variant::wo_bir: return "wo_bir";
    case Variant::wo_bigr: return "wo_bigr";
    case Variant::wo_pgr: return "wo_pgr";
    case Variant::baseline_mf: return "baseline_mf";
    case Variant::baseline_lightgcn: return "baseline_lightgcn";
  }
  return "?";
}

const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> v = {Variant::wo_gcr, Variant::wo_ir,
                                         Variant::wo_hnr, Variant::wo_bir,
                                         Variant::wo_bigr, Variant::wo_pgr};
  return v;
}

void TrainConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (batch_size < 1) throw ConfigError("batch-size must be >= 1");
  if (layers < 0) throw ConfigError("layers must be >= 0");
  if (intents < 1) throw ConfigError("intents must be >= 1");
  if (!(kappa > 0)) throw ConfigError("kappa must be positive");
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  if (lambda1 < 0) throw ConfigError("lambda1 must be >= 0");
  if (lambda2 < 0) throw ConfigError("lambda2 must be >= 0");
  if (kl_weight < 0) throw ConfigError("kl-weight must be >= 0");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (max_epochs < 0) throw ConfigError("epochs must be >= 0");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  if (val_fraction < 0 || val_fraction >= 1)
    throw ConfigError("val-fraction must be in [0, 1)");
}

LossWiring apply_variant(Variant v) {
  LossWiring w;
  switch (v) {
    case Variant::full:
      break;
    case Variant::wo_gcr:
      w.use_ir = w.use_hnr = w.use_bir = false;
      break;
    case Variant::wo_ir:
      w.use_ir = false;
      break;
    case Variant::wo_hnr:
      w.use_hnr = false;
      break;
    case Variant::wo_bir:
      w.use_bir = false;
      break;
    case Variant::wo_bigr:
      w.use_intents = false;
      w.use_kl = false;
      w.use_bir = false;
      w.fusion = FusionMode::structural_only;
      break;
    case Variant::wo_pgr:
      w.fusion = FusionMode::average_pool;
      break;
    case Variant::baseline_mf:
      w = LossWiring{false, false, false, false, false,
                     FusionMode::structural_only, 0};
      break;
    case Variant::baseline_lightgcn:
      w = LossWiring{false, false, false, false, false,
                     FusionMode::structural_only, -1};
      break;
  }
  return w;
}

ModelParams init_params(const TrainConfig& cfg, std::int64_t num_users,
                        std::int64_t num_items, Rng& rng) {
  if (num_users < 1 || num_items < 1)
    throw ConfigError("init_params: empty user or item set");
  ModelParams p;
  p.num_users = num_users;
  p.num_items = num_items;
  p.e0 = DenseMat(num_users + num_items, cfg.dim);
  p.table_users = DenseMat(cfg.intents, cfg.dim);
  p.table_items = DenseMat(cfg.intents, cfg.dim);
  fill_xavier(p.e0, rng);
  fill_xavier(p.table_users, rng);
  fill_xavier(p.table_items, rng);
  p.m_e0 = DenseMat(p.e0.rows, p.e0.cols);
  p.v_e0 = DenseMat(p.e0.rows, p.e0.cols);
  p.m_tu = DenseMat(cfg.intents, cfg.dim);
  p.v_tu = DenseMat(cfg.intents, cfg.dim);
  p.m_ti = DenseMat(cfg.intents, cfg.dim);
  p.v_ti = DenseMat(cfg.intents, cfg.dim);
  return p;
}

void adam_update(DenseMat& x, DenseMat& m, DenseMat& v, const DenseMat& g,
                 double lr, double beta1, double beta2, double eps,
                 std::int64_t t) {
  if (t < 1) throw ConfigError("adam_update: step index must be >= 1");
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    m.v[i] = beta1 * m.v[i] + (1.0 - beta1) * g.v[i];
    v.v[i] = beta2 * v.v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
    const double mhat = m.v[i] / c1;
    const double vhat = v.v[i] / c2;
    x.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

StepLoss build_step_loss(Tape& tape, const NormalizedAdjacency& adj,
                         const ModelParams& params, const TrainBatch& batch,
                         const TrainConfig& cfg, const LossWiring& wiring,
                         StepNoise noise) {
  StepLoss out;
  out.e0_leaf = tape.param(params.e0);
  if (wiring.use_intents) {
    out.table_users_leaf = tape.param(params.table_users);
    out.table_items_leaf = tape.param(params.table_items);
  }

  BundleOptions opt;
  opt.layers = wiring.force_layers >= 0 ? wiring.force_layers : cfg.layers;
  opt.include_layer0 = cfg.include_layer0;
  opt.kappa = cfg.kappa;
  opt.fusion = wiring.fusion;
  opt.noise = noise.mode;
  out.bundle = build_bundle(tape, adj, out.e0_leaf, out.table_users_leaf,
                            out.table_items_leaf, opt, noise.rng);

  LossTerms terms;
  terms.bpr =
      bpr_loss(tape, batch, out.bundle.fused_users, out.bundle.fused_items);

  const auto nu = static_cast<double>(batch.uniq_users.size());
  const auto ni = static_cast<double>(batch.uniq_items.size());
  if (wiring.use_intents && wiring.use_kl && cfg.kl_weight > 0) {
    const VarId mu_u =
        tape.gather_rows(out.bundle.mu_users, widen(batch.uniq_users));
    const VarId sg_u =
        tape.gather_rows(out.bundle.sigma_users, widen(batch.uniq_users));
    const VarId mu_i =
        tape.gather_rows(out.bundle.mu_items, widen(batch.uniq_items));
    const VarId sg_i =
        tape.gather_rows(out.bundle.sigma_items, widen(batch.uniq_items));
    const VarId kl_u = kl_loss(tape, mu_u, sg_u);
    const VarId kl_i = kl_loss(tape, mu_i, sg_i);
    terms.kl = tape.add(tape.scale(kl_u, nu / (nu + ni)),
                        tape.scale(kl_i, ni / (nu + ni)));
  }

  if (cfg.lambda1 > 0) {
    if (wiring.use_gcr_inter()) {
      terms.gcr_inter = gcr_interaction(
          tape, batch, out.bundle.fused_users, out.bundle.fused_items, cfg.tau,
          cfg.gcr_reduction, wiring.use_ir, wiring.use_hnr);
    }
    if (wiring.use_intents && wiring.use_bir) {
      const VarId sg_u =
          tape.gather_rows(out.bundle.sigma_users, widen(batch.uniq_users));
      const VarId sg_i =
          tape.gather_rows(out.bundle.sigma_items, widen(batch.uniq_items));
      terms.gcr_intent =
          gcr_intent(tape, sg_u, sg_i, cfg.tau, cfg.gcr_reduction);
    }
  }

  if (cfg.lambda2 > 0) {
    terms.l2 = l2_penalty(tape, batch, params.num_users, out.e0_leaf,
                          out.table_users_leaf, out.table_items_leaf);
  }

  auto [total, report] =
      total_loss(tape, terms, cfg.lambda1, cfg.lambda2, cfg.kl_weight);
  out.total = total;
  out.report = report;
  return out;
}

LossReport train_epoch(const InteractionDataset& ds,
                       const NormalizedAdjacency& adj, ModelParams& params,
                       const TrainConfig& cfg, Rng& sample_rng,
                       Rng& noise_rng) {
  cfg.validate();
  const LossWiring wiring = apply_variant(cfg.variant);
  const std::int64_t steps =
      (ds.train_edges() + cfg.batch_size - 1) / cfg.batch_size;

  LossReport epoch;
  for (std::int64_t s = 0; s < steps; ++s) {
    const TrainBatch batch = sample_batch(ds, cfg.batch_size, sample_rng);
    Tape tape;
    const StepLoss step = build_step_loss(tape, adj, params, batch, cfg,
                                          wiring, {cfg.noise_mode, &noise_rng});
    if (!std::isfinite(step.report.total))
      throw NumericError("non-finite loss at step " + std::to_string(s + 1));
    tape.backward(step.total);

    const DenseMat& g_e0 = tape.grad(step.e0_leaf);
    check_finite(g_e0, "e0");
    ++params.adam_t;
    adam_update(params.e0, params.m_e0, params.v_e0, g_e0, cfg.lr, 0.9, 0.999,
                1e-8, params.adam_t);
    if (wiring.use_intents) {
      const DenseMat& g_tu = tape.grad(step.table_users_leaf);
      const DenseMat& g_ti = tape.grad(step.table_items_leaf);
      check_finite(g_tu, "table_users");
      check_finite(g_ti, "table_items");
      adam_update(params.table_users, params.m_tu, params.v_tu, g_tu, cfg.lr,
                  0.9, 0.999, 1e-8, params.adam_t);
      adam_update(params.table_items, params.m_ti, params.v_ti, g_ti, cfg.lr,
                  0.9, 0.999, 1e-8, params.adam_t);
    }
    epoch += step.report;
  }
  epoch /= static_cast<double>(steps);
  return epoch;
}

InferenceEmbeddings inference_embeddings(const ModelParams& params,
                                         const NormalizedAdjacency& adj,
                                         const TrainConfig& cfg,
                                         NoiseMode noise_mode, Rng* rng) {
  const LossWiring wiring = apply_variant(cfg.variant);
  Tape tape;
  const VarId e0 = tape.constant(params.e0);
  VarId tu{}, ti{};
  if (wiring.use_intents) {
    tu = tape.constant(params.table_users);
    ti = tape.constant(params.table_items);
  }
  BundleOptions opt;
  opt.layers = wiring.force_layers >= 0 ? wiring.force_layers : cfg.layers;
  opt.include_layer0 = cfg.include_layer0;
  opt.kappa = cfg.kappa;
  opt.fusion = wiring.fusion;
  opt.noise = noise_mode;
  const EmbeddingBundle b = build_bundle(tape, adj, e0, tu, ti, opt, rng);
  return {tape.value(b.fused_users), tape.value(b.fused_items)};
}

DenseMat user_intent_scores(const ModelParams& params,
                            const NormalizedAdjacency& adj,
                            const TrainConfig& cfg) {
  Tape tape;
  const VarId e0 = tape.constant(params.e0);
  const VarId tu = tape.constant(params.table_users);
  const StructuralEmbeddings enc =
      propagate(tape, adj, e0, cfg.layers, cfg.include_layer0);
  const VarId mu_users = tape.slice_rows(enc.pooled, 0, adj.num_users);
  return tape.value(intent_scores(tape, mu_users, tu, cfg.kappa));
}

FitResult fit(const InteractionDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  const bool use_val = cfg.val_fraction > 0;
  InteractionDataset train_ds =
      use_val ? holdout_split(ds, cfg.val_fraction, cfg.seed ^ 0x5A5Au)
              : ds;
  if (!use_val) train_ds.test = ds.test;

  const NormalizedAdjacency adj = build_normalized_adjacency(train_ds);
  Rng init_rng(cfg.seed, 0);
  Rng sample_rng(cfg.seed, 1);
  Rng noise_rng(cfg.seed, 2);

  FitResult res;
  res.params = init_params(cfg, ds.num_users, ds.num_items, init_rng);
  ModelParams best = res.params;
  const bool have_eval = train_ds.test_edges() > 0;
  int bad_evals = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    LossReport report;
    try {
      report = train_epoch(train_ds, adj, res.params, cfg, sample_rng, noise_rng);
    } catch (const NumericError& e) {
      std::cerr << "epoch " << epoch << " aborted: " << e.what() << "\n";
      res.aborted = true;
      break;
    }
    res.epochs_run = epoch;

    double recall20 = 0.0, ndcg20 = 0.0;
    if (have_eval) {
      const InferenceEmbeddings emb = inference_embeddings(
          res.params, adj, cfg, NoiseMode::one, nullptr);
      const MetricReport mr =
          evaluate(train_ds, emb.users, emb.items, {20});
      recall20 = mr.recall_at(20);
      ndcg20 = mr.ndcg_at(20);
    }
    char line[256];
    std::snprintf(line, sizeof(line),
                  "epoch %d bpr %.6f kl %.6f gcr %.6f recall@20 %.6f "
                  "ndcg@20 %.6f",
                  epoch, report.bpr, report.kl,
                  report.gcr_inter + report.gcr_intent, recall20, ndcg20);
    res.log_lines.emplace_back(line);

    if (have_eval) {
      if (recall20 > res.best_recall || res.best_epoch < 0) {
        res.best_recall = recall20;
        res.best_epoch = epoch;
        best = res.params;
        bad_evals = 0;
      } else {
        ++bad_evals;
        if (use_val && bad_evals > cfg.patience) break;
      }
    }
  }

  if (res.best_epoch >= 0) res.params = std::move(best);
  return res;
}

}  // namespace bigcf
