#pragma once

#include <cstdint>
#include <vector>

#include "bigcf/dataset.hpp"
#include "bigcf/tape.hpp"

namespace bigcf {

// Whether per-batch contrastive sums are averaged over their anchors
// (default; keeps lambda1 batch-size-invariant) or left as raw sums.
enum class Reduction { mean, sum };

// One training step's objective decomposition.
// total = bpr + kl_weight*kl + lambda1*(gcr_inter + gcr_intent) + lambda2*l2
struct LossReport {
  double bpr = 0.0;
  double kl = 0.0;
  double gcr_inter = 0.0;
  double gcr_intent = 0.0;
  double l2 = 0.0;
  double total = 0.0;

  LossReport& operator+=(const LossReport& o);
  LossReport& operator/=(double d);
};

// Pairwise ranking loss: mean over triples of -log sigmoid(p_ui - p_uj),
// where p are edge probabilities sigmoid(<e_u, e_i>). `e_users`/`e_items`
// are the fused embedding matrices over all users/items.
VarId bpr_loss(Tape& tape, const TrainBatch& batch, VarId e_users, VarId e_items);

// KL divergence of N(mu, diag(sigma^2)) rows from the standard Gaussian:
// mean over rows of 1/2 sum_d (mu^2 + sigma^2 - log max(sigma^2, eps) - 1).
VarId kl_loss(Tape& tape, VarId mu, VarId sigma);

// InfoNCE with paired anchor/positive rows and a shared negative list. The
// denominator includes the positive term. An empty negative list yields 0.
VarId info_nce(Tape& tape, VarId anchors, VarId positives, VarId negatives,
               double tau, Reduction reduction = Reduction::mean);

// Interaction-space regularization: alignment of batch user-item pairs
// against the deduplicated batch items (IR) plus self-contrast uniformity
// over deduplicated users and items (HNR). Either part can be switched off
// for ablations.
VarId gcr_interaction(Tape& tape, const TrainBatch& batch, VarId e_users,
                      VarId e_items, double tau,
                      Reduction reduction = Reduction::mean,
                      bool include_ir = true, bool include_hnr = true);

// Intent-space regularization: the same self-contrast uniformity applied to
// deduplicated individual intent vectors on both sides.
VarId gcr_intent(Tape& tape, VarId sigma_users_dedup, VarId sigma_items_dedup,
                 double tau, Reduction reduction = Reduction::mean);

// Squared Frobenius norm of the batch-touched rows of e0 (users, positives
// and negatives) plus, when given, the full intent tables; divided by the
// batch size.
VarId l2_penalty(Tape& tape, const TrainBatch& batch, std::int64_t num_users,
                 VarId e0, VarId table_users, VarId table_items);

// Weighted composition of the terms above. Invalid ids contribute zero.
struct LossTerms {
  VarId bpr, kl, gcr_inter, gcr_intent, l2;
};

std::pair<VarId, LossReport> total_loss(Tape& tape, const LossTerms& terms,
                                        double lambda1, double lambda2,
                                        double kl_weight);

// Self-contrast uniformity over the rows of one matrix:
// mean_r [ -cos(r,r)/tau + log sum_c exp(cos(r,c)/tau) ].
// With a single row there are no negatives and the value is 0.
VarId uniformity_term(Tape& tape, VarId rows, double tau, Reduction reduction);

}  // namespace bigcf
