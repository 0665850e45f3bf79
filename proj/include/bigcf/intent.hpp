#pragma once

#include <cstdint>
#include <string>

#include "bigcf/dataset.hpp"
#include "bigcf/encoder.hpp"
#include "bigcf/rng.hpp"
#include "bigcf/tape.hpp"

namespace bigcf {

// How the auxiliary noise of the Gaussian fusion is drawn. Training samples;
// deterministic inference defaults to `one` (mean plus intent vector).
enum class NoiseMode { sample, zero, one };

NoiseMode parse_noise_mode(const std::string& s);
std::string to_string(NoiseMode m);

// How final embeddings are assembled from structural means and individual
// intent vectors.
enum class FusionMode {
  reparameterized,  // e = mu + sigma (.) eps
  average_pool,     // e = (mu + sigma) / 2, no noise
  structural_only,  // e = mu, intent machinery skipped entirely
};

// Softmax correlation scores of each row of e_mu against the K rows of the
// collective intent table, at temperature kappa. Rows sum to 1.
VarId intent_scores(Tape& tape, VarId e_mu, VarId table, double kappa);

// Individual intent vectors: score-weighted sums of collective intent rows.
VarId individual_intents(Tape& tape, VarId scores, VarId table);

// e = e_mu + e_sigma (.) eps. In sample mode eps is drawn i.i.d. standard
// normal from `rng`; zero and one build constant noise. Gradient flows to
// both e_mu and e_sigma.
VarId reparameterize(Tape& tape, VarId e_mu, VarId e_sigma, NoiseMode mode,
                     Rng* rng);

// Per-pair edge probabilities sigmoid(<e_u, e_i>) for paired rows.
VarId edge_scores(Tape& tape, VarId e_u, VarId e_i);

// Everything one training step or inference pass derives from the
// parameters: structural means, intent scores, individual intent vectors,
// noise draws, and fused embeddings, split into user and item halves.
// Ids are invalid for stages a fusion mode skips.
struct EmbeddingBundle {
  VarId mu_users, mu_items;
  VarId scores_users, scores_items;
  VarId sigma_users, sigma_items;
  VarId eps_users, eps_items;
  VarId fused_users, fused_items;
};

struct BundleOptions {
  int layers = 2;
  bool include_layer0 = true;
  double kappa = 1.0;
  FusionMode fusion = FusionMode::reparameterized;
  NoiseMode noise = NoiseMode::sample;
};

// Builds the full forward pass over all M+N nodes. `e0` is the initial
// embedding table, `table_users`/`table_items` the collective intent tables
// (ignored when fusion == structural_only).
EmbeddingBundle build_bundle(Tape& tape, const NormalizedAdjacency& adj,
                             VarId e0, VarId table_users, VarId table_items,
                             const BundleOptions& opt, Rng* noise_rng);

}  // namespace bigcf
