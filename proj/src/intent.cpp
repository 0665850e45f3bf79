#include "bigcf/intent.hpp"

#include "bigcf/errors.hpp"

namespace bigcf {

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "sample") return NoiseMode::sample;
  if (s == "zero") return NoiseMode::zero;
  if (s == "one") return NoiseMode::one;
  throw ConfigError("unknown noise mode: " + s);
}

std::string to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::sample: return "sample";
    case NoiseMode::zero: return "zero";
    case NoiseMode::one: return "one";
  }
  return "?";
}

VarId intent_scores(Tape& tape, VarId e_mu, VarId table, double kappa) {
  if (!(kappa > 0)) throw ConfigError("intent_scores: kappa must be positive");
  if (tape.value(table).rows < 1)
    throw ConfigError("intent_scores: intent table must have at least one row");
  if (tape.value(e_mu).cols != tape.value(table).cols)
    throw ConfigError("intent_scores: embedding dimension mismatch");
  const VarId logits = tape.matmul_nt(e_mu, table);
  return tape.row_softmax(logits, kappa);
}

VarId individual_intents(Tape& tape, VarId scores, VarId table) {
  if (tape.value(scores).cols != tape.value(table).rows)
    throw ConfigError("individual_intents: score/table size mismatch");
  return tape.matmul_nn(scores, table);
}

VarId reparameterize(Tape& tape, VarId e_mu, VarId e_sigma, NoiseMode mode,
                     Rng* rng) {
  const DenseMat& mu = tape.value(e_mu);
  if (!mu.same_shape(tape.value(e_sigma)))
    throw ConfigError("reparameterize: shape mismatch");
  DenseMat eps(mu.rows, mu.cols);
  switch (mode) {
    case NoiseMode::zero:
      break;
    case NoiseMode::one:
      eps.fill(1.0);
      break;
    case NoiseMode::sample:
      if (rng == nullptr)
        throw ConfigError("reparameterize: sample mode needs an rng");
      for (double& x : eps.v) x = rng->gaussian();
      break;
  }
  const VarId eps_id = tape.constant(std::move(eps));
  return tape.add(e_mu, tape.mul(e_sigma, eps_id));
}

VarId edge_scores(Tape& tape, VarId e_u, VarId e_i) {
  if (!tape.value(e_u).same_shape(tape.value(e_i)))
    throw ConfigError("edge_scores: shape mismatch");
  return tape.sigmoid(tape.row_sum(tape.mul(e_u, e_i)));
}

EmbeddingBundle build_bundle(Tape& tape, const NormalizedAdjacency& adj,
                             VarId e0, VarId table_users, VarId table_items,
                             const BundleOptions& opt, Rng* noise_rng) {
  const std::int64_t m = adj.num_users;
  const std::int64_t n = adj.num_items;

  EmbeddingBundle b;
  const StructuralEmbeddings enc =
      propagate(tape, adj, e0, opt.layers, opt.include_layer0);
  b.mu_users = tape.slice_rows(enc.pooled, 0, m);
  b.mu_items = tape.slice_rows(enc.pooled, m, n);

  if (opt.fusion == FusionMode::structural_only) {
    b.fused_users = b.mu_users;
    b.fused_items = b.mu_items;
    return b;
  }

  b.scores_users = intent_scores(tape, b.mu_users, table_users, opt.kappa);
  b.scores_items = intent_scores(tape, b.mu_items, table_items, opt.kappa);
  b.sigma_users = individual_intents(tape, b.scores_users, table_users);
  b.sigma_items = individual_intents(tape, b.scores_items, table_items);

  if (opt.fusion == FusionMode::average_pool) {
    b.fused_users = tape.scale(tape.add(b.mu_users, b.sigma_users), 0.5);
    b.fused_items = tape.scale(tape.add(b.mu_items, b.sigma_items), 0.5);
    return b;
  }

  // reparameterized fusion; the noise constants are kept on the bundle so a
  // step's BPR and regularization terms share one draw per node
  auto fuse = [&](VarId mu, VarId sigma, VarId& eps_out) {
    const DenseMat& vm = tape.value(mu);
    DenseMat eps(vm.rows, vm.cols);
    switch (opt.noise) {
      case NoiseMode::zero: break;
      case NoiseMode::one: eps.fill(1.0); break;
      case NoiseMode::sample:
        if (noise_rng == nullptr)
          throw ConfigError("build_bundle: sample mode needs an rng");
        for (double& x : eps.v) x = noise_rng->gaussian();
        break;
    }
    eps_out = tape.constant(std::move(eps));
    return tape.add(mu, tape.mul(sigma, eps_out));
  };
  b.fused_users = fuse(b.mu_users, b.sigma_users, b.eps_users);
  b.fused_items = fuse(b.mu_items, b.sigma_items, b.eps_items);
  return b;
}

}  // namespace bigcf
