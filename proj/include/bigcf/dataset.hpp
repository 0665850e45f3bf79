#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bigcf/mat.hpp"
#include "bigcf/rng.hpp"

namespace bigcf {

// Implicit-feedback interaction data over M users and N items. Ids are
// 0-based; adjacency lists are sorted and deduplicated; per-user train and
// test sets are disjoint.
struct InteractionDataset {
  std::int64_t num_users = 0;
  std::int64_t num_items = 0;
  std::vector<std::vector<std::int32_t>> train;  // per user, sorted item ids
  std::vector<std::vector<std::int32_t>> test;

  // Flat train edge list for degree-proportional user sampling.
  std::vector<std::int32_t> edge_user;
  std::vector<std::int32_t> edge_item;

  std::int64_t train_edges() const { return static_cast<std::int64_t>(edge_user.size()); }
  std::int64_t test_edges() const;
  double sparsity() const;

  bool in_train(std::int32_t user, std::int32_t item) const;
  void rebuild_edge_list();
};

// Parses LightGCN-style adjacency lists: one user per line, whitespace
// separated integers, first token the user id, the rest item ids. When
// `test_path` is empty, a deterministic per-user 80/20 split of the train
// file is generated instead.
InteractionDataset load_dataset(const std::string& train_path,
                                const std::string& test_path);

// Builds a dataset from in-memory pairs (used by tests and tools).
InteractionDataset make_dataset(std::int64_t num_users, std::int64_t num_items,
                                const std::vector<std::pair<std::int32_t, std::int32_t>>& train_pairs,
                                const std::vector<std::pair<std::int32_t, std::int32_t>>& test_pairs);

// Symmetric normalized adjacency D^{-1/2} A D^{-1/2} over the M+N node
// bipartite graph; edge (u, i) carries weight 1/sqrt(deg(u) * deg(i)).
// Users occupy rows [0, M), items rows [M, M+N).
struct NormalizedAdjacency {
  SparseMat mat;
  std::int64_t num_users = 0;
  std::int64_t num_items = 0;
};

NormalizedAdjacency build_normalized_adjacency(const InteractionDataset& ds);

// A BPR batch: (user, positive, negative) triples plus deduplicated sorted
// id lists used by the contrastive regularizers.
struct TrainBatch {
  std::vector<std::int32_t> users;
  std::vector<std::int32_t> pos_items;
  std::vector<std::int32_t> neg_items;
  std::vector<std::int32_t> uniq_users;  // sorted, unique
  std::vector<std::int32_t> uniq_items;  // sorted, unique (positives only)

  std::int64_t size() const { return static_cast<std::int64_t>(users.size()); }
};

TrainBatch sample_batch(const InteractionDataset& ds, std::int64_t batch_size,
                        Rng& rng);

// Tercile partition of test users by train-interaction count; ties broken by
// ascending user id. Fewer than three test users yields a single bucket.
struct SparsityBuckets {
  std::vector<std::string> names;
  std::vector<std::vector<std::int32_t>> users;
};

SparsityBuckets sparsity_buckets(const InteractionDataset& ds);

// Deterministic per-user holdout of roughly `fraction` of each user's train
// items; returns (reduced dataset with holdout as its test set). Used for
// validation splits during fit().
InteractionDataset holdout_split(const InteractionDataset& ds, double fraction,
                                 std::uint64_t seed);

}  // namespace bigcf
