#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bigcf/dataset.hpp"
#include "bigcf/mat.hpp"
#include "bigcf/rng.hpp"

namespace bigcf {

// Full-ranking top-K metrics averaged over users with nonempty test sets.
struct MetricReport {
  std::vector<int> ks;
  std::vector<double> recall;
  std::vector<double> ndcg;
  std::int64_t users_evaluated = 0;
  std::int64_t users_skipped = 0;  // users without test interactions

  double recall_at(int k) const;
  double ndcg_at(int k) const;
};

// Top-K item ids for one user by descending inner product, excluding the
// (sorted) train items; ties broken by ascending item id. Requesting more
// than the remaining items returns all of them.
std::vector<std::int32_t> rank_items(const double* user_emb,
                                     const DenseMat& item_embs,
                                     const std::vector<std::int32_t>& exclude,
                                     int k);

// recall = |topk  test| / |test|; ndcg = DCG / IDCG with 1/log2(rank+1)
// gains and the ideal truncated at min(k, |test|).
std::pair<double, double> recall_ndcg(const std::vector<std::int32_t>& topk,
                                      const std::vector<std::int32_t>& test_items,
                                      int k);

MetricReport evaluate(const InteractionDataset& ds, const DenseMat& user_embs,
                      const DenseMat& item_embs, const std::vector<int>& ks);

// evaluate() restricted to a user subset (bucket evaluation).
MetricReport evaluate_users(const InteractionDataset& ds,
                            const DenseMat& user_embs, const DenseMat& item_embs,
                            const std::vector<int>& ks,
                            const std::vector<std::int32_t>& users);

std::vector<MetricReport> evaluate_by_bucket(const InteractionDataset& ds,
                                             const DenseMat& user_embs,
                                             const DenseMat& item_embs,
                                             const std::vector<int>& ks,
                                             const SparsityBuckets& buckets);

// Writes "user,score_0,...,score_{K-1},mean,variance" rows for the selected
// users given their intent score matrix (M x K). `sample` > 0 draws that
// many distinct users at random; otherwise all users are exported.
void export_intent_scores(std::ostream& out, const DenseMat& scores,
                          const std::vector<std::int32_t>& user_ids);
std::vector<std::int32_t> sample_user_ids(std::int64_t num_users,
                                          std::int64_t sample, Rng& rng);

// Per-row population variance across the K scores (the Fig-style spread of
// a user's intent distribution).
std::vector<double> intent_score_variances(const DenseMat& scores);

}  // namespace bigcf
