#include "bigcf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <ostream>
#include <string>

#include "bigcf/errors.hpp"

namespace bigcf {

double MetricReport::recall_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return recall[i];
  throw ConfigError("MetricReport: K=" + std::to_string(k) + " not computed");
}

double MetricReport::ndcg_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return ndcg[i];
  throw ConfigError("MetricReport: K=" + std::to_string(k) + " not computed");
}

std::vector<std::int32_t> rank_items(const double* user_emb,
                                     const DenseMat& item_embs,
                                     const std::vector<std::int32_t>& exclude,
                                     int k) {
  if (k < 1) throw ConfigError("rank_items: K must be >= 1");
  const std::int64_t n = item_embs.rows;
  const std::int64_t d = item_embs.cols;

  std::vector<std::pair<double, std::int32_t>> scored;
  scored.reserve(n - static_cast<std::int64_t>(exclude.size()));
  for (std::int64_t i = 0; i < n; ++i) {
    if (std::binary_search(exclude.begin(), exclude.end(),
                           static_cast<std::int32_t>(i)))
      continue;
    const double* row = item_embs.row(i);
    double s = 0.0;
    for (std::int64_t c = 0; c < d; ++c) s += user_emb[c] * row[c];
    scored.emplace_back(s, static_cast<std::int32_t>(i));
  }
  const auto take = std::min<std::int64_t>(k, scored.size());
  // higher score first; equal scores resolved by ascending item id
  auto better = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);
  std::vector<std::int32_t> out;
  out.reserve(take);
  for (std::int64_t i = 0; i < take; ++i) out.push_back(scored[i].second);
  return out;
}

std::pair<double, double> recall_ndcg(const std::vector<std::int32_t>& topk,
                                      const std::vector<std::int32_t>& test_items,
                                      int k) {
  if (test_items.empty()) throw ConfigError("recall_ndcg: empty test set");
  const auto limit = std::min<std::size_t>(topk.size(), k);
  std::int64_t hits = 0;
  double dcg = 0.0;
  for (std::size_t r = 0; r < limit; ++r) {
    if (std::binary_search(test_items.begin(), test_items.end(), topk[r])) {
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  const auto ideal =
      std::min<std::size_t>(k, test_items.size());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal; ++r)
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  const double recall =
      static_cast<double>(hits) / static_cast<double>(test_items.size());
  return {recall, idcg > 0 ? dcg / idcg : 0.0};
}

MetricReport evaluate_users(const InteractionDataset& ds,
                            const DenseMat& user_embs, const DenseMat& item_embs,
                            const std::vector<int>& ks,
                            const std::vector<std::int32_t>& users) {
  if (user_embs.rows != ds.num_users || item_embs.rows != ds.num_items)
    throw ConfigError("evaluate: embeddings do not cover all nodes");
  MetricReport rep;
  rep.ks = ks;
  rep.recall.assign(ks.size(), 0.0);
  rep.ndcg.assign(ks.size(), 0.0);
  const int kmax = *std::max_element(ks.begin(), ks.end());

  for (std::int32_t u : users) {
    if (ds.test[u].empty()) {
      ++rep.users_skipped;
      continue;
    }
    const auto topk = rank_items(user_embs.row(u), item_embs, ds.train[u], kmax);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto [r, n] = recall_ndcg(topk, ds.test[u], ks[i]);
      rep.recall[i] += r;
      rep.ndcg[i] += n;
    }
    ++rep.users_evaluated;
  }
  if (rep.users_evaluated == 0) {
    std::cerr << "warning: no users with test interactions; metrics are 0\n";
    return rep;
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    rep.recall[i] /= static_cast<double>(rep.users_evaluated);
    rep.ndcg[i] /= static_cast<double>(rep.users_evaluated);
  }
  return rep;
}

MetricReport evaluate(const InteractionDataset& ds, const DenseMat& user_embs,
                      const DenseMat& item_embs, const std::vector<int>& ks) {
  std::vector<std::int32_t> all(ds.num_users);
  for (std::int64_t u = 0; u < ds.num_users; ++u)
    all[u] = static_cast<std::int32_t>(u);
  return evaluate_users(ds, user_embs, item_embs, ks, all);
}

std::vector<MetricReport> evaluate_by_bucket(const InteractionDataset& ds,
                                             const DenseMat& user_embs,
                                             const DenseMat& item_embs,
                                             const std::vector<int>& ks,
                                             const SparsityBuckets& buckets) {
  std::vector<MetricReport> out;
  out.reserve(buckets.users.size());
  for (const auto& users : buckets.users)
    out.push_back(evaluate_users(ds, user_embs, item_embs, ks, users));
  return out;
}

std::vector<std::int32_t> sample_user_ids(std::int64_t num_users,
                                          std::int64_t sample, Rng& rng) {
  if (sample <= 0 || sample >= num_users) {
    std::vector<std::int32_t> all(num_users);
    for (std::int64_t u = 0; u < num_users; ++u)
      all[u] = static_cast<std::int32_t>(u);
    return all;
  }
  // Floyd's sampling of `sample` distinct ids, emitted in sorted order.
  std::vector<std::int32_t> picked;
  picked.reserve(sample);
  for (std::int64_t j = num_users - sample; j < num_users; ++j) {
    const auto t = static_cast<std::int32_t>(rng.uniform_below(j + 1));
    if (std::find(picked.begin(), picked.end(), t) == picked.end())
      picked.push_back(t);
    else
      picked.push_back(static_cast<std::int32_t>(j));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<double> intent_score_variances(const DenseMat& scores) {
  std::vector<double> out(static_cast<std::size_t>(scores.rows));
  const auto k = static_cast<double>(scores.cols);
  for (std::int64_t r = 0; r < scores.rows; ++r) {
    const double* row = scores.row(r);
    double mean = 0.0;
    for (std::int64_t c = 0; c < scores.cols; ++c) mean += row[c];
    mean /= k;
    double var = 0.0;
    for (std::int64_t c = 0; c < scores.cols; ++c)
      var += (row[c] - mean) * (row[c] - mean);
    out[r] = var / k;
  }
  return out;
}

void export_intent_scores(std::ostream& out, const DenseMat& scores,
                          const std::vector<std::int32_t>& user_ids) {
  out << "user";
  for (std::int64_t c = 0; c < scores.cols; ++c) out << ",score_" << c;
  out << ",mean,variance\n";
  const std::vector<double> vars = intent_score_variances(scores);
  char buf[32];
  for (std::int32_t u : user_ids) {
    if (u < 0 || u >= scores.rows)
      throw DataError("export_intent_scores: unknown user id " +
                      std::to_string(u));
    out << u;
    const double* row = scores.row(u);
    double mean = 0.0;
    for (std::int64_t c = 0; c < scores.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.10g", row[c]);
      out << ',' << buf;
      mean += row[c];
    }
    mean /= static_cast<double>(scores.cols);
    std::snprintf(buf, sizeof(buf), "%.10g", mean);
    out << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.10g", vars[u]);
    out << ',' << buf << '\n';
  }
}

}  // namespace bigcf
