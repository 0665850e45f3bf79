#include "bigcf/losses.hpp"

#include <algorithm>
#include <iostream>

#include "bigcf/errors.hpp"

namespace bigcf {

namespace {

std::vector<std::int64_t> widen(const std::vector<std::int32_t>& v) {
  return {v.begin(), v.end()};
}

VarId reduce(Tape& tape, VarId per_anchor, Reduction reduction) {
  return reduction == Reduction::mean ? tape.mean_all(per_anchor)
                                      : tape.sum_all(per_anchor);
}

}  // namespace

LossReport& LossReport::operator+=(const LossReport& o) {
  bpr += o.bpr;
  kl += o.kl;
  gcr_inter += o.gcr_inter;
  gcr_intent += o.gcr_intent;
  l2 += o.l2;
  total += o.total;
  return *this;
}

LossReport& LossReport::operator/=(double d) {
  bpr /= d;
  kl /= d;
  gcr_inter /= d;
  gcr_intent /= d;
  l2 /= d;
  total /= d;
  return *this;
}

VarId bpr_loss(Tape& tape, const TrainBatch& batch, VarId e_users, VarId e_items) {
  if (batch.size() == 0) throw ConfigError("bpr_loss: empty batch");
  const VarId eu = tape.gather_rows(e_users, widen(batch.users));
  const VarId ei = tape.gather_rows(e_items, widen(batch.pos_items));
  const VarId ej = tape.gather_rows(e_items, widen(batch.neg_items));
  const VarId p_pos = tape.sigmoid(tape.row_sum(tape.mul(eu, ei)));
  const VarId p_neg = tape.sigmoid(tape.row_sum(tape.mul(eu, ej)));
  // -log sigmoid(x) == softplus(-x)
  return tape.mean_all(tape.softplus(tape.scale(tape.sub(p_pos, p_neg), -1.0)));
}

VarId kl_loss(Tape& tape, VarId mu, VarId sigma) {
  if (!tape.value(mu).same_shape(tape.value(sigma)))
    throw ConfigError("kl_loss: shape mismatch");
  const VarId mu2 = tape.mul(mu, mu);
  const VarId sig2 = tape.mul(sigma, sigma);
  const VarId inner =
      tape.add_const(tape.sub(tape.add(mu2, sig2), tape.log_eps(sig2)), -1.0);
  const VarId per_row = tape.scale(tape.row_sum(inner), 0.5);
  return tape.mean_all(per_row);
}

VarId info_nce(Tape& tape, VarId anchors, VarId positives, VarId negatives,
               double tau, Reduction reduction) {
  if (!(tau > 0)) throw ConfigError("info_nce: tau must be positive");
  const VarId pos_cos = tape.paired_cosine(anchors, positives);
  const VarId pos_term = tape.exp(tape.scale(pos_cos, 1.0 / tau));
  VarId denom = pos_term;
  if (tape.value(negatives).rows == 0) {
    std::cerr << "warning: info_nce called with no negatives; loss is 0\n";
  } else {
    const VarId neg_cos = tape.row_cosine(anchors, negatives);
    const VarId neg_sum = tape.row_sum(tape.exp(tape.scale(neg_cos, 1.0 / tau)));
    denom = tape.add(pos_term, neg_sum);
  }
  const VarId per_anchor =
      tape.sub(tape.log_eps(denom), tape.scale(pos_cos, 1.0 / tau));
  return reduce(tape, per_anchor, reduction);
}

VarId uniformity_term(Tape& tape, VarId rows, double tau, Reduction reduction) {
  if (!(tau > 0)) throw ConfigError("uniformity_term: tau must be positive");
  const VarId cos = tape.row_cosine(rows, rows);
  const VarId denom = tape.row_sum(tape.exp(tape.scale(cos, 1.0 / tau)));
  // the self column sits inside the denominator sum, so per anchor this is
  // -cos(r,r)/tau + log(exp(cos(r,r)/tau) + sum_{c != r} exp(cos(r,c)/tau))
  const VarId per_anchor =
      tape.sub(tape.log_eps(denom), tape.scale(tape.diag(cos), 1.0 / tau));
  return reduce(tape, per_anchor, reduction);
}

VarId gcr_interaction(Tape& tape, const TrainBatch& batch, VarId e_users,
                      VarId e_items, double tau, Reduction reduction,
                      bool include_ir, bool include_hnr) {
  if (batch.size() == 0) throw ConfigError("gcr_interaction: empty batch");
  if (!include_ir && !include_hnr)
    throw ConfigError("gcr_interaction: nothing to compute");

  const VarId items_dedup = tape.gather_rows(e_items, widen(batch.uniq_items));
  VarId out{};
  if (include_ir) {
    const VarId anchors = tape.gather_rows(e_users, widen(batch.users));
    const VarId pos = tape.gather_rows(e_items, widen(batch.pos_items));
    // the positive item is one of the deduplicated batch items, so the
    // denominator over all of them equals positive term + negatives
    const VarId pos_cos = tape.paired_cosine(anchors, pos);
    const VarId all_cos = tape.row_cosine(anchors, items_dedup);
    const VarId denom = tape.row_sum(tape.exp(tape.scale(all_cos, 1.0 / tau)));
    const VarId per_anchor =
        tape.sub(tape.log_eps(denom), tape.scale(pos_cos, 1.0 / tau));
    out = reduce(tape, per_anchor, reduction);
  }
  if (include_hnr) {
    const VarId users_dedup = tape.gather_rows(e_users, widen(batch.uniq_users));
    const VarId hnr_users = uniformity_term(tape, users_dedup, tau, reduction);
    const VarId hnr_items = uniformity_term(tape, items_dedup, tau, reduction);
    const VarId hnr = tape.add(hnr_users, hnr_items);
    out = out.valid() ? tape.add(out, hnr) : hnr;
  }
  return out;
}

VarId gcr_intent(Tape& tape, VarId sigma_users_dedup, VarId sigma_items_dedup,
                 double tau, Reduction reduction) {
  return tape.add(uniformity_term(tape, sigma_users_dedup, tau, reduction),
                  uniformity_term(tape, sigma_items_dedup, tau, reduction));
}

VarId l2_penalty(Tape& tape, const TrainBatch& batch, std::int64_t num_users,
                 VarId e0, VarId table_users, VarId table_items) {
  if (batch.size() == 0) throw ConfigError("l2_penalty: empty batch");
  std::vector<std::int64_t> rows;
  rows.reserve(batch.uniq_users.size() + 2 * batch.pos_items.size());
  for (std::int32_t u : batch.uniq_users) rows.push_back(u);
  std::vector<std::int32_t> items = batch.pos_items;
  items.insert(items.end(), batch.neg_items.begin(), batch.neg_items.end());
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  for (std::int32_t i : items) rows.push_back(num_users + i);

  const VarId touched = tape.gather_rows(e0, std::move(rows));
  VarId ssq = tape.sum_all(tape.mul(touched, touched));
  if (table_users.valid())
    ssq = tape.add(ssq, tape.sum_all(tape.mul(table_users, table_users)));
  if (table_items.valid())
    ssq = tape.add(ssq, tape.sum_all(tape.mul(table_items, table_items)));
  return tape.scale(ssq, 1.0 / static_cast<double>(batch.size()));
}

std::pair<VarId, LossReport> total_loss(Tape& tape, const LossTerms& terms,
                                        double lambda1, double lambda2,
                                        double kl_weight) {
  if (lambda1 < 0 || lambda2 < 0)
    throw ConfigError("total_loss: weights must be nonnegative");
  if (!terms.bpr.valid()) throw ConfigError("total_loss: missing bpr term");

  LossReport report;
  report.bpr = tape.scalar(terms.bpr);
  VarId total = terms.bpr;
  if (terms.kl.valid()) {
    report.kl = tape.scalar(terms.kl);
    total = tape.add(total, tape.scale(terms.kl, kl_weight));
  }
  VarId gcr{};
  if (terms.gcr_inter.valid()) {
    report.gcr_inter = tape.scalar(terms.gcr_inter);
    gcr = terms.gcr_inter;
  }
  if (terms.gcr_intent.valid()) {
    report.gcr_intent = tape.scalar(terms.gcr_intent);
    gcr = gcr.valid() ? tape.add(gcr, terms.gcr_intent) : terms.gcr_intent;
  }
  if (gcr.valid()) total = tape.add(total, tape.scale(gcr, lambda1));
  if (terms.l2.valid()) {
    report.l2 = tape.scalar(terms.l2);
    total = tape.add(total, tape.scale(terms.l2, lambda2));
  }
  report.total = tape.scalar(total);
  return {total, report};
}

}  // namespace bigcf
