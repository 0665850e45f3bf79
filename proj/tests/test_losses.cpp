#include <cmath>

#include "bigcf/losses.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace bigcf;
using namespace testutil;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct per-triple BPR evaluation.
double bpr_oracle(const TrainBatch& b, const DenseMat& eu, const DenseMat& ei) {
  double total = 0.0;
  for (std::int64_t s = 0; s < b.size(); ++s) {
    double pu = 0, pn = 0;
    for (std::int64_t c = 0; c < eu.cols; ++c) {
      pu += eu(b.users[s], c) * ei(b.pos_items[s], c);
      pn += eu(b.users[s], c) * ei(b.neg_items[s], c);
    }
    total += -std::log(sigmoid(sigmoid(pu) - sigmoid(pn)));
  }
  return total / static_cast<double>(b.size());
}

// Closed-form Gaussian KL to N(0, I), with the log floor of the library.
double kl_oracle(const DenseMat& mu, const DenseMat& sigma) {
  double total = 0.0;
  for (std::int64_t r = 0; r < mu.rows; ++r) {
    double row = 0.0;
    for (std::int64_t c = 0; c < mu.cols; ++c) {
      const double s2 = sigma(r, c) * sigma(r, c);
      row += mu(r, c) * mu(r, c) + s2 - std::log(std::max(s2, 1e-10)) - 1.0;
    }
    total += 0.5 * row;
  }
  return total / static_cast<double>(mu.rows);
}

double reduce_oracle(const std::vector<double>& terms, Reduction red) {
  double s = 0.0;
  for (double t : terms) s += t;
  return red == Reduction::mean ? s / static_cast<double>(terms.size()) : s;
}

// Self-contrast uniformity oracle over the rows of one matrix.
double uniformity_oracle(const DenseMat& x, double tau, Reduction red) {
  std::vector<double> terms;
  for (std::int64_t r = 0; r < x.rows; ++r) {
    double denom = 0.0;
    for (std::int64_t c = 0; c < x.rows; ++c)
      denom += std::exp(cosine(mat_row(x, r), mat_row(x, c)) / tau);
    terms.push_back(std::log(denom) -
                    cosine(mat_row(x, r), mat_row(x, r)) / tau);
  }
  return reduce_oracle(terms, red);
}

DenseMat gather(const DenseMat& x, const std::vector<std::int32_t>& rows) {
  DenseMat out(static_cast<std::int64_t>(rows.size()), x.cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::int64_t c = 0; c < x.cols; ++c) out(r, c) = x(rows[r], c);
  return out;
}

// Brute-force interaction-space regularization oracle.
double gcr_interaction_oracle(const TrainBatch& b, const DenseMat& eu,
                              const DenseMat& ei, double tau, Reduction red,
                              bool ir, bool hnr) {
  double total = 0.0;
  if (ir) {
    std::vector<double> terms;
    for (std::int64_t s = 0; s < b.size(); ++s) {
      const auto anchor = mat_row(eu, b.users[s]);
      double denom = 0.0;
      for (std::int32_t c : b.uniq_items)
        denom += std::exp(cosine(anchor, mat_row(ei, c)) / tau);
      terms.push_back(std::log(denom) -
                      cosine(anchor, mat_row(ei, b.pos_items[s])) / tau);
    }
    total += reduce_oracle(terms, red);
  }
  if (hnr) {
    total += uniformity_oracle(gather(eu, b.uniq_users), tau, red);
    total += uniformity_oracle(gather(ei, b.uniq_items), tau, red);
  }
  return total;
}

TrainBatch toy_batch(std::vector<std::int32_t> users,
                     std::vector<std::int32_t> pos,
                     std::vector<std::int32_t> neg) {
  TrainBatch b;
  b.users = std::move(users);
  b.pos_items = std::move(pos);
  b.neg_items = std::move(neg);
  b.uniq_users = b.users;
  b.uniq_items = b.pos_items;
  std::sort(b.uniq_users.begin(), b.uniq_users.end());
  b.uniq_users.erase(std::unique(b.uniq_users.begin(), b.uniq_users.end()),
                     b.uniq_users.end());
  std::sort(b.uniq_items.begin(), b.uniq_items.end());
  b.uniq_items.erase(std::unique(b.uniq_items.begin(), b.uniq_items.end()),
                     b.uniq_items.end());
  return b;
}

}  // namespace

TEST_CASE("bpr loss spot values") {
  SUBCASE("equal scores cost ln 2 per triple") {
    DenseMat eu(1, 3, 0.0), ei(2, 3, 0.0);
    eu(0, 0) = 1.0;
    ei(0, 1) = 1.0;  // both items orthogonal to the user
    ei(1, 2) = 1.0;
    Tape tape;
    const VarId loss = bpr_loss(tape, toy_batch({0}, {0}, {1}),
                                tape.constant(eu), tape.constant(ei));
    CHECK(tape.scalar(loss) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(tape.scalar(loss) == doctest::Approx(0.693147).epsilon(1e-6));
  }
  SUBCASE("loss shrinks toward its floor as the gap grows") {
    // -log sigmoid(x) -> 0 as x -> inf; probability gaps are capped at 1,
    // so the reachable floor here is -log sigmoid(1)
    auto loss_for = [&](double scale) {
      DenseMat eu(1, 1, scale), ei(2, 1, 0.0);
      ei(0, 0) = scale;
      ei(1, 0) = -scale;
      Tape tape;
      return tape.scalar(bpr_loss(tape, toy_batch({0}, {0}, {1}),
                                  tape.constant(eu), tape.constant(ei)));
    };
    const double floor = -std::log(sigmoid(1.0));
    double prev = loss_for(0.5);
    for (double s : {1.0, 2.0, 4.0, 8.0}) {
      const double cur = loss_for(s);
      CHECK(cur < prev);
      CHECK(cur > floor - 1e-12);
      prev = cur;
    }
    CHECK(loss_for(64.0) == doctest::Approx(floor).epsilon(1e-9));
  }
  SUBCASE("3-triple toy batch matches the scalar oracle") {
    Rng rng(41);
    const DenseMat eu = random_mat(3, 4, rng);
    const DenseMat ei = random_mat(5, 4, rng);
    const TrainBatch b = toy_batch({0, 1, 2}, {0, 2, 4}, {1, 3, 0});
    Tape tape;
    const VarId loss = bpr_loss(tape, b, tape.constant(eu), tape.constant(ei));
    CHECK(std::abs(tape.scalar(loss) - bpr_oracle(b, eu, ei)) < 1e-12);
  }
}

TEST_CASE("kl loss spot values and oracle") {
  SUBCASE("standard gaussian has zero divergence") {
    Tape tape;
    const VarId kl = kl_loss(tape, tape.constant(DenseMat(4, 6, 0.0)),
                             tape.constant(DenseMat(4, 6, 1.0)));
    CHECK(std::abs(tape.scalar(kl)) < 1e-9);
  }
  SUBCASE("a single unit mean entry adds one half") {
    DenseMat mu(1, 4, 0.0);
    mu(0, 2) = 1.0;
    Tape tape;
    const VarId kl =
        kl_loss(tape, tape.constant(mu), tape.constant(DenseMat(1, 4, 1.0)));
    CHECK(tape.scalar(kl) == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("random instances match the closed form") {
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
      const DenseMat mu = random_mat(5, 7, rng);
      const DenseMat sigma = random_mat(5, 7, rng, -2.0, 2.0);
      Tape tape;
      const VarId kl = kl_loss(tape, tape.constant(mu), tape.constant(sigma));
      CHECK(std::abs(tape.scalar(kl) - kl_oracle(mu, sigma)) < 1e-10);
    }
  }
}

TEST_CASE("info_nce spot values") {
  SUBCASE("identical pair, one orthogonal negative, tau 0.2") {
    DenseMat a(1, 2, 0.0), n(1, 2, 0.0);
    a(0, 0) = 1.0;
    n(0, 1) = 1.0;
    Tape tape;
    const VarId nce = info_nce(tape, tape.constant(a), tape.constant(a),
                               tape.constant(n), 0.2);
    CHECK(tape.scalar(nce) ==
          doctest::Approx(std::log(1.0 + std::exp(-5.0))).epsilon(1e-12));
    CHECK(tape.scalar(nce) == doctest::Approx(0.0067153).epsilon(1e-4));
  }
  SUBCASE("all negatives equal to the anchor give ln(batch size)") {
    DenseMat a(1, 3, 0.0);
    a(0, 0) = 2.0;
    for (int negs : {1, 3, 7}) {
      DenseMat n(negs, 3, 0.0);
      for (int r = 0; r < negs; ++r) n(r, 0) = 2.0;
      Tape tape;
      const VarId nce = info_nce(tape, tape.constant(a), tape.constant(a),
                                 tape.constant(n), 0.2);
      CHECK(tape.scalar(nce) ==
            doctest::Approx(std::log(double(negs) + 1.0)).epsilon(1e-10));
    }
  }
  SUBCASE("loss decreases as the negative rotates away") {
    double prev = 1e100;
    for (double angle : {0.1, 0.5, 1.0, 2.0, 3.0}) {
      DenseMat a(1, 2, 0.0), n(1, 2, 0.0);
      a(0, 0) = 1.0;
      n(0, 0) = std::cos(angle);
      n(0, 1) = std::sin(angle);
      Tape tape;
      const VarId nce = info_nce(tape, tape.constant(a), tape.constant(a),
                                 tape.constant(n), 0.2);
      CHECK(tape.scalar(nce) < prev);
      prev = tape.scalar(nce);
    }
  }
  SUBCASE("empty negative set returns zero") {
    DenseMat a(2, 3, 1.0);
    Tape tape;
    const VarId nce = info_nce(tape, tape.constant(a), tape.constant(a),
                               tape.constant(DenseMat(0, 3)), 0.2);
    CHECK(tape.scalar(nce) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("gcr_interaction spot values") {
  SUBCASE("one unique user and item with equal embeddings cost nothing") {
    DenseMat eu(1, 3, 0.5), ei(1, 3, 0.5);
    Tape tape;
    const VarId g = gcr_interaction(tape, toy_batch({0}, {0}, {0}),
                                    tape.constant(eu), tape.constant(ei), 0.2);
    CHECK(std::abs(tape.scalar(g)) < 1e-9);
  }
  SUBCASE("two identical users cost ln 2 each in the HNR term") {
    DenseMat eu(2, 3);
    for (std::int64_t c = 0; c < 3; ++c) eu(0, c) = eu(1, c) = 0.3 * (c + 1);
    DenseMat ei(2, 3, 0.0);
    ei(0, 0) = 1.0;
    ei(1, 1) = 1.0;  // orthogonal items so only the user term is predictable
    Tape tape;
    const TrainBatch b = toy_batch({0, 1}, {0, 1}, {1, 0});
    const VarId hnr_only =
        gcr_interaction(tape, b, tape.constant(eu), tape.constant(ei), 0.2,
                        Reduction::mean, false, true);
    const double item_term = uniformity_oracle(ei, 0.2, Reduction::mean);
    CHECK(tape.scalar(hnr_only) - item_term ==
          doctest::Approx(std::log(2.0)).epsilon(1e-10));
  }
  SUBCASE("random batches match the brute-force oracle") {
    Rng rng(43);
    for (int trial = 0; trial < 8; ++trial) {
      const DenseMat eu = random_mat(6, 4, rng);
      const DenseMat ei = random_mat(8, 4, rng);
      TrainBatch b = toy_batch(
          {static_cast<std::int32_t>(rng.uniform_below(6)),
           static_cast<std::int32_t>(rng.uniform_below(6)),
           static_cast<std::int32_t>(rng.uniform_below(6)), 0},
          {static_cast<std::int32_t>(rng.uniform_below(8)),
           static_cast<std::int32_t>(rng.uniform_below(8)),
           static_cast<std::int32_t>(rng.uniform_below(8)), 7},
          {1, 2, 3, 4});
      for (const bool ir : {true, false}) {
        for (const bool hnr : {true, false}) {
          if (!ir && !hnr) continue;
          for (const Reduction red : {Reduction::mean, Reduction::sum}) {
            Tape tape;
            const VarId g = gcr_interaction(tape, b, tape.constant(eu),
                                            tape.constant(ei), 0.2, red, ir, hnr);
            CHECK(std::abs(tape.scalar(g) -
                           gcr_interaction_oracle(b, eu, ei, 0.2, red, ir, hnr)) <
                  1e-10);
          }
        }
      }
    }
  }
}

TEST_CASE("gcr_intent spot values") {
  SUBCASE("single user and item have no negatives") {
    Tape tape;
    const VarId g = gcr_intent(tape, tape.constant(DenseMat(1, 3, 0.4)),
                               tape.constant(DenseMat(1, 3, 0.9)), 0.2);
    CHECK(std::abs(tape.scalar(g)) < 1e-9);
  }
  SUBCASE("k identical vectors cost k ln k as a sum, ln k as a mean") {
    for (int k : {2, 3, 5}) {
      DenseMat sig(k, 3);
      for (std::int64_t r = 0; r < k; ++r)
        for (std::int64_t c = 0; c < 3; ++c) sig(r, c) = 0.7 - 0.1 * c;
      Tape tape;
      const VarId one = tape.constant(DenseMat(1, 3, 1.0));  // silent side
      const VarId gs =
          gcr_intent(tape, tape.constant(sig), one, 0.2, Reduction::sum);
      CHECK(tape.scalar(gs) ==
            doctest::Approx(k * std::log(double(k))).epsilon(1e-10));
      const VarId gm =
          gcr_intent(tape, tape.constant(sig), one, 0.2, Reduction::mean);
      CHECK(tape.scalar(gm) ==
            doctest::Approx(std::log(double(k))).epsilon(1e-10));
    }
  }
  SUBCASE("rotating one vector away lowers the value") {
    double prev = 1e100;
    for (double angle : {0.0, 0.4, 0.9, 1.5}) {
      DenseMat sig(3, 2, 0.0);
      sig(0, 0) = sig(1, 0) = 1.0;
      sig(2, 0) = std::cos(angle);
      sig(2, 1) = std::sin(angle);
      Tape tape;
      const VarId g = gcr_intent(tape, tape.constant(sig),
                                 tape.constant(DenseMat(1, 2, 1.0)), 0.2);
      CHECK(tape.scalar(g) < prev);
      prev = tape.scalar(g);
    }
  }
}

TEST_CASE("total loss composition") {
  Rng rng(44);
  const InteractionDataset ds = random_dataset(10, 12, 5, rng);
  Rng srng(7);
  const TrainBatch b = sample_batch(ds, 16, srng);
  const DenseMat eu = random_mat(10, 4, rng);
  const DenseMat ei = random_mat(12, 4, rng);

  SUBCASE("with all weights zero the total reduces to bpr") {
    Tape tape;
    LossTerms terms;
    terms.bpr = bpr_loss(tape, b, tape.constant(eu), tape.constant(ei));
    const auto [total, report] = total_loss(tape, terms, 0.0, 0.0, 0.0);
    CHECK(tape.scalar(total) == report.bpr);
    CHECK(report.total == report.bpr);
    CHECK(report.kl == 0.0);
    CHECK(report.gcr_inter == 0.0);
  }
  SUBCASE("all-zero parts give a zero total") {
    Tape tape;
    LossTerms terms;
    terms.bpr = tape.constant(DenseMat(1, 1, 0.0));
    const auto [total, report] = total_loss(tape, terms, 0.3, 0.4, 0.5);
    CHECK(tape.scalar(total) == 0.0);
    CHECK(report.total == 0.0);
  }
  SUBCASE("random parts compose as the documented weighted sum") {
    Tape tape;
    LossTerms terms;
    terms.bpr = tape.constant(DenseMat(1, 1, 0.81));
    terms.kl = tape.constant(DenseMat(1, 1, 0.35));
    terms.gcr_inter = tape.constant(DenseMat(1, 1, 1.25));
    terms.gcr_intent = tape.constant(DenseMat(1, 1, 0.44));
    terms.l2 = tape.constant(DenseMat(1, 1, 2.5));
    const double l1 = 0.2, l2w = 1e-5, klw = 0.7;
    const auto [total, report] = total_loss(tape, terms, l1, l2w, klw);
    const double want = 0.81 + klw * 0.35 + l1 * (1.25 + 0.44) + l2w * 2.5;
    CHECK(tape.scalar(total) == doctest::Approx(want).epsilon(1e-15));
    CHECK(report.total ==
          doctest::Approx(report.bpr + klw * report.kl +
                          l1 * (report.gcr_inter + report.gcr_intent) +
                          l2w * report.l2)
              .epsilon(1e-15));
  }
}

TEST_CASE("gcr terms are invariant to batch ordering") {
  Rng rng(45);
  const DenseMat eu = random_mat(6, 4, rng);
  const DenseMat ei = random_mat(8, 4, rng);
  const TrainBatch b = toy_batch({0, 3, 5, 2}, {1, 7, 0, 4}, {2, 3, 5, 6});
  TrainBatch shuffled = toy_batch({2, 5, 0, 3}, {4, 0, 1, 7}, {6, 5, 2, 3});
  Tape t1, t2;
  const double v1 = t1.scalar(gcr_interaction(t1, b, t1.constant(eu),
                                              t1.constant(ei), 0.2));
  const double v2 = t2.scalar(gcr_interaction(t2, shuffled, t2.constant(eu),
                                              t2.constant(ei), 0.2));
  CHECK(v1 == doctest::Approx(v2).epsilon(1e-9));
}

TEST_CASE("loss terms stay finite on extreme but finite inputs") {
  DenseMat big(3, 4, 1e6);
  big(1, 0) = -1e6;
  DenseMat tiny(3, 4, 0.0);
  const TrainBatch b = toy_batch({0, 1, 2}, {0, 1, 2}, {1, 2, 0});
  Tape tape;
  CHECK(std::isfinite(
      tape.scalar(bpr_loss(tape, b, tape.constant(big), tape.constant(big)))));
  CHECK(std::isfinite(
      tape.scalar(kl_loss(tape, tape.constant(big), tape.constant(tiny)))));
  CHECK(std::isfinite(tape.scalar(gcr_interaction(
      tape, b, tape.constant(big), tape.constant(tiny), 0.2))));
  CHECK(std::isfinite(tape.scalar(
      gcr_intent(tape, tape.constant(tiny), tape.constant(big), 0.2))));
}

TEST_CASE("minimizing the HNR term spreads free 2-D embeddings") {
  // 16 nodes, 200 plain gradient steps on the user uniformity term alone
  Rng rng(46);
  DenseMat x = random_mat(16, 2, rng, 0.5, 1.0);  // clustered start
  auto mean_pairwise_cosine = [](const DenseMat& m) {
    double sum = 0.0;
    int cnt = 0;
    for (std::int64_t r = 0; r < m.rows; ++r)
      for (std::int64_t s = r + 1; s < m.rows; ++s) {
        sum += cosine(mat_row(m, r), mat_row(m, s));
        ++cnt;
      }
    return sum / cnt;
  };
  const double before = mean_pairwise_cosine(x);
  for (int step = 0; step < 200; ++step) {
    Tape tape;
    const VarId xs = tape.param(x);
    tape.backward(uniformity_term(tape, xs, 0.2, Reduction::mean));
    const DenseMat& g = tape.grad(xs);
    for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] -= 0.05 * g.v[i];
  }
  const double after = mean_pairwise_cosine(x);
  CHECK(after < before);
}

TEST_CASE("loss gradients pass the finite-difference suite") {
  Rng rng(47);
  const TrainBatch b = toy_batch({0, 2, 1}, {1, 0, 3}, {2, 3, 0});
  const DenseMat eu0 = random_mat(3, 4, rng);
  const DenseMat ei0 = random_mat(4, 4, rng);

  struct Case {
    const char* name;
    std::function<VarId(Tape&, VarId, VarId)> build;
  };
  const std::vector<Case> cases = {
      {"bpr", [&](Tape& t, VarId u, VarId i) { return bpr_loss(t, b, u, i); }},
      {"kl",
       [&](Tape& t, VarId u, VarId i) {
         return kl_loss(t, u, t.slice_rows(i, 0, 3));
       }},
      {"gcr_interaction",
       [&](Tape& t, VarId u, VarId i) { return gcr_interaction(t, b, u, i, 0.2); }},
      {"gcr_intent",
       [&](Tape& t, VarId u, VarId i) { return gcr_intent(t, u, i, 0.2); }},
      {"info_nce",
       [&](Tape& t, VarId u, VarId i) {
         return info_nce(t, u, t.slice_rows(u, 0, 3), i, 0.25);
       }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    Tape tape;
    const VarId u = tape.param(eu0);
    const VarId i = tape.param(ei0);
    tape.backward(c.build(tape, u, i));
    const DenseMat fd_u = finite_difference(
        [&](const DenseMat& uv) {
          Tape t;
          return t.scalar(c.build(t, t.param(uv), t.constant(ei0)));
        },
        eu0);
    CHECK(max_rel_error(tape.grad(u), fd_u) < 1e-4);
    const DenseMat fd_i = finite_difference(
        [&](const DenseMat& iv) {
          Tape t;
          return t.scalar(c.build(t, t.constant(eu0), t.param(iv)));
        },
        ei0);
    CHECK(max_rel_error(tape.grad(i), fd_i) < 1e-4);
  }
}
