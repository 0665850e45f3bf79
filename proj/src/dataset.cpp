#include "bigcf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

#include "bigcf/errors.hpp"

namespace bigcf {

namespace {

constexpr std::uint64_t kSplitSeed = 8020;  // default 80/20 test split

struct ParsedFile {
  // (user, item) pairs, may contain duplicates
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  std::int32_t max_user = -1;
  std::int32_t max_item = -1;
};

std::int32_t parse_int(const std::string& token, const std::string& path,
                       std::int64_t line_no) {
  std::int32_t out = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw DataError(path + ":" + std::to_string(line_no) +
                    ": expected integer, got '" + token + "'");
  if (out < 0)
    throw DataError(path + ":" + std::to_string(line_no) +
                    ": negative id '" + token + "'");
  return out;
}

ParsedFile parse_adjacency_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  ParsedFile out;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    bool first = true;
    std::int32_t user = 0;
    while (ss >> token) {
      const std::int32_t id = parse_int(token, path, line_no);
      if (first) {
        user = id;
        out.max_user = std::max(out.max_user, user);
        first = false;
      } else {
        out.max_item = std::max(out.max_item, id);
        out.pairs.emplace_back(user, id);
      }
    }
  }
  return out;
}

void sort_unique(std::vector<std::int32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

InteractionDataset assemble(std::int64_t num_users, std::int64_t num_items,
                            const std::vector<std::pair<std::int32_t, std::int32_t>>& train_pairs,
                            const std::vector<std::pair<std::int32_t, std::int32_t>>& test_pairs) {
  InteractionDataset ds;
  ds.num_users = num_users;
  ds.num_items = num_items;
  ds.train.assign(static_cast<std::size_t>(num_users), {});
  ds.test.assign(static_cast<std::size_t>(num_users), {});
  for (auto [u, i] : train_pairs) {
    if (u >= num_users || i >= num_items)
      throw DataError("interaction id out of range: user " + std::to_string(u) +
                      " item " + std::to_string(i));
    ds.train[u].push_back(i);
  }
  for (auto [u, i] : test_pairs) {
    if (u >= num_users || i >= num_items)
      throw DataError("interaction id out of range: user " + std::to_string(u) +
                      " item " + std::to_string(i));
    ds.test[u].push_back(i);
  }
  std::int64_t overlap = 0;
  for (std::int64_t u = 0; u < num_users; ++u) {
    sort_unique(ds.train[u]);
    sort_unique(ds.test[u]);
    // keep train/test disjoint: a pair listed in both stays in train
    auto& te = ds.test[u];
    const auto& tr = ds.train[u];
    auto keep = std::remove_if(te.begin(), te.end(), [&](std::int32_t i) {
      return std::binary_search(tr.begin(), tr.end(), i);
    });
    overlap += te.end() - keep;
    te.erase(keep, te.end());
  }
  if (overlap > 0)
    std::cerr << "warning: dropped " << overlap
              << " test interactions already present in train\n";
  ds.rebuild_edge_list();
  return ds;
}

}  // namespace

std::int64_t InteractionDataset::test_edges() const {
  std::int64_t n = 0;
  for (const auto& t : test) n += static_cast<std::int64_t>(t.size());
  return n;
}

double InteractionDataset::sparsity() const {
  const double total = static_cast<double>(num_users) * static_cast<double>(num_items);
  if (total == 0) return 1.0;
  return 1.0 - static_cast<double>(train_edges() + test_edges()) / total;
}

bool InteractionDataset::in_train(std::int32_t user, std::int32_t item) const {
  const auto& t = train[user];
  return std::binary_search(t.begin(), t.end(), item);
}

void InteractionDataset::rebuild_edge_list() {
  edge_user.clear();
  edge_item.clear();
  for (std::int64_t u = 0; u < num_users; ++u) {
    for (std::int32_t i : train[u]) {
      edge_user.push_back(static_cast<std::int32_t>(u));
      edge_item.push_back(i);
    }
  }
}

InteractionDataset load_dataset(const std::string& train_path,
                                const std::string& test_path) {
  const ParsedFile tr = parse_adjacency_file(train_path);
  ParsedFile te;
  if (!test_path.empty()) te = parse_adjacency_file(test_path);

  const std::int64_t num_users = std::max(tr.max_user, te.max_user) + 1;
  const std::int64_t num_items = std::max(tr.max_item, te.max_item) + 1;
  if (tr.pairs.empty()) throw DataError(train_path + ": no interactions found");

  if (!test_path.empty()) {
    return assemble(num_users, num_items, tr.pairs, te.pairs);
  }

  // No test file: deterministic per-user 80/20 split of the train pairs.
  InteractionDataset full = assemble(num_users, num_items, tr.pairs, {});
  std::vector<std::pair<std::int32_t, std::int32_t>> train_pairs, test_pairs;
  Rng rng(kSplitSeed);
  for (std::int64_t u = 0; u < num_users; ++u) {
    std::vector<std::int32_t> items = full.train[u];
    const auto deg = static_cast<std::int64_t>(items.size());
    if (deg < 2) {
      for (std::int32_t i : items) train_pairs.emplace_back(u, i);
      continue;
    }
    for (std::int64_t k = deg - 1; k > 0; --k) {
      const std::int64_t j = rng.uniform_below(k + 1);
      std::swap(items[k], items[j]);
    }
    std::int64_t test_cnt = std::llround(0.2 * static_cast<double>(deg));
    test_cnt = std::clamp<std::int64_t>(test_cnt, 1, deg - 1);
    for (std::int64_t k = 0; k < deg; ++k) {
      if (k < test_cnt)
        test_pairs.emplace_back(u, items[k]);
      else
        train_pairs.emplace_back(u, items[k]);
    }
  }
  return assemble(num_users, num_items, train_pairs, test_pairs);
}

InteractionDataset make_dataset(std::int64_t num_users, std::int64_t num_items,
                                const std::vector<std::pair<std::int32_t, std::int32_t>>& train_pairs,
                                const std::vector<std::pair<std::int32_t, std::int32_t>>& test_pairs) {
  return assemble(num_users, num_items, train_pairs, test_pairs);
}

NormalizedAdjacency build_normalized_adjacency(const InteractionDataset& ds) {
  if (ds.train_edges() == 0)
    throw DataError("cannot build adjacency: no train edges");
  const std::int64_t m = ds.num_users;
  const std::int64_t n = ds.num_items;

  std::vector<std::vector<std::int32_t>> item_users(static_cast<std::size_t>(n));
  for (std::int64_t u = 0; u < m; ++u)
    for (std::int32_t i : ds.train[u])
      item_users[i].push_back(static_cast<std::int32_t>(u));

  auto user_deg = [&](std::int64_t u) { return static_cast<double>(ds.train[u].size()); };
  auto item_deg = [&](std::int64_t i) { return static_cast<double>(item_users[i].size()); };

  NormalizedAdjacency adj;
  adj.num_users = m;
  adj.num_items = n;
  SparseMat& a = adj.mat;
  a.rows = a.cols = m + n;
  a.offsets.assign(static_cast<std::size_t>(m + n) + 1, 0);
  a.col_idx.reserve(2 * static_cast<std::size_t>(ds.train_edges()));
  a.values.reserve(2 * static_cast<std::size_t>(ds.train_edges()));

  for (std::int64_t u = 0; u < m; ++u) {
    for (std::int32_t i : ds.train[u]) {
      a.col_idx.push_back(m + i);
      a.values.push_back(1.0 / std::sqrt(user_deg(u) * item_deg(i)));
    }
    a.offsets[u + 1] = static_cast<std::int64_t>(a.col_idx.size());
  }
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int32_t u : item_users[i]) {
      a.col_idx.push_back(u);
      a.values.push_back(1.0 / std::sqrt(user_deg(u) * item_deg(i)));
    }
    a.offsets[m + i + 1] = static_cast<std::int64_t>(a.col_idx.size());
  }
  a.validate();
  return adj;
}

TrainBatch sample_batch(const InteractionDataset& ds, std::int64_t batch_size,
                        Rng& rng) {
  if (batch_size < 1) throw ConfigError("sample_batch: batch_size must be >= 1");
  const std::int64_t edges = ds.train_edges();
  if (edges == 0) throw DataError("sample_batch: dataset has no train edges");

  TrainBatch b;
  b.users.reserve(batch_size);
  b.pos_items.reserve(batch_size);
  b.neg_items.reserve(batch_size);
  std::int64_t degenerate = 0;
  while (static_cast<std::int64_t>(b.users.size()) < batch_size) {
    const std::int64_t e = rng.uniform_below(edges);
    const std::int32_t u = ds.edge_user[e];
    const std::int32_t i = ds.edge_item[e];
    if (static_cast<std::int64_t>(ds.train[u].size()) >= ds.num_items) {
      ++degenerate;  // user has interacted with every item; no negatives exist
      continue;
    }
    std::int32_t j;
    do {
      j = static_cast<std::int32_t>(rng.uniform_below(ds.num_items));
    } while (ds.in_train(u, j));
    b.users.push_back(u);
    b.pos_items.push_back(i);
    b.neg_items.push_back(j);
  }
  if (degenerate > 0)
    std::cerr << "warning: skipped " << degenerate
              << " draws for users with no negative items\n";

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

SparsityBuckets sparsity_buckets(const InteractionDataset& ds) {
  std::vector<std::int32_t> test_users;
  for (std::int64_t u = 0; u < ds.num_users; ++u)
    if (!ds.test[u].empty()) test_users.push_back(static_cast<std::int32_t>(u));

  SparsityBuckets out;
  if (test_users.size() < 3) {
    std::cerr << "warning: fewer than 3 test users; single sparsity bucket\n";
    out.names = {"all"};
    out.users = {test_users};
    return out;
  }
  std::sort(test_users.begin(), test_users.end(),
            [&](std::int32_t a, std::int32_t b) {
              const auto da = ds.train[a].size();
              const auto db = ds.train[b].size();
              return da != db ? da < db : a < b;
            });
  const std::int64_t n = static_cast<std::int64_t>(test_users.size());
  out.names = {"sparse", "normal", "popular"};
  out.users.resize(3);
  std::int64_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    const std::int64_t sz = n / 3 + (k < n % 3 ? 1 : 0);
    out.users[k].assign(test_users.begin() + pos, test_users.begin() + pos + sz);
    pos += sz;
  }
  return out;
}

InteractionDataset holdout_split(const InteractionDataset& ds, double fraction,
                                 std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw ConfigError("holdout_split: fraction must be in (0, 1)");
  std::vector<std::pair<std::int32_t, std::int32_t>> train_pairs, test_pairs;
  Rng rng(seed);
  for (std::int64_t u = 0; u < ds.num_users; ++u) {
    std::vector<std::int32_t> items = ds.train[u];
    const auto deg = static_cast<std::int64_t>(items.size());
    if (deg < 2) {
      for (std::int32_t i : items) train_pairs.emplace_back(u, i);
      continue;
    }
    for (std::int64_t k = deg - 1; k > 0; --k) {
      const std::int64_t j = rng.uniform_below(k + 1);
      std::swap(items[k], items[j]);
    }
    std::int64_t held = std::llround(fraction * static_cast<double>(deg));
    held = std::clamp<std::int64_t>(held, 1, deg - 1);
    for (std::int64_t k = 0; k < deg; ++k) {
      if (k < held)
        test_pairs.emplace_back(u, items[k]);
      else
        train_pairs.emplace_back(u, items[k]);
    }
  }
  return make_dataset(ds.num_users, ds.num_items, train_pairs, test_pairs);
}

}  // namespace bigcf
