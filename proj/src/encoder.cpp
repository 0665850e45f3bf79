#include "bigcf/encoder.hpp"

#include "bigcf/errors.hpp"

namespace bigcf {

StructuralEmbeddings propagate(Tape& tape, const NormalizedAdjacency& adj,
                               VarId e0, int layers, bool include_layer0) {
  if (layers < 0) throw ConfigError("propagate: layer count must be >= 0");
  if (tape.value(e0).rows != adj.mat.rows)
    throw ConfigError("propagate: embedding rows must equal M+N");
  if (!include_layer0 && layers == 0)
    throw ConfigError("propagate: nothing to pool with L=0 and layer 0 excluded");

  StructuralEmbeddings out;
  out.layers.reserve(layers + 1);
  out.layers.push_back(e0);
  VarId cur = e0;
  for (int l = 1; l <= layers; ++l) {
    cur = tape.sp_dense_matmul(&adj.mat, cur);
    out.layers.push_back(cur);
  }
  VarId pooled = include_layer0 ? out.layers[0] : out.layers[1];
  for (std::size_t l = include_layer0 ? 1 : 2; l < out.layers.size(); ++l)
    pooled = tape.add(pooled, out.layers[l]);
  out.pooled = pooled;
  return out;
}

DenseMat propagate_plain(const NormalizedAdjacency& adj, const DenseMat& e0,
                         int layers, bool include_layer0) {
  if (layers < 0) throw ConfigError("propagate: layer count must be >= 0");
  if (!include_layer0 && layers == 0)
    throw ConfigError("propagate: nothing to pool with L=0 and layer 0 excluded");
  DenseMat cur = e0;
  DenseMat pooled = include_layer0 ? e0 : DenseMat(e0.rows, e0.cols);
  DenseMat next(e0.rows, e0.cols);
  for (int l = 1; l <= layers; ++l) {
    detail::sp_dense_multiply(adj.mat, cur, next);
    std::swap(cur, next);
    for (std::size_t i = 0; i < pooled.v.size(); ++i) pooled.v[i] += cur.v[i];
  }
  return pooled;
}

}  // namespace bigcf
