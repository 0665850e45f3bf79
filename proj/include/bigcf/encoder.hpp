#pragma once

#include <vector>

#include "bigcf/dataset.hpp"
#include "bigcf/tape.hpp"

namespace bigcf {

// Output of L rounds of normalized-adjacency propagation. `pooled` is the
// layer sum (layer 0 included by default), the structural mean used
// everywhere downstream.
struct StructuralEmbeddings {
  std::vector<VarId> layers;  // layers[l] = A_hat^l * e0, l = 0..L
  VarId pooled;
};

// Propagates e0 through `layers` rounds of the normalized adjacency and sum
// pools. Differentiable w.r.t. e0; the adjacency is constant.
StructuralEmbeddings propagate(Tape& tape, const NormalizedAdjacency& adj,
                               VarId e0, int layers, bool include_layer0 = true);

// Non-tape variant for frozen-parameter evaluation paths.
DenseMat propagate_plain(const NormalizedAdjacency& adj, const DenseMat& e0,
                         int layers, bool include_layer0 = true);

}  // namespace bigcf
