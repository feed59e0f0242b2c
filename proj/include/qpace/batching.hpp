#pragma once

#include <cstddef>
#include <vector>

#include "qpace/curriculum.hpp"
#include "qpace/dataset.hpp"
#include "qpace/random.hpp"
#include "qpace/tensor.hpp"

namespace qpace {

/// One stratified batch: whole time windows, only included node columns.
struct Batch {
  std::vector<std::size_t> starts;        // window start rows
  std::vector<std::size_t> column_nodes;  // original node id per column
  Tensor inputs;                          // [B, T_in, N_active]
  Tensor targets;                         // [B, T_out, N_active]
};

/// Shuffled batches over the included windows. The epoch keeps the full-data
/// batch count: excluded windows never appear, and their slots are refilled
/// by resampling included windows (fresh shuffles), so a curriculum phase
/// costs the same optimizer steps as full data. The first pass enumerates
/// each included window exactly once before any top-up repeats.
inline std::vector<std::vector<std::size_t>> epoch_plan(
    const std::vector<std::size_t>& train_starts, const CurriculumMask& mask,
    std::size_t batch_size, RandomStream& stream) {
  if (batch_size == 0) throw ContractError("epoch_plan: batch_size must be >= 1");
  if (mask.empty()) {
    throw ContractError("epoch_plan: empty curriculum inclusion set; advance the pace");
  }
  std::vector<std::size_t> included;
  included.reserve(mask.windows.size());
  for (std::size_t pos : mask.windows) included.push_back(train_starts.at(pos));

  std::vector<std::size_t> order = included;
  stream.shuffle(order);
  while (order.size() < train_starts.size()) {
    std::vector<std::size_t> refill = included;
    stream.shuffle(refill);
    const std::size_t need = train_starts.size() - order.size();
    if (refill.size() > need) refill.resize(need);
    order.insert(order.end(), refill.begin(), refill.end());
  }

  std::vector<std::vector<std::size_t>> chunks;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t end = std::min(at + batch_size, order.size());
    chunks.emplace_back(order.begin() + at, order.begin() + end);
  }
  return chunks;
}

/// Materialize input/target tensors for the given windows, shrunk to the
/// included node columns.
inline Batch gather_batch(const STDataset& data, const std::vector<std::size_t>& starts,
                          const std::vector<std::size_t>& column_nodes, std::size_t t_in,
                          std::size_t t_out) {
  if (column_nodes.empty()) throw ContractError("gather_batch: no included nodes");
  const std::size_t b = starts.size();
  const std::size_t na = column_nodes.size();
  const std::size_t n = data.nodes();
  Batch batch;
  batch.starts = starts;
  batch.column_nodes = column_nodes;
  batch.inputs = Tensor({b, t_in, na});
  batch.targets = Tensor({b, t_out, na});
  for (std::size_t bi = 0; bi < b; ++bi) {
    const std::size_t j = starts[bi];
    const std::size_t first = j + 1 - t_in;
    for (std::size_t t = 0; t < t_in; ++t) {
      for (std::size_t c = 0; c < na; ++c) {
        batch.inputs[(bi * t_in + t) * na + c] = data.values[(first + t) * n + column_nodes[c]];
      }
    }
    for (std::size_t t = 0; t < t_out; ++t) {
      for (std::size_t c = 0; c < na; ++c) {
        batch.targets[(bi * t_out + t) * na + c] =
            data.values[(j + 1 + t) * n + column_nodes[c]];
      }
    }
  }
  return batch;
}

/// The full stratified batching pass for one epoch under a fixed mask.
inline std::vector<Batch> stratified_batches(const STDataset& data,
                                             const std::vector<std::size_t>& train_starts,
                                             std::size_t batch_size, const CurriculumMask& mask,
                                             std::size_t t_in, std::size_t t_out,
                                             RandomStream& stream) {
  auto chunks = epoch_plan(train_starts, mask, batch_size, stream);
  std::vector<Batch> batches;
  batches.reserve(chunks.size());
  for (const auto& chunk : chunks) {
    batches.push_back(gather_batch(data, chunk, mask.nodes, t_in, t_out));
  }
  return batches;
}

/// Broadcast the mask's head weights over a batch: [B, N_active, Q].
inline Tensor batch_weights(const CurriculumMask& mask, std::size_t batch, std::size_t n_active) {
  const std::size_t q = mask.head_weight.size();
  Tensor v({batch, n_active, q});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < n_active; ++c) {
      for (std::size_t k = 0; k < q; ++k) {
        v[(b * n_active + c) * q + k] = mask.head_weight[k];
      }
    }
  }
  return v;
}

}  // namespace qpace
