#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fedshard/data.hpp"

namespace fedshard {

// Shuffles the dataset and deals contiguous slices to K clients; sizes differ
// by at most one sample. Every sample lands in exactly one shard.
inline std::vector<ClientShard> partition_iid(const LabeledDataset& ds, int clients,
                                              std::uint64_t seed) {
  require(clients >= 1, "partition_iid: clients must be >= 1");
  require(ds.size() >= static_cast<std::size_t>(clients),
          "partition_iid: fewer samples (" + std::to_string(ds.size()) +
              ") than clients (" + std::to_string(clients) + ")");
  const int n = static_cast<int>(ds.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "iid"));
  rng.shuffle(perm);

  std::vector<ClientShard> shards(clients);
  const int base = n / clients, extra = n % clients;
  int at = 0;
  for (int k = 0; k < clients; ++k) {
    const int take = base + (k < extra ? 1 : 0);
    std::vector<int> idx(perm.begin() + at, perm.begin() + at + take);
    at += take;
    shards[k].client_id = k;
    shards[k].data = dataset_subset(ds, idx);
  }
  return shards;
}

// Label-sorted shard partition: samples are sorted by label, cut into
// clients*shards_per_client contiguous shards (the last absorbs the
// remainder), and shards are dealt to clients by a seeded shuffle. Each
// client ends up with data from at most shards_per_client label regions.
inline std::vector<ClientShard> partition_shards(const LabeledDataset& ds, int clients,
                                                 int shards_per_client,
                                                 std::uint64_t seed) {
  require(clients >= 1, "partition_shards: clients must be >= 1");
  require(shards_per_client >= 1, "partition_shards: shards_per_client must be >= 1");
  const int total = clients * shards_per_client;
  require(ds.size() >= static_cast<std::size_t>(total),
          "partition_shards: need at least " + std::to_string(total) + " samples, have " +
              std::to_string(ds.size()));
  const int n = static_cast<int>(ds.size());

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return ds.labels[a] < ds.labels[b]; });

  std::vector<int> shard_ids(total);
  std::iota(shard_ids.begin(), shard_ids.end(), 0);
  Rng rng(derive_seed(seed, "shards"));
  rng.shuffle(shard_ids);

  const int base = n / total;
  std::vector<ClientShard> out(clients);
  for (int k = 0; k < clients; ++k) {
    std::vector<int> idx;
    for (int s = 0; s < shards_per_client; ++s) {
      const int shard = shard_ids[k * shards_per_client + s];
      const int lo = shard * base;
      const int hi = shard == total - 1 ? n : (shard + 1) * base;
      idx.insert(idx.end(), order.begin() + lo, order.begin() + hi);
    }
    out[k].client_id = k;
    out[k].data = dataset_subset(ds, idx);
  }
  return out;
}

}  // namespace fedshard
