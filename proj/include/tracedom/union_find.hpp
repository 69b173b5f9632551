#pragma once

#include <cstddef>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tracedom {

/// Disjoint sets over arbitrary hashable keys. Elements are numbered in
/// insertion order and every set is represented by its earliest-inserted
/// member, so the partition and its representatives depend only on the
/// sequence of add/unite calls.
template <typename Key, typename Hash = std::hash<Key>>
class DisjointSet {
 public:
  std::size_t add(const Key& key) {
    auto [it, inserted] = index_.try_emplace(key, keys_.size());
    if (inserted) {
      keys_.push_back(key);
      parent_.push_back(it->second);
    }
    return it->second;
  }

  bool contains(const Key& key) const { return index_.count(key) != 0; }
  std::size_t size() const { return keys_.size(); }
  const Key& key(std::size_t id) const { return keys_[id]; }

  std::size_t find(std::size_t id) {
    std::size_t root = id;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[id] != root) id = std::exchange(parent_[id], root);
    return root;
  }

  std::size_t find(const Key& key) { return find(add(key)); }

  /// Returns true when two distinct sets were merged.
  bool unite(const Key& a, const Key& b) {
    std::size_t ra = find(a);
    std::size_t rb = find(b);
    if (ra == rb) return false;
    if (rb < ra) std::swap(ra, rb);
    parent_[rb] = ra;
    return true;
  }

  bool same(const Key& a, const Key& b) { return find(a) == find(b); }

  const Key& representative(const Key& key) { return keys_[find(key)]; }

 private:
  std::unordered_map<Key, std::size_t, Hash> index_;
  std::vector<Key> keys_;
  std::vector<std::size_t> parent_;
};

}  // namespace tracedom
